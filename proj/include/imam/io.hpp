#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imam/common.hpp"

namespace imam {

using json = nlohmann::ordered_json;

struct BadMagicError : IoError {
  using IoError::IoError;
};
struct VersionError : IoError {
  using IoError::IoError;
};
struct TruncationError : IoError {
  using IoError::IoError;
};

// Binary container for named arrays: 8-byte magic "IMAMDAT1", little-endian
// u32 header size, JSON header (version, free-form meta, array directory),
// raw array payload, trailing CRC32 of the payload.
struct NamedArray {
  std::string name;
  std::string dtype;  // "f32" | "u8" | "i64"
  std::vector<i64> shape;
  std::vector<unsigned char> bytes;

  i64 elem_count() const {
    i64 n = 1;
    for (i64 s : shape) n *= s;
    return n;
  }
};

struct Archive {
  json meta = json::object();
  std::vector<NamedArray> arrays;

  bool has(const std::string& name) const;
  const NamedArray& get(const std::string& name) const;

  void put_f32(const std::string& name, std::vector<i64> shape, const float* data);
  void put_u8(const std::string& name, std::vector<i64> shape, const u8* data);
  void put_i64(const std::string& name, std::vector<i64> shape, const i64* data);

  std::vector<float> get_f32(const std::string& name) const;
  std::vector<u8> get_u8(const std::string& name) const;
  std::vector<i64> get_i64(const std::string& name) const;
};

void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

std::string sha256_hex(const void* data, size_t size);
std::string sha256_file(const std::string& path);

void write_json_file(const std::string& path, const json& j);
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, size_t size);

}  // namespace imam
