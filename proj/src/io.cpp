#include "imam/io.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

namespace imam {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'A', 'M', 'D', 'A', 'T', '1'};
constexpr u32 kVersion = 1;

size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "u8") return 1;
  if (dtype == "i64") return 8;
  throw FormatError("unknown dtype: " + dtype);
}

void append_u32(std::vector<unsigned char>& out, u32 v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + 4);
}

}  // namespace

bool Archive::has(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

const NamedArray& Archive::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw FormatError("archive has no array named '" + name + "'");
}

void Archive::put_f32(const std::string& name, std::vector<i64> shape, const float* data) {
  NamedArray a;
  a.name = name;
  a.dtype = "f32";
  a.shape = std::move(shape);
  a.bytes.resize(size_t(a.elem_count()) * 4);
  std::memcpy(a.bytes.data(), data, a.bytes.size());
  arrays.push_back(std::move(a));
}

void Archive::put_u8(const std::string& name, std::vector<i64> shape, const u8* data) {
  NamedArray a;
  a.name = name;
  a.dtype = "u8";
  a.shape = std::move(shape);
  a.bytes.resize(size_t(a.elem_count()));
  std::memcpy(a.bytes.data(), data, a.bytes.size());
  arrays.push_back(std::move(a));
}

void Archive::put_i64(const std::string& name, std::vector<i64> shape, const i64* data) {
  NamedArray a;
  a.name = name;
  a.dtype = "i64";
  a.shape = std::move(shape);
  a.bytes.resize(size_t(a.elem_count()) * 8);
  std::memcpy(a.bytes.data(), data, a.bytes.size());
  arrays.push_back(std::move(a));
}

std::vector<float> Archive::get_f32(const std::string& name) const {
  const auto& a = get(name);
  if (a.dtype != "f32") throw FormatError("array '" + name + "' is not f32");
  std::vector<float> out(a.elem_count());
  std::memcpy(out.data(), a.bytes.data(), a.bytes.size());
  return out;
}

std::vector<u8> Archive::get_u8(const std::string& name) const {
  const auto& a = get(name);
  if (a.dtype != "u8") throw FormatError("array '" + name + "' is not u8");
  return a.bytes;
}

std::vector<i64> Archive::get_i64(const std::string& name) const {
  const auto& a = get(name);
  if (a.dtype != "i64") throw FormatError("array '" + name + "' is not i64");
  std::vector<i64> out(a.elem_count());
  std::memcpy(out.data(), a.bytes.data(), a.bytes.size());
  return out;
}

void write_archive(const std::string& path, const Archive& archive) {
  json header;
  header["version"] = kVersion;
  header["meta"] = archive.meta;
  header["arrays"] = json::array();

  u64 offset = 0;
  for (const auto& a : archive.arrays) {
    if (a.bytes.size() != size_t(a.elem_count()) * dtype_size(a.dtype))
      throw FormatError("array '" + a.name + "' byte size does not match its shape");
    json rec;
    rec["name"] = a.name;
    rec["dtype"] = a.dtype;
    rec["shape"] = a.shape;
    rec["offset"] = offset;
    rec["nbytes"] = a.bytes.size();
    header["arrays"].push_back(rec);
    offset += a.bytes.size();
  }

  const std::string header_str = header.dump();
  if (header_str.size() > 0xffffffffull) throw FormatError("container header too large");

  std::vector<unsigned char> out;
  out.reserve(8 + 4 + header_str.size() + offset + 4);
  out.insert(out.end(), kMagic, kMagic + 8);
  append_u32(out, u32(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());

  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& a : archive.arrays) {
    out.insert(out.end(), a.bytes.begin(), a.bytes.end());
    crc = crc32(crc, a.bytes.data(), uInt(a.bytes.size()));
  }
  append_u32(out, u32(crc));

  write_file_bytes(path, out.data(), out.size());
}

Archive read_archive(const std::string& path) {
  const auto bytes = read_file_bytes(path);

  if (bytes.size() < 12) throw TruncationError(path + ": file too short for header");
  if (std::memcmp(bytes.data(), kMagic, 7) != 0)
    throw BadMagicError(path + ": bad magic, not a container file");
  if (bytes[7] != '1')
    throw VersionError(path + ": unsupported container version tag '" +
                       std::string(1, char(bytes[7])) + "'");

  u32 header_size = 0;
  std::memcpy(&header_size, bytes.data() + 8, 4);
  const size_t payload_start = 12 + size_t(header_size);
  if (bytes.size() < payload_start + 4)
    throw TruncationError(path + ": truncated header");

  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + payload_start);
  } catch (const std::exception& e) {
    throw FormatError(path + ": invalid header json: " + e.what());
  }
  if (!header.contains("version") || header["version"].get<u32>() != kVersion)
    throw VersionError(path + ": unsupported header version");

  const size_t payload_size = bytes.size() - payload_start - 4;

  Archive archive;
  archive.meta = header.value("meta", json::object());
  for (const auto& rec : header["arrays"]) {
    NamedArray a;
    a.name = rec["name"].get<std::string>();
    a.dtype = rec["dtype"].get<std::string>();
    a.shape = rec["shape"].get<std::vector<i64>>();
    const u64 offset = rec["offset"].get<u64>();
    const u64 nbytes = rec["nbytes"].get<u64>();
    if (nbytes != u64(a.elem_count()) * dtype_size(a.dtype))
      throw FormatError(path + ": array '" + a.name + "' shape/size mismatch");
    if (offset + nbytes > payload_size)
      throw TruncationError(path + ": array '" + a.name + "' extends past payload");
    a.bytes.assign(bytes.begin() + payload_start + offset,
                   bytes.begin() + payload_start + offset + nbytes);
    archive.arrays.push_back(std::move(a));
  }

  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data() + payload_start, uInt(payload_size));
  u32 stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (u32(crc) != stored)
    throw ChecksumError(path + ": payload checksum mismatch");

  return archive;
}

std::string sha256_hex(const void* data, size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data, size) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &digest_len) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  try {
    return json::parse(f);
  } catch (const std::exception& e) {
    throw FormatError(path + ": invalid json: " + e.what());
  }
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<unsigned char> bytes(static_cast<size_t>(size), 0);
  if (size > 0 && !f.read(reinterpret_cast<char*>(bytes.data()), size))
    throw IoError("read failed: " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(data), std::streamsize(size));
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace imam
