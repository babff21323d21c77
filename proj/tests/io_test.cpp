#include <doctest.h>

#include <cstring>

#include "imam/io.hpp"
#include "test_util.hpp"

using namespace imam;

namespace {

Archive sample_archive() {
  Archive a;
  a.meta = {{"kind", "test"}, {"note", "round trip"}};
  std::vector<float> f = {1.5f, -2.25f, 0.0f, 3e7f, -1e-6f, 42.0f};
  a.put_f32("floats", {2, 3}, f.data());
  std::vector<u8> b = {0, 1, 255, 7};
  a.put_u8("bytes", {4}, b.data());
  std::vector<i64> ids = {-9000000000000000000LL, 0, 12345};
  a.put_i64("ids", {3}, ids.data());
  return a;
}

}  // namespace

TEST_CASE("archive round trip preserves meta, shapes, and bytes") {
  const std::string dir = testutil::fresh_dir("io_rt");
  const std::string path = dir + "/a.imam";
  const Archive a = sample_archive();
  write_archive(path, a);
  const Archive b = read_archive(path);

  CHECK(b.meta == a.meta);
  REQUIRE(b.arrays.size() == a.arrays.size());
  for (size_t i = 0; i < a.arrays.size(); ++i) {
    CHECK(b.arrays[i].name == a.arrays[i].name);
    CHECK(b.arrays[i].dtype == a.arrays[i].dtype);
    CHECK(b.arrays[i].shape == a.arrays[i].shape);
    CHECK(b.arrays[i].bytes == a.arrays[i].bytes);
  }
  CHECK(b.get_f32("floats") == a.get_f32("floats"));
  CHECK(b.get_u8("bytes") == a.get_u8("bytes"));
  CHECK(b.get_i64("ids") == a.get_i64("ids"));
  CHECK(b.has("floats"));
  CHECK_FALSE(b.has("missing"));
  CHECK_THROWS_AS((void)b.get("missing"), FormatError);
  CHECK_THROWS_AS((void)b.get_u8("floats"), FormatError);
}

TEST_CASE("identical content writes identical bytes") {
  const std::string dir = testutil::fresh_dir("io_det");
  write_archive(dir + "/x.imam", sample_archive());
  write_archive(dir + "/y.imam", sample_archive());
  CHECK(sha256_file(dir + "/x.imam") == sha256_file(dir + "/y.imam"));
}

TEST_CASE("corruption modes raise distinct errors") {
  const std::string dir = testutil::fresh_dir("io_err");
  const std::string path = dir + "/a.imam";
  write_archive(path, sample_archive());
  const auto good = read_file_bytes(path);

  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[0] = 'X';
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), BadMagicError);
  }
  SUBCASE("unsupported container version tag") {
    auto bytes = good;
    bytes[7] = '9';
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), VersionError);
  }
  SUBCASE("unsupported header version") {
    u32 hlen = 0;
    std::memcpy(&hlen, good.data() + 8, 4);
    json header = json::parse(good.begin() + 12, good.begin() + 12 + hlen);
    header["version"] = 99;
    const std::string hs = header.dump();
    std::vector<unsigned char> bytes(good.begin(), good.begin() + 8);
    const u32 nlen = u32(hs.size());
    bytes.insert(bytes.end(), reinterpret_cast<const unsigned char*>(&nlen),
                 reinterpret_cast<const unsigned char*>(&nlen) + 4);
    bytes.insert(bytes.end(), hs.begin(), hs.end());
    bytes.insert(bytes.end(), good.begin() + 12 + hlen, good.end());
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), VersionError);
  }
  SUBCASE("truncated file") {
    write_file_bytes(path, good.data(), good.size() - 9);
    CHECK_THROWS_AS((void)read_archive(path), TruncationError);
  }
  SUBCASE("truncated below header") {
    write_file_bytes(path, good.data(), 6);
    CHECK_THROWS_AS((void)read_archive(path), TruncationError);
  }
  SUBCASE("payload bit flip fails the checksum") {
    u32 hlen = 0;
    std::memcpy(&hlen, good.data() + 8, 4);
    auto bytes = good;
    bytes[12 + hlen] ^= 0x40;
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), ChecksumError);
  }
  SUBCASE("header is not json") {
    auto bytes = good;
    bytes[13] = '!';
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), FormatError);
  }
  SUBCASE("all container errors are io errors") {
    auto bytes = good;
    bytes[0] = 'X';
    write_file_bytes(path, bytes.data(), bytes.size());
    CHECK_THROWS_AS((void)read_archive(path), IoError);
  }
}

TEST_CASE("array size validation") {
  Archive a;
  NamedArray arr;
  arr.name = "bad";
  arr.dtype = "f32";
  arr.shape = {2, 2};
  arr.bytes.assign(7, 0);  // should be 16
  a.arrays.push_back(arr);
  const std::string dir = testutil::fresh_dir("io_badsize");
  CHECK_THROWS_AS(write_archive(dir + "/a.imam", a), FormatError);
}

TEST_CASE("sha256 matches the known test vector") {
  CHECK(sha256_hex("abc", 3) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("json file round trip") {
  const std::string dir = testutil::fresh_dir("io_json");
  const json j = {{"a", 1}, {"b", {1, 2, 3}}, {"c", {{"d", "e"}}}};
  write_json_file(dir + "/x.json", j);
  CHECK(read_json_file(dir + "/x.json") == j);
  CHECK_THROWS_AS((void)read_json_file(dir + "/missing.json"), IoError);
  write_text_file(dir + "/bad.json", "{nope");
  CHECK_THROWS_AS((void)read_json_file(dir + "/bad.json"), FormatError);
}
