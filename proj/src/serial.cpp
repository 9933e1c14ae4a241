#include "afglab/serial.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <cstring>
#include <fstream>

#include "afglab/error.hpp"

namespace afg {

void ByteWriter::u16(std::uint16_t v) {
  bytes_.push_back(static_cast<std::uint8_t>(v & 0xff));
  bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void ByteWriter::raw(const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  bytes_.insert(bytes_.end(), b, b + n);
}

void ByteWriter::tensor_f32(const Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    f32(static_cast<float>(t[i]));
}

void ByteReader::need(std::size_t n) const {
  if (off_ + n > bytes_.size())
    fail(ErrorKind::Format, "unexpected end of data (truncated file?)");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[off_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>(bytes_[off_]) |
                    static_cast<std::uint16_t>(bytes_[off_ + 1]) << 8;
  off_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(bytes_[off_ + i]) << (8 * i);
  off_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(bytes_[off_ + i]) << (8 * i);
  off_ += 8;
  return v;
}

float ByteReader::f32() {
  std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string ByteReader::str(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + off_), n);
  off_ += n;
  return s;
}

void ByteReader::read_tensor_f32(Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>(f32());
}

std::uint32_t crc32_of(const void* data, std::size_t n, std::uint32_t seed) {
  return static_cast<std::uint32_t>(
      ::crc32(seed, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data, n, digest, &len, EVP_sha256(), nullptr))
    fail(ErrorKind::Io, "sha256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::string sha256_hex_of_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return sha256_hex(bytes);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  write_file_bytes(path, bytes);
}

namespace {
constexpr char kTensorMagic[4] = {'A', 'F', 'G', '1'};
}

std::vector<std::uint8_t> tensor_container_bytes(const Tensor& t) {
  ByteWriter w;
  w.raw(kTensorMagic, 4);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i)
    w.u32(static_cast<std::uint32_t>(t.dim(i)));
  w.tensor_f32(t);
  std::uint32_t crc = crc32_of(w.bytes().data(), w.size());
  w.u32(crc);
  return w.bytes();
}

Tensor tensor_from_container(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin) {
  ByteReader r(bytes);
  if (r.str(4) != std::string(kTensorMagic, 4))
    fail(ErrorKind::Format, "bad magic in " + origin);
  int rank = r.u8();
  if (rank < 1 || rank > 4)
    fail(ErrorKind::Format, "bad tensor rank in " + origin);
  std::vector<int> dims;
  for (int i = 0; i < rank; ++i) {
    std::uint32_t d = r.u32();
    if (d == 0 || d > (1u << 24))
      fail(ErrorKind::Format, "bad dimension in " + origin);
    dims.push_back(static_cast<int>(d));
  }
  Tensor t(dims);
  if (r.remaining() != static_cast<std::size_t>(t.size()) * 4 + 4)
    fail(ErrorKind::Format, "payload size mismatch in " + origin);
  r.read_tensor_f32(t);
  std::uint32_t expect = crc32_of(bytes.data(), r.offset());
  std::uint32_t stored = r.u32();
  if (expect != stored)
    fail(ErrorKind::Integrity, "CRC mismatch in " + origin);
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, tensor_container_bytes(t));
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  return tensor_from_container(read_file_bytes(path), path.string());
}

}  // namespace afg
