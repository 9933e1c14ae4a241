#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afglab/tensor.hpp"

namespace afg {

// Little-endian byte buffer used by the tensor container and model snapshots.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void raw(const void* p, std::size_t n);
  void str(const std::string& s) { raw(s.data(), s.size()); }
  void tensor_f32(const Tensor& t);  // payload only, row-major float32

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes)
      : bytes_(std::move(bytes)) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string str(std::size_t n);
  void read_tensor_f32(Tensor& t);  // shape must be set already

  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return bytes_.size() - off_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  void need(std::size_t n) const;
  std::vector<std::uint8_t> bytes_;
  std::size_t off_ = 0;
};

std::uint32_t crc32_of(const void* data, std::size_t n,
                       std::uint32_t seed = 0);
std::string sha256_hex(const void* data, std::size_t n);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_hex_of_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

// Single-tensor container: magic "AFG1", u8 rank, u32 dims, float32 payload,
// trailing CRC32 over everything before it.
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);
std::vector<std::uint8_t> tensor_container_bytes(const Tensor& t);
Tensor tensor_from_container(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin);

}  // namespace afg
