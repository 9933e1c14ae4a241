#include <json.hpp>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace {
constexpr char kMagic[4] = {'A', 'F', 'G', 'M'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> ModelSnapshot::serialize(
    const std::string& extra_json) const {
  nlohmann::json header;
  header["arch"] = arch_.to_text();
  header["meta"] = {{"seed", meta_.seed},
                    {"epochs", meta_.epochs},
                    {"final_test_accuracy", meta_.final_test_accuracy},
                    {"final_train_loss", meta_.final_train_loss}};
  if (!extra_json.empty())
    header["extra"] = nlohmann::json::parse(extra_json);
  std::string hs = header.dump();

  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(hs.size()));
  w.str(hs);
  for (const Layer* l : layer_ptrs_) {
    if (!l->weights()) continue;
    w.tensor_f32(*l->weights());
    w.tensor_f32(*l->bias());
  }
  w.u32(crc32_of(w.bytes().data(), w.size()));
  return w.bytes();
}

ModelSnapshot ModelSnapshot::deserialize(const std::vector<std::uint8_t>& bytes,
                                         const std::string& origin,
                                         std::string* extra_json) {
  if (bytes.size() < 14)
    fail(ErrorKind::Format, "snapshot too short: " + origin);
  ByteReader r(bytes);
  if (r.str(4) != std::string(kMagic, 4))
    fail(ErrorKind::Format, "bad magic in " + origin);
  std::uint16_t version = r.u16();
  if (version != kVersion)
    fail(ErrorKind::Format, "unsupported snapshot version " +
                                std::to_string(version) + " in " + origin);
  std::uint32_t hlen = r.u32();
  if (hlen > r.remaining())
    fail(ErrorKind::Format, "truncated header in " + origin);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad header json in " + origin + ": " + e.what());
  }

  ModelSnapshot m;
  try {
    m = build(header.at("arch").get<std::string>(), 0);
    m.meta_.seed = header.at("meta").at("seed").get<std::uint64_t>();
    m.meta_.epochs = header.at("meta").at("epochs").get<int>();
    m.meta_.final_test_accuracy =
        header.at("meta").at("final_test_accuracy").get<double>();
    m.meta_.final_train_loss =
        header.at("meta").at("final_train_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad header fields in " + origin + ": " + e.what());
  }
  if (extra_json) {
    *extra_json =
        header.contains("extra") ? header["extra"].dump() : std::string();
  }

  for (Layer* l : m.layer_ptrs_) {
    if (!l->weights()) continue;
    r.read_tensor_f32(*l->weights());
    r.read_tensor_f32(*l->bias());
  }
  if (r.remaining() != 4)
    fail(ErrorKind::Format, "payload size mismatch in " + origin);
  std::uint32_t expect = crc32_of(bytes.data(), r.offset());
  if (expect != r.u32())
    fail(ErrorKind::Integrity, "checksum mismatch in " + origin);
  for (Layer* l : m.layer_ptrs_) {
    if (l->weights() &&
        (!l->weights()->all_finite() || !l->bias()->all_finite()))
      fail(ErrorKind::Integrity, "non-finite weights in " + origin);
  }
  return m;
}

void ModelSnapshot::save(const std::filesystem::path& path,
                         const std::string& extra_json) const {
  write_file_bytes(path, serialize(extra_json));
}

ModelSnapshot ModelSnapshot::load(const std::filesystem::path& path,
                                  std::string* extra_json) {
  return deserialize(read_file_bytes(path), path.string(), extra_json);
}

std::string ModelSnapshot::content_id() const {
  auto bytes = serialize();
  return sha256_hex(bytes);
}

}  // namespace afg
