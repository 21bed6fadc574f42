#include "tapfm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace tapfm {

namespace {

constexpr char kMagic[7] = {'T', 'A', 'P', 'F', 'M', '0', '1'};
constexpr int kVersion = 1;

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("truncated checkpoint header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<char>& buf, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(bits >> (8 * i)));
}

float get_f32(const std::vector<char>& buf, size_t off) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& config) {
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<char> payload;
  for (const auto& [name, value] : store.params()) {
    manifest.push_back({{"name", name},
                        {"shape", {value->val.rows, value->val.cols}},
                        {"offset", payload.size()}});
    for (double d : value->val.data) put_f32(payload, static_cast<float>(d));
  }
  nlohmann::json header = {{"version", kVersion},
                           {"config", config},
                           {"payload_bytes", payload.size()},
                           {"manifest", manifest}};
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(kMagic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + ": not a TAPFM01 checkpoint");
  uint64_t header_len = get_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error(path + ": truncated header");
  nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
  if (header.is_discarded() || header.value("version", 0) != kVersion)
    throw std::runtime_error(path + ": bad checkpoint header");

  uint64_t payload_bytes = header.at("payload_bytes").get<uint64_t>();
  std::vector<char> payload(payload_bytes);
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<uint64_t>(in.gcount()) != payload_bytes || in.peek() != EOF)
    throw std::runtime_error(path + ": payload length does not match header");

  Checkpoint ckpt;
  ckpt.config = header.at("config");
  for (const auto& entry : header.at("manifest")) {
    std::string name = entry.at("name").get<std::string>();
    int rows = entry.at("shape").at(0).get<int>();
    int cols = entry.at("shape").at(1).get<int>();
    uint64_t off = entry.at("offset").get<uint64_t>();
    uint64_t need = off + 4ull * rows * cols;
    if (rows < 0 || cols < 0 || need > payload_bytes)
      throw std::runtime_error(path + ": manifest entry out of range: " + name);
    Tensor t = Tensor::zeros(rows, cols);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = get_f32(payload, off + 4 * i);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void restore_params(ParamStore& store, const Checkpoint& ckpt) {
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (!store.has(name)) throw std::runtime_error("checkpoint parameter missing in model: " + name);
    Value p = store.get(name);
    if (!p->val.same_shape(tensor))
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    p->val = tensor;
  }
}

}  // namespace tapfm
