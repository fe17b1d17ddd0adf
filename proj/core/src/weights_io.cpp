#include "agscan/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"

namespace agscan {

namespace {

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("weight file: truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"mode", to_string(c.mode)},     {"n_layers", c.n_layers},
                        {"hidden_dim", c.hidden_dim},    {"n_heads", c.n_heads},
                        {"ff_dim", c.ff_dim},            {"vocab_size", c.vocab_size},
                        {"max_len", c.max_len},          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, bool strict) {
  if (!j.is_object()) throw DataError("model config: expected a JSON object");
  static const std::vector<std::string> kKeys = {"mode",   "n_layers",   "hidden_dim", "n_heads",
                                                 "ff_dim", "vocab_size", "max_len",    "seed"};
  if (strict) {
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
        throw DataError("model config: unknown key: " + key);
    }
  }
  ModelConfig c;
  try {
    if (j.contains("mode")) c.mode = model_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("n_layers")) c.n_layers = j.at("n_layers").get<std::size_t>();
    if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (j.contains("n_heads")) c.n_heads = j.at("n_heads").get<std::size_t>();
    if (j.contains("ff_dim")) c.ff_dim = j.at("ff_dim").get<std::size_t>();
    if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<std::size_t>();
    if (j.contains("max_len")) c.max_len = j.at("max_len").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  return c;
}

void save_weights(const std::filesystem::path& path, const Model& model,
                  const Vocabulary& vocab, std::optional<double> final_loss) {
  model.config.validate();
  require(vocab.size() == model.config.vocab_size, "save: vocab size mismatch");
  require(model.weights.blocks.size() == model.config.n_layers, "save: block count mismatch");

  nlohmann::json header{{"config", model_config_to_json(model.config)},
                        {"vocab", vocab.tokens()}};
  if (final_loss) header["final_loss"] = *final_loss;
  const std::string header_str = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'A', 'G', 'S', 'C'});
  append_u32(out, kWeightFormatVersion);
  append_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());
  for (auto& [name, data] : named_parameter_tensors(const_cast<Weights&>(model.weights))) {
    require(all_finite(*data), "save: non-finite value in " + name);
    for (double d : *data) append_f64(out, d);
  }
  append_u32(out, crc32(out.data(), out.size()));
  write_binary_file(path, out.data(), out.size());
}

SavedModel load_weights(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_binary_file(path);
  if (bytes.size() < 16) throw DataError("weight file: truncated");
  const std::uint32_t stored_crc = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    return v;
  }();
  if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
    throw DataError("weight file: checksum mismatch");
  bytes.resize(bytes.size() - 4);

  Reader r(bytes);
  if (r.bytes(4) != "AGSC") throw DataError("weight file: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion)
    throw DataError("weight file: unsupported format version " + std::to_string(version));
  const std::uint32_t header_len = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("weight file: bad header: ") + e.what());
  }

  SavedModel saved;
  try {
    saved.config = model_config_from_json(header.at("config"), /*strict=*/false);
    saved.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (header.contains("final_loss")) saved.final_loss = header.at("final_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("weight file: bad header: ") + e.what());
  }
  saved.config.validate();
  if (saved.vocab.size() != saved.config.vocab_size)
    throw DataError("weight file: vocab size disagrees with config");

  saved.weights = zero_like(saved.config);
  for (auto& [name, data] : named_parameter_tensors(saved.weights)) {
    (void)name;
    for (double& d : *data) d = r.f64();
  }
  if (r.remaining() != 0) throw DataError("weight file: trailing bytes");
  return saved;
}

}  // namespace agscan
