#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "agscan/model.hpp"
#include "agscan/vocab.hpp"

namespace agscan {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct SavedModel {
  ModelConfig config;
  Weights weights;
  Vocabulary vocab;
  std::optional<double> final_loss;
};

// Binary layout: "AGSC" magic, format version u32, u32-length-prefixed UTF-8
// JSON header {config, vocab, final_loss?}, then every tensor as raw
// little-endian f64 in the order: embedding, positional, then per block
// wq, bq, wk, bk, wv, bv, wo, bo, ln1_gain, ln1_bias, w1, c1, w2, c2,
// ln2_gain, ln2_bias; finally a CRC32 (u32) of all preceding bytes.
void save_weights(const std::filesystem::path& path, const Model& model,
                  const Vocabulary& vocab,
                  std::optional<double> final_loss = std::nullopt);

SavedModel load_weights(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j, bool strict);

}  // namespace agscan
