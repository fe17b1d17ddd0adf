#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agscan/tensor.hpp"

namespace agscan {

using TokenId = std::uint32_t;

enum class ModelMode { kAlm, kMlm };

std::string to_string(ModelMode mode);
ModelMode model_mode_from_string(const std::string& s);

struct ModelConfig {
  ModelMode mode = ModelMode::kAlm;
  std::size_t n_layers = 2;
  std::size_t hidden_dim = 64;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 32;
  std::uint64_t seed = 0;

  // Neuron sites are whole hidden-state dimensions per layer output, with
  // layer 0 being the embedding+positional output.
  std::size_t neuron_count() const { return (n_layers + 1) * hidden_dim; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct BlockWeights {
  Matrix wq, wk, wv, wo;      // each hidden_dim x hidden_dim
  Vector bq, bk, bv, bo;      // hidden_dim
  Vector ln1_gain, ln1_bias;  // hidden_dim
  Matrix w1;                  // hidden_dim x ff_dim
  Vector c1;                  // ff_dim
  Matrix w2;                  // ff_dim x hidden_dim
  Vector c2;                  // hidden_dim
  Vector ln2_gain, ln2_bias;  // hidden_dim
};

struct Weights {
  Matrix embedding;   // vocab_size x hidden_dim; tied with the output projection
  Matrix positional;  // max_len x hidden_dim
  std::vector<BlockWeights> blocks;
};

struct Model {
  ModelConfig config;
  Weights weights;
};

inline constexpr double kLayerNormEps = 1e-5;

// Parameter tensors in canonical serialization order: embedding, positional,
// then per block wq, bq, wk, bk, wv, bv, wo, bo, ln1_gain, ln1_bias, w1, c1,
// w2, c2, ln2_gain, ln2_bias.
std::vector<std::pair<std::string, std::vector<double>*>> named_parameter_tensors(Weights& w);

// Coordinate of one neuron: (layer output, dimension).
struct NeuronId {
  std::size_t layer = 0;  // 0..L, 0 = embedding output
  std::size_t dim = 0;    // 0..hidden_dim-1

  auto operator<=>(const NeuronId&) const = default;

  std::size_t flat(std::size_t hidden_dim) const { return layer * hidden_dim + dim; }
  static NeuronId from_flat(std::size_t flat, std::size_t hidden_dim) {
    return {flat / hidden_dim, flat % hidden_dim};
  }
};

// All hidden states of one forward pass: hidden[layer] is a [seq_len x d]
// matrix, with override values (if any) already applied.
struct ActivationCache {
  std::vector<Matrix> hidden;

  std::size_t n_layers() const { return hidden.empty() ? 0 : hidden.size() - 1; }
  std::size_t seq_len() const { return hidden.empty() ? 0 : hidden.front().rows; }
  double at(const NeuronId& n, std::size_t position) const {
    return hidden[n.layer](position, n.dim);
  }
};

// Replace the listed neurons' activations at a single token position, each
// immediately after its layer's hidden state is computed. Every other neuron
// keeps its original activation.
struct InterventionSpec {
  std::size_t position = 0;
  std::vector<std::pair<NeuronId, double>> overrides;

  void validate(const ModelConfig& config, std::size_t seq_len) const;
};

struct ForwardResult {
  Vector logits;  // pre-softmax scores at the query position
  ActivationCache cache;
};

// Runs the transformer over `tokens` and returns the logits at
// query_position plus the full activation cache. ALM uses a causal
// attention mask, MLM attends bidirectionally.
ForwardResult forward(const Model& model, std::span<const TokenId> tokens,
                      std::size_t query_position,
                      const InterventionSpec* intervention = nullptr);

// Recomputes logits from a previous run's cache, applying `intervention`
// and re-running only the blocks at or above the lowest overridden layer.
// Produces exactly the same logits as a full forward with the same
// intervention; the shared ascent path makes the equality bit-level.
Vector resume_forward(const Model& model, const ActivationCache& base,
                      const InterventionSpec& intervention, std::size_t query_position);

struct TokenProbability {
  double linear;
  double log;
};

// softmax(logits)[token], with the log-space value computed along an
// independent arithmetic path (logsumexp) rather than log(linear).
TokenProbability token_probability(const Vector& logits, TokenId token);

// Scaled Gaussian init (std 0.02), layer-norm gains 1, biases 0.
// Deterministic in config.seed.
Weights random_init_weights(const ModelConfig& config);

Weights zero_like(const ModelConfig& config);

}  // namespace agscan
