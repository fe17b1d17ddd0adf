#include "agscan/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "agscan/errors.hpp"
#include "agscan/rng.hpp"

namespace agscan {

namespace {

constexpr double kLnEps = kLayerNormEps;

// Organizes overrides as per-layer lists so the ascent loop can apply them
// right after each layer's hidden state exists.
struct OverridePlan {
  std::size_t position = 0;
  std::size_t lowest_layer = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> by_layer;

  OverridePlan(const InterventionSpec& spec, std::size_t n_layers)
      : position(spec.position), lowest_layer(n_layers), by_layer(n_layers + 1) {
    for (const auto& [neuron, value] : spec.overrides) {
      by_layer[neuron.layer].emplace_back(neuron.dim, value);
      lowest_layer = std::min(lowest_layer, neuron.layer);
    }
  }

  void apply(std::size_t layer, Matrix& hidden) const {
    for (const auto& [dim, value] : by_layer[layer]) hidden(position, dim) = value;
  }
};

void row_layer_norm(Matrix& m, const Vector& gain, const Vector& bias) {
  const std::size_t d = m.cols;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    std::copy(r, r + d, row.begin());
    Vector v;
    v.data.assign(row.begin(), row.end());
    Vector out = layer_norm(v, gain, bias, kLnEps);
    std::copy(out.data.begin(), out.data.end(), r);
  }
}

Matrix linear(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* r = y.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) r[j] += b[j];
  }
  return y;
}

Matrix block_forward(const ModelConfig& cfg, const BlockWeights& w, const Matrix& x) {
  const std::size_t t = x.rows;
  const std::size_t d = cfg.hidden_dim;
  const std::size_t dh = d / cfg.n_heads;
  const bool causal = cfg.mode == ModelMode::kAlm;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix q = linear(x, w.wq, w.bq);
  Matrix k = linear(x, w.wk, w.bk);
  Matrix v = linear(x, w.wv, w.bv);

  Matrix ctx(t, d);
  std::vector<double> scores(t);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t span = causal ? i + 1 : t;
      const double* qi = q.row(i) + off;
      for (std::size_t j = 0; j < span; ++j) {
        const double* kj = k.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        scores[j] = s * scale;
      }
      double mx = scores[0];
      for (std::size_t j = 1; j < span; ++j) mx = std::max(mx, scores[j]);
      double denom = 0.0;
      for (std::size_t j = 0; j < span; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        denom += scores[j];
      }
      double* ci = ctx.row(i) + off;
      std::fill(ci, ci + dh, 0.0);
      for (std::size_t j = 0; j < span; ++j) {
        const double a = scores[j] / denom;
        const double* vj = v.row(j) + off;
        for (std::size_t c = 0; c < dh; ++c) ci[c] += a * vj[c];
      }
    }
  }

  Matrix attn = linear(ctx, w.wo, w.bo);
  for (std::size_t i = 0; i < t * d; ++i) attn.data[i] += x.data[i];
  row_layer_norm(attn, w.ln1_gain, w.ln1_bias);

  Matrix pre = linear(attn, w.w1, w.c1);
  for (double& p : pre.data) p = gelu_scalar(p);
  Matrix ff = linear(pre, w.w2, w.c2);
  for (std::size_t i = 0; i < t * d; ++i) ff.data[i] += attn.data[i];
  row_layer_norm(ff, w.ln2_gain, w.ln2_bias);
  return ff;
}

// Runs blocks `from_layer+1 .. L` starting from `hidden`, applying any
// overrides as each layer's state materializes. `cache` collects states when
// non-null. Returns the final hidden matrix.
Matrix ascend(const Model& model, Matrix hidden, std::size_t from_layer,
              const OverridePlan* plan, ActivationCache* cache) {
  const std::size_t n_layers = model.config.n_layers;
  if (plan && from_layer == plan->lowest_layer) plan->apply(from_layer, hidden);
  if (cache) cache->hidden.push_back(hidden);
  for (std::size_t layer = from_layer + 1; layer <= n_layers; ++layer) {
    hidden = block_forward(model.config, model.weights.blocks[layer - 1], hidden);
    if (plan) plan->apply(layer, hidden);
    if (cache) cache->hidden.push_back(hidden);
  }
  return hidden;
}

Vector logits_from_hidden(const Model& model, const Matrix& hidden, std::size_t query) {
  const Matrix& e = model.weights.embedding;
  const double* h = hidden.row(query);
  Vector logits;
  logits.data.resize(e.rows);
  for (std::size_t v = 0; v < e.rows; ++v) {
    const double* ev = e.row(v);
    double s = 0.0;
    for (std::size_t c = 0; c < e.cols; ++c) s += h[c] * ev[c];
    logits.data[v] = s;
  }
  return logits;
}

void fill_gauss(Rng& rng, double std, std::vector<double>& data) {
  for (double& x : data) x = rng.next_gauss() * std;
}

}  // namespace

std::string to_string(ModelMode mode) {
  return mode == ModelMode::kAlm ? "alm" : "mlm";
}

ModelMode model_mode_from_string(const std::string& s) {
  if (s == "alm") return ModelMode::kAlm;
  if (s == "mlm") return ModelMode::kMlm;
  throw DataError("unknown model mode: " + s);
}

void ModelConfig::validate() const {
  require(n_layers >= 1, "model: n_layers must be >= 1");
  require(hidden_dim >= 1, "model: hidden_dim must be >= 1");
  require(n_heads >= 1, "model: n_heads must be >= 1");
  require(hidden_dim % n_heads == 0, "model: hidden_dim must be divisible by n_heads");
  require(ff_dim >= 1, "model: ff_dim must be >= 1");
  require(vocab_size >= 2, "model: vocab_size must be >= 2");
  require(max_len >= 2, "model: max_len must be >= 2");
}

void InterventionSpec::validate(const ModelConfig& config, std::size_t seq_len) const {
  require(position < seq_len, "intervention: position out of range");
  std::set<NeuronId> seen;
  for (const auto& [neuron, value] : overrides) {
    require(neuron.layer <= config.n_layers, "intervention: layer out of range");
    require(neuron.dim < config.hidden_dim, "intervention: dim out of range");
    require(seen.insert(neuron).second, "intervention: duplicate neuron override");
    (void)value;
  }
}

ForwardResult forward(const Model& model, std::span<const TokenId> tokens,
                      std::size_t query_position, const InterventionSpec* intervention) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  const std::size_t t = tokens.size();
  require(t >= 1 && t <= cfg.max_len, "forward: sequence length out of range");
  require(query_position < t, "forward: query position out of range");
  for (TokenId tok : tokens) require(tok < cfg.vocab_size, "forward: token id out of range");

  std::optional<OverridePlan> plan;
  if (intervention) {
    intervention->validate(cfg, t);
    plan.emplace(*intervention, cfg.n_layers);
  }

  Matrix h0(t, cfg.hidden_dim);
  for (std::size_t i = 0; i < t; ++i) {
    const double* e = model.weights.embedding.row(tokens[i]);
    const double* p = model.weights.positional.row(i);
    double* r = h0.row(i);
    for (std::size_t c = 0; c < cfg.hidden_dim; ++c) r[c] = e[c] + p[c];
  }

  ForwardResult result;
  Matrix top = ascend(model, std::move(h0), 0, plan ? &*plan : nullptr, &result.cache);
  result.logits = logits_from_hidden(model, top, query_position);
  return result;
}

Vector resume_forward(const Model& model, const ActivationCache& base,
                      const InterventionSpec& intervention, std::size_t query_position) {
  const ModelConfig& cfg = model.config;
  require(base.hidden.size() == cfg.n_layers + 1, "resume: cache layer count mismatch");
  require(query_position < base.seq_len(), "resume: query position out of range");
  intervention.validate(cfg, base.seq_len());
  require(!intervention.overrides.empty(), "resume: intervention has no overrides");

  OverridePlan plan(intervention, cfg.n_layers);
  Matrix top = ascend(model, base.hidden[plan.lowest_layer], plan.lowest_layer, &plan, nullptr);
  return logits_from_hidden(model, top, query_position);
}

TokenProbability token_probability(const Vector& logits, TokenId token) {
  require(token < logits.dim(), "token_probability: token id out of range");
  Vector probs = softmax(logits);
  return {probs[token], logits[token] - logsumexp(logits)};
}

Weights random_init_weights(const ModelConfig& config) {
  config.validate();
  constexpr double kStd = 0.02;
  Rng rng(derive_seed(config.seed, "weights-init"));
  Weights w = zero_like(config);
  fill_gauss(rng, kStd, w.embedding.data);
  fill_gauss(rng, kStd, w.positional.data);
  for (BlockWeights& b : w.blocks) {
    fill_gauss(rng, kStd, b.wq.data);
    fill_gauss(rng, kStd, b.wk.data);
    fill_gauss(rng, kStd, b.wv.data);
    fill_gauss(rng, kStd, b.wo.data);
    fill_gauss(rng, kStd, b.w1.data);
    fill_gauss(rng, kStd, b.w2.data);
    std::fill(b.ln1_gain.data.begin(), b.ln1_gain.data.end(), 1.0);
    std::fill(b.ln2_gain.data.begin(), b.ln2_gain.data.end(), 1.0);
  }
  return w;
}

std::vector<std::pair<std::string, std::vector<double>*>> named_parameter_tensors(Weights& w) {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  out.emplace_back("embedding", &w.embedding.data);
  out.emplace_back("positional", &w.positional.data);
  for (std::size_t i = 0; i < w.blocks.size(); ++i) {
    BlockWeights& b = w.blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    out.emplace_back(p + "wq", &b.wq.data);
    out.emplace_back(p + "bq", &b.bq.data);
    out.emplace_back(p + "wk", &b.wk.data);
    out.emplace_back(p + "bk", &b.bk.data);
    out.emplace_back(p + "wv", &b.wv.data);
    out.emplace_back(p + "bv", &b.bv.data);
    out.emplace_back(p + "wo", &b.wo.data);
    out.emplace_back(p + "bo", &b.bo.data);
    out.emplace_back(p + "ln1_gain", &b.ln1_gain.data);
    out.emplace_back(p + "ln1_bias", &b.ln1_bias.data);
    out.emplace_back(p + "w1", &b.w1.data);
    out.emplace_back(p + "c1", &b.c1.data);
    out.emplace_back(p + "w2", &b.w2.data);
    out.emplace_back(p + "c2", &b.c2.data);
    out.emplace_back(p + "ln2_gain", &b.ln2_gain.data);
    out.emplace_back(p + "ln2_bias", &b.ln2_bias.data);
  }
  return out;
}

Weights zero_like(const ModelConfig& config) {
  const std::size_t d = config.hidden_dim;
  Weights w;
  w.embedding = Matrix(config.vocab_size, d);
  w.positional = Matrix(config.max_len, d);
  w.blocks.resize(config.n_layers);
  for (BlockWeights& b : w.blocks) {
    b.wq = Matrix(d, d);
    b.wk = Matrix(d, d);
    b.wv = Matrix(d, d);
    b.wo = Matrix(d, d);
    b.bq = Vector(d);
    b.bk = Vector(d);
    b.bv = Vector(d);
    b.bo = Vector(d);
    b.ln1_gain = Vector(d);
    b.ln1_bias = Vector(d);
    b.w1 = Matrix(d, config.ff_dim);
    b.c1 = Vector(config.ff_dim);
    b.w2 = Matrix(config.ff_dim, d);
    b.c2 = Vector(d);
    b.ln2_gain = Vector(d);
    b.ln2_bias = Vector(d);
  }
  return w;
}

}  // namespace agscan
