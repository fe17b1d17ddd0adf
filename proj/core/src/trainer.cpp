#include "agscan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "agscan/errors.hpp"

namespace agscan {

namespace {

Matrix mm_at_b(const Matrix& a, const Matrix& b) {
  Matrix y(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* ar = a.row(k);
    const double* br = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      double* yr = y.row(i);
      const double s = ar[i];
      for (std::size_t j = 0; j < b.cols; ++j) yr[j] += s * br[j];
    }
  }
  return y;
}

Matrix mm_a_bt(const Matrix& a, const Matrix& b) {
  Matrix y(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* yr = y.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      yr[j] = s;
    }
  }
  return y;
}

void add_colsum(const Matrix& m, std::vector<double>& out) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
  }
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

struct LnRows {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

// In-place row layer norm that records per-row statistics for the backward
// pass. Matches the inference kernel (same epsilon, same summation order).
LnRows ln_rows_forward(Matrix& m, const Vector& gain, const Vector& bias) {
  const std::size_t d = m.cols;
  LnRows stats{std::vector<double>(m.rows), std::vector<double>(m.rows)};
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += r[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    stats.mean[i] = mean;
    stats.inv_std[i] = inv;
    for (std::size_t j = 0; j < d; ++j) r[j] = (r[j] - mean) * inv * gain[j] + bias[j];
  }
  return stats;
}

// dx for y = gain*x_hat + bias given dy; also accumulates dgain/dbias.
// x_hat is recovered from the pre-norm input and the stored statistics.
void ln_rows_backward(const Matrix& pre, const LnRows& stats, const Vector& gain,
                      const Matrix& dy, Matrix& dx, std::vector<double>& dgain,
                      std::vector<double>& dbias) {
  const std::size_t d = pre.cols;
  std::vector<double> xhat(d), dxh(d);
  for (std::size_t i = 0; i < pre.rows; ++i) {
    const double* pr = pre.row(i);
    const double* dyr = dy.row(i);
    double* dxr = dx.row(i);
    const double inv = stats.inv_std[i];
    double m_dxh = 0.0, m_dxh_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[j] = (pr[j] - stats.mean[i]) * inv;
      dgain[j] += dyr[j] * xhat[j];
      dbias[j] += dyr[j];
      dxh[j] = dyr[j] * gain[j];
      m_dxh += dxh[j];
      m_dxh_xhat += dxh[j] * xhat[j];
    }
    m_dxh /= static_cast<double>(d);
    m_dxh_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j)
      dxr[j] += inv * (dxh[j] - m_dxh - xhat[j] * m_dxh_xhat);
  }
}

struct BlockTape {
  Matrix x, q, k, v;
  std::vector<Matrix> attn;  // per head, T x T row-softmax; zeros where masked
  Matrix ctx;
  Matrix s1;  // x + attention output, pre-LN1
  LnRows ln1;
  Matrix u;   // LN1 output
  Matrix pm;  // pre-gelu
  Matrix g;   // gelu(pm)
  Matrix s2;  // u + ff output, pre-LN2
  LnRows ln2;
  Matrix h;   // block output
};

Matrix linear(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* r = y.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) r[j] += b[j];
  }
  return y;
}

BlockTape block_forward_tape(const ModelConfig& cfg, const BlockWeights& w, Matrix x) {
  const std::size_t t = x.rows;
  const std::size_t d = cfg.hidden_dim;
  const std::size_t dh = d / cfg.n_heads;
  const bool causal = cfg.mode == ModelMode::kAlm;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  BlockTape tape;
  tape.x = std::move(x);
  tape.q = linear(tape.x, w.wq, w.bq);
  tape.k = linear(tape.x, w.wk, w.bk);
  tape.v = linear(tape.x, w.wv, w.bv);
  tape.attn.assign(cfg.n_heads, Matrix(t, t));
  tape.ctx = Matrix(t, d);

  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& a = tape.attn[h];
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t span = causal ? i + 1 : t;
      const double* qi = tape.q.row(i) + off;
      double* ai = a.row(i);
      double mx = -1e300;
      for (std::size_t j = 0; j < span; ++j) {
        const double* kj = tape.k.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        ai[j] = s * scale;
        mx = std::max(mx, ai[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < span; ++j) {
        ai[j] = std::exp(ai[j] - mx);
        denom += ai[j];
      }
      double* ci = tape.ctx.row(i) + off;
      for (std::size_t j = 0; j < span; ++j) {
        ai[j] /= denom;
        const double* vj = tape.v.row(j) + off;
        for (std::size_t c = 0; c < dh; ++c) ci[c] += ai[j] * vj[c];
      }
    }
  }

  tape.s1 = linear(tape.ctx, w.wo, w.bo);
  for (std::size_t i = 0; i < t * d; ++i) tape.s1.data[i] += tape.x.data[i];
  tape.u = tape.s1;
  tape.ln1 = ln_rows_forward(tape.u, w.ln1_gain, w.ln1_bias);

  tape.pm = linear(tape.u, w.w1, w.c1);
  tape.g = tape.pm;
  for (double& gv : tape.g.data) gv = gelu_scalar(gv);
  tape.s2 = linear(tape.g, w.w2, w.c2);
  for (std::size_t i = 0; i < t * d; ++i) tape.s2.data[i] += tape.u.data[i];
  tape.h = tape.s2;
  tape.ln2 = ln_rows_forward(tape.h, w.ln2_gain, w.ln2_bias);
  return tape;
}

// Backpropagates dh (grad of loss wrt block output) through one block,
// accumulating parameter grads into gw and returning grad wrt block input.
Matrix block_backward(const ModelConfig& cfg, const BlockWeights& w, const BlockTape& tape,
                      const Matrix& dh, BlockWeights& gw) {
  const std::size_t t = tape.x.rows;
  const std::size_t d = cfg.hidden_dim;
  const std::size_t dh_dim = d / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_dim));

  Matrix ds2(t, d);
  ln_rows_backward(tape.s2, tape.ln2, w.ln2_gain, dh, ds2, gw.ln2_gain.data, gw.ln2_bias.data);

  // s2 = u + g*w2 + c2
  Matrix du = ds2;
  add_colsum(ds2, gw.c2.data);
  add_into(gw.w2.data, mm_at_b(tape.g, ds2).data);
  Matrix dg = mm_a_bt(ds2, w.w2);
  for (std::size_t i = 0; i < t * cfg.ff_dim; ++i)
    dg.data[i] *= gelu_derivative(tape.pm.data[i]);
  add_colsum(dg, gw.c1.data);
  add_into(gw.w1.data, mm_at_b(tape.u, dg).data);
  add_into(du.data, mm_a_bt(dg, w.w1).data);

  Matrix ds1(t, d);
  ln_rows_backward(tape.s1, tape.ln1, w.ln1_gain, du, ds1, gw.ln1_gain.data, gw.ln1_bias.data);

  // s1 = x + ctx*wo + bo
  Matrix dx = ds1;
  add_colsum(ds1, gw.bo.data);
  add_into(gw.wo.data, mm_at_b(tape.ctx, ds1).data);
  Matrix dctx = mm_a_bt(ds1, w.wo);

  Matrix dq(t, d), dk(t, d), dv(t, d);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const std::size_t off = h * dh_dim;
    const Matrix& a = tape.attn[h];
    for (std::size_t i = 0; i < t; ++i) {
      const double* ai = a.row(i);
      const double* dci = dctx.row(i) + off;
      // da[j] = dctx_i . v_j ; dv_j += a[j] * dctx_i
      std::vector<double> da(t, 0.0);
      for (std::size_t j = 0; j < t; ++j) {
        if (ai[j] == 0.0) continue;
        const double* vj = tape.v.row(j) + off;
        double* dvj = dv.row(j) + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh_dim; ++c) {
          s += dci[c] * vj[c];
          dvj[c] += ai[j] * dci[c];
        }
        da[j] = s;
      }
      // softmax row: ds = a * (da - sum(da*a))
      double inner = 0.0;
      for (std::size_t j = 0; j < t; ++j) inner += da[j] * ai[j];
      double* dqi = dq.row(i) + off;
      for (std::size_t j = 0; j < t; ++j) {
        const double dsj = ai[j] * (da[j] - inner);
        if (dsj == 0.0) continue;
        const double* kj = tape.k.row(j) + off;
        const double* qi = tape.q.row(i) + off;
        double* dkj = dk.row(j) + off;
        for (std::size_t c = 0; c < dh_dim; ++c) {
          dqi[c] += dsj * scale * kj[c];
          dkj[c] += dsj * scale * qi[c];
        }
      }
    }
  }

  add_colsum(dq, gw.bq.data);
  add_into(gw.wq.data, mm_at_b(tape.x, dq).data);
  add_into(dx.data, mm_a_bt(dq, w.wq).data);
  add_colsum(dk, gw.bk.data);
  add_into(gw.wk.data, mm_at_b(tape.x, dk).data);
  add_into(dx.data, mm_a_bt(dk, w.wk).data);
  add_colsum(dv, gw.bv.data);
  add_into(gw.wv.data, mm_at_b(tape.x, dv).data);
  add_into(dx.data, mm_a_bt(dv, w.wv).data);
  return dx;
}

}  // namespace

TrainItem make_alm_item(const std::vector<TokenId>& sequence) {
  require(sequence.size() >= 2, "train: ALM sequence needs at least 2 tokens");
  TrainItem item{sequence, {}};
  for (std::size_t t = 0; t + 1 < sequence.size(); ++t)
    item.targets.emplace_back(t, sequence[t + 1]);
  return item;
}

TrainItem make_mlm_item(const std::vector<TokenId>& sequence, TokenId mask_token,
                        double mask_rate, Rng& rng) {
  require(!sequence.empty(), "train: empty MLM sequence");
  TrainItem item{sequence, {}};
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    if (rng.next_unit() < mask_rate) {
      item.targets.emplace_back(t, sequence[t]);
      item.tokens[t] = mask_token;
    }
  }
  if (item.targets.empty()) {
    const std::size_t t = rng.index(sequence.size());
    item.targets.emplace_back(t, sequence[t]);
    item.tokens[t] = mask_token;
  }
  return item;
}

double loss_and_gradients(const Model& model, std::span<const TrainItem> items, Weights* grads) {
  const ModelConfig& cfg = model.config;
  std::size_t n_targets = 0;
  for (const TrainItem& item : items) n_targets += item.targets.size();
  require(n_targets > 0, "train: batch has no prediction targets");
  const double inv_n = 1.0 / static_cast<double>(n_targets);

  const Matrix& emb = model.weights.embedding;
  double total_loss = 0.0;

  for (const TrainItem& item : items) {
    const std::size_t t = item.tokens.size();
    require(t >= 1 && t <= cfg.max_len, "train: sequence length out of range");
    const std::size_t d = cfg.hidden_dim;

    Matrix h0(t, d);
    for (std::size_t i = 0; i < t; ++i) {
      require(item.tokens[i] < cfg.vocab_size, "train: token id out of range");
      const double* e = emb.row(item.tokens[i]);
      const double* p = model.weights.positional.row(i);
      double* r = h0.row(i);
      for (std::size_t c = 0; c < d; ++c) r[c] = e[c] + p[c];
    }

    std::vector<BlockTape> tapes;
    tapes.reserve(cfg.n_layers);
    const Matrix* cur = &h0;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      tapes.push_back(block_forward_tape(cfg, model.weights.blocks[l], *cur));
      cur = &tapes.back().h;
    }
    const Matrix& top = *cur;

    Matrix dtop(t, d);
    for (const auto& [pos, target] : item.targets) {
      require(pos < t && target < cfg.vocab_size, "train: target out of range");
      const double* h = top.row(pos);
      Vector logits;
      logits.data.resize(cfg.vocab_size);
      for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
        const double* ev = emb.row(v);
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += h[c] * ev[c];
        logits.data[v] = s;
      }
      total_loss += cross_entropy(logits, target);
      Vector probs = softmax(logits);
      double* dt = dtop.row(pos);
      for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
        const double dlog = (probs[v] - (v == target ? 1.0 : 0.0)) * inv_n;
        if (dlog == 0.0) continue;
        const double* ev = emb.row(v);
        double* gev = grads->embedding.row(v);
        for (std::size_t c = 0; c < d; ++c) {
          dt[c] += dlog * ev[c];
          gev[c] += dlog * h[c];
        }
      }
    }

    Matrix dcur = std::move(dtop);
    for (std::size_t l = cfg.n_layers; l-- > 0;)
      dcur = block_backward(cfg, model.weights.blocks[l], tapes[l], dcur, grads->blocks[l]);

    for (std::size_t i = 0; i < t; ++i) {
      const double* dr = dcur.row(i);
      double* ge = grads->embedding.row(item.tokens[i]);
      double* gp = grads->positional.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        ge[c] += dr[c];
        gp[c] += dr[c];
      }
    }
  }

  return total_loss * inv_n;
}

TrainResult train(const ModelConfig& config, const std::vector<std::vector<TokenId>>& corpus,
                  const TrainHyper& hyper) {
  config.validate();
  require(!corpus.empty(), "train: empty corpus");
  require(hyper.batch_size >= 1 && hyper.steps >= 1, "train: batch_size and steps must be >= 1");
  for (const auto& seq : corpus) {
    require(!seq.empty() && seq.size() <= config.max_len, "train: corpus sequence length out of range");
    for (TokenId tok : seq) require(tok < config.vocab_size, "train: corpus token out of range");
  }

  Model model{config, random_init_weights(config)};
  Weights grads = zero_like(config);
  Weights m1 = zero_like(config);
  Weights m2 = zero_like(config);
  Rng rng(derive_seed(hyper.seed, "train-batches"));
  const std::size_t warmup = std::max<std::size_t>(1, (hyper.steps + 19) / 20);

  double last_loss = 0.0;
  std::vector<TrainItem> items;
  for (std::size_t step = 1; step <= hyper.steps; ++step) {
    items.clear();
    for (std::size_t b = 0; b < hyper.batch_size; ++b) {
      const auto& seq = corpus[rng.index(corpus.size())];
      items.push_back(config.mode == ModelMode::kAlm
                          ? make_alm_item(seq)
                          : make_mlm_item(seq, hyper.mask_token, hyper.mask_rate, rng));
    }

    for (auto& [name, data] : named_parameter_tensors(grads)) {
      (void)name;
      std::fill(data->begin(), data->end(), 0.0);
    }
    const double loss = loss_and_gradients(model, items, &grads);
    if (!std::isfinite(loss))
      throw NumericError("train: non-finite loss at step " + std::to_string(step));
    last_loss = loss;

    const double lr_t =
        hyper.lr * std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup));
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));

    auto ws = named_parameter_tensors(model.weights);
    auto gs = named_parameter_tensors(grads);
    auto m1s = named_parameter_tensors(m1);
    auto m2s = named_parameter_tensors(m2);
    for (std::size_t ti = 0; ti < ws.size(); ++ti) {
      std::vector<double>& w = *ws[ti].second;
      const std::vector<double>& g = *gs[ti].second;
      std::vector<double>& ma = *m1s[ti].second;
      std::vector<double>& mb = *m2s[ti].second;
      for (std::size_t i = 0; i < w.size(); ++i) {
        ma[i] = hyper.beta1 * ma[i] + (1.0 - hyper.beta1) * g[i];
        mb[i] = hyper.beta2 * mb[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        const double mhat = ma[i] / bc1;
        const double vhat = mb[i] / bc2;
        w[i] -= lr_t * mhat / (std::sqrt(vhat) + hyper.adam_eps);
      }
    }

    if (hyper.progress) hyper.progress(step, loss);
  }

  return {std::move(model.weights), last_loss};
}

}  // namespace agscan
