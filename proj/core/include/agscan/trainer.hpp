#pragma once

#include <functional>
#include <span>
#include <vector>

#include "agscan/model.hpp"
#include "agscan/rng.hpp"

namespace agscan {

struct TrainHyper {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t steps = 1000;
  double mask_rate = 0.15;  // MLM only
  TokenId mask_token = 0;   // MLM only
  std::uint64_t seed = 0;
  std::function<void(std::size_t step, double loss)> progress;
};

// One training example: input tokens plus the (position, target) slots whose
// cross-entropy enters the loss. ALM items predict the next token at every
// position; MLM items predict the original token at each masked slot.
struct TrainItem {
  std::vector<TokenId> tokens;
  std::vector<std::pair<std::size_t, TokenId>> targets;
};

TrainItem make_alm_item(const std::vector<TokenId>& sequence);
// Masks each position independently at mask_rate; if none got masked, masks
// one uniformly chosen position so every item contributes to the loss.
TrainItem make_mlm_item(const std::vector<TokenId>& sequence, TokenId mask_token,
                        double mask_rate, Rng& rng);

// Mean cross-entropy over all target slots in the batch, with analytic
// gradients accumulated into *grads (zeroed by the caller). Items are
// processed in order, so results are deterministic.
double loss_and_gradients(const Model& model, std::span<const TrainItem> items, Weights* grads);

struct TrainResult {
  Weights weights;
  double final_loss;
};

// Adam with linear warmup over the first 5% of steps, then constant lr.
// Deterministic given config.seed (init) and hyper.seed (batching/masking).
TrainResult train(const ModelConfig& config, const std::vector<std::vector<TokenId>>& corpus,
                  const TrainHyper& hyper);

}  // namespace agscan
