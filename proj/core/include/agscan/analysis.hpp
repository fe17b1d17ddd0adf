#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "agscan/mediation.hpp"
#include "agscan/rng.hpp"

namespace agscan {

enum class SelectionRule { kPerLayerFraction, kGlobalTopN };

struct NeuronSet {
  std::string label;
  SelectionRule rule = SelectionRule::kGlobalTopN;
  std::set<NeuronId> members;
};

// Per layer, the ceil(fraction*d) neurons with highest nie_mean (ceiling so
// tiny layers still select at least one); ties broken by dimension index.
std::vector<NeuronSet> top_neurons_per_layer(const EffectTable& effects, double fraction = 0.05);

// The n neurons with highest nie_mean from any layer; ties by (layer, dim).
NeuronSet top_neurons_global(const EffectTable& effects, std::size_t n = 30);

// |a intersect b| / |a|. Symmetric whenever the sets have equal size.
double overlap_proportion(const NeuronSet& a, const NeuronSet& b);

// Probability that two uniform random size-s subsets of n neurons share at
// least one neuron: 1 - C(n-s, s)/C(n, s), evaluated in log-gamma space.
double chance_overlap_probability(std::size_t n_neurons, std::size_t set_size);

// One-sided Monte-Carlo p-value: the fraction of iterations in which two
// uniform random sets of the same sizes overlap at least as much as
// observed, with add-one smoothing ((r+1)/(iters+1)) so p is never zero.
double permutation_significance(const NeuronSet& a, const NeuronSet& b, std::size_t n_neurons,
                                std::size_t iters, Rng& rng);

// Per layer, the mean nie_mean over that layer's top-fraction set.
std::vector<double> layer_contour(const EffectTable& effects, double fraction = 0.05);

struct OverlapMatrix {
  std::vector<std::string> labels;
  Matrix values;    // overlap proportions
  Matrix p_values;  // permutation p-values, symmetric
  double chance_level = 0.0;
};

// All pairwise overlaps and p-values; requires equal-sized sets so a single
// chance level describes every cell.
OverlapMatrix overlap_matrix(const std::vector<NeuronSet>& sets, std::size_t n_neurons,
                             std::size_t iters, Rng& rng);

// Effect table restricted to the given stimulus columns (e.g. one attractor
// number), with row means recomputed over the kept columns.
EffectTable subset_stimuli(const EffectTable& table, const std::vector<std::size_t>& columns);

struct LayerContour {
  std::string language;
  Structure structure = Structure::kSimple;
  std::string word_variant;
  std::vector<double> mean_top_nie;  // one per layer, 0..L
};

std::string contours_to_csv(const std::vector<LayerContour>& contours, std::uint64_t seed);
std::string overlap_matrix_to_csv(const OverlapMatrix& m, std::uint64_t seed);
std::string overlap_matrix_to_json(const OverlapMatrix& m, std::uint64_t seed);

}  // namespace agscan
