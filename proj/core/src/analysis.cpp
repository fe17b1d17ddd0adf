#include "agscan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"
#include "agscan/version.hpp"

namespace agscan {

namespace {

std::string group_label(const EffectTable& t) {
  return t.language + "-" + to_string(t.structure) + "-" + t.word_variant;
}

// log C(n, k)
double lchoose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

std::size_t intersection_count(const std::set<NeuronId>& a, const std::set<NeuronId>& b) {
  const std::set<NeuronId>& small = a.size() <= b.size() ? a : b;
  const std::set<NeuronId>& large = a.size() <= b.size() ? b : a;
  std::size_t n = 0;
  for (const NeuronId& id : small) n += large.count(id);
  return n;
}

// Descending nie_mean over the given flat indices, ties by flat index.
std::vector<std::size_t> order_desc(const EffectTable& t, std::vector<std::size_t> flats) {
  std::sort(flats.begin(), flats.end(), [&](std::size_t a, std::size_t b) {
    if (t.nie_mean[a] != t.nie_mean[b]) return t.nie_mean[a] > t.nie_mean[b];
    return a < b;
  });
  return flats;
}

}  // namespace

std::vector<NeuronSet> top_neurons_per_layer(const EffectTable& effects, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "selection: fraction outside (0, 1]");
  require(effects.nie_mean.size() == effects.n_neurons(), "selection: incomplete effect table");
  const std::size_t d = effects.hidden_dim;
  const std::size_t per_layer =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d)));

  std::vector<NeuronSet> out;
  out.reserve(effects.n_layers + 1);
  for (std::size_t layer = 0; layer <= effects.n_layers; ++layer) {
    std::vector<std::size_t> flats(d);
    std::iota(flats.begin(), flats.end(), layer * d);
    flats = order_desc(effects, std::move(flats));
    NeuronSet set;
    set.label = group_label(effects) + "-layer" + std::to_string(layer);
    set.rule = SelectionRule::kPerLayerFraction;
    for (std::size_t i = 0; i < per_layer; ++i)
      set.members.insert(NeuronId::from_flat(flats[i], d));
    out.push_back(std::move(set));
  }
  return out;
}

NeuronSet top_neurons_global(const EffectTable& effects, std::size_t n) {
  require(effects.nie_mean.size() == effects.n_neurons(), "selection: incomplete effect table");
  require(n >= 1 && n <= effects.n_neurons(), "selection: top-n size out of range");
  std::vector<std::size_t> flats(effects.n_neurons());
  std::iota(flats.begin(), flats.end(), 0);
  flats = order_desc(effects, std::move(flats));
  NeuronSet set;
  set.label = group_label(effects);
  set.rule = SelectionRule::kGlobalTopN;
  for (std::size_t i = 0; i < n; ++i)
    set.members.insert(NeuronId::from_flat(flats[i], effects.hidden_dim));
  return set;
}

double overlap_proportion(const NeuronSet& a, const NeuronSet& b) {
  require(!a.members.empty() && !b.members.empty(), "overlap: empty neuron set");
  return static_cast<double>(intersection_count(a.members, b.members)) /
         static_cast<double>(a.members.size());
}

double chance_overlap_probability(std::size_t n_neurons, std::size_t set_size) {
  require(n_neurons >= 1, "chance overlap: no neurons");
  require(set_size <= n_neurons, "chance overlap: set larger than population");
  if (set_size == 0) return 0.0;
  if (n_neurons - set_size < set_size) return 1.0;  // disjoint placement impossible
  const double log_p_disjoint = lchoose(n_neurons - set_size, set_size) - lchoose(n_neurons, set_size);
  return 1.0 - std::exp(log_p_disjoint);
}

double permutation_significance(const NeuronSet& a, const NeuronSet& b, std::size_t n_neurons,
                                std::size_t iters, Rng& rng) {
  require(iters >= 1000, "permutation: need at least 1000 iterations");
  require(!a.members.empty() && !b.members.empty(), "permutation: empty neuron set");
  require(a.members.size() <= n_neurons && b.members.size() <= n_neurons,
          "permutation: set larger than population");
  const std::size_t observed = intersection_count(a.members, b.members);
  const std::size_t sa = a.members.size();
  const std::size_t sb = b.members.size();

  std::vector<char> marks(n_neurons, 0);
  std::size_t at_least = 0;
  for (std::size_t it = 0; it < iters; ++it) {
    const std::vector<std::size_t> pa = rng.sample_indices(n_neurons, sa);
    const std::vector<std::size_t> pb = rng.sample_indices(n_neurons, sb);
    for (std::size_t i : pa) marks[i] = 1;
    std::size_t hits = 0;
    for (std::size_t i : pb) hits += marks[i];
    for (std::size_t i : pa) marks[i] = 0;
    if (hits >= observed) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(iters + 1);
}

std::vector<double> layer_contour(const EffectTable& effects, double fraction) {
  const std::vector<NeuronSet> sets = top_neurons_per_layer(effects, fraction);
  std::vector<double> contour;
  contour.reserve(sets.size());
  for (const NeuronSet& set : sets) {
    double acc = 0.0;
    for (const NeuronId& id : set.members) acc += effects.nie_mean[id.flat(effects.hidden_dim)];
    contour.push_back(acc / static_cast<double>(set.members.size()));
  }
  return contour;
}

OverlapMatrix overlap_matrix(const std::vector<NeuronSet>& sets, std::size_t n_neurons,
                             std::size_t iters, Rng& rng) {
  require(sets.size() >= 2, "overlap matrix: need at least two sets");
  const std::size_t size = sets.front().members.size();
  for (const NeuronSet& s : sets)
    require(s.members.size() == size, "overlap matrix: sets must have equal size");

  OverlapMatrix m;
  m.labels.reserve(sets.size());
  for (const NeuronSet& s : sets) m.labels.push_back(s.label);
  m.values = Matrix(sets.size(), sets.size());
  m.p_values = Matrix(sets.size(), sets.size());
  m.chance_level = chance_overlap_probability(n_neurons, size);

  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i; j < sets.size(); ++j) {
      const double v = overlap_proportion(sets[i], sets[j]);
      const double p = permutation_significance(sets[i], sets[j], n_neurons, iters, rng);
      m.values(i, j) = v;
      m.values(j, i) = v;
      m.p_values(i, j) = p;
      m.p_values(j, i) = p;
    }
  }
  return m;
}

EffectTable subset_stimuli(const EffectTable& table, const std::vector<std::size_t>& columns) {
  require(!columns.empty(), "effect table subset: no columns");
  for (std::size_t c : columns)
    require(c < table.n_stimuli(), "effect table subset: column out of range");
  EffectTable out;
  out.language = table.language;
  out.structure = table.structure;
  out.word_variant = table.word_variant;
  out.n_layers = table.n_layers;
  out.hidden_dim = table.hidden_dim;
  for (std::size_t c : columns) out.stimulus_ids.push_back(table.stimulus_ids[c]);
  out.nie_mean.assign(table.n_neurons(), 0.0);
  out.per_stimulus = Matrix(table.n_neurons(), columns.size());
  for (std::size_t i = 0; i < table.n_neurons(); ++i) {
    const double* src = table.per_stimulus.row(i);
    double* dst = out.per_stimulus.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      dst[j] = src[columns[j]];
      acc += dst[j];
    }
    out.nie_mean[i] = acc / static_cast<double>(columns.size());
  }
  return out;
}

std::string contours_to_csv(const std::vector<LayerContour>& contours, std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + ", version=" + kVersion + "\n";
  out += "language,structure,layer,mean_top_nie\n";
  for (const LayerContour& c : contours)
    for (std::size_t layer = 0; layer < c.mean_top_nie.size(); ++layer)
      out += c.language + "," + to_string(c.structure) + "," + std::to_string(layer) + "," +
             fmt_f64(c.mean_top_nie[layer]) + "\n";
  return out;
}

std::string overlap_matrix_to_csv(const OverlapMatrix& m, std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + ", version=" + kVersion + "\n";
  out += "label_a,label_b,overlap,p_value,chance_level\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      out += m.labels[i] + "," + m.labels[j] + "," + fmt_f64(m.values(i, j)) + "," +
             fmt_f64(m.p_values(i, j)) + "," + fmt_f64(m.chance_level) + "\n";
  return out;
}

std::string overlap_matrix_to_json(const OverlapMatrix& m, std::uint64_t seed) {
  nlohmann::json j;
  j["labels"] = m.labels;
  std::vector<std::vector<double>> values, p_values;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const double* vr = m.values.row(i);
    const double* pr = m.p_values.row(i);
    values.emplace_back(vr, vr + m.labels.size());
    p_values.emplace_back(pr, pr + m.labels.size());
  }
  j["values"] = values;
  j["p_values"] = p_values;
  j["chance_level"] = m.chance_level;
  j["seed"] = seed;
  j["version"] = kVersion;
  return j.dump(2) + "\n";
}

}  // namespace agscan
