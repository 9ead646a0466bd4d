#pragma once

#include <algorithm>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "nprobe/detail/csv.hpp"
#include "nprobe/error.hpp"
#include "nprobe/neuron_analysis.hpp"
#include "nprobe/preprocess.hpp"

namespace nprobe {

/// Selected neurons per layer.
inline std::vector<std::size_t> layer_distribution(std::span<const NeuronId> neurons,
                                                   std::size_t num_layers,
                                                   std::size_t hidden_size) {
  std::vector<std::size_t> counts(num_layers, 0);
  for (auto g : neurons) {
    if (g >= num_layers * hidden_size) {
      throw Error(
          Errc::index_out_of_range, "distribution-analysis.layer_distribution",
          "neuron " + std::to_string(g) + " outside " + std::to_string(num_layers * hidden_size));
    }
    ++counts[layer_of(g, hidden_size)];
  }
  return counts;
}

namespace detail {
inline void check_selection(const NeuronRanking& ranking, const SelectionResult& selection,
                            const char* where) {
  if (selection.contributors.size() != selection.selected.size()) {
    throw Error(Errc::inconsistent_inputs, where, "selection lacks contributor records");
  }
  for (std::size_t i = 0; i < selection.selected.size(); ++i) {
    const auto it = ranking.contributed_by.find(selection.selected[i]);
    if (it == ranking.contributed_by.end() || it->second != selection.contributors[i]) {
      throw Error(Errc::inconsistent_inputs, where,
                  "neuron " + std::to_string(selection.selected[i]) +
                      " was not contributed by the recorded class");
    }
  }
}
}  // namespace detail

/// Selected neurons per class, each counted once under its first-contributing
/// class.
inline std::vector<std::size_t> property_counts(const NeuronRanking& ranking,
                                                const SelectionResult& selection) {
  detail::check_selection(ranking, selection, "distribution-analysis.property_counts");
  std::vector<std::size_t> counts(ranking.classes.size(), 0);
  for (auto c : selection.contributors) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

/// counts[class][layer] over the selection.
inline std::vector<std::vector<std::size_t>> property_layer_matrix(const NeuronRanking& ranking,
                                                                   const SelectionResult& selection,
                                                                   std::size_t num_layers,
                                                                   std::size_t hidden_size) {
  constexpr const char* where = "distribution-analysis.property_layer_matrix";
  detail::check_selection(ranking, selection, where);
  std::vector<std::vector<std::size_t>> m(ranking.classes.size(),
                                          std::vector<std::size_t>(num_layers, 0));
  for (std::size_t i = 0; i < selection.selected.size(); ++i) {
    const auto g = selection.selected[i];
    if (g >= num_layers * hidden_size) {
      throw Error(Errc::index_out_of_range, where, "neuron " + std::to_string(g));
    }
    ++m[static_cast<std::size_t>(selection.contributors[i])][layer_of(g, hidden_size)];
  }
  return m;
}

/// The first k neurons of every class's ranking; with a layer filter the
/// ranking is first restricted to that layer.
inline std::vector<std::vector<NeuronId>> top_k_sets(const NeuronRanking& ranking, std::size_t k,
                                                     std::optional<std::size_t> layer,
                                                     std::size_t hidden_size) {
  if (k < 1)
    throw Error(Errc::invalid_config, "distribution-analysis.overlap_matrix", "k must be >= 1");
  std::vector<std::vector<NeuronId>> sets;
  for (const auto& list : ranking.per_class) {
    std::vector<NeuronId> s;
    for (auto g : list) {
      if (s.size() == k) break;
      if (!layer || layer_of(g, hidden_size) == *layer) s.push_back(g);
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

struct OverlapMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // Jaccard
  std::vector<std::vector<std::size_t>> intersections;
  std::vector<std::size_t> sizes;
  std::optional<std::size_t> layer;
};

/// Pairwise Jaccard overlap of per-class neuron sets. Raw intersection sizes
/// are kept so asymmetric ratios (|A and B| / |A|) can be derived too.
inline OverlapMatrix overlap_matrix(const std::vector<std::string>& labels,
                                    const std::vector<std::vector<NeuronId>>& sets,
                                    std::optional<std::size_t> layer = std::nullopt) {
  const auto c = sets.size();
  OverlapMatrix m;
  m.labels = labels;
  m.layer = layer;
  m.values.assign(c, std::vector<double>(c, 0.0));
  m.intersections.assign(c, std::vector<std::size_t>(c, 0));
  std::vector<std::set<NeuronId>> s(c);
  for (std::size_t i = 0; i < c; ++i) {
    s[i] = {sets[i].begin(), sets[i].end()};
    m.sizes.push_back(s[i].size());
  }
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i; j < c; ++j) {
      std::size_t inter = 0;
      for (auto g : s[i]) inter += s[j].count(g);
      const auto uni = s[i].size() + s[j].size() - inter;
      const double v = uni ? double(inter) / double(uni) : 0.0;
      m.values[i][j] = m.values[j][i] = v;
      m.intersections[i][j] = m.intersections[j][i] = inter;
    }
  }
  return m;
}

inline nlohmann::json to_json(const OverlapMatrix& m) {
  return {{"labels", m.labels},
          {"matrix", m.values},
          {"intersections", m.intersections},
          {"sizes", m.sizes},
          {"layer", m.layer ? nlohmann::json(*m.layer) : nlohmann::json(nullptr)}};
}

inline void write_layer_distribution_csv(std::span<const std::size_t> counts, std::ostream& out) {
  out << "layer,count\n";
  for (std::size_t k = 0; k < counts.size(); ++k) out << k << ',' << counts[k] << '\n';
}

inline void write_property_counts_csv(const std::vector<std::string>& classes,
                                      std::span<const std::size_t> counts, std::ostream& out) {
  out << "class,count\n";
  for (std::size_t c = 0; c < counts.size(); ++c)
    out << detail::csv_field(classes[c]) << ',' << counts[c] << '\n';
}

inline void write_property_layer_csv(const std::vector<std::string>& classes,
                                     const std::vector<std::vector<std::size_t>>& m,
                                     std::ostream& out) {
  out << "class,layer,count\n";
  for (std::size_t c = 0; c < m.size(); ++c) {
    for (std::size_t k = 0; k < m[c].size(); ++k)
      out << detail::csv_field(classes[c]) << ',' << k << ',' << m[c][k] << '\n';
  }
}

}  // namespace nprobe
