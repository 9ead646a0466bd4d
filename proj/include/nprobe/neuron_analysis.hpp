#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "nprobe/corpus.hpp"
#include "nprobe/detail/float_format.hpp"
#include "nprobe/layer_analysis.hpp"
#include "nprobe/preprocess.hpp"
#include "nprobe/probe.hpp"

namespace nprobe {

/// Per-class neuron orderings by descending |weight|, ties by ascending id.
/// `contributed_by` maps every neuron to the class whose list first yields it
/// in the round-robin merge (the merge is prefix-stable, so this holds for
/// any budget).
struct NeuronRanking {
  std::vector<std::string> classes;
  std::vector<std::vector<NeuronId>> per_class;
  std::map<NeuronId, ClassIndex> contributed_by;

  std::size_t num_features() const noexcept {
    return per_class.empty() ? 0 : per_class.front().size();
  }
};

struct MergedNeurons {
  std::vector<NeuronId> ids;
  std::vector<ClassIndex> contributors;  // parallel to ids
};

/// Round-robin over classes in vocabulary order, each class giving its next
/// neuron not yet taken, until `budget` neurons are collected.
inline MergedNeurons merge_ranking(const NeuronRanking& r, std::size_t budget) {
  const auto f = r.num_features();
  if (budget < 1 || budget > f) {
    throw Error(Errc::budget_out_of_range, "neuron-analysis.merge_ranking",
                "budget " + std::to_string(budget) + " outside [1, " + std::to_string(f) + "]");
  }
  MergedNeurons out;
  std::set<NeuronId> taken;
  std::vector<std::size_t> cursor(r.per_class.size(), 0);
  while (out.ids.size() < budget) {
    bool progressed = false;
    for (std::size_t c = 0; c < r.per_class.size() && out.ids.size() < budget; ++c) {
      const auto& list = r.per_class[c];
      while (cursor[c] < list.size() && taken.count(list[cursor[c]])) ++cursor[c];
      if (cursor[c] == list.size()) continue;
      const auto id = list[cursor[c]++];
      taken.insert(id);
      out.ids.push_back(id);
      out.contributors.push_back(static_cast<ClassIndex>(c));
      progressed = true;
    }
    if (!progressed) break;
  }
  return out;
}

inline NeuronRanking rank_neurons(const LinearProbe& probe) {
  NeuronRanking r;
  r.classes = probe.classes;
  const auto f = probe.num_features();
  for (std::size_t c = 0; c < probe.num_classes(); ++c) {
    const auto w = probe.weights.row(c);
    std::vector<std::size_t> idx(f);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const float wa = std::fabs(w[a]), wb = std::fabs(w[b]);
      if (wa != wb) return wa > wb;
      return probe.feature_ids[a] < probe.feature_ids[b];
    });
    std::vector<NeuronId> ids(f);
    for (std::size_t k = 0; k < f; ++k) ids[k] = probe.feature_ids[idx[k]];
    r.per_class.push_back(std::move(ids));
  }
  if (f > 0) {
    const auto all = merge_ranking(r, f);
    for (std::size_t k = 0; k < all.ids.size(); ++k)
      r.contributed_by[all.ids[k]] = all.contributors[k];
  }
  return r;
}

/// Elastic-net probe over all layers (train-split znorm, lambdas chosen on
/// dev) and the ranking derived from its weights.
struct LcaResult {
  GridSearchResult search;
  ZNormParams znorm;
  NeuronRanking ranking;
};

inline LcaResult linguistic_correlation(const AlignedDataset& ds, const TrainConfig& cfg,
                                        std::span<const double> l1_grid,
                                        std::span<const double> l2_grid) {
  const auto columns = FeatureSelector::concat().columns(ds.num_layers, ds.hidden_size);
  LcaResult out;
  auto m = prepare_splits(ds, columns, &out.znorm);
  out.search = grid_search(m.train, m.train_y, m.dev, m.dev_y, l1_grid, l2_grid, cfg,
                           ds.label_vocab, columns);
  out.ranking = rank_neurons(out.search.probe);
  return out;
}

/// Fresh probe on only the given neurons (znorm refit on that subset),
/// scored on the test split.
inline EvalReport retrain_subset(const AlignedDataset& ds, std::span<const NeuronId> neurons,
                                 const TrainConfig& cfg) {
  if (neurons.empty()) {
    throw Error(Errc::empty_subset, "neuron-analysis.retrain_subset", "no neurons selected");
  }
  const auto columns = FeatureSelector::subset({neurons.begin(), neurons.end()})
                           .columns(ds.num_layers, ds.hidden_size);
  return fit_and_evaluate(ds, columns, cfg).test;
}

/// round-half-up of percent * F / 100, clamped to [1, F].
inline std::size_t budget_for_percent(double percent, std::size_t num_features) {
  const auto b = static_cast<std::size_t>(
      std::floor(percent * static_cast<double>(num_features) / 100.0 + 0.5));
  return std::clamp<std::size_t>(b, 1, num_features);
}

inline const std::vector<double>& default_percent_grid() {
  static const std::vector<double> grid{3, 5, 7, 10, 20, 50, 100};
  return grid;
}

struct SelectionStep {
  double percent = 0.0;
  std::size_t budget = 0;
  double accuracy = 0.0;
  bool met_threshold = false;
};

struct SelectionResult {
  std::vector<NeuronId> selected;        // in merge order
  std::vector<ClassIndex> contributors;  // parallel to selected
  double percent = 0.0;
  double retrained_accuracy = 0.0;
  double oracle_accuracy = 0.0;
  double delta = 1.0;  // percentage points
  bool met_threshold = false;
  std::vector<SelectionStep> steps;
};

/// Smallest grid percentage whose retrained probe reaches oracle - delta
/// points; the largest percentage (flagged unmet) when none does.
inline SelectionResult minimal_set(const AlignedDataset& ds, const NeuronRanking& ranking,
                                   double oracle, std::span<const double> percent_grid,
                                   double delta, const TrainConfig& cfg) {
  constexpr const char* where = "neuron-analysis.minimal_set";
  if (percent_grid.empty()) throw Error(Errc::invalid_config, where, "percent grid is empty");
  for (std::size_t i = 0; i < percent_grid.size(); ++i) {
    if (!(percent_grid[i] > 0.0 && percent_grid[i] <= 100.0) ||
        (i > 0 && percent_grid[i] <= percent_grid[i - 1])) {
      throw Error(Errc::invalid_config, where, "percent grid must ascend within (0, 100]");
    }
  }
  const auto f = ranking.num_features();
  SelectionResult result;
  result.oracle_accuracy = oracle;
  result.delta = delta;
  std::optional<std::size_t> chosen;
  MergedNeurons chosen_set;
  for (std::size_t i = 0; i < percent_grid.size(); ++i) {
    const auto budget = budget_for_percent(percent_grid[i], f);
    auto merged = merge_ranking(ranking, budget);
    const double acc = retrain_subset(ds, merged.ids, cfg).accuracy;
    const bool met = acc >= oracle - delta / 100.0;
    result.steps.push_back({percent_grid[i], budget, acc, met});
    if (met && !chosen) {
      chosen = i;
      chosen_set = std::move(merged);
      // later grid points still run so the report shows the full curve
    } else if (!chosen && i + 1 == percent_grid.size()) {
      chosen_set = std::move(merged);
    }
  }
  const auto pick = chosen.value_or(percent_grid.size() - 1);
  result.selected = std::move(chosen_set.ids);
  result.contributors = std::move(chosen_set.contributors);
  result.percent = result.steps[pick].percent;
  result.retrained_accuracy = result.steps[pick].accuracy;
  result.met_threshold = chosen.has_value();
  return result;
}

/// Oracle from the layer curve, ranking from the elastic-net probe, then the
/// grid search over percentages.
inline SelectionResult minimal_set(const AlignedDataset& ds, std::span<const double> percent_grid,
                                   double delta, const TrainConfig& cfg,
                                   std::span<const double> l1_grid = default_lambda_grid(),
                                   std::span<const double> l2_grid = default_lambda_grid()) {
  const auto curve = layer_curve(ds, cfg);
  const auto lca = linguistic_correlation(ds, cfg, l1_grid, l2_grid);
  return minimal_set(ds, lca.ranking, oracle_accuracy(curve), percent_grid, delta, cfg);
}

inline nlohmann::json to_json(const NeuronRanking& r) {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) classes[r.classes[c]] = r.per_class[c];
  nlohmann::json contributed = nlohmann::json::object();
  for (const auto& [id, cls] : r.contributed_by) {
    contributed[std::to_string(id)] = r.classes[static_cast<std::size_t>(cls)];
  }
  return {{"classes", std::move(classes)}, {"contributed_by", std::move(contributed)}};
}

inline nlohmann::json to_json(const SelectionResult& s, const std::vector<std::string>& classes) {
  nlohmann::json contributors = nlohmann::json::array();
  for (auto c : s.contributors) contributors.push_back(classes[static_cast<std::size_t>(c)]);
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : s.steps) {
    steps.push_back({{"percent", st.percent},
                     {"budget", st.budget},
                     {"accuracy", st.accuracy},
                     {"met_threshold", st.met_threshold}});
  }
  return {{"selected", s.selected},
          {"contributed_by", std::move(contributors)},
          {"percent", s.percent},
          {"retrained_accuracy", s.retrained_accuracy},
          {"oracle_accuracy", s.oracle_accuracy},
          {"delta", s.delta},
          {"met_threshold", s.met_threshold},
          {"grid", std::move(steps)}};
}

}  // namespace nprobe
