#pragma once

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "nprobe/activations.hpp"
#include "nprobe/corpus.hpp"
#include "nprobe/layer_analysis.hpp"
#include "nprobe/probe.hpp"

namespace nprobe {

struct SelectivityReport {
  double task_accuracy = 0.0;
  double control_accuracy = 0.0;
  double selectivity = 0.0;
  /// Control probe restricted to test words whose type never occurs in train.
  std::size_t unseen_words = 0;
  double control_accuracy_unseen = 0.0;
  /// Share of the unseen-type test words carrying the most frequent training
  /// control label.
  double majority_baseline_unseen = 0.0;
};

/// Trains the full-network probe on the real labels and on control labels
/// (same split, same training config) and reports their test accuracies.
inline SelectivityReport measure_selectivity(const ActivationDataset& acts,
                                             const TokenLabelCorpus& corpus,
                                             const SplitRatios& ratios, std::uint64_t split_seed,
                                             std::uint64_t control_seed, const TrainConfig& cfg) {
  const auto columns = FeatureSelector::concat().columns(acts.num_layers, acts.hidden_size);
  const auto task_ds = align(acts, corpus, ratios, split_seed);
  const auto task_run = fit_and_evaluate(task_ds, columns, cfg);

  const auto control_ds = align(acts, make_control(corpus, control_seed), ratios, split_seed);
  const auto m = prepare_splits(control_ds, columns);
  const auto probe = train(m.train, m.train_y, control_ds.label_vocab, columns, cfg);
  const auto control_eval = evaluate(probe, m.test, m.test_y);

  SelectivityReport rep;
  rep.task_accuracy = task_run.test.accuracy;
  rep.control_accuracy = control_eval.accuracy;
  rep.selectivity = selectivity(rep.task_accuracy, rep.control_accuracy);

  std::set<std::string> train_types;
  std::vector<std::size_t> train_counts(control_ds.num_classes(), 0);
  for (std::size_t i = 0; i < control_ds.num_words(); ++i) {
    if (control_ds.split[i] == Split::train) {
      train_types.insert(control_ds.words[i]);
      ++train_counts[static_cast<std::size_t>(control_ds.labels[i])];
    }
  }
  const auto majority = static_cast<ClassIndex>(
      std::max_element(train_counts.begin(), train_counts.end()) - train_counts.begin());
  const auto pred = predict(probe, m.test);
  std::size_t unseen = 0, correct = 0, majority_hits = 0, t = 0;
  for (std::size_t i = 0; i < control_ds.num_words(); ++i) {
    if (control_ds.split[i] != Split::test) continue;
    if (!train_types.count(control_ds.words[i])) {
      ++unseen;
      correct += pred[t] == control_ds.labels[i];
      majority_hits += control_ds.labels[i] == majority;
    }
    ++t;
  }
  rep.unseen_words = unseen;
  if (unseen) {
    rep.control_accuracy_unseen = double(correct) / double(unseen);
    rep.majority_baseline_unseen = double(majority_hits) / double(unseen);
  }
  return rep;
}

inline nlohmann::json to_json(const SelectivityReport& r) {
  return {{"task_accuracy", r.task_accuracy},
          {"control_accuracy", r.control_accuracy},
          {"selectivity", r.selectivity},
          {"unseen_type_words", r.unseen_words},
          {"control_accuracy_unseen_types", r.control_accuracy_unseen},
          {"majority_baseline_unseen_types", r.majority_baseline_unseen}};
}

}  // namespace nprobe
