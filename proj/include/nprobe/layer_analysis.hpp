#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "nprobe/corpus.hpp"
#include "nprobe/detail/csv.hpp"
#include "nprobe/detail/float_format.hpp"
#include "nprobe/preprocess.hpp"
#include "nprobe/probe.hpp"

namespace nprobe {

/// A probe trained on one feature set with train-split znorm, scored on dev
/// and test.
struct FeatureSetRun {
  std::vector<NeuronId> columns;
  ZNormParams znorm;
  LinearProbe probe;
  EvalReport dev;
  EvalReport test;
};

struct SplitMatrices {
  Matrix train, dev, test;
  std::vector<ClassIndex> train_y, dev_y, test_y;
};

/// Slices the given columns, fits znorm on the training rows and applies it to
/// all three splits.
inline SplitMatrices prepare_splits(const AlignedDataset& ds, std::span<const NeuronId> columns,
                                    ZNormParams* znorm_out = nullptr) {
  const auto train_rows = ds.rows_of(Split::train);
  const auto dev_rows = ds.rows_of(Split::dev);
  const auto test_rows = ds.rows_of(Split::test);
  Matrix cols = columns.size() == ds.width() ? ds.features : ds.features.take_cols(columns);
  const auto znorm = fit_znorm(cols.take_rows(train_rows));
  SplitMatrices m;
  m.train = apply_znorm(znorm, cols.take_rows(train_rows));
  m.dev = apply_znorm(znorm, cols.take_rows(dev_rows));
  m.test = apply_znorm(znorm, cols.take_rows(test_rows));
  m.train_y = ds.labels_of(Split::train);
  m.dev_y = ds.labels_of(Split::dev);
  m.test_y = ds.labels_of(Split::test);
  if (znorm_out) *znorm_out = znorm;
  return m;
}

inline FeatureSetRun fit_and_evaluate(const AlignedDataset& ds, std::vector<NeuronId> columns,
                                      const TrainConfig& cfg) {
  FeatureSetRun run;
  auto m = prepare_splits(ds, columns, &run.znorm);
  run.columns = std::move(columns);
  run.probe = train(m.train, m.train_y, ds.label_vocab, run.columns, cfg);
  run.dev = evaluate(run.probe, m.dev, m.dev_y);
  run.test = evaluate(run.probe, m.test, m.test_y);
  return run;
}

struct LayerCurve {
  std::string task;
  std::vector<double> test;  // per layer
  std::vector<double> dev;   // per layer
  double concat_test = 0.0;
  double concat_dev = 0.0;

  std::size_t num_layers() const noexcept { return test.size(); }
  std::size_t best_layer() const noexcept {
    return static_cast<std::size_t>(std::max_element(test.begin(), test.end()) - test.begin());
  }
};

/// One probe per layer plus one on all layers concatenated, every one with
/// the same config and seed.
inline LayerCurve layer_curve(const AlignedDataset& ds, const TrainConfig& cfg,
                              std::string task = "task") {
  LayerCurve curve;
  curve.task = std::move(task);
  for (std::size_t k = 0; k < ds.num_layers; ++k) {
    auto run =
        fit_and_evaluate(ds, FeatureSelector::layer(k).columns(ds.num_layers, ds.hidden_size), cfg);
    curve.test.push_back(run.test.accuracy);
    curve.dev.push_back(run.dev.accuracy);
  }
  auto all =
      fit_and_evaluate(ds, FeatureSelector::concat().columns(ds.num_layers, ds.hidden_size), cfg);
  curve.concat_test = all.test.accuracy;
  curve.concat_dev = all.dev.accuracy;
  return curve;
}

/// Reference accuracy for neuron selection: the better of the full network
/// and the best single layer.
inline double oracle_accuracy(const LayerCurve& curve) {
  double best = curve.concat_test;
  for (double a : curve.test) best = std::max(best, a);
  return best;
}

/// CSV columns task,layer,split,accuracy; the full-network probe is layer "concat".
inline void write_layer_curve_csv(const LayerCurve& curve, std::ostream& out) {
  out << "task,layer,split,accuracy\n";
  for (std::size_t k = 0; k < curve.num_layers(); ++k) {
    out << detail::csv_field(curve.task) << ',' << k << ",dev," << detail::shortest(curve.dev[k])
        << '\n';
    out << detail::csv_field(curve.task) << ',' << k << ",test," << detail::shortest(curve.test[k])
        << '\n';
  }
  out << detail::csv_field(curve.task) << ",concat,dev," << detail::shortest(curve.concat_dev)
      << '\n';
  out << detail::csv_field(curve.task) << ",concat,test," << detail::shortest(curve.concat_test)
      << '\n';
}

}  // namespace nprobe
