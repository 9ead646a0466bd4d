#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nprobe/corpus.hpp"
#include "nprobe/detail/float_format.hpp"
#include "nprobe/error.hpp"
#include "nprobe/matrix.hpp"
#include "nprobe/preprocess.hpp"
#include "nprobe/random.hpp"

namespace nprobe {

/// Optimizer and regularization settings. Defaults: Adam, 10 epochs of
/// shuffled mini-batches of 512, no regularization.
struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 512;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l1 = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;

  void check() const {
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0) || l1 < 0 || l2 < 0) {
      throw Error(Errc::invalid_config, "probe-trainer.train",
                  "epochs and batch_size must be >= 1, learning_rate > 0, lambdas >= 0");
    }
  }
};

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  return grid;
}

/// Multinomial logistic regression: one weight row and one bias per class.
struct LinearProbe {
  std::vector<std::string> classes;
  std::vector<NeuronId> feature_ids;
  Matrix weights;  // classes x features
  std::vector<float> bias;

  std::size_t num_classes() const noexcept { return weights.rows(); }
  std::size_t num_features() const noexcept { return weights.cols(); }

  void scores(std::span<const float> x, std::span<double> out) const noexcept {
    for (std::size_t c = 0; c < num_classes(); ++c) {
      auto w = weights.row(c);
      double z = bias[c];
      for (std::size_t j = 0; j < w.size(); ++j) z += static_cast<double>(w[j]) * x[j];
      out[c] = z;
    }
  }

  /// Argmax of the class scores, lowest index on ties.
  ClassIndex predict(std::span<const float> x) const {
    std::vector<double> z(num_classes());
    scores(x, z);
    return static_cast<ClassIndex>(std::max_element(z.begin(), z.end()) - z.begin());
  }
};

namespace detail {
inline constexpr std::uint64_t kShuffleStream = 0x7368756666ull;  // "shuff"

inline void check_labels(std::span<const ClassIndex> labels, std::size_t num_classes,
                         const char* where) {
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw Error(
          Errc::index_out_of_range, where,
          "label " + std::to_string(y) + " outside " + std::to_string(num_classes) + " classes");
    }
  }
}
}  // namespace detail

/// Minimizes mean cross-entropy + l1 * mean|W| + l2 * mean(W^2) with Adam over
/// shuffled mini-batches. The bias is not regularized. Parameters start at
/// zero and each epoch's order comes from (seed, epoch), so two runs with the
/// same inputs produce bitwise-identical probes.
inline LinearProbe train(const Matrix& features, std::span<const ClassIndex> labels,
                         std::vector<std::string> classes, std::vector<NeuronId> feature_ids,
                         const TrainConfig& cfg) {
  constexpr const char* where = "probe-trainer.train";
  cfg.check();
  const auto n = features.rows();
  const auto f = features.cols();
  const auto c = classes.size();
  if (labels.size() != n) {
    throw Error(Errc::width_mismatch, where, "label count differs from row count");
  }
  if (feature_ids.size() != f) {
    throw Error(Errc::width_mismatch, where, "feature_ids length differs from column count");
  }
  if (n < 1) throw Error(Errc::empty_eval_set, where, "no training rows");
  detail::check_labels(labels, c, where);
  {
    std::vector<bool> present(c, false);
    for (auto y : labels) present[static_cast<std::size_t>(y)] = true;
    if (std::count(present.begin(), present.end(), true) < 2) {
      throw Error(Errc::single_class, where, "training labels contain fewer than 2 classes");
    }
  }
  for (float x : features.values()) {
    if (!std::isfinite(x)) throw Error(Errc::non_finite_feature, where, "non-finite feature");
  }

  LinearProbe probe;
  probe.classes = std::move(classes);
  probe.feature_ids = std::move(feature_ids);
  probe.weights = Matrix(c, f);
  probe.bias.assign(c, 0.0f);

  const auto params = c * f;
  std::vector<double> grad_w(params), m_w(params, 0.0), v_w(params, 0.0);
  std::vector<double> grad_b(c), m_b(c, 0.0), v_b(c, 0.0);
  std::vector<double> z(c);
  const double l1_scale = cfg.l1 / static_cast<double>(params);
  const double l2_scale = 2.0 * cfg.l2 / static_cast<double>(params);
  double beta1_t = 1.0, beta2_t = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = counter_permutation(n, cfg.seed, detail::kShuffleStream + epoch);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const auto stop = std::min(n, start + cfg.batch_size);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto row = features.row(order[k]);
        const auto y = static_cast<std::size_t>(labels[order[k]]);
        probe.scores(row, z);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (auto& s : z) {
          s = std::exp(s - zmax);
          denom += s;
        }
        for (std::size_t cls = 0; cls < c; ++cls) {
          const double delta = z[cls] / denom - (cls == y ? 1.0 : 0.0);
          grad_b[cls] += delta;
          double* g = grad_w.data() + cls * f;
          for (std::size_t j = 0; j < f; ++j) g[j] += delta * row[j];
        }
      }

      const double inv_b = 1.0 / static_cast<double>(stop - start);
      beta1_t *= cfg.beta1;
      beta2_t *= cfg.beta2;
      const double alpha = cfg.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      // folded bias correction; same update as m_hat / (sqrt(v_hat) + epsilon)
      const double eps = cfg.epsilon * std::sqrt(1.0 - beta2_t);
      auto values = probe.weights.values();
      for (std::size_t i = 0; i < params; ++i) {
        const double w = values[i];
        const double sign = w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0);
        const double g = grad_w[i] * inv_b + l1_scale * sign + l2_scale * w;
        m_w[i] = cfg.beta1 * m_w[i] + (1.0 - cfg.beta1) * g;
        v_w[i] = cfg.beta2 * v_w[i] + (1.0 - cfg.beta2) * g * g;
        values[i] = static_cast<float>(w - alpha * m_w[i] / (std::sqrt(v_w[i]) + eps));
      }
      for (std::size_t cls = 0; cls < c; ++cls) {
        const double g = grad_b[cls] * inv_b;
        m_b[cls] = cfg.beta1 * m_b[cls] + (1.0 - cfg.beta1) * g;
        v_b[cls] = cfg.beta2 * v_b[cls] + (1.0 - cfg.beta2) * g * g;
        probe.bias[cls] =
            static_cast<float>(probe.bias[cls] - alpha * m_b[cls] / (std::sqrt(v_b[cls]) + eps));
      }
    }
  }
  return probe;
}

/// Convenience form: classes named "0".."C-1", feature ids 0..F-1.
inline LinearProbe train(const Matrix& features, std::span<const ClassIndex> labels,
                         std::size_t num_classes, const TrainConfig& cfg) {
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < num_classes; ++i) classes.push_back(std::to_string(i));
  std::vector<NeuronId> ids(features.cols());
  std::iota(ids.begin(), ids.end(), NeuronId{0});
  return train(features, labels, std::move(classes), std::move(ids), cfg);
}

inline std::vector<ClassIndex> predict(const LinearProbe& probe, const Matrix& features) {
  if (features.cols() != probe.num_features()) {
    throw Error(Errc::width_mismatch, "probe-trainer.evaluate",
                "features have " + std::to_string(features.cols()) + " columns, probe expects " +
                    std::to_string(probe.num_features()));
  }
  std::vector<ClassIndex> out(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) out[r] = probe.predict(features.row(r));
  return out;
}

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t total = 0;
  std::vector<ClassStats> per_class;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

inline EvalReport evaluate(const LinearProbe& probe, const Matrix& features,
                           std::span<const ClassIndex> labels) {
  constexpr const char* where = "probe-trainer.evaluate";
  if (features.rows() == 0) throw Error(Errc::empty_eval_set, where, "no rows to evaluate");
  if (labels.size() != features.rows()) {
    throw Error(Errc::width_mismatch, where, "label count differs from row count");
  }
  const auto c = probe.num_classes();
  detail::check_labels(labels, c, where);
  const auto pred = predict(probe, features);

  EvalReport rep;
  rep.total = labels.size();
  rep.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++rep.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(pred[i])];
  }
  std::size_t correct = 0;
  rep.per_class.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    correct += rep.confusion[k][k];
    std::size_t predicted = 0, support = 0;
    for (std::size_t j = 0; j < c; ++j) {
      support += rep.confusion[k][j];
      predicted += rep.confusion[j][k];
    }
    rep.per_class[k].support = support;
    rep.per_class[k].recall = support ? double(rep.confusion[k][k]) / double(support) : 0.0;
    rep.per_class[k].precision = predicted ? double(rep.confusion[k][k]) / double(predicted) : 0.0;
  }
  rep.accuracy = double(correct) / double(rep.total);
  return rep;
}

struct GridPoint {
  double l1 = 0.0;
  double l2 = 0.0;
  double dev_accuracy = 0.0;
};

struct GridSearchResult {
  double l1 = 0.0;
  double l2 = 0.0;
  LinearProbe probe;
  double dev_accuracy = 0.0;
  std::vector<GridPoint> points;
};

/// Trains one probe per (l1, l2) pair and keeps the best dev accuracy.
/// Ties go to the larger l1, then the larger l2.
inline GridSearchResult grid_search(const Matrix& train_x, std::span<const ClassIndex> train_y,
                                    const Matrix& dev_x, std::span<const ClassIndex> dev_y,
                                    std::span<const double> l1_grid,
                                    std::span<const double> l2_grid, const TrainConfig& cfg,
                                    const std::vector<std::string>& classes,
                                    const std::vector<NeuronId>& feature_ids) {
  if (l1_grid.empty() || l2_grid.empty()) {
    throw Error(Errc::invalid_config, "probe-trainer.grid_search",
                "lambda grids must be non-empty");
  }
  GridSearchResult best;
  bool have = false;
  for (double l1 : l1_grid) {
    for (double l2 : l2_grid) {
      auto point_cfg = cfg;
      point_cfg.l1 = l1;
      point_cfg.l2 = l2;
      auto probe = train(train_x, train_y, classes, feature_ids, point_cfg);
      const double acc = evaluate(probe, dev_x, dev_y).accuracy;
      best.points.push_back({l1, l2, acc});
      const bool better =
          !have || acc > best.dev_accuracy ||
          (acc == best.dev_accuracy && (l1 > best.l1 || (l1 == best.l1 && l2 > best.l2)));
      if (better) {
        best.l1 = l1;
        best.l2 = l2;
        best.probe = std::move(probe);
        best.dev_accuracy = acc;
        have = true;
      }
    }
  }
  return best;
}

inline GridSearchResult grid_search(const Matrix& train_x, std::span<const ClassIndex> train_y,
                                    const Matrix& dev_x, std::span<const ClassIndex> dev_y,
                                    std::span<const double> l1_grid,
                                    std::span<const double> l2_grid, const TrainConfig& cfg,
                                    std::size_t num_classes) {
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < num_classes; ++i) classes.push_back(std::to_string(i));
  std::vector<NeuronId> ids(train_x.cols());
  std::iota(ids.begin(), ids.end(), NeuronId{0});
  return grid_search(train_x, train_y, dev_x, dev_y, l1_grid, l2_grid, cfg, classes, ids);
}

/// Task accuracy minus control-task accuracy.
constexpr double selectivity(double task_accuracy, double control_accuracy) noexcept {
  return task_accuracy - control_accuracy;
}

inline nlohmann::json to_json(const LinearProbe& probe) {
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t c = 0; c < probe.num_classes(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (float w : probe.weights.row(c)) row.push_back(detail::json_number(w));
    weights.push_back(std::move(row));
  }
  nlohmann::json bias = nlohmann::json::array();
  for (float b : probe.bias) bias.push_back(detail::json_number(b));
  return {{"classes", probe.classes},
          {"feature_ids", probe.feature_ids},
          {"weights", std::move(weights)},
          {"bias", std::move(bias)}};
}

inline LinearProbe probe_from_json(const nlohmann::json& j) {
  constexpr const char* where = "probe-trainer.load_probe";
  try {
    LinearProbe p;
    p.classes = j.at("classes").get<std::vector<std::string>>();
    p.feature_ids = j.at("feature_ids").get<std::vector<NeuronId>>();
    const auto& w = j.at("weights");
    p.weights = Matrix(p.classes.size(), p.feature_ids.size());
    if (w.size() != p.classes.size()) throw Error(Errc::format_mismatch, where, "weights rows");
    for (std::size_t c = 0; c < w.size(); ++c) {
      if (w[c].size() != p.feature_ids.size()) {
        throw Error(Errc::format_mismatch, where, "weights row width");
      }
      for (std::size_t f = 0; f < w[c].size(); ++f) p.weights(c, f) = w[c][f].get<float>();
    }
    p.bias = j.at("bias").get<std::vector<float>>();
    if (p.bias.size() != p.classes.size()) throw Error(Errc::format_mismatch, where, "bias size");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format_mismatch, where, e.what());
  }
}

}  // namespace nprobe
