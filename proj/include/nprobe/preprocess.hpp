#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "nprobe/corpus.hpp"
#include "nprobe/error.hpp"
#include "nprobe/matrix.hpp"

namespace nprobe {

/// Global neuron id: layer * hidden_size + offset, embedding layer first.
using NeuronId = std::size_t;

constexpr std::size_t layer_of(NeuronId g, std::size_t hidden_size) noexcept {
  return g / hidden_size;
}
constexpr std::size_t offset_of(NeuronId g, std::size_t hidden_size) noexcept {
  return g % hidden_size;
}
constexpr NeuronId neuron_id(std::size_t layer, std::size_t offset,
                             std::size_t hidden_size) noexcept {
  return layer * hidden_size + offset;
}

inline constexpr double kDegenerateStd = 1e-8;

struct ZNormParams {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t width() const noexcept { return mean.size(); }
  bool degenerate(std::size_t j) const noexcept { return stddev[j] < kDegenerateStd; }
  std::size_t num_degenerate() const noexcept {
    std::size_t n = 0;
    for (std::size_t j = 0; j < width(); ++j) n += degenerate(j);
    return n;
  }
};

/// Population mean and standard deviation per column (divides by N).
inline ZNormParams fit_znorm(const Matrix& train) {
  if (train.rows() < 2) {
    throw Error(Errc::too_few_rows, "preprocess.fit_znorm",
                "need at least 2 training rows, got " + std::to_string(train.rows()));
  }
  const auto n = static_cast<double>(train.rows());
  std::vector<double> sum(train.cols(), 0.0);
  for (std::size_t r = 0; r < train.rows(); ++r) {
    auto row = train.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) sum[j] += row[j];
  }
  std::vector<double> mean(train.cols());
  for (std::size_t j = 0; j < mean.size(); ++j) mean[j] = sum[j] / n;
  std::vector<double> sq(train.cols(), 0.0);
  for (std::size_t r = 0; r < train.rows(); ++r) {
    auto row = train.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double d = row[j] - mean[j];
      sq[j] += d * d;
    }
  }
  ZNormParams p;
  p.mean.resize(train.cols());
  p.stddev.resize(train.cols());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    p.mean[j] = mean[j];
    p.stddev[j] = std::sqrt(sq[j] / n);
  }
  return p;
}

/// (x - mean) / std per column; degenerate columns become exactly 0.
inline Matrix apply_znorm(const ZNormParams& params, const Matrix& features) {
  if (features.cols() != params.width()) {
    throw Error(Errc::width_mismatch, "preprocess.apply_znorm",
                "features have " + std::to_string(features.cols()) + " columns, params " +
                    std::to_string(params.width()));
  }
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto src = features.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) {
      dst[j] = params.degenerate(j)
                   ? 0.0f
                   : static_cast<float>((static_cast<double>(src[j]) - params.mean[j]) /
                                        params.stddev[j]);
    }
  }
  return out;
}

/// Which columns of the L*H activation space a probe sees.
class FeatureSelector {
 public:
  enum class Mode { single_layer, concat_all, neuron_subset };

  static FeatureSelector layer(std::size_t k) { return FeatureSelector(Mode::single_layer, k, {}); }
  static FeatureSelector concat() { return FeatureSelector(Mode::concat_all, 0, {}); }
  static FeatureSelector subset(std::set<NeuronId> ids) {
    return FeatureSelector(Mode::neuron_subset, 0, std::move(ids));
  }

  Mode mode() const noexcept { return mode_; }
  std::size_t layer_index() const noexcept { return layer_; }
  const std::set<NeuronId>& neurons() const noexcept { return neurons_; }

  /// Global ids of the selected columns, ascending.
  std::vector<NeuronId> columns(std::size_t num_layers, std::size_t hidden_size) const {
    constexpr const char* where = "preprocess.select_features";
    std::vector<NeuronId> ids;
    switch (mode_) {
      case Mode::single_layer:
        if (layer_ >= num_layers) {
          throw Error(Errc::index_out_of_range, where,
                      "layer " + std::to_string(layer_) + " of " + std::to_string(num_layers));
        }
        ids.resize(hidden_size);
        std::iota(ids.begin(), ids.end(), layer_ * hidden_size);
        break;
      case Mode::concat_all:
        ids.resize(num_layers * hidden_size);
        std::iota(ids.begin(), ids.end(), NeuronId{0});
        break;
      case Mode::neuron_subset:
        for (auto g : neurons_) {
          if (g >= num_layers * hidden_size) {
            throw Error(Errc::index_out_of_range, where,
                        "neuron " + std::to_string(g) + " outside " +
                            std::to_string(num_layers * hidden_size));
          }
        }
        ids.assign(neurons_.begin(), neurons_.end());
        break;
    }
    return ids;
  }

 private:
  FeatureSelector(Mode m, std::size_t k, std::set<NeuronId> ids)
      : mode_(m), layer_(k), neurons_(std::move(ids)) {}

  Mode mode_;
  std::size_t layer_;
  std::set<NeuronId> neurons_;
};

inline Matrix select_features(const AlignedDataset& ds, const FeatureSelector& sel) {
  const auto cols = sel.columns(ds.num_layers, ds.hidden_size);
  if (sel.mode() == FeatureSelector::Mode::concat_all) return ds.features;
  return ds.features.take_cols(cols);
}

/// Half-open range [begin, end) of subword positions forming one word.
struct SubwordRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Mean of each word's subword vectors. Ranges must be non-empty and tile
/// [0, subword_vectors.size()) in order.
inline std::vector<std::vector<float>> aggregate_subwords(
    std::span<const std::vector<float>> subword_vectors, std::span<const SubwordRange> ranges) {
  constexpr const char* where = "preprocess.aggregate_subwords";
  std::size_t expected = 0;
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    const auto& r = ranges[w];
    if (r.end <= r.begin) {
      throw Error(Errc::empty_range, where, "word " + std::to_string(w) + " has no subwords");
    }
    if (r.begin != expected) {
      throw Error(Errc::overlapping_ranges, where,
                  "word " + std::to_string(w) + " starts at subword " + std::to_string(r.begin) +
                      ", expected " + std::to_string(expected));
    }
    expected = r.end;
  }
  if (expected != subword_vectors.size()) {
    throw Error(Errc::index_out_of_range, where,
                "ranges cover " + std::to_string(expected) + " of " +
                    std::to_string(subword_vectors.size()) + " subwords");
  }

  std::vector<std::vector<float>> words;
  words.reserve(ranges.size());
  for (const auto& r : ranges) {
    const auto dim = subword_vectors[r.begin].size();
    std::vector<double> acc(dim, 0.0);
    for (std::size_t s = r.begin; s < r.end; ++s) {
      if (subword_vectors[s].size() != dim) {
        throw Error(Errc::width_mismatch, where, "subword vectors differ in width");
      }
      for (std::size_t d = 0; d < dim; ++d) acc[d] += subword_vectors[s][d];
    }
    const auto n = static_cast<double>(r.end - r.begin);
    std::vector<float> mean(dim);
    for (std::size_t d = 0; d < dim; ++d) mean[d] = static_cast<float>(acc[d] / n);
    words.push_back(std::move(mean));
  }
  return words;
}

}  // namespace nprobe
