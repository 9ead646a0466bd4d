#include "nprobe/preprocess.hpp"

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace nprobe {
namespace {

Matrix column(std::initializer_list<float> v) {
  Matrix m(v.size(), 1);
  std::size_t i = 0;
  for (float x : v) m(i++, 0) = x;
  return m;
}

TEST(ZNorm, PopulationStatistics) {
  const auto p = fit_znorm(column({1, 2, 3}));
  EXPECT_DOUBLE_EQ(p.mean[0], 2.0);
  // sqrt(2/3), population formula
  EXPECT_NEAR(p.stddev[0], 0.816497, 1e-6);
  EXPECT_FALSE(p.degenerate(0));
}

TEST(ZNorm, ConstantColumnIsDegenerateAndMapsToZero) {
  const auto p = fit_znorm(column({5, 5, 5}));
  EXPECT_EQ(p.stddev[0], 0.0);
  EXPECT_TRUE(p.degenerate(0));
  const auto out = apply_znorm(p, column({5, -3, 1e6}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out(i, 0), 0.0f);
}

TEST(ZNorm, SingleRowIsTooFew) {
  try {
    fit_znorm(column({1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_few_rows);
  }
}

TEST(ZNorm, AppliesTrainStatisticsToOtherRows) {
  ZNormParams p{{1.0}, {1.0}};
  EXPECT_FLOAT_EQ(apply_znorm(p, column({3}))(0, 0), 2.0f);

  const auto train = column({1, 2, 3});
  const auto z = apply_znorm(fit_znorm(train), train);
  // (x - 2) / sqrt(2/3)
  EXPECT_NEAR(z(0, 0), -1.224745, 1e-6);
  EXPECT_EQ(z(1, 0), 0.0f);
  EXPECT_NEAR(z(2, 0), 1.224745, 1e-6);
}

TEST(ZNorm, WidthMismatch) {
  ZNormParams p{{0, 0}, {1, 1}};
  try {
    apply_znorm(p, column({1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::width_mismatch);
  }
}

// Property: normalized training columns have zero mean and unit std, checked
// with an independent double-precision computation. The last column has an
// offset six orders above its spread.
TEST(ZNorm, NormalizedTrainingColumnsAreStandard) {
  CounterRng rng(5, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m(50 + trial * 13, 7);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const double scale = c == 6 ? 1e-3 : (c + 1) * 3.0;
        const double offset = c == 6 ? 1000.0 : 100.0 * c - 40.0;
        m(r, c) = static_cast<float>(rng.normal() * scale + offset);
      }
    }
    const auto z = apply_znorm(fit_znorm(m), m);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::vector<double> col;
      for (std::size_t r = 0; r < m.rows(); ++r) col.push_back(z(r, c));
      EXPECT_LT(std::abs(testing::population_mean(col)), 1e-5);
      EXPECT_LT(std::abs(testing::population_std(col) - 1.0), 1e-5);
    }
  }
}

TEST(NeuronIds, DivModScheme) {
  EXPECT_EQ(layer_of(0, 768), 0u);
  EXPECT_EQ(layer_of(767, 768), 0u);
  EXPECT_EQ(layer_of(768, 768), 1u);
  EXPECT_EQ(offset_of(768, 768), 0u);
  EXPECT_EQ(neuron_id(12, 767, 768), 9983u);
}

AlignedDataset tiny_dataset(std::size_t layers, std::size_t hidden) {
  AlignedDataset ds;
  ds.num_layers = layers;
  ds.hidden_size = hidden;
  ds.features = Matrix(2, layers * hidden);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < layers * hidden; ++c) ds.features(r, c) = float(r * 1000 + c);
  }
  return ds;
}

TEST(SelectFeatures, SingleLayerColumns) {
  const auto ds = tiny_dataset(2, 3);
  const auto m = select_features(ds, FeatureSelector::layer(1));
  ASSERT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(0, 0), 3.0f);
  EXPECT_EQ(m(1, 2), 1005.0f);
  EXPECT_EQ(FeatureSelector::layer(1).columns(2, 3), (std::vector<NeuronId>{3, 4, 5}));
}

TEST(SelectFeatures, SubsetIsAscendingAcrossLayers) {
  const auto sel = FeatureSelector::subset({768, 0, 767});
  const auto ids = sel.columns(13, 768);
  EXPECT_EQ(ids, (std::vector<NeuronId>{0, 767, 768}));
  std::vector<std::size_t> layers;
  for (auto g : ids) layers.push_back(layer_of(g, 768));
  EXPECT_EQ(layers, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(SelectFeatures, ConcatWidthForBaseSizedModel) {
  EXPECT_EQ(FeatureSelector::concat().columns(13, 768).size(), 9984u);
  EXPECT_EQ(FeatureSelector::concat().columns(13, 256).size(), 3328u);
}

TEST(SelectFeatures, OutOfRange) {
  const auto ds = tiny_dataset(2, 3);
  for (const auto& sel : {FeatureSelector::layer(2), FeatureSelector::subset({6})}) {
    try {
      select_features(ds, sel);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::index_out_of_range);
    }
  }
}

// Property: concat then slicing [kH, (k+1)H) equals the single-layer view.
TEST(SelectFeatures, ConcatSliceEqualsLayer) {
  const auto ds = tiny_dataset(4, 5);
  const auto all = select_features(ds, FeatureSelector::concat());
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::size_t> cols;
    for (std::size_t j = k * 5; j < (k + 1) * 5; ++j) cols.push_back(j);
    EXPECT_EQ(all.take_cols(cols), select_features(ds, FeatureSelector::layer(k)));
  }
}

TEST(AggregateSubwords, MeanPerDimension) {
  const std::vector<std::vector<float>> sub = {{1, 3}, {3, 5}, {7, 7}};
  const std::vector<SubwordRange> ranges = {{0, 2}, {2, 3}};
  const auto w = aggregate_subwords(sub, ranges);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0], (std::vector<float>{2, 4}));
  EXPECT_EQ(w[1], (std::vector<float>{7, 7}));
}

TEST(AggregateSubwords, IdentityOnSingleSubwordWords) {
  const std::vector<std::vector<float>> sub = {{0.1f, -2.5f}, {3e-8f, 1e9f}};
  const std::vector<SubwordRange> ranges = {{0, 1}, {1, 2}};
  const auto once = aggregate_subwords(sub, ranges);
  EXPECT_EQ(once, sub);
  EXPECT_EQ(aggregate_subwords(once, ranges), once);
}

TEST(AggregateSubwords, RangeErrors) {
  const std::vector<std::vector<float>> sub = {{1}, {2}, {3}};
  auto code = [&](std::vector<SubwordRange> r) {
    try {
      aggregate_subwords(sub, r);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::io_failure;
  };
  EXPECT_EQ(code({{0, 1}, {1, 1}, {1, 3}}), Errc::empty_range);
  EXPECT_EQ(code({{0, 2}, {1, 3}}), Errc::overlapping_ranges);
  EXPECT_EQ(code({{0, 1}, {1, 2}}), Errc::index_out_of_range);
}

}  // namespace
}  // namespace nprobe
