#include "nprobe/distribution.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "nprobe/layer_analysis.hpp"
#include "support/fixtures.hpp"

namespace nprobe {
namespace {

NeuronRanking ranking_of(std::vector<std::vector<NeuronId>> lists) {
  NeuronRanking r;
  for (std::size_t c = 0; c < lists.size(); ++c) r.classes.push_back(std::string(1, char('A' + c)));
  r.per_class = std::move(lists);
  const auto all = merge_ranking(r, r.num_features());
  for (std::size_t k = 0; k < all.ids.size(); ++k)
    r.contributed_by[all.ids[k]] = all.contributors[k];
  return r;
}

SelectionResult select(const NeuronRanking& r, std::size_t budget) {
  SelectionResult s;
  auto m = merge_ranking(r, budget);
  s.selected = std::move(m.ids);
  s.contributors = std::move(m.contributors);
  return s;
}

TEST(LayerDistribution, CountsByLayer) {
  const std::vector<NeuronId> ids{0, 767, 768};
  EXPECT_EQ(layer_distribution(ids, 13, 768),
            (std::vector<std::size_t>{2, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(layer_distribution({}, 3, 768), (std::vector<std::size_t>{0, 0, 0}));
  std::vector<NeuronId> layer3(768);
  std::iota(layer3.begin(), layer3.end(), NeuronId{3 * 768});
  const auto c = layer_distribution(layer3, 13, 768);
  EXPECT_EQ(c[3], 768u);
  EXPECT_EQ(std::accumulate(c.begin(), c.end(), std::size_t{0}), 768u);
}

TEST(LayerDistribution, RejectsOutOfRangeIds) {
  const std::vector<NeuronId> ids{13 * 768};
  try {
    layer_distribution(ids, 13, 768);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::index_out_of_range);
  }
}

TEST(PropertyCounts, FirstContributorOwnsNeuron) {
  const auto r = ranking_of({{3, 1, 0, 2}, {3, 2, 1, 0}});
  const auto s = select(r, 3);
  ASSERT_EQ(s.selected, (std::vector<NeuronId>{3, 2, 1}));
  EXPECT_EQ(property_counts(r, s), (std::vector<std::size_t>{2, 1}));
  const auto single = ranking_of({{2, 0, 1}});
  EXPECT_EQ(property_counts(single, select(single, 2)), (std::vector<std::size_t>{2}));
}

TEST(PropertyCounts, InconsistentInputs) {
  const auto r = ranking_of({{3, 1, 0, 2}, {3, 2, 1, 0}});
  auto s = select(r, 3);
  s.contributors[0] = 1;  // 3 came from A
  try {
    property_counts(r, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::inconsistent_inputs);
  }
  s = select(r, 3);
  s.contributors.pop_back();
  EXPECT_THROW(property_layer_matrix(r, s, 1, 4), Error);
}

TEST(PropertyLayerMatrix, RowsSplitByLayer) {
  const auto r = ranking_of({{0, 768, 1, 769}});
  const auto m = property_layer_matrix(r, select(r, 2), 13, 768);
  EXPECT_EQ(m[0][0], 1u);
  EXPECT_EQ(m[0][1], 1u);
  EXPECT_EQ(std::accumulate(m[0].begin(), m[0].end(), std::size_t{0}), 2u);
  SelectionResult empty;
  for (const auto& row : property_layer_matrix(r, empty, 13, 768)) {
    for (auto v : row) EXPECT_EQ(v, 0u);
  }
}

// Property: layer counts sum to the selection size; matrix rows sum to the
// property counts.
TEST(Distribution, SumsAgree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t l = 1 + seed % 5, h = 3 + seed % 7, c = 1 + seed % 4;
    std::vector<std::vector<NeuronId>> lists;
    for (std::size_t k = 0; k < c; ++k) lists.push_back(counter_permutation(l * h, seed, k));
    const auto r = ranking_of(lists);
    const auto s = select(r, 1 + seed % (l * h));
    const auto layers = layer_distribution(s.selected, l, h);
    EXPECT_EQ(std::accumulate(layers.begin(), layers.end(), std::size_t{0}), s.selected.size());
    const auto counts = property_counts(r, s);
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), s.selected.size());
    const auto m = property_layer_matrix(r, s, l, h);
    for (std::size_t k = 0; k < c; ++k) {
      EXPECT_EQ(std::accumulate(m[k].begin(), m[k].end(), std::size_t{0}), counts[k]);
    }
  }
}

TEST(Overlap, JaccardExamples) {
  const auto m = overlap_matrix({"A", "B", "C", "D"}, {{1, 2}, {2, 3}, {1, 2}, {7, 8}});
  EXPECT_DOUBLE_EQ(m.values[0][1], 1.0 / 3.0);
  EXPECT_EQ(m.intersections[0][1], 1u);
  EXPECT_EQ(m.values[0][2], 1.0);
  EXPECT_EQ(m.values[0][3], 0.0);
  EXPECT_EQ(m.sizes, (std::vector<std::size_t>{2, 2, 2, 2}));
}

TEST(Overlap, EmptySetsGiveZero) {
  const auto m = overlap_matrix({"A", "B"}, {{}, {1}});
  EXPECT_EQ(m.values[0][0], 0.0);
  EXPECT_EQ(m.values[1][1], 1.0);
}

// Property: symmetric, in [0,1], unit diagonal on non-empty sets.
TEST(Overlap, SymmetricUnitDiagonal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, 1);
    const std::size_t c = 2 + seed % 5;
    std::vector<std::vector<NeuronId>> sets(c);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < c; ++i) {
      labels.push_back(std::to_string(i));
      const auto n = 1 + rng.below(10);
      for (std::size_t k = 0; k < n; ++k) sets[i].push_back(rng.below(20));
    }
    const auto m = overlap_matrix(labels, sets);
    for (std::size_t i = 0; i < c; ++i) {
      EXPECT_EQ(m.values[i][i], 1.0);
      for (std::size_t j = 0; j < c; ++j) {
        EXPECT_EQ(m.values[i][j], m.values[j][i]);
        EXPECT_GE(m.values[i][j], 0.0);
        EXPECT_LE(m.values[i][j], 1.0);
      }
    }
  }
}

TEST(TopK, PrefixesWithOptionalLayerFilter) {
  const auto r = ranking_of({{5, 0, 6, 1, 2, 3, 4, 7}, {7, 6, 5, 4, 3, 2, 1, 0}});
  EXPECT_EQ(top_k_sets(r, 2, std::nullopt, 4),
            (std::vector<std::vector<NeuronId>>{{5, 0}, {7, 6}}));
  EXPECT_EQ(top_k_sets(r, 2, 0, 4), (std::vector<std::vector<NeuronId>>{{0, 1}, {3, 2}}));
  EXPECT_THROW(top_k_sets(r, 0, std::nullopt, 4), Error);
}

struct Selected {
  NeuronRanking ranking;
  SelectionResult selection;
};

Selected lca_selection(const synthetic::Spec& spec) {
  const auto fx = synthetic::generate(spec);
  const auto ds = align(fx.activations, fx.corpus, {}, spec.seed);
  const auto cfg = testing::fixture_config(spec.seed);
  const auto& grid = default_lambda_grid();
  auto lca = linguistic_correlation(ds, cfg, grid, grid);
  auto sel = minimal_set(ds, lca.ranking, oracle_accuracy(layer_curve(ds, cfg)),
                         default_percent_grid(), 1.0, cfg);
  return {std::move(lca.ranking), std::move(sel)};
}

std::size_t count_for(const Selected& s, const std::string& label) {
  const auto counts = property_counts(s.ranking, s.selection);
  for (std::size_t c = 0; c < s.ranking.classes.size(); ++c) {
    if (s.ranking.classes[c] == label) return counts[c];
  }
  return 0;
}

TEST(PropertyCounts, MorePlantedNeuronsNeedMoreBudget) {
  synthetic::Spec spec;
  spec.seed = 12;
  const auto ids = synthetic::distinct_neurons(25, 13, 64, 12);
  for (std::size_t i = 0; i < 25; ++i) {
    const ClassIndex c = i < 5 ? 0 : i < 20 ? 1 : 2;
    spec.plants.push_back({c, ids[i], 4.0f});
  }
  const auto s = lca_selection(spec);
  EXPECT_GE(count_for(s, "C1"), count_for(s, "C0"));
}

TEST(PropertyLayerMatrix, PlantedLayerDominatesRow) {
  synthetic::Spec spec;
  spec.seed = 13;
  for (auto g : synthetic::distinct_neurons(5, 13, 64, 13, 2)) spec.plants.push_back({0, g, 4.0f});
  for (auto g : synthetic::distinct_neurons(5, 13, 64, 14, 9)) spec.plants.push_back({1, g, 4.0f});
  for (auto g : synthetic::distinct_neurons(5, 13, 64, 15, 11)) spec.plants.push_back({2, g, 4.0f});
  const auto s = lca_selection(spec);
  const auto m = property_layer_matrix(s.ranking, s.selection, 13, 64);
  std::size_t a = 0;
  while (s.ranking.classes[a] != "C0") ++a;
  EXPECT_EQ(std::max_element(m[a].begin(), m[a].end()) - m[a].begin(), 2);
}

TEST(Csv, Writers) {
  std::ostringstream a, b, c;
  const std::vector<std::size_t> layers{2, 0, 1};
  write_layer_distribution_csv(layers, a);
  EXPECT_EQ(a.str(), "layer,count\n0,2\n1,0\n2,1\n");
  const std::vector<std::string> classes{"NOUN", "a,b"};
  const std::vector<std::size_t> counts{3, 1};
  write_property_counts_csv(classes, counts, b);
  EXPECT_EQ(b.str(), "class,count\nNOUN,3\n\"a,b\",1\n");
  write_property_layer_csv(classes, {{1, 0}, {0, 2}}, c);
  EXPECT_EQ(c.str(), "class,layer,count\nNOUN,0,1\nNOUN,1,0\n\"a,b\",0,0\n\"a,b\",1,2\n");
}

}  // namespace
}  // namespace nprobe
