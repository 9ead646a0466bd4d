#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nprobe/activations.hpp"
#include "nprobe/corpus.hpp"
#include "nprobe/preprocess.hpp"
#include "nprobe/random.hpp"

namespace nprobe::synthetic {

// Planted-signal generators for sanity checks: every neuron is standard
// normal noise except planted (class, neuron) pairs, whose mean moves by
// `shift` standard deviations for words of that class.

struct Plant {
  ClassIndex cls = 0;
  NeuronId neuron = 0;
  float shift = 4.0f;
};

struct Spec {
  std::size_t num_classes = 3;
  std::size_t num_words = 2000;
  std::size_t words_per_sentence = 10;
  std::size_t num_layers = 13;
  std::size_t hidden_size = 64;
  /// Word types are drawn uniformly from this many strings, independent of
  /// the label.
  std::size_t vocabulary = 5000;
  /// Relative class frequencies; uniform when empty.
  std::vector<double> class_weights;
  std::vector<Plant> plants;
  std::uint64_t seed = 0;
};

struct Fixture {
  ActivationDataset activations;
  TokenLabelCorpus corpus;
};

inline std::string class_name(std::size_t c) { return "C" + std::to_string(c); }

inline Fixture generate(const Spec& spec) {
  CounterRng rng(spec.seed, 0x73796e7468ull);
  std::vector<double> cum(spec.num_classes, 1.0);
  if (!spec.class_weights.empty()) cum = spec.class_weights;
  for (std::size_t i = 1; i < cum.size(); ++i) cum[i] += cum[i - 1];

  const auto width = spec.num_layers * spec.hidden_size;
  Fixture fx;
  fx.activations.num_layers = spec.num_layers;
  fx.activations.hidden_size = spec.hidden_size;
  fx.activations.model_id = "synthetic";

  std::size_t produced = 0;
  std::int64_t sid = 0;
  while (produced < spec.num_words) {
    const auto len = std::min(spec.words_per_sentence, spec.num_words - produced);
    SentenceActivations sa;
    sa.id = sid++;
    LabeledSentence ls;
    for (std::size_t w = 0; w < len; ++w) {
      const double u = rng.uniform() * cum.back();
      std::size_t cls = 0;
      while (cls + 1 < cum.size() && u >= cum[cls]) ++cls;
      const auto word = "w" + std::to_string(rng.below(spec.vocabulary));
      std::vector<float> v(width);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      for (const auto& p : spec.plants) {
        if (static_cast<std::size_t>(p.cls) == cls) v[p.neuron] += p.shift;
      }
      sa.words.push_back(word);
      sa.vectors.push_back(std::move(v));
      ls.words.push_back(word);
      ls.labels.push_back(class_name(cls));
    }
    fx.activations.sentences.push_back(std::move(sa));
    fx.corpus.sentences.push_back(std::move(ls));
    produced += len;
  }
  fx.corpus.reindex();
  return fx;
}

/// `count` distinct neuron ids drawn without replacement, optionally from a
/// single layer only.
inline std::vector<NeuronId> distinct_neurons(std::size_t count, std::size_t num_layers,
                                              std::size_t hidden_size, std::uint64_t seed,
                                              std::optional<std::size_t> layer = std::nullopt) {
  const auto pool = layer ? hidden_size : num_layers * hidden_size;
  const auto base = layer ? *layer * hidden_size : 0;
  auto perm = counter_permutation(pool, seed, 0x6e6575726f6eull);
  perm.resize(std::min(count, pool));
  std::vector<NeuronId> ids;
  for (auto p : perm) ids.push_back(base + p);
  return ids;
}

/// Each class gets its own `per_class` planted neurons, all distinct,
/// scattered over the whole network.
inline std::vector<std::vector<NeuronId>> plant_per_class(Spec& spec, std::size_t per_class,
                                                          float shift = 4.0f) {
  const auto ids = distinct_neurons(per_class * spec.num_classes, spec.num_layers, spec.hidden_size,
                                    spec.seed ^ 0x5eedull);
  std::vector<std::vector<NeuronId>> by_class(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const auto id = ids[c * per_class + k];
      by_class[c].push_back(id);
      spec.plants.push_back({static_cast<ClassIndex>(c), id, shift});
    }
  }
  return by_class;
}

}  // namespace nprobe::synthetic
