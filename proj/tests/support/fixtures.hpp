#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "nprobe/nprobe.hpp"

namespace nprobe::testing {

/// Training config for the 2,000-word synthetic fixtures. Batch 16 gives
/// ~1,000 Adam updates over 10 epochs, about what the 512-row default
/// reaches on a full-size annotated corpus.
inline TrainConfig fixture_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}

struct PlantedNeurons {
  synthetic::Fixture fixture;
  std::vector<std::vector<NeuronId>> planted;  // per generator class
  AlignedDataset ds;
};

/// 3 classes, 2,000 words, 13 x 64 neurons, `per_class` distinct planted
/// neurons per class at 4 sigma.
inline PlantedNeurons planted_neurons(std::uint64_t seed, std::size_t per_class = 5,
                                      std::size_t num_words = 2000) {
  synthetic::Spec spec;
  spec.seed = seed;
  spec.num_words = num_words;
  PlantedNeurons p;
  p.planted = synthetic::plant_per_class(spec, per_class);
  p.fixture = synthetic::generate(spec);
  p.ds = align(p.fixture.activations, p.fixture.corpus, {}, seed);
  return p;
}

/// 3 classes with `per_class` planted neurons each, all inside one layer.
inline PlantedNeurons planted_layer(std::uint64_t seed, std::size_t layer,
                                    std::size_t per_class = 5) {
  synthetic::Spec spec;
  spec.seed = seed;
  const auto ids = synthetic::distinct_neurons(per_class * spec.num_classes, spec.num_layers,
                                               spec.hidden_size, seed, layer);
  PlantedNeurons p;
  p.planted.resize(spec.num_classes);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto c = i / per_class;
    p.planted[c].push_back(ids[i]);
    spec.plants.push_back({static_cast<ClassIndex>(c), ids[i], 4.0f});
  }
  p.fixture = synthetic::generate(spec);
  p.ds = align(p.fixture.activations, p.fixture.corpus, {}, seed);
  return p;
}

/// Pure-noise fixture: no planted signal at all.
inline AlignedDataset noise_dataset(std::uint64_t seed, std::vector<double> class_weights = {}) {
  synthetic::Spec spec;
  spec.seed = seed;
  spec.class_weights = std::move(class_weights);
  const auto fx = synthetic::generate(spec);
  return align(fx.activations, fx.corpus, {}, seed);
}

/// Class index in the dataset vocabulary of generator class `c`.
inline ClassIndex vocab_index(const AlignedDataset& ds, std::size_t c) {
  const auto name = synthetic::class_name(c);
  for (std::size_t i = 0; i < ds.label_vocab.size(); ++i) {
    if (ds.label_vocab[i] == name) return static_cast<ClassIndex>(i);
  }
  return -1;
}

inline double majority_rate(std::span<const ClassIndex> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) ++counts[static_cast<std::size_t>(y)];
  return double(*std::max_element(counts.begin(), counts.end())) / double(labels.size());
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("nprobe_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_labels(const TokenLabelCorpus& corpus, const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.words.size(); ++i)
      out << s.words[i] << '\t' << s.labels[i] << '\n';
    out << '\n';
  }
}

}  // namespace nprobe::testing
