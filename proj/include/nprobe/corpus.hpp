#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nprobe/activations.hpp"
#include "nprobe/error.hpp"
#include "nprobe/matrix.hpp"
#include "nprobe/random.hpp"
#include "nprobe/unicode.hpp"

namespace nprobe {

using ClassIndex = int;

struct LabeledSentence {
  std::vector<std::string> words;
  std::vector<std::string> labels;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

struct WordSite {
  std::size_t sentence = 0;
  std::size_t position = 0;
  friend bool operator==(const WordSite&, const WordSite&) = default;
};

/// Word-level annotations. `label_vocab` is ordered by first appearance.
struct TokenLabelCorpus {
  std::vector<LabeledSentence> sentences;
  std::vector<std::string> label_vocab;
  std::map<std::string, std::vector<WordSite>> word_types;

  std::size_t num_tokens() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.words.size();
    return n;
  }

  ClassIndex label_index(const std::string& label) const {
    for (std::size_t i = 0; i < label_vocab.size(); ++i) {
      if (label_vocab[i] == label) return static_cast<ClassIndex>(i);
    }
    return -1;
  }

  /// Rebuilds label_vocab (first-appearance order) and word_types.
  void reindex() {
    label_vocab.clear();
    word_types.clear();
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      for (std::size_t p = 0; p < sentences[s].words.size(); ++p) {
        const auto& label = sentences[s].labels[p];
        if (label_index(label) < 0) label_vocab.push_back(label);
        word_types[sentences[s].words[p]].push_back({s, p});
      }
    }
  }
};

/// Reads "word<TAB>label" lines; blank lines end sentences. Words are stored
/// in NFC form.
inline TokenLabelCorpus load_labels(const std::filesystem::path& path) {
  constexpr const char* where = "corpus.load_labels";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::input_not_found, where, "cannot open " + path.string());

  TokenLabelCorpus corpus;
  LabeledSentence current;
  bool started = false;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.words.empty()) corpus.sentences.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (!started && line.front() == '#') continue;
    started = true;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size()) {
      throw Error(Errc::ragged_line, where,
                  "line " + std::to_string(line_no) + ": expected word<TAB>label");
    }
    current.words.push_back(nfc(std::string_view(line).substr(0, tab)));
    current.labels.push_back(line.substr(tab + 1));
  }
  flush();
  if (corpus.sentences.empty()) throw Error(Errc::empty_input, where, "no labeled sentences");
  corpus.reindex();
  return corpus;
}

enum class Split : std::uint8_t { train = 0, dev = 1, test = 2 };

constexpr std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "?";
}

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct Provenance {
  std::int64_t sentence_id = 0;
  std::size_t position = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Activations joined word-for-word with labels, with a sentence-atomic split.
struct AlignedDataset {
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  Matrix features;
  std::vector<ClassIndex> labels;
  std::vector<Split> split;
  std::vector<Provenance> provenance;
  std::vector<std::string> words;
  std::vector<std::string> label_vocab;

  std::size_t num_words() const noexcept { return labels.size(); }
  std::size_t width() const noexcept { return num_layers * hidden_size; }
  std::size_t num_classes() const noexcept { return label_vocab.size(); }

  std::vector<std::size_t> rows_of(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == s) idx.push_back(i);
    }
    return idx;
  }

  std::vector<ClassIndex> labels_of(Split s) const {
    std::vector<ClassIndex> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == s) out.push_back(labels[i]);
    }
    return out;
  }
};

namespace detail {
inline constexpr std::uint64_t kSplitStream = 0x73706c6974ull;  // "split"
inline constexpr std::uint64_t kControlStream = 0x6374726cull;  // "ctrl"
}  // namespace detail

/// Per-sentence split assignment: a seeded shuffle of sentence indices, then
/// round(train*S) train sentences, round(dev*S) dev sentences, rest test.
inline std::vector<Split> assign_splits(std::size_t num_sentences, const SplitRatios& r,
                                        std::uint64_t seed) {
  const auto sum = r.train + r.dev + r.test;
  if (std::abs(sum - 1.0) > 1e-9 || r.train < 0 || r.dev < 0 || r.test < 0) {
    throw Error(Errc::invalid_config, "corpus.align", "split ratios must be >= 0 and sum to 1");
  }
  const auto n = static_cast<double>(num_sentences);
  auto n_train = static_cast<std::size_t>(std::floor(r.train * n + 0.5));
  auto n_dev = static_cast<std::size_t>(std::floor(r.dev * n + 0.5));
  n_train = std::min(n_train, num_sentences);
  n_dev = std::min(n_dev, num_sentences - n_train);
  const auto order = counter_permutation(num_sentences, seed, detail::kSplitStream);
  std::vector<Split> out(num_sentences, Split::test);
  for (std::size_t k = 0; k < num_sentences; ++k) {
    out[order[k]] = k < n_train ? Split::train : (k < n_train + n_dev ? Split::dev : Split::test);
  }
  return out;
}

/// Joins activations and labels sentence by sentence (file order). Words must
/// match exactly after NFC normalization.
inline AlignedDataset align(const ActivationDataset& acts, const TokenLabelCorpus& corpus,
                            const SplitRatios& ratios, std::uint64_t seed) {
  constexpr const char* where = "corpus.align";
  if (acts.sentences.size() != corpus.sentences.size()) {
    throw Error(Errc::sentence_count_mismatch, where,
                std::to_string(acts.sentences.size()) + " activation sentences vs " +
                    std::to_string(corpus.sentences.size()) + " labeled sentences");
  }
  std::size_t total = 0;
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    const auto& a = acts.sentences[s];
    const auto& c = corpus.sentences[s];
    if (a.words.size() != c.words.size()) {
      throw Error(Errc::word_count_mismatch, where,
                  "sentence " + std::to_string(a.id) + ": " + std::to_string(a.words.size()) +
                      " activation words vs " + std::to_string(c.words.size()) + " labeled words");
    }
    for (std::size_t p = 0; p < a.words.size(); ++p) {
      if (nfc(a.words[p]) != nfc(c.words[p])) {
        throw Error(Errc::word_string_mismatch, where,
                    "sentence " + std::to_string(a.id) + " position " + std::to_string(p) + ": '" +
                        a.words[p] + "' vs '" + c.words[p] + "'");
      }
    }
    total += a.words.size();
  }

  const auto sentence_split = assign_splits(acts.sentences.size(), ratios, seed);
  AlignedDataset ds;
  ds.num_layers = acts.num_layers;
  ds.hidden_size = acts.hidden_size;
  ds.label_vocab = corpus.label_vocab;
  ds.features = Matrix(total, acts.width());
  ds.labels.reserve(total);
  ds.split.reserve(total);
  ds.provenance.reserve(total);
  ds.words.reserve(total);
  std::size_t row = 0;
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    const auto& a = acts.sentences[s];
    const auto& c = corpus.sentences[s];
    for (std::size_t p = 0; p < a.words.size(); ++p, ++row) {
      std::copy(a.vectors[p].begin(), a.vectors[p].end(), ds.features.row(row).begin());
      ds.labels.push_back(corpus.label_index(c.labels[p]));
      ds.split.push_back(sentence_split[s]);
      ds.provenance.push_back({a.id, p});
      ds.words.push_back(c.words[p]);
    }
  }
  return ds;
}

/// Control task: every word type gets one label drawn from the corpus's
/// empirical token-level label distribution. Types are visited in sorted
/// order, so the result depends only on the corpus and the seed.
inline TokenLabelCorpus make_control(const TokenLabelCorpus& corpus, std::uint64_t seed) {
  std::vector<double> cumulative(corpus.label_vocab.size(), 0.0);
  for (const auto& s : corpus.sentences) {
    for (const auto& l : s.labels) cumulative[static_cast<std::size_t>(corpus.label_index(l))] += 1;
  }
  double running = 0.0;
  for (auto& c : cumulative) {
    running += c;
    c = running;
  }

  TokenLabelCorpus control = corpus;
  std::uint64_t type_index = 0;
  for (const auto& [word, sites] : corpus.word_types) {
    const double u = counter_uniform(seed, detail::kControlStream, type_index++) * running;
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
    for (const auto& site : sites) {
      control.sentences[site.sentence].labels[site.position] = corpus.label_vocab[k];
    }
  }
  return control;
}

}  // namespace nprobe
