#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nprobe/detail/float_format.hpp"
#include "nprobe/error.hpp"

namespace nprobe {

inline constexpr std::string_view kActivationFormat = "nprobe.activations.v1";

struct SentenceActivations {
  std::int64_t id = 0;
  std::vector<std::string> words;
  /// One layer-major vector of num_layers * hidden_size floats per word.
  std::vector<std::vector<float>> vectors;

  friend bool operator==(const SentenceActivations&, const SentenceActivations&) = default;
};

/// Per-word hidden states of every layer. Layer 0 is the embedding output.
struct ActivationDataset {
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::string model_id;
  std::vector<SentenceActivations> sentences;

  std::size_t width() const noexcept { return num_layers * hidden_size; }
  std::size_t num_words() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.words.size();
    return n;
  }

  friend bool operator==(const ActivationDataset&, const ActivationDataset&) = default;
};

enum class FindingKind {
  invalid_dimensions,
  empty_sentence,
  vector_count,
  vector_length,
  non_finite,
  duplicate_id,
  non_increasing_id,
};

constexpr std::string_view finding_name(FindingKind k) noexcept {
  switch (k) {
    case FindingKind::invalid_dimensions:
      return "invalid dimensions";
    case FindingKind::empty_sentence:
      return "empty sentence";
    case FindingKind::vector_count:
      return "vector count";
    case FindingKind::vector_length:
      return "vector length";
    case FindingKind::non_finite:
      return "non-finite value";
    case FindingKind::duplicate_id:
      return "duplicate id";
    case FindingKind::non_increasing_id:
      return "non-increasing id";
  }
  return "unknown";
}

struct Finding {
  FindingKind kind;
  std::int64_t sentence_id = -1;  // -1 for dataset-level findings
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const noexcept { return findings.empty(); }
};

/// Checks every ActivationDataset invariant. At most one finding per
/// (sentence, kind); the id-ordering check reports a duplicate id rather than
/// also reporting it as non-increasing.
inline ValidationReport validate(const ActivationDataset& ds) {
  ValidationReport report;
  auto add = [&](FindingKind k, std::int64_t id, std::string msg) {
    report.findings.push_back({k, id, std::move(msg)});
  };
  if (ds.num_layers < 1 || ds.hidden_size < 1) {
    add(FindingKind::invalid_dimensions, -1, "num_layers and hidden_size must be positive");
  }
  const auto width = ds.width();
  std::set<std::int64_t> seen;
  bool have_prev = false;
  std::int64_t prev = 0;
  for (const auto& s : ds.sentences) {
    if (s.words.empty()) add(FindingKind::empty_sentence, s.id, "sentence has no words");
    if (s.vectors.size() != s.words.size()) {
      add(FindingKind::vector_count, s.id,
          std::to_string(s.words.size()) + " words but " + std::to_string(s.vectors.size()) +
              " vectors");
    }
    bool bad_len = false, bad_val = false;
    for (const auto& v : s.vectors) {
      if (v.size() != width) bad_len = true;
      for (float x : v) bad_val = bad_val || !std::isfinite(x);
    }
    if (bad_len) {
      add(FindingKind::vector_length, s.id,
          "word vector length differs from " + std::to_string(width));
    }
    if (bad_val) add(FindingKind::non_finite, s.id, "non-finite value");
    if (!seen.insert(s.id).second) {
      add(FindingKind::duplicate_id, s.id, "duplicate id");
    } else if (have_prev && s.id <= prev) {
      add(FindingKind::non_increasing_id, s.id, "sentence ids must be strictly increasing");
    }
    if (!have_prev || s.id > prev) prev = s.id;
    have_prev = true;
  }
  return report;
}

namespace detail {

// SAX consumer for one record line. Floats are taken from the raw token text
// so that parsing is exact for 32-bit values.
class RecordReader : public nlohmann::json_sax<nlohmann::json> {
 public:
  SentenceActivations record;
  bool has_id = false;
  bool non_finite = false;
  std::string error;

  bool null() override { return unexpected("null"); }
  bool boolean(bool) override { return unexpected("boolean"); }
  bool number_integer(number_integer_t v) override { return number(static_cast<double>(v), v); }
  bool number_unsigned(number_unsigned_t v) override {
    return number(static_cast<double>(v), static_cast<std::int64_t>(v));
  }
  bool number_float(number_float_t, const string_t& raw) override {
    if (skip_ > 0) return true;
    if (state_ != State::vector) return unexpected("float");
    auto f = parse_float(raw);
    if (!f || !std::isfinite(*f)) {
      non_finite = true;
      record.vectors.back().push_back(std::numeric_limits<float>::quiet_NaN());
      return true;
    }
    record.vectors.back().push_back(*f);
    return true;
  }
  bool string(string_t& s) override {
    if (skip_ > 0) return true;
    if (state_ != State::words) return unexpected("string");
    record.words.push_back(s);
    return true;
  }
  bool binary(binary_t&) override { return unexpected("binary"); }
  bool start_object(std::size_t) override {
    if (skip_ > 0 || (depth_ == 1 && state_ == State::top)) return enter_skip();
    if (depth_ != 0) return unexpected("object");
    ++depth_;
    return true;
  }
  bool key(string_t& k) override {
    if (skip_ > 0) return true;
    key_ = k;
    return true;
  }
  bool end_object() override {
    if (skip_ > 0) return leave_skip();
    --depth_;
    return true;
  }
  bool start_array(std::size_t) override {
    if (skip_ > 0) return enter_skip();
    if (state_ == State::top && depth_ == 1) {
      if (key_ == "words") {
        state_ = State::words;
      } else if (key_ == "activations") {
        state_ = State::acts;
      } else {
        return enter_skip();
      }
    } else if (state_ == State::acts) {
      state_ = State::vector;
      record.vectors.emplace_back();
    } else {
      return unexpected("array");
    }
    return true;
  }
  bool end_array() override {
    if (skip_ > 0) return leave_skip();
    state_ = state_ == State::vector ? State::acts : State::top;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& e) override {
    error = e.what();
    return false;
  }

 private:
  enum class State { top, words, acts, vector };

  bool number(double d, std::int64_t i) {
    if (skip_ > 0) return true;
    if (state_ == State::vector) {
      record.vectors.back().push_back(static_cast<float>(d));
      return true;
    }
    if (state_ == State::top && depth_ == 1 && key_ == "id") {
      record.id = i;
      has_id = true;
      return true;
    }
    if (state_ == State::top && depth_ == 1) return true;  // unknown scalar field
    return unexpected("number");
  }
  bool enter_skip() {
    ++skip_;
    return true;
  }
  bool leave_skip() {
    --skip_;
    return true;
  }
  bool unexpected(const char* what) {
    if (skip_ > 0 || (state_ == State::top && depth_ == 1)) return true;
    error = std::string("unexpected ") + what + " in record";
    return false;
  }

  State state_ = State::top;
  int depth_ = 0;
  int skip_ = 0;
  std::string key_;
};

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace detail

/// Reads an nprobe.activations.v1 JSON-lines file.
inline ActivationDataset load_activations(const std::filesystem::path& path) {
  constexpr const char* where = "activation-store.load_activations";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::input_not_found, where, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::missing_header, where, "file is empty");
  ActivationDataset ds;
  {
    auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("format") ||
        header["format"] != kActivationFormat || !header.contains("num_layers") ||
        !header.contains("hidden_size") || !header["num_layers"].is_number_unsigned() ||
        !header["hidden_size"].is_number_unsigned()) {
      throw Error(Errc::missing_header, where, "line 1 is not a valid header object");
    }
    ds.num_layers = header["num_layers"].get<std::size_t>();
    ds.hidden_size = header["hidden_size"].get<std::size_t>();
    if (ds.num_layers < 1 || ds.hidden_size < 1) {
      throw Error(Errc::missing_header, where, "num_layers and hidden_size must be positive");
    }
    if (header.contains("model") && header["model"].is_string()) {
      ds.model_id = header["model"].get<std::string>();
    }
  }

  const auto width = ds.width();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    detail::RecordReader reader;
    const bool parsed = nlohmann::json::sax_parse(line, &reader);
    if (!parsed || !reader.has_id) {
      throw Error(Errc::format_mismatch, where,
                  "line " + std::to_string(line_no) + ": malformed record" +
                      (reader.error.empty() ? std::string(" (missing id)") : ": " + reader.error));
    }
    auto& rec = reader.record;
    const auto sid = std::to_string(rec.id);
    if (rec.words.empty()) {
      throw Error(Errc::format_mismatch, where, "sentence " + sid + " has no words");
    }
    if (rec.vectors.size() != rec.words.size()) {
      throw Error(Errc::format_mismatch, where,
                  "sentence " + sid + " has " + std::to_string(rec.words.size()) + " words but " +
                      std::to_string(rec.vectors.size()) + " vectors");
    }
    for (std::size_t w = 0; w < rec.vectors.size(); ++w) {
      if (rec.vectors[w].size() != width) {
        throw Error(Errc::format_mismatch, where,
                    "sentence " + sid + " word " + std::to_string(w) + " has " +
                        std::to_string(rec.vectors[w].size()) + " floats, header declares " +
                        std::to_string(width));
      }
    }
    if (reader.non_finite) {
      throw Error(Errc::non_finite_value, where, "sentence " + sid + " has a non-finite value");
    }
    if (!ds.sentences.empty() && rec.id <= ds.sentences.back().id) {
      throw Error(Errc::format_mismatch, where,
                  "sentence " + sid + ": ids must be unique and strictly increasing");
    }
    ds.sentences.push_back(std::move(rec));
  }
  if (ds.sentences.empty()) throw Error(Errc::empty_input, where, "no sentence records");
  return ds;
}

inline void write_activations(const ActivationDataset& ds, std::ostream& out) {
  nlohmann::json header = {{"format", kActivationFormat},
                           {"num_layers", ds.num_layers},
                           {"hidden_size", ds.hidden_size},
                           {"model", ds.model_id}};
  out << header.dump() << '\n';
  std::string buf;
  for (const auto& s : ds.sentences) {
    buf.clear();
    buf += "{\"id\":";
    buf += std::to_string(s.id);
    buf += ",\"words\":[";
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      if (i) buf += ',';
      buf += detail::json_string(s.words[i]);
    }
    buf += "],\"activations\":[";
    for (std::size_t i = 0; i < s.vectors.size(); ++i) {
      if (i) buf += ',';
      buf += '[';
      for (std::size_t j = 0; j < s.vectors[i].size(); ++j) {
        if (j) buf += ',';
        buf += detail::shortest(s.vectors[i][j]);
      }
      buf += ']';
    }
    buf += "]}\n";
    out << buf;
  }
}

inline void save_activations(const ActivationDataset& ds, const std::filesystem::path& path) {
  constexpr const char* where = "activation-store.save_activations";
  if (ds.sentences.empty()) throw Error(Errc::empty_input, where, "dataset has no sentences");
  if (auto report = validate(ds); !report.ok()) {
    const auto& f = report.findings.front();
    throw Error(f.kind == FindingKind::non_finite ? Errc::non_finite_value : Errc::format_mismatch,
                where, "sentence " + std::to_string(f.sentence_id) + ": " + f.message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, where, "cannot open " + path.string() + " for writing");
  write_activations(ds, out);
  out.flush();
  if (!out) throw Error(Errc::io_failure, where, "write failed for " + path.string());
}

}  // namespace nprobe
