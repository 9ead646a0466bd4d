#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nprobe {

enum class Errc {
  // activation store
  missing_header,
  format_mismatch,
  non_finite_value,
  empty_input,
  io_failure,
  // corpus
  ragged_line,
  sentence_count_mismatch,
  word_count_mismatch,
  word_string_mismatch,
  // preprocess
  too_few_rows,
  width_mismatch,
  index_out_of_range,
  empty_range,
  overlapping_ranges,
  // probe
  single_class,
  non_finite_feature,
  empty_eval_set,
  // neuron / distribution analysis
  budget_out_of_range,
  empty_subset,
  inconsistent_inputs,
  // cli / reports
  missing_report,
  input_not_found,
  invalid_config,
};

/// Stable kebab-case name used in machine-readable error objects.
constexpr std::string_view kind_name(Errc e) noexcept {
  switch (e) {
    case Errc::missing_header:
      return "missing-header";
    case Errc::format_mismatch:
      return "format-mismatch";
    case Errc::non_finite_value:
      return "non-finite-value";
    case Errc::empty_input:
      return "empty-input";
    case Errc::io_failure:
      return "io-failure";
    case Errc::ragged_line:
      return "ragged-line";
    case Errc::sentence_count_mismatch:
      return "sentence-count-mismatch";
    case Errc::word_count_mismatch:
      return "word-count-mismatch";
    case Errc::word_string_mismatch:
      return "word-string-mismatch";
    case Errc::too_few_rows:
      return "too-few-rows";
    case Errc::width_mismatch:
      return "width-mismatch";
    case Errc::index_out_of_range:
      return "index-out-of-range";
    case Errc::empty_range:
      return "empty-range";
    case Errc::overlapping_ranges:
      return "overlapping-ranges";
    case Errc::single_class:
      return "single-class";
    case Errc::non_finite_feature:
      return "non-finite-feature";
    case Errc::empty_eval_set:
      return "empty-eval-set";
    case Errc::budget_out_of_range:
      return "budget-out-of-range";
    case Errc::empty_subset:
      return "empty-subset";
    case Errc::inconsistent_inputs:
      return "inconsistent-inputs";
    case Errc::missing_report:
      return "missing-report";
    case Errc::input_not_found:
      return "input-not-found";
    case Errc::invalid_config:
      return "invalid-config";
  }
  return "unknown";
}

/// Every module reports failures through this one exception type. `where`
/// names the failing operation as "module.op".
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string where, const std::string& detail)
      : std::runtime_error(detail), code_(code), where_(std::move(where)) {}

  Errc code() const noexcept { return code_; }
  std::string_view kind() const noexcept { return kind_name(code_); }
  const std::string& where() const noexcept { return where_; }
  std::string detail() const { return what(); }

 private:
  Errc code_;
  std::string where_;
};

}  // namespace nprobe
