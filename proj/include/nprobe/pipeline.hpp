#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nprobe/activations.hpp"
#include "nprobe/control.hpp"
#include "nprobe/corpus.hpp"
#include "nprobe/detail/csv.hpp"
#include "nprobe/detail/float_format.hpp"
#include "nprobe/distribution.hpp"
#include "nprobe/layer_analysis.hpp"
#include "nprobe/neuron_analysis.hpp"
#include "nprobe/probe.hpp"

namespace nprobe {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Everything a run needs. Randomness comes from split_seed (data side:
/// splits and, unless overridden, control labels) and train.seed.
struct RunConfig {
  std::filesystem::path activations;
  std::filesystem::path labels;
  std::filesystem::path output_dir;
  std::string task = "task";
  SplitRatios split_ratios;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  std::vector<double> l1_grid = default_lambda_grid();
  std::vector<double> l2_grid = default_lambda_grid();
  std::vector<double> percent_grid = default_percent_grid();
  double delta = 1.0;
  bool control = true;
  std::optional<std::uint64_t> control_seed;
  std::size_t overlap_top_k = 10;
  std::optional<std::size_t> overlap_layer;

  std::uint64_t resolved_control_seed() const { return control_seed.value_or(split_seed); }

  void check() const {
    constexpr const char* where = "cli-report.run_pipeline";
    if (activations.empty() || labels.empty() || output_dir.empty()) {
      throw Error(Errc::invalid_config, where, "activations, labels and output_dir are required");
    }
    namespace fs = std::filesystem;
    const auto a = fs::absolute(activations).lexically_normal();
    const auto l = fs::absolute(labels).lexically_normal();
    const auto o = fs::absolute(output_dir).lexically_normal();
    if (a == l || a == o || l == o) {
      throw Error(Errc::invalid_config, where, "activations, labels and output_dir must differ");
    }
    train.check();
    if (overlap_top_k < 1) throw Error(Errc::invalid_config, where, "overlap_top_k must be >= 1");
    if (delta < 0) throw Error(Errc::invalid_config, where, "delta must be >= 0");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"activations", c.activations.string()},
          {"labels", c.labels.string()},
          {"output_dir", c.output_dir.string()},
          {"task", c.task},
          {"split_ratios", {c.split_ratios.train, c.split_ratios.dev, c.split_ratios.test}},
          {"split_seed", c.split_seed},
          {"train_seed", c.train.seed},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"l1_grid", c.l1_grid},
          {"l2_grid", c.l2_grid},
          {"percent_grid", c.percent_grid},
          {"delta", c.delta},
          {"control", c.control},
          {"control_seed", c.resolved_control_seed()},
          {"overlap_top_k", c.overlap_top_k},
          {"overlap_layer", c.overlap_layer ? nlohmann::json(*c.overlap_layer) : nlohmann::json()}};
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  constexpr const char* where = "cli-report.config";
  if (!j.is_object()) throw Error(Errc::invalid_config, where, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "activations")
        c.activations = v.get<std::string>();
      else if (key == "labels")
        c.labels = v.get<std::string>();
      else if (key == "output_dir")
        c.output_dir = v.get<std::string>();
      else if (key == "task")
        c.task = v.get<std::string>();
      else if (key == "split_ratios") {
        const auto r = v.get<std::vector<double>>();
        if (r.size() != 3) throw Error(Errc::invalid_config, where, "split_ratios needs 3 values");
        c.split_ratios = {r[0], r[1], r[2]};
      } else if (key == "split_seed")
        c.split_seed = v.get<std::uint64_t>();
      else if (key == "train_seed")
        c.train.seed = v.get<std::uint64_t>();
      else if (key == "epochs")
        c.train.epochs = v.get<std::size_t>();
      else if (key == "batch_size")
        c.train.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate")
        c.train.learning_rate = v.get<double>();
      else if (key == "l1_grid")
        c.l1_grid = v.get<std::vector<double>>();
      else if (key == "l2_grid")
        c.l2_grid = v.get<std::vector<double>>();
      else if (key == "percent_grid")
        c.percent_grid = v.get<std::vector<double>>();
      else if (key == "delta")
        c.delta = v.get<double>();
      else if (key == "control")
        c.control = v.get<bool>();
      else if (key == "control_seed") {
        if (v.is_null())
          c.control_seed.reset();
        else
          c.control_seed = v.get<std::uint64_t>();
      } else if (key == "overlap_top_k")
        c.overlap_top_k = v.get<std::size_t>();
      else if (key == "overlap_layer") {
        if (v.is_null())
          c.overlap_layer.reset();
        else
          c.overlap_layer = v.get<std::size_t>();
      } else {
        throw Error(Errc::invalid_config, where, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, where, e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::input_not_found, "cli-report.config", "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(Errc::invalid_config, "cli-report.config", path.string() + " is not valid JSON");
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

/// Pipeline stages; each one pulls in the stages it depends on.
enum class Stage { validate, layer, lca, select, dist, overlap, control, run };

/// In-memory products of a run. Absent members were not computed.
struct PipelineReports {
  std::vector<std::string> classes;
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::optional<LayerCurve> curve;
  std::optional<LcaResult> lca;
  std::optional<SelectionResult> selection;
  std::optional<std::vector<std::size_t>> layer_counts;
  std::optional<std::vector<std::size_t>> class_counts;
  std::optional<std::vector<std::vector<std::size_t>>> class_layer_counts;
  std::optional<OverlapMatrix> overlap;
  std::optional<SelectivityReport> selectivity;
};

enum class PlotKind { layer_curve, overlap, layer_distribution, class_layer_distribution };

namespace detail {
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cli-report.write", "cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error(Errc::io_failure, "cli-report.write", "write failed for " + path.string());
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string plot_file(PlotKind k) {
  switch (k) {
    case PlotKind::layer_curve:
      return "plot_layer_curve.csv";
    case PlotKind::overlap:
      return "plot_overlap.csv";
    case PlotKind::layer_distribution:
      return "plot_layer_distribution.csv";
    case PlotKind::class_layer_distribution:
      return "plot_class_layer_distribution.csv";
  }
  return "plot.csv";
}
}  // namespace detail

/// Long-format plot tables, one observation per row. Distribution tables
/// list only non-empty cells, so an empty selection yields a header only.
/// Returns the file names written.
inline std::vector<std::string> emit_plot_data(const PipelineReports& r,
                                               const std::filesystem::path& dir,
                                               std::span<const PlotKind> kinds) {
  constexpr const char* where = "cli-report.emit_plot_data";
  auto missing = [&](const char* what) {
    return Error(Errc::missing_report, where, std::string(what) + " report is not available");
  };
  std::vector<std::string> written;
  for (auto kind : kinds) {
    std::ostringstream out;
    switch (kind) {
      case PlotKind::layer_curve: {
        if (!r.curve) throw missing("layer curve");
        out << "layer,accuracy\n";
        for (std::size_t k = 0; k < r.curve->num_layers(); ++k) {
          out << k << ',' << detail::shortest(r.curve->test[k]) << '\n';
        }
        out << "concat," << detail::shortest(r.curve->concat_test) << '\n';
        break;
      }
      case PlotKind::overlap: {
        if (!r.overlap) throw missing("overlap");
        const auto& m = *r.overlap;
        out << "class_a,class_b,jaccard,intersection\n";
        for (std::size_t i = 0; i < m.labels.size(); ++i) {
          for (std::size_t j = 0; j < m.labels.size(); ++j) {
            out << detail::csv_field(m.labels[i]) << ',' << detail::csv_field(m.labels[j]) << ','
                << detail::shortest(m.values[i][j]) << ',' << m.intersections[i][j] << '\n';
          }
        }
        break;
      }
      case PlotKind::layer_distribution: {
        if (!r.layer_counts) throw missing("layer distribution");
        out << "layer,count\n";
        for (std::size_t k = 0; k < r.layer_counts->size(); ++k) {
          if ((*r.layer_counts)[k]) out << k << ',' << (*r.layer_counts)[k] << '\n';
        }
        break;
      }
      case PlotKind::class_layer_distribution: {
        if (!r.class_layer_counts) throw missing("class-layer distribution");
        out << "class,layer,count\n";
        const auto& m = *r.class_layer_counts;
        for (std::size_t c = 0; c < m.size(); ++c) {
          for (std::size_t k = 0; k < m[c].size(); ++k) {
            if (m[c][k])
              out << detail::csv_field(r.classes[c]) << ',' << k << ',' << m[c][k] << '\n';
          }
        }
        break;
      }
    }
    const auto name = detail::plot_file(kind);
    detail::write_file(dir / name, out.str());
    written.push_back(name);
  }
  return written;
}

struct RunOutcome {
  PipelineReports reports;
  /// file name -> "module.op" that produced its numbers
  std::map<std::string, std::string> files;
};

/// Runs `stage` and everything it depends on, writing each product into
/// cfg.output_dir followed by summary.json. Throws nprobe::Error on bad input.
inline RunOutcome run_pipeline(const RunConfig& cfg, Stage stage = Stage::run) {
  cfg.check();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw Error(Errc::io_failure, "cli-report.run_pipeline",
                "cannot create output directory " + cfg.output_dir.string());
  }

  const bool all = stage == Stage::run;
  const bool want_dist = all || stage == Stage::dist;
  const bool want_select = want_dist || stage == Stage::select;
  const bool want_overlap = all || stage == Stage::overlap;
  const bool want_lca = want_select || want_overlap || stage == Stage::lca;
  const bool want_layer = want_select || stage == Stage::layer;
  const bool want_control = (all && cfg.control) || stage == Stage::control;

  RunOutcome outcome;
  auto& rep = outcome.reports;
  auto emit = [&](const std::string& name, const std::string& content, const std::string& source) {
    detail::write_file(cfg.output_dir / name, content);
    outcome.files[name] = source;
  };

  const auto acts = load_activations(cfg.activations);
  const auto corpus = load_labels(cfg.labels);
  const auto ds = align(acts, corpus, cfg.split_ratios, cfg.split_seed);
  rep.classes = ds.label_vocab;
  rep.num_layers = ds.num_layers;
  rep.hidden_size = ds.hidden_size;

  if (stage == Stage::validate || all) {
    const auto v = validate(acts);
    nlohmann::json findings = nlohmann::json::array();
    for (const auto& f : v.findings) {
      findings.push_back(
          {{"kind", finding_name(f.kind)}, {"sentence_id", f.sentence_id}, {"message", f.message}});
    }
    std::array<std::size_t, 3> split_words{};
    for (auto s : ds.split) ++split_words[static_cast<std::size_t>(s)];
    nlohmann::json j = {
        {"model", acts.model_id},
        {"num_layers", acts.num_layers},
        {"hidden_size", acts.hidden_size},
        {"sentences", acts.sentences.size()},
        {"words", ds.num_words()},
        {"classes", ds.label_vocab},
        {"split_words",
         {{"train", split_words[0]}, {"dev", split_words[1]}, {"test", split_words[2]}}},
        {"findings", std::move(findings)}};
    emit("validation.json", j.dump(2) + "\n", "activation-store.validate");
    if (!v.ok()) {
      throw Error(Errc::format_mismatch, "activation-store.validate",
                  std::to_string(v.findings.size()) + " validation finding(s)");
    }
  }

  if (want_layer) {
    rep.curve = layer_curve(ds, cfg.train, cfg.task);
    std::ostringstream out;
    write_layer_curve_csv(*rep.curve, out);
    emit("layer_curve.csv", out.str(), "layer-analysis.layer_curve");
  }
  if (want_lca) {
    rep.lca = linguistic_correlation(ds, cfg.train, cfg.l1_grid, cfg.l2_grid);
    auto probe_json = to_json(rep.lca->search.probe);
    probe_json["l1"] = rep.lca->search.l1;
    probe_json["l2"] = rep.lca->search.l2;
    probe_json["dev_accuracy"] = rep.lca->search.dev_accuracy;
    emit("lca_probe.json", probe_json.dump() + "\n", "probe-trainer.grid_search");
    emit("ranking.json", to_json(rep.lca->ranking).dump() + "\n", "neuron-analysis.rank_neurons");
  }
  if (want_select) {
    rep.selection = minimal_set(ds, rep.lca->ranking, oracle_accuracy(*rep.curve), cfg.percent_grid,
                                cfg.delta, cfg.train);
    emit("selection.json", to_json(*rep.selection, ds.label_vocab).dump(2) + "\n",
         "neuron-analysis.minimal_set");
  }
  if (want_dist) {
    const auto& sel = *rep.selection;
    rep.layer_counts = layer_distribution(sel.selected, ds.num_layers, ds.hidden_size);
    rep.class_counts = property_counts(rep.lca->ranking, sel);
    rep.class_layer_counts =
        property_layer_matrix(rep.lca->ranking, sel, ds.num_layers, ds.hidden_size);
    std::ostringstream a, b, c;
    write_layer_distribution_csv(*rep.layer_counts, a);
    write_property_counts_csv(ds.label_vocab, *rep.class_counts, b);
    write_property_layer_csv(ds.label_vocab, *rep.class_layer_counts, c);
    emit("distribution_layer.csv", a.str(), "distribution-analysis.layer_distribution");
    emit("distribution_class.csv", b.str(), "distribution-analysis.property_counts");
    emit("distribution_class_layer.csv", c.str(), "distribution-analysis.property_layer_matrix");
  }
  if (want_overlap) {
    const auto sets =
        top_k_sets(rep.lca->ranking, cfg.overlap_top_k, cfg.overlap_layer, ds.hidden_size);
    rep.overlap = overlap_matrix(ds.label_vocab, sets, cfg.overlap_layer);
    auto j = to_json(*rep.overlap);
    j["top_k"] = cfg.overlap_top_k;
    emit("overlap.json", j.dump(2) + "\n", "distribution-analysis.overlap_matrix");
  }
  if (want_control) {
    rep.selectivity = measure_selectivity(acts, corpus, cfg.split_ratios, cfg.split_seed,
                                          cfg.resolved_control_seed(), cfg.train);
    emit("selectivity.json", to_json(*rep.selectivity).dump(2) + "\n", "probe-trainer.selectivity");
  }

  std::vector<PlotKind> plots;
  if (rep.curve) plots.push_back(PlotKind::layer_curve);
  if (rep.overlap) plots.push_back(PlotKind::overlap);
  if (rep.layer_counts) {
    plots.push_back(PlotKind::layer_distribution);
    plots.push_back(PlotKind::class_layer_distribution);
  }
  for (const auto& name : emit_plot_data(rep, cfg.output_dir, plots)) {
    outcome.files[name] = "cli-report.emit_plot_data";
  }

  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, source] : outcome.files) files[name] = source;
  nlohmann::json summary = {
      {"config", to_json(cfg)},
      {"seeds",
       {{"split", cfg.split_seed},
        {"train", cfg.train.seed},
        {"control", cfg.resolved_control_seed()}}},
      {"files", std::move(files)},
      {"metadata",
       {{"tool", "nprobe"}, {"version", kToolVersion}, {"generated_at", detail::utc_timestamp()}}}};
  detail::write_file(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  outcome.files["summary.json"] = "cli-report.run_pipeline";
  return outcome;
}

}  // namespace nprobe
