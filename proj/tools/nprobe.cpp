#include "nprobe/nprobe.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> activations, labels, output_dir, task;
  std::optional<std::vector<double>> split_ratios, l1_grid, l2_grid, percent_grid;
  std::optional<std::uint64_t> split_seed, train_seed, control_seed;
  std::optional<std::size_t> epochs, batch_size, overlap_top_k, overlap_layer;
  std::optional<double> learning_rate, delta;
  std::optional<bool> control;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON file supplying any of the flags below");
  cmd->add_option("-a,--activations", f.activations, "nprobe.activations.v1 JSON-lines file");
  cmd->add_option("-l,--labels", f.labels, "word<TAB>label file");
  cmd->add_option("-o,--out", f.output_dir, "output directory");
  cmd->add_option("--task", f.task, "task name used in reports");
  cmd->add_option("--split-ratios", f.split_ratios, "train dev test fractions")->expected(3);
  cmd->add_option("--split-seed", f.split_seed);
  cmd->add_option("--train-seed", f.train_seed);
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--batch-size", f.batch_size);
  cmd->add_option("--learning-rate", f.learning_rate);
  cmd->add_option("--l1-grid", f.l1_grid)->expected(1, 64);
  cmd->add_option("--l2-grid", f.l2_grid)->expected(1, 64);
  cmd->add_option("--percent-grid", f.percent_grid)->expected(1, 64);
  cmd->add_option("--delta", f.delta, "allowed loss against the oracle, percentage points");
  cmd->add_option("--control", f.control, "run the control task (true/false)");
  cmd->add_option("--control-seed", f.control_seed);
  cmd->add_option("--top-k", f.overlap_top_k, "per-class neurons used for overlap");
  cmd->add_option("--overlap-layer", f.overlap_layer, "restrict overlap to one layer");
}

nprobe::RunConfig resolve(const Flags& f) {
  nprobe::RunConfig c = f.config ? nprobe::load_run_config(*f.config) : nprobe::RunConfig{};
  if (f.activations) c.activations = *f.activations;
  if (f.labels) c.labels = *f.labels;
  if (f.output_dir) c.output_dir = *f.output_dir;
  if (f.task) c.task = *f.task;
  if (f.split_ratios)
    c.split_ratios = {(*f.split_ratios)[0], (*f.split_ratios)[1], (*f.split_ratios)[2]};
  if (f.split_seed) c.split_seed = *f.split_seed;
  if (f.train_seed) c.train.seed = *f.train_seed;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
  if (f.l1_grid) c.l1_grid = *f.l1_grid;
  if (f.l2_grid) c.l2_grid = *f.l2_grid;
  if (f.percent_grid) c.percent_grid = *f.percent_grid;
  if (f.delta) c.delta = *f.delta;
  if (f.control) c.control = *f.control;
  if (f.control_seed) c.control_seed = *f.control_seed;
  if (f.overlap_top_k) c.overlap_top_k = *f.overlap_top_k;
  if (f.overlap_layer) c.overlap_layer = *f.overlap_layer;
  return c;
}

int report_error(std::string_view kind, const std::string& detail, std::string_view where,
                 int code) {
  nlohmann::json err = {{"kind", kind}, {"detail", detail}, {"where", where}};
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nprobe: layer and neuron probing of transformer activations"};
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<std::string, nprobe::Stage>> stages = {
      {"validate", nprobe::Stage::validate}, {"layer", nprobe::Stage::layer},
      {"lca", nprobe::Stage::lca},           {"select", nprobe::Stage::select},
      {"dist", nprobe::Stage::dist},         {"overlap", nprobe::Stage::overlap},
      {"control", nprobe::Stage::control},   {"run", nprobe::Stage::run}};
  const std::map<std::string, std::string> help = {
      {"validate", "check activation and label files and their alignment"},
      {"layer", "per-layer and full-network probe accuracy"},
      {"lca", "elastic-net probe and per-class neuron ranking"},
      {"select", "minimal neuron set against the oracle"},
      {"dist", "layer and class distribution of the selected neurons"},
      {"overlap", "pairwise overlap of per-class top neurons"},
      {"control", "control-task accuracy and selectivity"},
      {"run", "full pipeline"}};
  std::map<CLI::App*, nprobe::Stage> by_cmd;
  for (const auto& [name, stage] : stages) {
    auto* cmd = app.add_subcommand(name, help.at(name));
    add_run_flags(cmd, flags);
    by_cmd[cmd] = stage;
  }

  nprobe::synthetic::Spec synth;
  std::size_t synth_per_class = 5;
  std::string synth_acts, synth_labels;
  auto* synth_cmd = app.add_subcommand("synth", "write a planted-neuron fixture");
  synth_cmd->add_option("--activations", synth_acts)->required();
  synth_cmd->add_option("--labels", synth_labels)->required();
  synth_cmd->add_option("--classes", synth.num_classes);
  synth_cmd->add_option("--words", synth.num_words);
  synth_cmd->add_option("--layers", synth.num_layers);
  synth_cmd->add_option("--hidden", synth.hidden_size);
  synth_cmd->add_option("--planted-per-class", synth_per_class);
  synth_cmd->add_option("--seed", synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid-config", e.what(), "cli-report.parse", 1);
  }

  try {
    if (synth_cmd->parsed()) {
      auto planted = nprobe::synthetic::plant_per_class(synth, synth_per_class);
      const auto fx = nprobe::synthetic::generate(synth);
      nprobe::save_activations(fx.activations, synth_acts);
      std::ofstream out(synth_labels);
      for (const auto& s : fx.corpus.sentences) {
        for (std::size_t i = 0; i < s.words.size(); ++i)
          out << s.words[i] << '\t' << s.labels[i] << '\n';
        out << '\n';
      }
      nlohmann::json j;
      for (std::size_t c = 0; c < planted.size(); ++c)
        j[nprobe::synthetic::class_name(c)] = planted[c];
      std::cout << nlohmann::json{{"planted", j}}.dump() << '\n';
      return 0;
    }
    for (const auto& [cmd, stage] : by_cmd) {
      if (!cmd->parsed()) continue;
      const auto cfg = resolve(flags);
      const auto outcome = nprobe::run_pipeline(cfg, stage);
      nlohmann::json files = nlohmann::json::array();
      for (const auto& [name, source] : outcome.files) files.push_back(name);
      std::cout << nlohmann::json{{"status", "ok"},
                                  {"output_dir", cfg.output_dir.string()},
                                  {"files", files}}
                       .dump()
                << '\n';
      return 0;
    }
  } catch (const nprobe::Error& e) {
    return report_error(e.kind(), e.detail(), e.where(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), "nprobe", 2);
  }
  return 0;
}
