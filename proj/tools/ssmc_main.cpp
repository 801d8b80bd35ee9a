// ssmc: group-invariant subspace clustering experiments.
//
//   ssmc synth    --config cfg.json [--out dir] [--trace] [--save-affinity] [--no-timestamp]
//   ssmc dataset  --config cfg.json [...]
//   ssmc geometry --config cfg.json [...]
//
// Exit codes: 0 success, 2 config error, 3 solver failure of all columns.

#include "ssmc/ssmc.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;

namespace {

struct CliFlags {
  std::string config_path;
  std::string out_dir;
  bool trace = false;
  bool save_affinity = false;
  bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CliFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_flag("--trace", flags.trace, "stream solver diagnostics as JSON lines");
  cmd->add_flag("--save-affinity", flags.save_affinity, "dump affinity matrices as CSV");
  cmd->add_flag("--no-timestamp", flags.no_timestamp,
                "omit timestamps and wall-clock times for bit-identical reports");
}

ssmc::ExperimentConfig load_config(const CliFlags& flags, const std::string& mode) {
  ssmc::ExperimentConfig cfg = ssmc::ExperimentConfig::from_file(flags.config_path);
  if (cfg.mode != mode)
    throw ssmc::ConfigError("config mode '" + cfg.mode + "' does not match subcommand '" + mode +
                            "'");
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  cfg.trace = flags.trace;
  cfg.save_affinity = flags.save_affinity;
  cfg.no_timestamp = flags.no_timestamp;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void emit_report(const ssmc::ExperimentReport& report, const ssmc::ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "report.json", report.to_json().dump(2) + "\n");
  write_text(fs::path(cfg.output_dir) / "tables.csv", report.tables_csv());
  std::cout << "report: " << (fs::path(cfg.output_dir) / "report.json").string() << "\n";
  for (const auto& m : report.methods) {
    std::cout << "  " << m.name;
    if (m.images_per_subject >= 0) std::cout << " (" << m.images_per_subject << " img/sub)";
    std::cout << ": mean error " << m.mean_error;
    if (m.failed_trials > 0) std::cout << " (" << m.failed_trials << " failed trials)";
    std::cout << "\n";
  }
}

// Dumps the affinity of one extra exact/best-lambda run per method so the
// matrices can be inspected without rerunning experiments.
void dump_affinities(const ssmc::ExperimentConfig& cfg) {
  if (cfg.mode != "synthetic") return;
  const auto rep = ssmc::GroupRepresentation::from_descriptor(cfg.group);
  const auto trivial = ssmc::GroupRepresentation::trivial(rep.n());
  const std::uint64_t trial_seed = ssmc::derive_seed(cfg.base_seed, 0);
  auto bases = ssmc::detail::build_bases(cfg, rep, trial_seed);
  ssmc::SyntheticDataset ds =
      ssmc::sample_semi_random(bases, cfg.points_per_submodule, ssmc::derive_seed(trial_seed, 0));
  if (cfg.scramble) ds = ssmc::scramble_dataset(ds, rep, ssmc::derive_seed(trial_seed, 200));
  if (cfg.noise_sigma > 0.0)
    ds = ssmc::perturb_dataset(ds, cfg.noise_sigma, ssmc::derive_seed(trial_seed, 300));
  for (const auto& name : cfg.methods) {
    const auto& method_rep = name == "ssc" ? trivial : rep;
    ssmc::SolverConfig solver = cfg.solver;
    if (!cfg.lambda_grid.empty() && !solver.reg_lambda) solver.reg_lambda = cfg.lambda_grid.front();
    const auto aff = ssmc::build_affinity(ds.X, method_rep, solver,
                                          ssmc::AffinityOptions{cfg.threads});
    ssmc::io::write_csv_matrix(fs::path(cfg.output_dir) / ("affinity_" + name + ".csv"), aff.W);
  }
}

int run(const std::string& mode, const CliFlags& flags) {
  ssmc::ExperimentConfig cfg = load_config(flags, mode);
  fs::create_directories(cfg.output_dir);

  std::unique_ptr<ssmc::detail::TraceSink> sink;
  if (cfg.trace) {
    sink = std::make_unique<ssmc::detail::TraceSink>(fs::path(cfg.output_dir) / "trace.jsonl");
    cfg.solver.trace = sink->callback();
  }

  if (mode == "geometry") {
    const ssmc::GeometryReport report = ssmc::run_geometry_experiment(cfg);
    write_text(fs::path(cfg.output_dir) / "report.json",
               ssmc::geometry_report_to_json(report).dump(2) + "\n");
    if (!report.conjecture_fit.rows.empty())
      write_text(fs::path(cfg.output_dir) / "conjecture.csv",
                 ssmc::conjecture_rows_csv(report.conjecture_fit));
    std::cout << "report: " << (fs::path(cfg.output_dir) / "report.json").string() << "\n";
    if (!report.conjecture_fit.rows.empty())
      std::cout << "  conjecture slope: " << report.conjecture_fit.slope
                << "  c0_hat: " << report.conjecture_fit.c0_hat << "\n";
    return 0;
  }

  const ssmc::ExperimentReport report =
      mode == "synthetic" ? ssmc::run_synthetic_experiment(cfg) : ssmc::run_dataset_experiment(cfg);
  emit_report(report, cfg);
  if (cfg.save_affinity) dump_affinities(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse submodule clustering"};
  app.require_subcommand(1);

  CliFlags synth_flags, dataset_flags, geometry_flags;
  CLI::App* synth = app.add_subcommand("synth", "synthetic clustering experiment");
  add_common(synth, synth_flags);
  CLI::App* dataset = app.add_subcommand("dataset", "image dataset experiment");
  add_common(dataset, dataset_flags);
  CLI::App* geometry = app.add_subcommand("geometry", "geometry analysis experiment");
  add_common(geometry, geometry_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run("synthetic", synth_flags);
    if (dataset->parsed()) return run("dataset", dataset_flags);
    return run("geometry", geometry_flags);
  } catch (const ssmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ssmc::AllColumnsFailed& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
