#pragma once

// Experiment orchestration: config parsing, image ingestion, synthetic and
// dataset clustering experiments with lambda sweeps, geometry experiments,
// and deterministic report emission.

#include "ssmc/clustering.hpp"
#include "ssmc/geometry.hpp"
#include "ssmc/group.hpp"
#include "ssmc/io.hpp"
#include "ssmc/solver.hpp"
#include "ssmc/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct Preprocessing {
  Index downsample_factor = 1;
  std::optional<std::pair<Index, Index>> crop_rows;  // 1-based inclusive range
  std::optional<std::pair<Index, Index>> crop_cols;
};

struct SubmoduleSpec {
  enum class Kind { module_orbit, subspace };
  Kind kind = Kind::module_orbit;
  Index num_seeds = 1;                              // module_orbit
  Index dim = 1;                                    // subspace
  std::optional<std::vector<Index>> support;        // explicit coordinate support
  std::optional<std::vector<Index>> support_rows;   // image rows (cyclic_shift groups)
};

struct ExperimentConfig {
  std::string mode;  // "synthetic" | "dataset" | "geometry"
  nlohmann::json group;
  SolverConfig solver;
  std::vector<double> lambda_grid;
  int num_clusters = 1;
  int trials = 1;
  std::uint64_t base_seed = 0;
  Preprocessing preprocessing;
  std::string output_dir = "out";
  unsigned threads = 0;

  // synthetic mode
  std::vector<SubmoduleSpec> submodules;
  std::vector<Index> points_per_submodule;
  bool scramble = false;
  double noise_sigma = 0.0;
  std::vector<std::string> methods{"ssmc", "ssc"};

  // dataset mode
  std::string manifest;
  std::vector<Index> images_per_subject;

  // geometry mode
  nlohmann::json geometry;

  // CLI flags
  bool trace = false;
  bool save_affinity = false;
  bool no_timestamp = false;

  nlohmann::json raw;  // parsed document, echoed into reports

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  void validate() const;
};

namespace detail {

inline SolverConfig parse_solver_config(const nlohmann::json& j) {
  SolverConfig cfg;
  if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
  if (j.contains("max_iters")) cfg.max_iters = j.at("max_iters").get<int>();
  if (j.contains("tol_primal")) cfg.tol_primal = j.at("tol_primal").get<double>();
  if (j.contains("tol_dual")) cfg.tol_dual = j.at("tol_dual").get<double>();
  if (j.contains("reg_lambda") && !j.at("reg_lambda").is_null())
    cfg.reg_lambda = j.at("reg_lambda").get<double>();
  if (j.contains("adaptive_rho")) cfg.adaptive_rho = j.at("adaptive_rho").get<bool>();
  if (j.contains("over_relaxation")) cfg.over_relaxation = j.at("over_relaxation").get<double>();
  return cfg;
}

inline SubmoduleSpec parse_submodule_spec(const nlohmann::json& j) {
  SubmoduleSpec s;
  const std::string kind = j.value("kind", std::string("module"));
  if (kind == "module") {
    s.kind = SubmoduleSpec::Kind::module_orbit;
    s.num_seeds = j.value("num_seeds", Index{1});
  } else if (kind == "subspace") {
    s.kind = SubmoduleSpec::Kind::subspace;
    s.dim = j.at("dim").get<Index>();
  } else {
    throw ConfigError("submodule kind must be 'module' or 'subspace', got '" + kind + "'");
  }
  if (j.contains("support")) s.support = j.at("support").get<std::vector<Index>>();
  if (j.contains("support_rows")) s.support_rows = j.at("support_rows").get<std::vector<Index>>();
  return s;
}

inline std::optional<std::pair<Index, Index>> parse_range(const nlohmann::json& j,
                                                          const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto v = j.at(key).get<std::vector<Index>>();
  if (v.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi]");
  return std::make_pair(v[0], v[1]);
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.mode = j.at("mode").get<std::string>();
    if (j.contains("group")) cfg.group = j.at("group");
    if (j.contains("solver")) cfg.solver = detail::parse_solver_config(j.at("solver"));
    if (j.contains("lambda_grid")) cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    cfg.num_clusters = j.value("num_clusters", 1);
    cfg.trials = j.value("trials", 1);
    cfg.base_seed = j.value("base_seed", std::uint64_t{0});
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.threads = j.value("threads", 0u);
    if (j.contains("preprocessing")) {
      const auto& p = j.at("preprocessing");
      cfg.preprocessing.downsample_factor = p.value("downsample_factor", Index{1});
      cfg.preprocessing.crop_rows = detail::parse_range(p, "crop_rows");
      cfg.preprocessing.crop_cols = detail::parse_range(p, "crop_cols");
    }
    if (j.contains("submodules"))
      for (const auto& s : j.at("submodules"))
        cfg.submodules.push_back(detail::parse_submodule_spec(s));
    if (j.contains("points_per_submodule")) {
      const auto& p = j.at("points_per_submodule");
      if (p.is_array())
        cfg.points_per_submodule = p.get<std::vector<Index>>();
      else
        cfg.points_per_submodule.assign(cfg.submodules.size(), p.get<Index>());
    }
    cfg.scramble = j.value("scramble", false);
    cfg.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
    cfg.manifest = j.value("manifest", std::string());
    if (j.contains("images_per_subject"))
      cfg.images_per_subject = j.at("images_per_subject").get<std::vector<Index>>();
    if (j.contains("geometry")) cfg.geometry = j.at("geometry");
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

inline ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline void ExperimentConfig::validate() const {
  if (mode != "synthetic" && mode != "dataset" && mode != "geometry")
    throw ConfigError("mode must be synthetic, dataset or geometry");
  if (trials < 1) throw ConfigError("trials >= 1");
  if (preprocessing.downsample_factor < 1) throw ConfigError("downsample_factor >= 1");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const bool regularized = !lambda_grid.empty() || solver.reg_lambda.has_value();
  if (regularized) {
    std::vector<double> grid = lambda_grid;
    if (grid.empty() && solver.reg_lambda) grid.push_back(*solver.reg_lambda);
    if (grid.empty()) throw ConfigError("lambda_grid must be nonempty in regularized mode");
    for (double l : grid)
      if (!(l > 0.0)) throw ConfigError("lambda grid values must be positive");
  }
  if (mode == "synthetic") {
    if (group.is_null()) throw ConfigError("synthetic mode needs a group descriptor");
    if (submodules.empty()) throw ConfigError("synthetic mode needs submodule specs");
    if (points_per_submodule.size() != submodules.size())
      throw ConfigError("points_per_submodule must align with submodules");
    if (num_clusters < 1) throw ConfigError("num_clusters >= 1");
    for (const auto& m : methods)
      if (m != "ssmc" && m != "ssc") throw ConfigError("methods entries must be 'ssmc' or 'ssc'");
  }
  if (mode == "dataset") {
    if (group.is_null()) throw ConfigError("dataset mode needs a group descriptor");
    if (manifest.empty()) throw ConfigError("dataset mode needs a manifest path");
    if (images_per_subject.empty()) throw ConfigError("dataset mode needs images_per_subject");
  }
  if (mode == "geometry" && geometry.is_null())
    throw ConfigError("geometry mode needs a geometry section");
}

// ---------------------------------------------------------------------------
// image ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd preprocess_image(const Eigen::MatrixXd& img, const Preprocessing& prep) {
  const Index f = prep.downsample_factor;
  const Index rows = (img.rows() + f - 1) / f;
  const Index cols = (img.cols() + f - 1) / f;
  Eigen::MatrixXd dec(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) dec(r, c) = img(r * f, c * f);
  Index r0 = 0, r1 = dec.rows();  // half-open 0-based after conversion
  Index c0 = 0, c1 = dec.cols();
  if (prep.crop_rows) {
    r0 = prep.crop_rows->first - 1;
    r1 = prep.crop_rows->second;
  }
  if (prep.crop_cols) {
    c0 = prep.crop_cols->first - 1;
    c1 = prep.crop_cols->second;
  }
  if (r0 < 0 || c0 < 0 || r1 > dec.rows() || c1 > dec.cols() || r0 >= r1 || c0 >= c1)
    throw std::runtime_error("crop range does not fit the downsampled image");
  return dec.block(r0, c0, r1 - r0, c1 - c0);
}

}  // namespace detail

struct IngestedDataset {
  Eigen::MatrixXd X;        // n x N, column-major vectorized, unit columns
  std::vector<int> labels;
  Index image_rows = 0;     // dimensions after preprocessing
  Index image_cols = 0;
};

/// Reads every manifest entry (P2/P5 graymap or CSV matrix), decimates by the
/// downsample factor (keeping every f-th row/column from the first), crops to
/// the configured 1-based index ranges, vectorizes column-major and normalizes
/// every column to unit l2 norm.
inline IngestedDataset ingest_image_dataset(const std::filesystem::path& manifest_path,
                                            const Preprocessing& prep = {}) {
  const auto entries = read_manifest(manifest_path);
  IngestedDataset out;
  out.labels.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!std::filesystem::exists(e.file))
      throw std::runtime_error("manifest file missing: " + e.file.string());
    Eigen::MatrixXd img;
    const std::string ext = e.file.extension().string();
    if (ext == ".pgm" || ext == ".pnm")
      img = io::read_pgm(e.file);
    else if (ext == ".csv")
      img = io::read_csv_matrix(e.file);
    else
      throw std::runtime_error("unsupported format: " + e.file.string());
    img = detail::preprocess_image(img, prep);
    if (i == 0) {
      out.image_rows = img.rows();
      out.image_cols = img.cols();
      out.X.resize(img.size(), static_cast<Index>(entries.size()));
    } else if (img.rows() != out.image_rows || img.cols() != out.image_cols) {
      throw std::runtime_error("image dimensions disagree after preprocessing: " +
                               e.file.string());
    }
    Eigen::VectorXd col = Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
    const double nc = col.norm();
    if (nc == 0.0) throw std::runtime_error("zero image cannot be normalized: " + e.file.string());
    out.X.col(static_cast<Index>(i)) = col / nc;
    out.labels.push_back(e.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

inline constexpr const char* kArtifactVersion = "0.1.0";

struct MethodResult {
  std::string name;                     // "ssmc" | "ssc"
  nlohmann::json group_descriptor;      // introspection: ssc is the trivial group
  Index images_per_subject = -1;        // dataset mode only
  std::vector<double> per_trial_error;  // NaN for failed trials
  std::vector<double> best_lambda;      // NaN in exact mode
  double mean_error = 0.0;
  double std_error = 0.0;
  int failed_trials = 0;
  int warning_columns = 0;              // non-converged column solves
};

struct ExperimentReport {
  std::string mode;
  nlohmann::json config_echo;
  std::vector<MethodResult> methods;
  double wall_clock_seconds = 0.0;
  std::string timestamp;  // empty when timestamps are suppressed

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["mode"] = mode;
    j["config"] = config_echo;
    auto arr = nlohmann::json::array();
    for (const auto& m : methods) {
      nlohmann::json mj;
      mj["name"] = m.name;
      mj["group"] = m.group_descriptor;
      if (m.images_per_subject >= 0) mj["images_per_subject"] = m.images_per_subject;
      auto errs = nlohmann::json::array();
      for (double e : m.per_trial_error) {
        if (std::isnan(e))
          errs.push_back(nullptr);
        else
          errs.push_back(e);
      }
      mj["per_trial_error"] = errs;
      auto lams = nlohmann::json::array();
      for (double l : m.best_lambda) {
        if (std::isnan(l))
          lams.push_back(nullptr);
        else
          lams.push_back(l);
      }
      mj["best_lambda_per_trial"] = lams;
      mj["mean_error"] = m.mean_error;
      mj["std_error"] = m.std_error;
      mj["failed_trials"] = m.failed_trials;
      mj["warning_columns"] = m.warning_columns;
      arr.push_back(mj);
    }
    j["methods"] = arr;
    j["wall_clock_seconds"] = wall_clock_seconds;
    if (!timestamp.empty()) j["timestamp"] = timestamp;
    return j;
  }

  /// Tables layout: one row per method, one column per images-per-subject
  /// value (dataset mode) or a single error column (synthetic mode).
  std::string tables_csv() const {
    std::vector<Index> counts;
    for (const auto& m : methods)
      if (m.images_per_subject >= 0 &&
          std::find(counts.begin(), counts.end(), m.images_per_subject) == counts.end())
        counts.push_back(m.images_per_subject);
    std::sort(counts.begin(), counts.end());
    std::ostringstream os;
    if (counts.empty()) {
      os << "method,mean_error,std_error\n";
      for (const auto& m : methods)
        os << m.name << ',' << io::format_full(m.mean_error) << ','
           << io::format_full(m.std_error) << '\n';
      return os.str();
    }
    os << "method";
    for (Index c : counts) os << ',' << c << " images per sub.";
    os << '\n';
    std::vector<std::string> names;
    for (const auto& m : methods)
      if (std::find(names.begin(), names.end(), m.name) == names.end()) names.push_back(m.name);
    for (const auto& name : names) {
      os << name;
      for (Index c : counts) {
        for (const auto& m : methods)
          if (m.name == name && m.images_per_subject == c) {
            os << ',' << io::format_full(m.mean_error);
            break;
          }
      }
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline void finalize_stats(MethodResult& m) {
  std::vector<double> ok;
  for (double e : m.per_trial_error)
    if (!std::isnan(e)) ok.push_back(e);
  m.failed_trials = static_cast<int>(m.per_trial_error.size() - ok.size());
  if (ok.empty()) {
    m.mean_error = std::numeric_limits<double>::quiet_NaN();
    m.std_error = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
  double var = 0.0;
  for (double e : ok) var += (e - mean) * (e - mean);
  m.mean_error = mean;
  m.std_error = ok.size() > 1 ? std::sqrt(var / static_cast<double>(ok.size() - 1)) : 0.0;
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// JSON-lines sink for solver diagnostics; shared across worker threads.
class TraceSink {
 public:
  explicit TraceSink(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open trace file: " + path.string());
  }
  std::function<void(const SolverTrace&)> callback() {
    return [this](const SolverTrace& t) {
      std::lock_guard<std::mutex> lock(mu_);
      out_ << "{\"iter\":" << t.iter << ",\"primal_res\":" << io::format_full(t.primal_res)
           << ",\"dual_res\":" << io::format_full(t.dual_res)
           << ",\"objective\":" << io::format_full(t.objective) << "}\n";
    };
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

struct PipelineOutcome {
  double error = std::numeric_limits<double>::quiet_NaN();
  int warning_columns = 0;
  Eigen::MatrixXd W;
};

inline PipelineOutcome cluster_and_score(const Eigen::MatrixXd& X, const GroupRepresentation& rep,
                                         const SolverConfig& solver, int L,
                                         std::uint64_t cluster_seed,
                                         const std::vector<int>& truth, unsigned threads) {
  PipelineOutcome out;
  const AffinityMatrix aff = build_affinity(X, rep, solver, AffinityOptions{threads});
  for (ColumnStatus s : aff.status)
    if (s != ColumnStatus::ok) ++out.warning_columns;
  const ClusteringResult cl = spectral_cluster(aff.W, L, cluster_seed);
  out.error = score_clustering(cl.assignments, truth);
  out.W = aff.W;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synthetic experiments
// ---------------------------------------------------------------------------

/// Applies an independently drawn group element to every data column; the
/// stored bases keep describing the pre-scramble geometry, like perturbation.
inline SyntheticDataset scramble_dataset(const SyntheticDataset& ds,
                                         const GroupRepresentation& rep, std::uint64_t rng_seed) {
  if (ds.n() != rep.n()) throw std::invalid_argument("scramble_dataset: dimension mismatch");
  SyntheticDataset out = ds;
  Rng rng = make_rng(rng_seed);
  std::uniform_int_distribution<Index> pick(0, rep.order() - 1);
  for (Index i = 0; i < out.X.cols(); ++i) out.X.col(i) = rep.apply(pick(rng), out.X.col(i));
  return out;
}

namespace detail {

inline std::vector<Index> expand_support(const SubmoduleSpec& spec, const nlohmann::json& group,
                                         Index n) {
  std::vector<Index> support;
  if (spec.support) support = *spec.support;
  if (spec.support_rows) {
    if (!group.contains("kind") || group.at("kind") != "cyclic_shift")
      throw ConfigError("support_rows requires a cyclic_shift group descriptor");
    const Index n1 = group.at("rows").get<Index>();
    const Index n2 = group.at("cols").get<Index>();
    for (Index r : *spec.support_rows) {
      if (r < 0 || r >= n1) throw ConfigError("support_rows entry out of range");
      for (Index c = 0; c < n2; ++c) support.push_back(c * n1 + r);
    }
  }
  for (Index idx : support)
    if (idx < 0 || idx >= n) throw ConfigError("support index out of range");
  return support;
}

inline std::vector<SubmoduleBasis> build_bases(const ExperimentConfig& cfg,
                                               const GroupRepresentation& rep,
                                               std::uint64_t trial_seed) {
  std::vector<SubmoduleBasis> bases;
  for (size_t l = 0; l < cfg.submodules.size(); ++l) {
    const auto& spec = cfg.submodules[l];
    const std::uint64_t s = derive_seed(trial_seed, 100 + static_cast<std::uint64_t>(l));
    if (spec.kind == SubmoduleSpec::Kind::subspace) {
      bases.push_back(generate_subspace_basis(rep.n(), spec.dim, s));
    } else {
      auto support = expand_support(spec, cfg.group, rep.n());
      bases.push_back(generate_submodule_basis(
          rep, spec.num_seeds, s,
          support.empty() ? std::nullopt : std::make_optional(std::move(support))));
    }
  }
  return bases;
}

// Best error over the lambda grid (ties to the smaller lambda); empty grid
// means a single exact-mode run.
inline void run_method_trial(const Eigen::MatrixXd& X, const std::vector<int>& truth,
                             const GroupRepresentation& rep, const ExperimentConfig& cfg,
                             const std::vector<double>& grid, std::uint64_t cluster_seed,
                             MethodResult& m) {
  try {
    if (grid.empty()) {
      SolverConfig solver = cfg.solver;
      solver.reg_lambda.reset();
      const auto out =
          cluster_and_score(X, rep, solver, cfg.num_clusters, cluster_seed, truth, cfg.threads);
      m.per_trial_error.push_back(out.error);
      m.best_lambda.push_back(std::numeric_limits<double>::quiet_NaN());
      m.warning_columns += out.warning_columns;
    } else {
      double best_err = std::numeric_limits<double>::infinity();
      double best_lambda = grid.front();
      int warn = 0;
      for (double lam : grid) {
        SolverConfig solver = cfg.solver;
        solver.reg_lambda = lam;
        const auto out =
            cluster_and_score(X, rep, solver, cfg.num_clusters, cluster_seed, truth, cfg.threads);
        warn += out.warning_columns;
        if (out.error < best_err) {  // strict: ties keep the smaller lambda
          best_err = out.error;
          best_lambda = lam;
        }
      }
      m.per_trial_error.push_back(best_err);
      m.best_lambda.push_back(best_lambda);
      m.warning_columns += warn;
    }
  } catch (const AllColumnsFailed&) {
    m.per_trial_error.push_back(std::numeric_limits<double>::quiet_NaN());
    m.best_lambda.push_back(std::numeric_limits<double>::quiet_NaN());
  }
}

}  // namespace detail

/// Per trial: generate the dataset, then run every configured method (ssmc =
/// the configured group, ssc = the trivial group on the same code path)
/// through affinity -> spectral clustering -> scoring, sweeping the lambda
/// grid in regularized mode. Failed trials are excluded from the mean and
/// counted.
inline ExperimentReport run_synthetic_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode != "synthetic") throw ConfigError("run_synthetic_experiment: mode mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const GroupRepresentation rep = GroupRepresentation::from_descriptor(cfg.group);
  const GroupRepresentation trivial = GroupRepresentation::trivial(rep.n());

  std::vector<double> grid = cfg.lambda_grid;
  if (grid.empty() && cfg.solver.reg_lambda) grid.push_back(*cfg.solver.reg_lambda);

  ExperimentReport report;
  report.mode = cfg.mode;
  report.config_echo = cfg.raw;
  for (const auto& name : cfg.methods) {
    MethodResult m;
    m.name = name;
    m.group_descriptor = (name == "ssc") ? trivial.descriptor() : rep.descriptor();
    report.methods.push_back(std::move(m));
  }

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(trial));
    const auto bases = detail::build_bases(cfg, rep, trial_seed);
    SyntheticDataset ds =
        sample_semi_random(bases, cfg.points_per_submodule, derive_seed(trial_seed, 0));
    if (cfg.scramble) ds = scramble_dataset(ds, rep, derive_seed(trial_seed, 200));
    if (cfg.noise_sigma > 0.0) ds = perturb_dataset(ds, cfg.noise_sigma, derive_seed(trial_seed, 300));

    for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const GroupRepresentation& method_rep = cfg.methods[mi] == "ssc" ? trivial : rep;
      detail::run_method_trial(ds.X, ds.labels, method_rep, cfg, grid,
                               derive_seed(trial_seed, 400 + mi), report.methods[mi]);
    }
  }
  for (auto& m : report.methods) detail::finalize_stats(m);

  bool all_failed = !report.methods.empty();
  for (const auto& m : report.methods)
    if (m.failed_trials < static_cast<int>(m.per_trial_error.size())) all_failed = false;
  if (all_failed) throw AllColumnsFailed("every trial of every method failed");

  if (!cfg.no_timestamp) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.timestamp = detail::iso_timestamp();
  }
  return report;
}

// ---------------------------------------------------------------------------
// dataset experiments
// ---------------------------------------------------------------------------

/// Per trial and per images-per-subject count: subsample that many images of
/// every subject without replacement (indices sorted ascending, seeded), then
/// run both methods with the lambda sweep. Emits the methods-by-counts table.
inline ExperimentReport run_dataset_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode != "dataset") throw ConfigError("run_dataset_experiment: mode mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const IngestedDataset data = ingest_image_dataset(cfg.manifest, cfg.preprocessing);
  const GroupRepresentation rep = GroupRepresentation::from_descriptor(cfg.group);
  if (rep.n() != data.X.rows())
    throw ConfigError("group dimension " + std::to_string(rep.n()) +
                      " does not match preprocessed image size " + std::to_string(data.X.rows()));
  const GroupRepresentation trivial = GroupRepresentation::trivial(rep.n());

  // subjects in order of first appearance
  std::vector<int> subjects;
  std::vector<std::vector<Index>> by_subject;
  for (Index i = 0; i < data.X.cols(); ++i) {
    const int lab = data.labels[static_cast<size_t>(i)];
    auto it = std::find(subjects.begin(), subjects.end(), lab);
    if (it == subjects.end()) {
      subjects.push_back(lab);
      by_subject.emplace_back();
      it = subjects.end() - 1;
    }
    by_subject[static_cast<size_t>(it - subjects.begin())].push_back(i);
  }
  const int L = cfg.num_clusters > 1 ? cfg.num_clusters : static_cast<int>(subjects.size());

  std::vector<double> grid = cfg.lambda_grid;
  if (grid.empty() && cfg.solver.reg_lambda) grid.push_back(*cfg.solver.reg_lambda);

  ExperimentReport report;
  report.mode = cfg.mode;
  report.config_echo = cfg.raw;
  const std::vector<std::string> method_names{"ssmc", "ssc"};
  for (Index count : cfg.images_per_subject) {
    for (const auto& bs : by_subject)
      if (static_cast<Index>(bs.size()) < count)
        throw ConfigError("requested " + std::to_string(count) +
                          " images per subject but a subject has only " +
                          std::to_string(bs.size()));
    for (const auto& name : method_names) {
      MethodResult m;
      m.name = name;
      m.group_descriptor = (name == "ssc") ? trivial.descriptor() : rep.descriptor();
      m.images_per_subject = count;
      report.methods.push_back(std::move(m));
    }
  }

  size_t slot = 0;
  for (Index count : cfg.images_per_subject) {
    for (size_t mi = 0; mi < method_names.size(); ++mi) {
      MethodResult& m = report.methods[slot + mi];
      for (int trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t trial_seed =
            derive_seed(cfg.base_seed, static_cast<std::uint64_t>(count) * 1000 +
                                           static_cast<std::uint64_t>(trial));
        // sample the same point set for both methods of a trial
        Rng rng = make_rng(derive_seed(trial_seed, 1));
        std::vector<Index> chosen;
        for (const auto& pool : by_subject) {
          std::vector<Index> idx = pool;
          for (Index k = 0; k < count; ++k) {
            std::uniform_int_distribution<size_t> pick(static_cast<size_t>(k), idx.size() - 1);
            std::swap(idx[static_cast<size_t>(k)], idx[pick(rng)]);
          }
          idx.resize(static_cast<size_t>(count));
          std::sort(idx.begin(), idx.end());
          chosen.insert(chosen.end(), idx.begin(), idx.end());
        }
        Eigen::MatrixXd X(data.X.rows(), static_cast<Index>(chosen.size()));
        std::vector<int> truth;
        for (size_t t = 0; t < chosen.size(); ++t) {
          X.col(static_cast<Index>(t)) = data.X.col(chosen[t]);
          truth.push_back(data.labels[static_cast<size_t>(chosen[t])]);
        }
        const GroupRepresentation& method_rep = method_names[mi] == "ssc" ? trivial : rep;
        detail::run_method_trial(X, truth, method_rep, cfg, grid,
                                 derive_seed(trial_seed, 400 + mi), m);
      }
      detail::finalize_stats(m);
    }
    slot += method_names.size();
  }

  if (!cfg.no_timestamp) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.timestamp = detail::iso_timestamp();
  }
  return report;
}

// ---------------------------------------------------------------------------
// geometry experiments
// ---------------------------------------------------------------------------

/// Orchestrates the geometry sub-experiments requested by the config:
/// "probe" (conjecture probe), "pairwise" (affinities and the sufficient
/// condition on generated submodules), "theorem" (the concentration-bound
/// Monte Carlo).
inline GeometryReport run_geometry_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode != "geometry") throw ConfigError("run_geometry_experiment: mode mismatch");
  GeometryReport report;
  const auto& g = cfg.geometry;

  if (g.contains("probe")) {
    const auto& p = g.at("probe");
    ConjectureOptions opts;
    if (p.contains("ng_values")) opts.ng_values = p.at("ng_values").get<std::vector<Index>>();
    opts.beta = p.value("beta", Index{2});
    opts.n_over_d = p.value("n_over_d", Index{8});
    opts.trials = p.value("trials", 5);
    opts.seed = derive_seed(cfg.base_seed, 11);
    opts.inradius.num_directions = p.value("num_directions", 2000);
    opts.inradius.descent_steps = p.value("descent_steps", 100);
    report.conjecture_fit = conjecture_probe(opts);
  }

  if (g.contains("pairwise")) {
    const auto& p = g.at("pairwise");
    const GroupRepresentation rep = GroupRepresentation::from_descriptor(cfg.group);
    const Index L = p.value("num_submodules", Index{2});
    const Index num_seeds = p.value("num_seeds", Index{1});
    const Index N_l = p.value("points_per_submodule", Index{16});
    BoundParams params{p.value("t", 1.0), p.value("delta", 1.0)};
    InradiusOptions iopts;
    iopts.num_directions = p.value("num_directions", 2000);
    iopts.descent_steps = p.value("descent_steps", 100);

    std::vector<SubmoduleBasis> bases;
    for (Index l = 0; l < L; ++l)
      bases.push_back(generate_submodule_basis(
          rep, num_seeds, derive_seed(cfg.base_seed, 500 + static_cast<std::uint64_t>(l))));
    report.affinity_matrix.resize(L, L);
    for (Index k = 0; k < L; ++k)
      for (Index l = 0; l < L; ++l)
        report.affinity_matrix(k, l) = submodule_affinity(bases[static_cast<size_t>(k)],
                                                          bases[static_cast<size_t>(l)], rep);
    for (Index l = 0; l < L; ++l) {
      const auto& basis = bases[static_cast<size_t>(l)];
      Rng rng = make_rng(derive_seed(cfg.base_seed, 600 + static_cast<std::uint64_t>(l)));
      Eigen::MatrixXd A(basis.dim(), N_l);
      for (Index j = 0; j < N_l; ++j) A.col(j) = unit_sphere_vector(basis.dim(), rng);
      const Eigen::MatrixXd dict = reduced_group_dictionary(basis, A.rightCols(N_l - 1));
      InradiusOptions io = iopts;
      io.seed = derive_seed(cfg.base_seed, 700 + static_cast<std::uint64_t>(l));
      const PairedInradius pr = estimate_inradius_pair(dict, N_l - 1, rep.order(), io);
      report.inradius_estimates.push_back(pr.group.r_hat);
      report.ssc_inradius_estimates.push_back(pr.ssc.r_hat);
      for (Index k = 0; k < L; ++k) {
        if (k == l) continue;
        PairwiseConditionResult res;
        res.c1 = evaluate_C1(params, N_l);
        res.affinity = report.affinity_matrix(k, l);
        res.lhs = res.c1 * res.affinity /
                  (std::sqrt(static_cast<double>(basis.dim())) *
                   std::sqrt(static_cast<double>(bases[static_cast<size_t>(k)].dim())));
        res.rhs = pr.group.r_hat;
        res.margin = res.rhs - res.lhs;
        res.holds = res.lhs <= res.rhs;
        report.condition_flags.push_back(res);
        report.c1_values.push_back(res.c1);
        report.c2_values.push_back(evaluate_C2(params, N_l, rep.order()));
      }
    }
  }

  if (g.contains("theorem")) {
    const auto& p = g.at("theorem");
    const GroupRepresentation rep = GroupRepresentation::from_descriptor(cfg.group);
    const Index num_seeds = p.value("num_seeds", Index{2});
    const Index N_k = p.value("N_k", Index{32});
    BoundParams params{p.value("t", 1.0), p.value("delta", 1.0)};
    const SubmoduleBasis Qk =
        generate_submodule_basis(rep, num_seeds, derive_seed(cfg.base_seed, 800));
    const SubmoduleBasis Ql =
        generate_submodule_basis(rep, num_seeds, derive_seed(cfg.base_seed, 801));
    TheoremOptions topts;
    topts.trials = p.value("trials", 10000);
    topts.seed = derive_seed(cfg.base_seed, 802);
    const TheoremFrequency freq = theorem_event_frequency(Qk, Ql, rep, params, N_k, topts);
    report.c1_values.push_back(freq.c1);
    report.c2_values.push_back(freq.c2);
    PairwiseConditionResult res;  // reuse the flag slot for the bound check
    res.c1 = freq.c1;
    res.affinity = freq.threshold;
    res.lhs = std::max(0.0, freq.bound_printed);
    res.rhs = freq.frequency;
    res.margin = res.rhs - res.lhs;
    res.holds = res.rhs >= res.lhs;
    report.condition_flags.push_back(res);
  }

  return report;
}

inline nlohmann::json geometry_report_to_json(const GeometryReport& r) {
  nlohmann::json j;
  if (r.affinity_matrix.size() > 0) {
    auto rows = nlohmann::json::array();
    for (Index i = 0; i < r.affinity_matrix.rows(); ++i) {
      auto row = nlohmann::json::array();
      for (Index k = 0; k < r.affinity_matrix.cols(); ++k) row.push_back(r.affinity_matrix(i, k));
      rows.push_back(row);
    }
    j["affinity_matrix"] = rows;
  }
  j["inradius_estimates"] = r.inradius_estimates;
  j["ssc_inradius_estimates"] = r.ssc_inradius_estimates;
  j["c1_values"] = r.c1_values;
  j["c2_values"] = r.c2_values;
  auto flags = nlohmann::json::array();
  for (const auto& f : r.condition_flags)
    flags.push_back({{"lhs", f.lhs},
                     {"rhs", f.rhs},
                     {"margin", f.margin},
                     {"holds", f.holds},
                     {"c1", f.c1},
                     {"affinity", f.affinity}});
  j["condition_flags"] = flags;
  if (!r.conjecture_fit.rows.empty()) {
    nlohmann::json fit;
    fit["slope"] = std::isnan(r.conjecture_fit.slope)
                       ? nlohmann::json(nullptr)
                       : nlohmann::json(r.conjecture_fit.slope);
    fit["c0_hat"] = r.conjecture_fit.c0_hat;
    auto rows = nlohmann::json::array();
    for (const auto& row : r.conjecture_fit.rows)
      rows.push_back({{"N_G", row.N_G},
                      {"trial", row.trial},
                      {"r_hat", row.r_hat},
                      {"r_hat_ssc", row.r_hat_ssc}});
    fit["rows"] = rows;
    j["conjecture_fit"] = fit;
  }
  return j;
}

/// (N_G, trial, r_hat, r_hat_ssc) rows; re-checks the dominance invariant
/// r_hat >= r_hat_ssc on every row before emitting.
inline std::string conjecture_rows_csv(const ConjectureFit& fit) {
  std::ostringstream os;
  os << "N_G,trial,r_hat,r_hat_ssc\n";
  for (const auto& row : fit.rows) {
    if (row.r_hat < row.r_hat_ssc)
      throw std::runtime_error("conjecture row violates r_hat >= r_hat_ssc");
    os << row.N_G << ',' << row.trial << ',' << io::format_full(row.r_hat) << ','
       << io::format_full(row.r_hat_ssc) << '\n';
  }
  return os.str();
}

}  // namespace ssmc
