#pragma once

// Detection accuracy on labelled synthetic data, the simulation-table
// drivers, the subsample-stability protocol and runtime-scaling benchmarks.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "odin/design.hpp"
#include "odin/error.hpp"
#include "odin/influence.hpp"
#include "odin/mm.hpp"
#include "odin/random.hpp"
#include "odin/synthetic.hpp"
#include "odin/threshold.hpp"

namespace odin {

struct ConfusionSummary {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  /// NaN when there are no positives.
  double sensitivity() const {
    return tp + fn == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  /// NaN when there are no negatives.
  double specificity() const {
    return tn + fp == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(tn) / static_cast<double>(tn + fp);
  }
};

/// Outliers are the positive class.
inline ConfusionSummary confusion(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  require(flags.size() == truth.size(), Errc::dimension_mismatch,
          "flags (" + std::to_string(flags.size()) + ") and labels (" + std::to_string(truth.size()) +
              ") differ in length");
  ConfusionSummary c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (truth[i])
      ++(flags[i] ? c.tp : c.fn);
    else
      ++(flags[i] ? c.fp : c.tn);
  }
  return c;
}

// ---- end-to-end detection ----

struct DetectConfig {
  FitConfig fit;
  double sensitivity = kDefaultSensitivity;
  ReferenceCoding coding = ReferenceCoding::minimal;
};

struct DetectionRun {
  DesignMatrix design;
  ModelFit fit;
  InfluenceScores scores;
  OutlierFlags flags;
};

/// fit -> score -> flag
inline DetectionRun run_odin(const NetworkDataset& data, const Atlas& atlas, const DetectConfig& config = {}) {
  require(atlas.size() == data.nodes(), Errc::dimension_mismatch,
          "atlas has " + std::to_string(atlas.size()) + " ROIs but the dataset has " + std::to_string(data.nodes()) +
              " nodes");
  DetectionRun r;
  r.design = build_design(atlas, config.coding);
  r.fit = fit(data, r.design, config.fit);
  r.scores = score(data, r.fit, r.design.X, config.fit.threads);
  r.flags = flag(r.scores, config.sensitivity);
  return r;
}

/// Independent seed for the index-th unit of an experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return substream(seed, tag, index).next();
}

// ---- simulation tables ----

struct ExperimentRow {
  double parameter = 0.0;  // flip fraction or noise SD
  std::vector<double> sensitivity;
  std::vector<double> specificity;
  std::vector<std::size_t> flagged;

  double mean_sensitivity() const { return mean(sensitivity); }
  double mean_specificity() const { return mean(specificity); }

 private:
  static double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
};

struct Table1Config {
  std::vector<double> flip_fractions{0.01, 0.02, 0.07, 0.10, 0.15};
  int repetitions = 5;
  std::uint64_t seed = 2024;
  std::size_t subjects = 500;
  std::size_t nodes = 70;
  std::size_t hemispheres = 2;
  std::size_t lobes_per_hemisphere = 5;
  double outlier_fraction = 0.10;
  DetectConfig detect;

  void validate() const {
    require(!flip_fractions.empty(), Errc::invalid_config, "no flip fractions given");
    require(repetitions >= 1, Errc::invalid_config, "repetitions must be >= 1");
    detect.fit.validate();
  }
};

/// Repetition r uses the same seed for every flip fraction, so rows differ
/// only in the contamination level.
inline std::vector<ExperimentRow> table1_experiment(const Table1Config& config) {
  config.validate();
  std::vector<ExperimentRow> rows;
  for (double q : config.flip_fractions) {
    ExperimentRow row;
    row.parameter = q;
    for (int r = 0; r < config.repetitions; ++r) {
      SimConfig sim;
      sim.subjects = config.subjects;
      sim.nodes = config.nodes;
      sim.hemispheres = config.hemispheres;
      sim.lobes_per_hemisphere = config.lobes_per_hemisphere;
      sim.outlier_fraction = config.outlier_fraction;
      sim.flip_fraction = q;
      sim.seed = derive_seed(config.seed, "table1", static_cast<std::uint64_t>(r));
      sim.threads = config.detect.fit.threads;
      const LabeledDataset d = simulate_model(sim);
      const DetectionRun run = run_odin(d.data, d.atlas, config.detect);
      const ConfusionSummary c = confusion(run.flags.flag, d.is_outlier);
      row.sensitivity.push_back(c.sensitivity());
      row.specificity.push_back(c.specificity());
      row.flagged.push_back(run.flags.count());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Table2Config {
  std::vector<double> sigmas{0.010, 0.015, 0.017, 0.020, 0.025};
  int repetitions = 5;
  std::uint64_t seed = 2024;
  std::size_t subjects = 500;
  std::size_t nodes = 70;
  std::size_t hemispheres = 2;
  std::size_t lobes_per_hemisphere = 5;
  std::size_t components = 60;
  double outlier_fraction = 0.10;
  DetectConfig detect;

  void validate() const {
    require(!sigmas.empty(), Errc::invalid_config, "no noise levels given");
    require(repetitions >= 1, Errc::invalid_config, "repetitions must be >= 1");
    require(components <= nodes, Errc::invalid_config, "components must not exceed nodes");
    detect.fit.validate();
  }
};

/// The base sample of each repetition is drawn from the logistic model with
/// no contamination and embedded once; every noise level reuses it.
inline std::vector<ExperimentRow> table2_experiment(const Table2Config& config) {
  config.validate();
  std::vector<ExperimentRow> rows(config.sigmas.size());
  for (std::size_t s = 0; s < config.sigmas.size(); ++s) rows[s].parameter = config.sigmas[s];
  for (int r = 0; r < config.repetitions; ++r) {
    SimConfig sim;
    sim.subjects = config.subjects;
    sim.nodes = config.nodes;
    sim.hemispheres = config.hemispheres;
    sim.lobes_per_hemisphere = config.lobes_per_hemisphere;
    sim.outlier_fraction = 0.0;
    sim.flip_fraction = 0.0;
    sim.seed = derive_seed(config.seed, "table2-base", static_cast<std::uint64_t>(r));
    sim.threads = config.detect.fit.threads;
    const LabeledDataset base = simulate_model(sim);
    const TnpcaModel model = tnpca_fit(base.data, config.components);
    const std::uint64_t noise_seed = derive_seed(config.seed, "table2-noise", static_cast<std::uint64_t>(r));
    for (std::size_t s = 0; s < config.sigmas.size(); ++s) {
      const LabeledDataset d = simulate_tnpca(model, base.data.subject_ids(), base.atlas, config.sigmas[s],
                                              config.outlier_fraction, noise_seed);
      const DetectionRun run = run_odin(d.data, d.atlas, config.detect);
      const ConfusionSummary c = confusion(run.flags.flag, d.is_outlier);
      rows[s].sensitivity.push_back(c.sensitivity());
      rows[s].specificity.push_back(c.specificity());
      rows[s].flagged.push_back(run.flags.count());
    }
  }
  return rows;
}

inline void write_table_csv(const std::vector<ExperimentRow>& rows, std::string_view parameter_name, std::ostream& out) {
  out << parameter_name << ",repetitions,mean_sensitivity,mean_specificity\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%zu,%.17g,%.17g\n", r.parameter, r.sensitivity.size(), r.mean_sensitivity(),
                  r.mean_specificity());
    out << buf;
  }
}

inline nlohmann::json table_to_json(const std::vector<ExperimentRow>& rows, std::string_view parameter_name) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{std::string(parameter_name), r.parameter},
                 {"mean_sensitivity", r.mean_sensitivity()},
                 {"mean_specificity", r.mean_specificity()},
                 {"sensitivity", r.sensitivity},
                 {"specificity", r.specificity},
                 {"flagged", r.flagged}});
  return j;
}

// ---- subsample stability ----

struct StabilityRow {
  std::size_t size = 0;
  std::size_t outliers_included = 0;       // full-sample flagged subjects drawn
  std::size_t subsample_flags = 0;         // flags from the subsample-only run
  std::size_t overlap = 0;                 // included full-sample outliers flagged again
  std::size_t newly_flagged = 0;           // included full-sample non-outliers now flagged
  std::size_t non_outliers_included = 0;

  double overlap_percent() const {
    return outliers_included == 0 ? std::numeric_limits<double>::quiet_NaN()
                                  : 100.0 * static_cast<double>(overlap) / static_cast<double>(outliers_included);
  }
  double newly_flagged_percent() const {
    return non_outliers_included == 0
               ? std::numeric_limits<double>::quiet_NaN()
               : 100.0 * static_cast<double>(newly_flagged) / static_cast<double>(non_outliers_included);
  }
};

struct StabilityConfig {
  std::vector<std::size_t> sizes{500, 1000, 2000};
  double outlier_share = 0.10;  // stratum share of full-sample flagged subjects
  std::uint64_t seed = 2024;
  DetectConfig detect;
};

/// Re-runs detection on stratified subsamples of a population whose
/// full-sample flags are given. A size equal to the population takes every
/// subject.
inline std::vector<StabilityRow> subsample_stability(const NetworkDataset& population, const Atlas& atlas,
                                                     const std::vector<bool>& full_flags,
                                                     const StabilityConfig& config) {
  require(full_flags.size() == population.subjects(), Errc::dimension_mismatch,
          "full-sample flags do not match the population");
  require(config.outlier_share >= 0.0 && config.outlier_share <= 1.0, Errc::invalid_config,
          "outlier_share must be in [0, 1]");
  std::vector<std::size_t> flagged, unflagged;
  for (std::size_t i = 0; i < full_flags.size(); ++i) (full_flags[i] ? flagged : unflagged).push_back(i);

  std::vector<StabilityRow> rows;
  for (std::size_t k = 0; k < config.sizes.size(); ++k) {
    const std::size_t m = config.sizes[k];
    require(m >= 1, Errc::invalid_config, "subsample size must be >= 1");
    require(m <= population.subjects(), Errc::invalid_config,
            "subsample size " + std::to_string(m) + " exceeds the population of " +
                std::to_string(population.subjects()));
    std::vector<std::size_t> rows_taken;
    if (m == population.subjects()) {
      rows_taken.resize(m);
      for (std::size_t i = 0; i < m; ++i) rows_taken[i] = i;
    } else {
      const auto n_out = static_cast<std::size_t>(std::llround(config.outlier_share * static_cast<double>(m)));
      const std::size_t n_in = m - n_out;
      require(n_out <= flagged.size(), Errc::invalid_config,
              "subsample size " + std::to_string(m) + " needs " + std::to_string(n_out) +
                  " flagged subjects but only " + std::to_string(flagged.size()) + " exist");
      require(n_in <= unflagged.size(), Errc::invalid_config,
              "subsample size " + std::to_string(m) + " needs " + std::to_string(n_in) +
                  " unflagged subjects but only " + std::to_string(unflagged.size()) + " exist");
      RandomStream rng = substream(config.seed, "stability", k);
      for (std::size_t j : rng.sample_without_replacement(flagged.size(), n_out)) rows_taken.push_back(flagged[j]);
      for (std::size_t j : rng.sample_without_replacement(unflagged.size(), n_in)) rows_taken.push_back(unflagged[j]);
      std::sort(rows_taken.begin(), rows_taken.end());
    }
    const DetectionRun run = run_odin(population.subset(rows_taken), atlas, config.detect);
    StabilityRow row;
    row.size = m;
    row.subsample_flags = run.flags.count();
    for (std::size_t j = 0; j < rows_taken.size(); ++j) {
      const bool was = full_flags[rows_taken[j]];
      const bool now = run.flags.flag[j];
      if (was) {
        ++row.outliers_included;
        row.overlap += now;
      } else {
        ++row.non_outliers_included;
        row.newly_flagged += now;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_stability_csv(const std::vector<StabilityRow>& rows, std::ostream& out) {
  out << "subsample_size,outliers_included,subsample_flags,overlap,overlap_percent,non_outliers_included,"
         "newly_flagged_non_outliers,newly_flagged_percent\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.17g,%zu,%zu,%.17g\n", r.size, r.outliers_included,
                  r.subsample_flags, r.overlap, r.overlap_percent(), r.non_outliers_included, r.newly_flagged,
                  r.newly_flagged_percent());
    out << buf;
  }
}

// ---- runtime scaling ----

enum class BenchMode { iter_vs_N, iter_vs_L, influence_vs_N, influence_vs_L };

inline std::string_view to_string(BenchMode m) {
  switch (m) {
    case BenchMode::iter_vs_N: return "iter_vs_N";
    case BenchMode::iter_vs_L: return "iter_vs_L";
    case BenchMode::influence_vs_N: return "influence_vs_N";
    case BenchMode::influence_vs_L: return "influence_vs_L";
  }
  return "?";
}

inline BenchMode parse_bench_mode(std::string_view s) {
  for (BenchMode m : {BenchMode::iter_vs_N, BenchMode::iter_vs_L, BenchMode::influence_vs_N, BenchMode::influence_vs_L})
    if (to_string(m) == s) return m;
  fail(Errc::invalid_config, "unknown benchmark mode '" + std::string(s) +
                                 "' (expected iter_vs_N, iter_vs_L, influence_vs_N or influence_vs_L)");
}

inline bool varies_nodes(BenchMode m) { return m == BenchMode::iter_vs_L || m == BenchMode::influence_vs_L; }

struct BenchConfig {
  BenchMode mode = BenchMode::iter_vs_N;
  /// subject counts (N modes) or node counts (L modes)
  std::vector<std::size_t> grid;
  std::size_t fixed = 0;   // node count (N modes) or subject count (L modes)
  int iterations = 200;    // MM steps timed per run
  int runs = 3;            // timed runs per grid point; the median is reported
  std::uint64_t seed = 2024;
  int threads = 1;
  FitConfig fit;           // for the converged fits the influence modes need

  static BenchConfig defaults(BenchMode mode) {
    BenchConfig c;
    c.mode = mode;
    switch (mode) {
      case BenchMode::iter_vs_N: c.grid = {250, 500, 1000, 2000, 4000}; c.fixed = 30; break;
      case BenchMode::iter_vs_L: c.grid = {20, 28, 40, 56, 80}; c.fixed = 200; break;
      case BenchMode::influence_vs_N: c.grid = {250, 500, 1000, 2000, 4000}; c.fixed = 20; break;
      case BenchMode::influence_vs_L: c.grid = {24, 34, 48, 68, 96}; c.fixed = 200; break;
    }
    return c;
  }

  void validate() const {
    require(grid.size() >= 5, Errc::invalid_config, "benchmark grid needs at least 5 sizes");
    for (std::size_t k = 1; k < grid.size(); ++k)
      require(grid[k] > grid[k - 1], Errc::invalid_config, "benchmark grid must be strictly increasing");
    require(fixed >= 1, Errc::invalid_config, "fixed dimension must be >= 1");
    require(iterations >= 1 && runs >= 1, Errc::invalid_config, "iterations and runs must be >= 1");
    require(threads >= 1, Errc::invalid_config, "threads must be >= 1");
  }
};

struct ScalingReport {
  BenchMode mode = BenchMode::iter_vs_N;
  std::vector<double> size;     // N or L
  std::vector<double> seconds;  // median wall time of the timed stage
  double exponent = 0.0;
  double r2 = 0.0;
};

struct PowerLaw {
  double exponent = 0.0;
  double log_scale = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit of log y = a + b log x.
inline PowerLaw fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::invalid_argument, "power-law fit needs >= 2 points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    require(x[static_cast<std::size_t>(k)] > 0.0 && y[static_cast<std::size_t>(k)] > 0.0, Errc::invalid_argument,
            "power-law fit needs positive values");
    lx(k) = std::log(x[static_cast<std::size_t>(k)]);
    ly(k) = std::log(y[static_cast<std::size_t>(k)]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  const double syy = (ly.array() - my).square().sum();
  PowerLaw p;
  p.exponent = sxy / sxx;
  p.log_scale = my - p.exponent * mx;
  p.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return p;
}

namespace detail {

template <typename Fn>
double seconds_of(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Times only the stage under test: MM steps (setup excluded) or the
/// influence computation on a converged fit. One warm-up run per grid point
/// is discarded.
inline ScalingReport bench_scaling(const BenchConfig& config) {
  config.validate();
  ScalingReport rep;
  rep.mode = config.mode;
  for (std::size_t k = 0; k < config.grid.size(); ++k) {
    SimConfig sim;
    sim.subjects = varies_nodes(config.mode) ? config.fixed : config.grid[k];
    sim.nodes = varies_nodes(config.mode) ? config.grid[k] : config.fixed;
    sim.outlier_fraction = 0.0;
    sim.flip_fraction = 0.0;
    sim.seed = derive_seed(config.seed, "bench", k);
    sim.threads = config.threads;
    const LabeledDataset d = simulate_model(sim);
    const DesignMatrix design = build_design(d.atlas);
    FitConfig fc = config.fit;
    fc.threads = config.threads;

    std::vector<double> times;
    if (config.mode == BenchMode::iter_vs_N || config.mode == BenchMode::iter_vs_L) {
      for (int run = 0; run <= config.runs; ++run) {
        MmSolver solver(d.data, design.X, fc);
        const double t = detail::seconds_of([&] {
          for (int it = 0; it < config.iterations; ++it) solver.step();
        });
        if (run > 0) times.push_back(t / config.iterations);
      }
    } else {
      const ModelFit f = fit(d.data, design, fc);
      for (int run = 0; run <= config.runs; ++run) {
        const double t = detail::seconds_of([&] { (void)score(d.data, f, design.X, config.threads); });
        if (run > 0) times.push_back(t);
      }
    }
    rep.size.push_back(static_cast<double>(varies_nodes(config.mode) ? edge_count(sim.nodes) : sim.subjects));
    rep.seconds.push_back(detail::median(times));
  }
  const PowerLaw law = fit_power_law(rep.size, rep.seconds);
  rep.exponent = law.exponent;
  rep.r2 = law.r2;
  return rep;
}

inline void write_scaling_csv(const ScalingReport& r, std::ostream& out) {
  out << "size,seconds\n";
  char buf[80];
  for (std::size_t k = 0; k < r.size.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.size[k], r.seconds[k]);
    out << buf;
  }
}

inline nlohmann::json scaling_to_json(const ScalingReport& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"size", r.size},
          {"seconds", r.seconds},
          {"exponent", r.exponent},
          {"r2", r.r2}};
}

}  // namespace odin
