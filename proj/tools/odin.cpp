// odin: command-line front end.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 unreadable or
// inconsistent input, 4 numerical failure, 5 fit stopped before converging.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "odin/odin.hpp"

#ifndef ODIN_VERSION
#define ODIN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitUnconverged = 5;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv) {
    doc_["tool"] = "odin";
    doc_["version"] = ODIN_VERSION;
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["started_at"] = utc_now();
    doc_["parameters"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::object();
  }
  json& parameters() { return doc_["parameters"]; }
  void input(const std::string& key, const std::string& path) { doc_["inputs"][key] = path; }
  void output(const std::string& key, const std::string& path) { doc_["outputs"][key] = path; }
  void result(const std::string& key, json value) { doc_["result"][key] = std::move(value); }

  void write(const std::string& path) {
    doc_["finished_at"] = utc_now();
    std::ofstream out(path);
    odin::require(out.good(), odin::Errc::io, "cannot write manifest '" + path + "'");
    out << doc_.dump(2) << '\n';
    spdlog::info("manifest written to {}", path);
  }

 private:
  json doc_;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  odin::require(out.good(), odin::Errc::io, "cannot write '" + path + "'");
  return out;
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  odin::require(!ec, odin::Errc::io, "cannot create directory '" + dir + "': " + ec.message());
}

json fit_config_json(const odin::FitConfig& c) {
  return {{"lambda", c.lambda},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"grad_tol", c.grad_tol},
          {"init", c.init == odin::InitPolicy::marginal ? "marginal" : "zero"}};
}

odin::InitPolicy parse_init(const std::string& s) {
  if (s == "marginal") return odin::InitPolicy::marginal;
  if (s == "zero") return odin::InitPolicy::zero;
  odin::fail(odin::Errc::invalid_config, "unknown init policy '" + s + "' (expected marginal or zero)");
}

// options shared by every command that fits the model
struct FitOptions {
  odin::FitConfig config;
  std::string init = "marginal";
  std::string coding = "minimal";

  void add(CLI::App* app) {
    app->add_option("--lambda", config.lambda, "ridge penalty on Z")->capture_default_str();
    app->add_option("--tol", config.tol, "relative objective change for convergence")->capture_default_str();
    app->add_option("--max-iter", config.max_iter, "iteration limit")->capture_default_str();
    app->add_option("--grad-tol", config.grad_tol, "also require |gradient|_inf below this (0 disables)")
        ->capture_default_str();
    app->add_option("--init", init, "starting values: marginal or zero")->capture_default_str();
    app->add_option("--coding", coding, "design reference coding: minimal or per_block")->capture_default_str();
  }
  odin::FitConfig resolved(int threads) const {
    odin::FitConfig c = config;
    c.init = parse_init(init);
    c.threads = threads;
    c.validate();
    return c;
  }
};

struct Context {
  int threads = 1;
  std::vector<std::string> argv;
};

void check_atlas_matches(const odin::Atlas& atlas, const odin::NetworkDataset& data) {
  odin::require(atlas.size() == data.nodes(), odin::Errc::dimension_mismatch,
                "atlas has " + std::to_string(atlas.size()) + " ROIs but the dataset has V=" +
                    std::to_string(data.nodes()) + " nodes (L=" + std::to_string(data.edges()) + " edges)");
}

// ---- fit ----

struct FitArgs {
  std::string data, atlas, out, manifest;
  FitOptions fit;
};

int cmd_fit(const FitArgs& a, const Context& ctx) {
  const odin::FitConfig config = a.fit.resolved(ctx.threads);
  const odin::ReferenceCoding coding = odin::parse_reference_coding(a.fit.coding);
  const odin::NetworkDataset data = odin::read_dataset(a.data);
  const odin::Atlas atlas = odin::read_atlas(a.atlas);
  check_atlas_matches(atlas, data);
  const odin::DesignMatrix design = odin::build_design(atlas, coding);
  spdlog::info("fitting N={} subjects, L={} edges, p={} design columns", data.subjects(), data.edges(), design.cols());

  odin::StoredFit stored;
  stored.fit = odin::fit(data, design, config);
  stored.subject_ids = data.subject_ids();
  for (const auto& c : design.columns) stored.design_columns.push_back(c.label());
  stored.coding = coding;
  odin::write_fit(stored, a.out);

  const auto& f = stored.fit;
  std::printf("iterations=%d converged=%s initial_objective=%.10g final_objective=%.10g\n", f.iterations,
              f.converged ? "true" : "false", f.trace.front(), f.trace.back());

  Manifest m("fit", ctx.argv);
  m.parameters() = fit_config_json(config);
  m.parameters()["coding"] = odin::to_string(coding);
  m.parameters()["threads"] = ctx.threads;
  m.input("dataset", a.data);
  m.input("atlas", a.atlas);
  m.output("fit", a.out);
  m.result("converged", f.converged);
  m.result("iterations", f.iterations);
  m.write(a.manifest.empty() ? a.out + ".manifest.json" : a.manifest);
  if (!f.converged) {
    spdlog::warn("fit stopped at max_iter={} before converging; fit written and marked unconverged", config.max_iter);
    return kExitUnconverged;
  }
  return kExitOk;
}

// ---- detect ----

struct DetectArgs {
  std::string fit, data, atlas, out_dir;
  double sensitivity = odin::kDefaultSensitivity;
};

int cmd_detect(const DetectArgs& a, const Context& ctx) {
  odin::require(a.sensitivity >= 0.0, odin::Errc::invalid_config, "sensitivity must be >= 0");
  const odin::StoredFit stored = odin::read_fit(a.fit);
  const odin::NetworkDataset data = odin::read_dataset(a.data);
  const odin::Atlas atlas = odin::read_atlas(a.atlas);
  check_atlas_matches(atlas, data);
  const odin::DesignMatrix design = odin::build_design(atlas, stored.coding);

  odin::require(stored.subject_ids == data.subject_ids(), odin::Errc::dimension_mismatch,
                "fit was estimated on different subjects than the dataset (" +
                    std::to_string(stored.subject_ids.size()) + " vs " + std::to_string(data.subjects()) + ")");
  odin::require(static_cast<std::size_t>(stored.fit.Z.size()) == data.edges(), odin::Errc::dimension_mismatch,
                "fit has " + std::to_string(stored.fit.Z.size()) + " edges but the dataset has " +
                    std::to_string(data.edges()));
  std::vector<std::string> labels;
  for (const auto& c : design.columns) labels.push_back(c.label());
  odin::require(labels == stored.design_columns, odin::Errc::dimension_mismatch,
                "fit design columns do not match the design built from the atlas");
  if (!stored.fit.converged) spdlog::warn("fit in '{}' is marked unconverged", a.fit);

  make_dir(a.out_dir);
  const odin::InfluenceScores scores = odin::score(data, stored.fit, design.X, ctx.threads);
  if (scores.im2_fallback) spdlog::warn("beta covariance is singular; IM2 used a ridge-regularised covariance");
  const odin::OutlierFlags flags = odin::flag(scores, a.sensitivity);
  if (flags.im1.fallback_used) spdlog::warn("no elbow confirmed for IM1; using the 99th percentile");
  if (flags.im2.fallback_used) spdlog::warn("no elbow confirmed for IM2; using the 99th percentile");

  const std::string scores_path = in_dir(a.out_dir, "scores.csv");
  const std::string thresholds_path = in_dir(a.out_dir, "thresholds.json");
  const std::string flags_path = in_dir(a.out_dir, "flags.csv");
  const std::string curve1_path = in_dir(a.out_dir, "curve_im1.csv");
  const std::string curve2_path = in_dir(a.out_dir, "curve_im2.csv");
  odin::write_scores_csv(data.subject_ids(), scores, scores_path);
  {
    auto out = open_out(thresholds_path);
    json t = odin::thresholds_to_json(flags);
    t["im2_covariance_ridge"] = scores.im2_fallback;
    out << t.dump(2) << '\n';
  }
  {
    auto out = open_out(flags_path);
    odin::write_flags_csv(data.subject_ids(), flags, out);
  }
  {
    auto out = open_out(curve1_path);
    odin::write_curve_csv(flags.im1.curve, out);
  }
  {
    auto out = open_out(curve2_path);
    odin::write_curve_csv(flags.im2.curve, out);
  }
  std::printf("flagged %zu of %zu subjects (IM1 threshold %.6g, IM2 threshold %.6g)\n", flags.count(), data.subjects(),
              flags.im1.threshold, flags.im2.threshold);

  Manifest m("detect", ctx.argv);
  m.parameters() = {{"sensitivity", a.sensitivity}, {"threads", ctx.threads}};
  m.input("fit", a.fit);
  m.input("dataset", a.data);
  m.input("atlas", a.atlas);
  m.output("scores", scores_path);
  m.output("thresholds", thresholds_path);
  m.output("flags", flags_path);
  m.output("curve_im1", curve1_path);
  m.output("curve_im2", curve2_path);
  m.result("flagged", flags.count());
  m.write(in_dir(a.out_dir, "manifest.json"));
  return kExitOk;
}

// ---- simulate ----

struct SimulateModelArgs {
  odin::SimConfig sim;
  std::string out_dir;
};

void write_labeled(const odin::LabeledDataset& d, const std::string& dir, Manifest& m) {
  const std::string data_path = in_dir(dir, "dataset.txt");
  const std::string atlas_path = in_dir(dir, "atlas.tsv");
  const std::string labels_path = in_dir(dir, "labels.csv");
  odin::write_dataset(d.data, data_path);
  odin::write_atlas(d.atlas, atlas_path);
  odin::write_labels_csv(d, labels_path);
  m.output("dataset", data_path);
  m.output("atlas", atlas_path);
  m.output("labels", labels_path);
  m.result("outliers", d.outlier_count());
  std::printf("simulated %zu subjects on %zu nodes, %zu labelled outliers\n", d.data.subjects(), d.data.nodes(),
              d.outlier_count());
}

int cmd_simulate_model(SimulateModelArgs a, const Context& ctx) {
  a.sim.threads = ctx.threads;
  a.sim.validate();
  make_dir(a.out_dir);
  const odin::LabeledDataset d = odin::simulate_model(a.sim);
  Manifest m("simulate model", ctx.argv);
  m.parameters() = odin::to_json(a.sim);
  m.parameters()["threads"] = ctx.threads;
  write_labeled(d, a.out_dir, m);
  const std::string config_path = in_dir(a.out_dir, "config.json");
  open_out(config_path) << odin::to_json(a.sim).dump(2) << '\n';
  m.output("config", config_path);
  m.write(in_dir(a.out_dir, "manifest.json"));
  return kExitOk;
}

struct SimulateTnpcaArgs {
  std::string base_data, atlas, out_dir;
  std::size_t components = 60;
  double sigma = 0.02;
  double outlier_fraction = 0.10;
  std::uint64_t seed = 1;
};

int cmd_simulate_tnpca(const SimulateTnpcaArgs& a, const Context& ctx) {
  const odin::NetworkDataset base = odin::read_dataset(a.base_data);
  const odin::Atlas atlas = odin::read_atlas(a.atlas);
  check_atlas_matches(atlas, base);
  make_dir(a.out_dir);
  const odin::LabeledDataset d = odin::simulate_tnpca(base, atlas, a.components, a.sigma, a.outlier_fraction, a.seed);
  const json cfg = {{"components", a.components},
                    {"sigma", a.sigma},
                    {"outlier_fraction", a.outlier_fraction},
                    {"seed", a.seed}};
  Manifest m("simulate tnpca", ctx.argv);
  m.parameters() = cfg;
  m.input("base_dataset", a.base_data);
  m.input("atlas", a.atlas);
  write_labeled(d, a.out_dir, m);
  const std::string config_path = in_dir(a.out_dir, "config.json");
  open_out(config_path) << cfg.dump(2) << '\n';
  m.output("config", config_path);
  m.write(in_dir(a.out_dir, "manifest.json"));
  return kExitOk;
}

// ---- tnpca ----

struct TnpcaArgs {
  std::string data, out;
  std::size_t components = 60;
  double tol = 1e-9;
  int max_iter = 500;
};

int cmd_tnpca(const TnpcaArgs& a, const Context& ctx) {
  odin::require(a.tol > 0.0 && a.max_iter >= 1, odin::Errc::invalid_config, "tol must be > 0 and max-iter >= 1");
  const odin::NetworkDataset data = odin::read_dataset(a.data);
  const odin::TnpcaModel model = odin::tnpca_fit(data, a.components, {a.tol, a.max_iter});
  open_out(a.out) << odin::tnpca_to_json(model, data.subject_ids()).dump(1) << '\n';
  std::printf("rank %zu, objective %.10g -> %.10g\n", model.rank(), model.initial_objective, model.final_objective());
  Manifest m("tnpca", ctx.argv);
  m.parameters() = {{"components", a.components}, {"tol", a.tol}, {"max_iter", a.max_iter}};
  m.input("dataset", a.data);
  m.output("model", a.out);
  m.write(a.out + ".manifest.json");
  return kExitOk;
}

// ---- eval ----

struct EvalCommon {
  std::string out_dir;
  std::uint64_t seed = 2024;
  int repetitions = 5;
  std::size_t subjects = 500, nodes = 70, hemispheres = 2, lobes = 5;
  double outlier_fraction = 0.10;
  double sensitivity = odin::kDefaultSensitivity;
  FitOptions fit;

  void add(CLI::App* app, bool with_repetitions = true) {
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--seed", seed, "master seed")->capture_default_str();
    if (with_repetitions) app->add_option("--repetitions", repetitions, "repetitions per row")->capture_default_str();
    app->add_option("--subjects", subjects, "subjects per simulated sample")->capture_default_str();
    app->add_option("--nodes", nodes, "ROIs")->capture_default_str();
    app->add_option("--hemispheres", hemispheres, "hemispheres")->capture_default_str();
    app->add_option("--lobes", lobes, "lobes per hemisphere")->capture_default_str();
    app->add_option("--outlier-fraction", outlier_fraction, "share of contaminated subjects")->capture_default_str();
    app->add_option("--sensitivity", sensitivity, "kneedle sensitivity")->capture_default_str();
    fit.add(app);
  }
  odin::DetectConfig detect(int threads) const {
    odin::DetectConfig d;
    d.fit = fit.resolved(threads);
    d.sensitivity = sensitivity;
    d.coding = odin::parse_reference_coding(fit.coding);
    return d;
  }
  json to_json(const odin::DetectConfig& d) const {
    json j = fit_config_json(d.fit);
    j["coding"] = fit.coding;
    j["seed"] = seed;
    j["repetitions"] = repetitions;
    j["subjects"] = subjects;
    j["nodes"] = nodes;
    j["hemispheres"] = hemispheres;
    j["lobes_per_hemisphere"] = lobes;
    j["outlier_fraction"] = outlier_fraction;
    j["sensitivity"] = sensitivity;
    return j;
  }
};

void print_table(const std::vector<odin::ExperimentRow>& rows, const char* name) {
  for (const auto& r : rows)
    std::printf("%s=%-6g sensitivity=%6.2f%% specificity=%6.2f%%\n", name, r.parameter, 100.0 * r.mean_sensitivity(),
                100.0 * r.mean_specificity());
}

int write_table(const std::vector<odin::ExperimentRow>& rows, const std::string& name, const char* parameter,
                const std::string& dir, Manifest& m) {
  const std::string csv = in_dir(dir, name + ".csv");
  const std::string js = in_dir(dir, name + ".json");
  {
    auto out = open_out(csv);
    odin::write_table_csv(rows, parameter, out);
  }
  open_out(js) << odin::table_to_json(rows, parameter).dump(2) << '\n';
  m.output("table_csv", csv);
  m.output("table_json", js);
  print_table(rows, parameter);
  m.write(in_dir(dir, "manifest.json"));
  return kExitOk;
}

struct Table1Args {
  EvalCommon common;
  std::vector<double> flips{0.01, 0.02, 0.07, 0.10, 0.15};
};

int cmd_table1(const Table1Args& a, const Context& ctx) {
  odin::Table1Config c;
  c.flip_fractions = a.flips;
  c.repetitions = a.common.repetitions;
  c.seed = a.common.seed;
  c.subjects = a.common.subjects;
  c.nodes = a.common.nodes;
  c.hemispheres = a.common.hemispheres;
  c.lobes_per_hemisphere = a.common.lobes;
  c.outlier_fraction = a.common.outlier_fraction;
  c.detect = a.common.detect(ctx.threads);
  make_dir(a.common.out_dir);
  Manifest m("eval table1", ctx.argv);
  m.parameters() = a.common.to_json(c.detect);
  m.parameters()["flip_fractions"] = a.flips;
  return write_table(odin::table1_experiment(c), "table1", "flip_fraction", a.common.out_dir, m);
}

struct Table2Args {
  EvalCommon common;
  std::vector<double> sigmas{0.010, 0.015, 0.017, 0.020, 0.025};
  std::size_t components = 60;
};

int cmd_table2(const Table2Args& a, const Context& ctx) {
  odin::Table2Config c;
  c.sigmas = a.sigmas;
  c.repetitions = a.common.repetitions;
  c.seed = a.common.seed;
  c.subjects = a.common.subjects;
  c.nodes = a.common.nodes;
  c.hemispheres = a.common.hemispheres;
  c.lobes_per_hemisphere = a.common.lobes;
  c.outlier_fraction = a.common.outlier_fraction;
  c.components = a.components;
  c.detect = a.common.detect(ctx.threads);
  make_dir(a.common.out_dir);
  Manifest m("eval table2", ctx.argv);
  m.parameters() = a.common.to_json(c.detect);
  m.parameters()["sigmas"] = a.sigmas;
  m.parameters()["components"] = a.components;
  return write_table(odin::table2_experiment(c), "table2", "sigma", a.common.out_dir, m);
}

struct StabilityArgs {
  EvalCommon common;
  std::size_t population = 5000;
  double flip_fraction = 0.07;
  std::vector<std::size_t> sizes{500, 1000, 2000};
};

int cmd_stability(const StabilityArgs& a, const Context& ctx) {
  const odin::DetectConfig detect = a.common.detect(ctx.threads);
  odin::SimConfig sim;
  sim.subjects = a.population;
  sim.nodes = a.common.nodes;
  sim.hemispheres = a.common.hemispheres;
  sim.lobes_per_hemisphere = a.common.lobes;
  sim.outlier_fraction = a.common.outlier_fraction;
  sim.flip_fraction = a.flip_fraction;
  sim.seed = odin::derive_seed(a.common.seed, "stability-population", 0);
  sim.threads = ctx.threads;
  sim.validate();
  make_dir(a.common.out_dir);
  spdlog::info("simulating a population of {} subjects", a.population);
  const odin::LabeledDataset pop = odin::simulate_model(sim);
  spdlog::info("running full-sample detection");
  const odin::DetectionRun full = odin::run_odin(pop.data, pop.atlas, detect);
  spdlog::info("full sample: {} flagged", full.flags.count());
  odin::StabilityConfig sc;
  sc.sizes = a.sizes;
  sc.seed = a.common.seed;
  sc.detect = detect;
  const auto rows = odin::subsample_stability(pop.data, pop.atlas, full.flags.flag, sc);

  const std::string csv = in_dir(a.common.out_dir, "stability.csv");
  {
    auto out = open_out(csv);
    odin::write_stability_csv(rows, out);
  }
  for (const auto& r : rows)
    std::printf("size=%zu included=%zu flags=%zu overlap=%zu (%.1f%%) newly_flagged=%zu (%.2f%%)\n", r.size,
                r.outliers_included, r.subsample_flags, r.overlap, r.overlap_percent(), r.newly_flagged,
                r.newly_flagged_percent());
  Manifest m("eval stability", ctx.argv);
  m.parameters() = a.common.to_json(detect);
  m.parameters()["population"] = a.population;
  m.parameters()["flip_fraction"] = a.flip_fraction;
  m.parameters()["sizes"] = a.sizes;
  m.output("table_csv", csv);
  m.result("full_sample_flags", full.flags.count());
  m.write(in_dir(a.common.out_dir, "manifest.json"));
  return kExitOk;
}

// ---- bench ----

struct BenchArgs {
  std::string mode, out_dir;
  std::vector<std::size_t> grid;
  std::size_t fixed = 0;
  int iterations = 200;
  int runs = 3;
  std::uint64_t seed = 2024;
  bool parallel = false;
};

int cmd_bench(const BenchArgs& a, const Context& ctx) {
  odin::BenchConfig c = odin::BenchConfig::defaults(odin::parse_bench_mode(a.mode));
  if (!a.grid.empty()) c.grid = a.grid;
  if (a.fixed > 0) c.fixed = a.fixed;
  c.iterations = a.iterations;
  c.runs = a.runs;
  c.seed = a.seed;
  c.threads = a.parallel ? ctx.threads : 1;
  c.validate();
  make_dir(a.out_dir);
  const odin::ScalingReport r = odin::bench_scaling(c);
  const std::string csv = in_dir(a.out_dir, "bench_" + a.mode + ".csv");
  const std::string js = in_dir(a.out_dir, "bench_" + a.mode + ".json");
  {
    auto out = open_out(csv);
    odin::write_scaling_csv(r, out);
  }
  open_out(js) << odin::scaling_to_json(r).dump(2) << '\n';
  std::printf("%s: exponent=%.3f r2=%.4f\n", a.mode.c_str(), r.exponent, r.r2);
  Manifest m("bench " + a.mode, ctx.argv);
  m.parameters() = {{"mode", a.mode},   {"grid", c.grid}, {"fixed", c.fixed}, {"iterations", c.iterations},
                    {"runs", c.runs},   {"seed", c.seed}, {"threads", c.threads}};
  m.output("csv", csv);
  m.output("json", js);
  m.result("exponent", r.exponent);
  m.result("r2", r.r2);
  m.write(in_dir(a.out_dir, "manifest.json"));
  return kExitOk;
}

int exit_code_for(const odin::Error& e) {
  switch (e.category()) {
    case odin::ErrorCategory::usage: return kExitUsage;
    case odin::ErrorCategory::input: return kExitInput;
    case odin::ErrorCategory::numeric: return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("odin");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  Context ctx;
  ctx.argv.assign(argv, argv + argc);
  ctx.threads = odin::default_thread_count();
  std::string log_level = "info";

  CLI::App app{"ODIN: outlier detection for populations of binary networks"};
  app.set_version_flag("--version", std::string(ODIN_VERSION));
  app.require_subcommand(1);
  app.add_option("--threads", ctx.threads, "worker threads (default: ODIN_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit the hierarchical logistic model");
  fit_cmd->add_option("--data", fit_args.data, "dataset file")->required();
  fit_cmd->add_option("--atlas", fit_args.atlas, "atlas TSV")->required();
  fit_cmd->add_option("--out", fit_args.out, "fit output (JSON)")->required();
  fit_cmd->add_option("--manifest", fit_args.manifest, "manifest path (default: <out>.manifest.json)");
  fit_args.fit.add(fit_cmd);

  DetectArgs det;
  auto* det_cmd = app.add_subcommand("detect", "score subjects and flag outliers");
  det_cmd->add_option("--fit", det.fit, "fit file from `odin fit`")->required();
  det_cmd->add_option("--data", det.data, "dataset file")->required();
  det_cmd->add_option("--atlas", det.atlas, "atlas TSV")->required();
  det_cmd->add_option("--out-dir", det.out_dir, "output directory")->required();
  det_cmd->add_option("--sensitivity", det.sensitivity, "kneedle sensitivity")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "generate labelled synthetic data");
  sim_cmd->require_subcommand(1);
  SimulateModelArgs sm;
  auto* sm_cmd = sim_cmd->add_subcommand("model", "draw from the logistic model and flip edges of outliers");
  sm_cmd->add_option("--subjects", sm.sim.subjects)->capture_default_str();
  sm_cmd->add_option("--nodes", sm.sim.nodes)->capture_default_str();
  sm_cmd->add_option("--hemispheres", sm.sim.hemispheres)->capture_default_str();
  sm_cmd->add_option("--lobes", sm.sim.lobes_per_hemisphere, "lobes per hemisphere")->capture_default_str();
  sm_cmd->add_option("--outlier-fraction", sm.sim.outlier_fraction)->capture_default_str();
  sm_cmd->add_option("--flip-fraction", sm.sim.flip_fraction, "share of edges flipped per outlier")
      ->capture_default_str();
  sm_cmd->add_option("--z-clamp", sm.sim.z_clamp, "bound on the Cauchy edge effects")->capture_default_str();
  sm_cmd->add_option("--seed", sm.sim.seed)->capture_default_str();
  sm_cmd->add_option("--out-dir", sm.out_dir)->required();

  SimulateTnpcaArgs st;
  auto* st_cmd = sim_cmd->add_subcommand("tnpca", "perturb TN-PCA embeddings of a base sample");
  st_cmd->add_option("--base-data", st.base_data, "base dataset file")->required();
  st_cmd->add_option("--atlas", st.atlas, "atlas TSV of the base dataset")->required();
  st_cmd->add_option("--components", st.components)->capture_default_str();
  st_cmd->add_option("--sigma", st.sigma, "noise SD added to outlier embeddings")->capture_default_str();
  st_cmd->add_option("--outlier-fraction", st.outlier_fraction)->capture_default_str();
  st_cmd->add_option("--seed", st.seed)->capture_default_str();
  st_cmd->add_option("--out-dir", st.out_dir)->required();

  TnpcaArgs tn;
  auto* tn_cmd = app.add_subcommand("tnpca", "fit tensor-network PCA");
  tn_cmd->add_option("--data", tn.data, "dataset file")->required();
  tn_cmd->add_option("--components", tn.components)->capture_default_str();
  tn_cmd->add_option("--tol", tn.tol)->capture_default_str();
  tn_cmd->add_option("--max-iter", tn.max_iter)->capture_default_str();
  tn_cmd->add_option("--out", tn.out, "model output (JSON)")->required();

  auto* eval_cmd = app.add_subcommand("eval", "simulation studies");
  eval_cmd->require_subcommand(1);
  Table1Args t1;
  auto* t1_cmd = eval_cmd->add_subcommand("table1", "flip contamination of model-generated data");
  t1.common.add(t1_cmd);
  t1_cmd->add_option("--flips", t1.flips, "flip fractions")->delimiter(',')->capture_default_str();
  Table2Args t2;
  auto* t2_cmd = eval_cmd->add_subcommand("table2", "TN-PCA embedding noise");
  t2.common.add(t2_cmd);
  t2_cmd->add_option("--sigmas", t2.sigmas, "noise SDs")->delimiter(',')->capture_default_str();
  t2_cmd->add_option("--components", t2.components)->capture_default_str();
  StabilityArgs sb;
  auto* sb_cmd = eval_cmd->add_subcommand("stability", "stratified subsample stability");
  sb.common.add(sb_cmd, false);
  sb_cmd->add_option("--population", sb.population)->capture_default_str();
  sb_cmd->add_option("--flip-fraction", sb.flip_fraction)->capture_default_str();
  sb_cmd->add_option("--sizes", sb.sizes)->delimiter(',')->capture_default_str();

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "runtime scaling of one stage");
  bn_cmd->add_option("mode", bn.mode, "iter_vs_N, iter_vs_L, influence_vs_N or influence_vs_L")->required();
  bn_cmd->add_option("--out-dir", bn.out_dir)->required();
  bn_cmd->add_option("--grid", bn.grid, "subject counts (N modes) or node counts (L modes)")->delimiter(',');
  bn_cmd->add_option("--fixed", bn.fixed, "node count (N modes) or subject count (L modes)");
  bn_cmd->add_option("--iterations", bn.iterations)->capture_default_str();
  bn_cmd->add_option("--runs", bn.runs)->capture_default_str();
  bn_cmd->add_option("--seed", bn.seed)->capture_default_str();
  bn_cmd->add_flag("--parallel", bn.parallel, "use --threads workers instead of one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*fit_cmd) return cmd_fit(fit_args, ctx);
    if (*det_cmd) return cmd_detect(det, ctx);
    if (*sm_cmd) return cmd_simulate_model(sm, ctx);
    if (*st_cmd) return cmd_simulate_tnpca(st, ctx);
    if (*tn_cmd) return cmd_tnpca(tn, ctx);
    if (*t1_cmd) return cmd_table1(t1, ctx);
    if (*t2_cmd) return cmd_table2(t2, ctx);
    if (*sb_cmd) return cmd_stability(sb, ctx);
    if (*bn_cmd) return cmd_bench(bn, ctx);
  } catch (const odin::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return kExitUsage;
}
