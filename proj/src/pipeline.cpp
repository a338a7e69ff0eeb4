#include "abmuq/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "abmuq/classify.hpp"
#include "abmuq/csv.hpp"
#include "abmuq/errors.hpp"
#include "abmuq/hetgp.hpp"
#include "abmuq/seqdesign.hpp"

namespace abmuq::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDesignFile = "design.csv";
constexpr const char* kRunsFile = "runs.csv";
constexpr const char* kClassifierFile = "classifier.json";
constexpr const char* kClassProbFile = "class_prob_grid.csv";
constexpr const char* kBoundaryFile = "class_boundary.csv";
constexpr const char* kHetgpFile = "hetgp.json";
constexpr const char* kHetgpGridFile = "hetgp_grid.csv";
constexpr const char* kSeqHistoryFile = "sequential_history.csv";
constexpr const char* kSeqDesignFile = "sequential_design.csv";
constexpr const char* kSeqRunsFile = "sequential_runs.csv";
constexpr const char* kSeqHetgpFile = "sequential_hetgp.json";
constexpr const char* kHmRunsFile = "hm_runs.csv";
constexpr const char* kHmSummaryFile = "hm_summary.json";
constexpr const char* kManifestFile = "manifest.json";

void check_positive(int v, const char* name) {
  if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
}

void check_range(const Range& r, const char* name) {
  if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi)) {
    throw ConfigError(std::string(name) + " must satisfy 0 <= lo <= hi <= 1");
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key ") + key + ": " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string() + " (run the earlier stage first)");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing input " + path.string() + " (run the earlier stage first)");
}

Rng stage_rng(const StageContext& ctx, std::string_view stage) { return Rng(derive_seed(ctx.seed, stage)); }

hetgp::HetGPOptions fit_options() { return {}; }

// Row-major cell-centre grid shared by every surface artifact.
Eigen::MatrixXd surface_grid(const StageContext& ctx) { return hm::evaluation_grid(ctx.config.grid_resolution); }

std::vector<std::string> write_hetgp_grid(const StageContext& ctx, const hetgp::HetGPModel& model,
                                          const std::string& name) {
  const Eigen::MatrixXd G = surface_grid(ctx);
  const hetgp::HetPrediction p = hetgp::predict_hetgp(model, G);
  csv::Table t{{"x1", "x2", "mean", "var_mean", "intrinsic_var"}, {}};
  t.rows.reserve(static_cast<std::size_t>(G.rows()));
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    t.rows.push_back({csv::format(G(i, 0)), csv::format(G(i, 1)), csv::format(p.mean(i)), csv::format(p.var_mean(i)),
                      csv::format(p.intrinsic_var(i))});
  }
  csv::write(ctx.out / name, t);
  return {name};
}

void write_seq_history(const fs::path& path, const std::vector<seqdesign::IterationRecord>& history) {
  csv::Table t{{"iter", "kind", "x1", "x2", "imspe_before", "imspe_after", "total_replicates"}, {}};
  for (const auto& h : history) {
    t.rows.push_back({std::to_string(h.iter), seqdesign::to_string(h.kind), csv::format(h.x(0)), csv::format(h.x(1)),
                      csv::format(h.imspe_before), csv::format(h.imspe_after), std::to_string(h.total_replicates)});
  }
  csv::write(path, t);
}

std::optional<classify::ClassifierModel> load_classifier(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  const nlohmann::json j = read_json(path);
  if (j.contains("fitted") && !j.at("fitted").get<bool>()) return std::nullopt;
  return classify::classifier_from_json(j.at("model"));
}

}  // namespace

void PipelineConfig::validate() const {
  sim.validate();
  check_range(input_ranges[0], "input_ranges[0]");
  check_range(input_ranges[1], "input_ranges[1]");
  check_positive(design_points, "design.points");
  if (design_points < 2) throw ConfigError("design.points must be >= 2");
  check_positive(design_replicates, "design.replicates");
  check_positive(maximin_restarts, "design.maximin_restarts");
  if (sequential_budget < 0) throw ConfigError("sequential.budget must be >= 0");
  if (n_candidates < 0) throw ConfigError("sequential.candidates must be >= 0");
  check_positive(refit_every, "sequential.refit_every");
  if (reference_size < 100) throw ConfigError("sequential.reference_size must be >= 100");
  observation.validate();
  if (!(threshold > 0.0)) throw ConfigError("history_match.threshold must be > 0");
  check_positive(n_waves, "history_match.waves");
  check_positive(points_per_wave, "history_match.points_per_wave");
  check_positive(wave_replicates, "history_match.replicates");
  if (nroy_samples < points_per_wave) throw ConfigError("history_match.nroy_samples must be >= points_per_wave");
  check_positive(grid_resolution, "grid_resolution");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json::object();
  if (c.seed) j["seed"] = *c.seed;
  j["sim"] = c.sim;
  j["input_ranges"] = {{c.input_ranges[0].lo, c.input_ranges[0].hi}, {c.input_ranges[1].lo, c.input_ranges[1].hi}};
  j["design"] = {{"points", c.design_points}, {"replicates", c.design_replicates},
                 {"maximin_restarts", c.maximin_restarts}};
  j["sequential"] = {{"budget", c.sequential_budget},
                     {"candidates", c.n_candidates},
                     {"refit_every", c.refit_every},
                     {"reference_size", c.reference_size}};
  j["history_match"] = {
      {"observation", {{"z", c.observation.z}, {"var_e", c.observation.var_e}, {"var_d", c.observation.var_d}}},
      {"threshold", c.threshold},
      {"include_intrinsic", c.include_intrinsic},
      {"waves", c.n_waves},
      {"points_per_wave", c.points_per_wave},
      {"replicates", c.wave_replicates},
      {"nroy_samples", c.nroy_samples}};
  j["grid_resolution"] = c.grid_resolution;
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  reject_unknown(j, {"seed", "sim", "input_ranges", "design", "sequential", "history_match", "grid_resolution"},
                 "config");
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read_key(j, "seed", s);
    c.seed = s;
  }
  if (j.contains("sim")) c.sim = j.at("sim").get<abm::SimConfig>();
  if (j.contains("input_ranges")) {
    std::vector<std::array<double, 2>> r;
    read_key(j, "input_ranges", r);
    if (r.size() != 2) throw ConfigError("input_ranges needs two [lo, hi] pairs");
    for (std::size_t i = 0; i < 2; ++i) c.input_ranges[i] = {r[i][0], r[i][1]};
  }
  if (j.contains("design")) {
    const auto& d = j.at("design");
    reject_unknown(d, {"points", "replicates", "maximin_restarts"}, "design");
    read_key(d, "points", c.design_points);
    read_key(d, "replicates", c.design_replicates);
    read_key(d, "maximin_restarts", c.maximin_restarts);
  }
  if (j.contains("sequential")) {
    const auto& s = j.at("sequential");
    reject_unknown(s, {"budget", "candidates", "refit_every", "reference_size"}, "sequential");
    read_key(s, "budget", c.sequential_budget);
    read_key(s, "candidates", c.n_candidates);
    read_key(s, "refit_every", c.refit_every);
    read_key(s, "reference_size", c.reference_size);
  }
  if (j.contains("history_match")) {
    const auto& h = j.at("history_match");
    reject_unknown(h, {"observation", "threshold", "include_intrinsic", "waves", "points_per_wave", "replicates",
                       "nroy_samples"},
                   "history_match");
    if (h.contains("observation")) {
      const auto& o = h.at("observation");
      reject_unknown(o, {"z", "var_e", "var_d"}, "observation");
      read_key(o, "z", c.observation.z);
      read_key(o, "var_e", c.observation.var_e);
      read_key(o, "var_d", c.observation.var_d);
    }
    read_key(h, "threshold", c.threshold);
    read_key(h, "include_intrinsic", c.include_intrinsic);
    read_key(h, "waves", c.n_waves);
    read_key(h, "points_per_wave", c.points_per_wave);
    read_key(h, "replicates", c.wave_replicates);
    read_key(h, "nroy_samples", c.nroy_samples);
  }
  read_key(j, "grid_resolution", c.grid_resolution);
  c.validate();
}

PipelineConfig load_config(const fs::path& path) {
  return read_json(path).get<PipelineConfig>();
}

AbmSimulator::AbmSimulator(abm::SimConfig base, std::array<Range, 2> ranges)
    : base_(std::move(base)), ranges_(ranges) {}

abm::SimConfig AbmSimulator::config_at(const Eigen::VectorXd& x) const {
  if (x.size() != 2) throw ConfigError("ABM inputs are two-dimensional");
  if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) throw ConfigError("design point outside [0,1]^2");
  abm::SimConfig c = base_;
  c.sheep_repro = ranges_[0].lo + x(0) * (ranges_[0].hi - ranges_[0].lo);
  c.wolf_repro = ranges_[1].lo + x(1) * (ranges_[1].hi - ranges_[1].lo);
  return c;
}

abm::SimOutcome AbmSimulator::run(const Eigen::VectorXd& x, std::uint64_t seed) const {
  const abm::SimOutcome o = abm::run(config_at(x), seed);
  remember(seed, o);
  return o;
}

Simulator AbmSimulator::as_simulator() const {
  return [this](const Eigen::VectorXd& x, std::uint64_t seed) { return quantity_of(run(x, seed)); };
}

void AbmSimulator::remember(std::uint64_t seed, const abm::SimOutcome& outcome) const {
  std::lock_guard lock(mutex_);
  log_[seed] = outcome;
}

abm::SimOutcome AbmSimulator::outcome(std::uint64_t seed) const {
  std::lock_guard lock(mutex_);
  return log_.at(seed);
}

std::optional<double> quantity_of(const abm::SimOutcome& o) {
  if (o.censored()) return std::nullopt;
  return static_cast<double>(o.time);
}

void write_design(const fs::path& path, const design::ReplicatedDesign& d) {
  d.validate();
  csv::Table t{{"x1", "x2", "replicates"}, {}};
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    t.rows.push_back({csv::format(d.points(i, 0)), csv::format(d.points(i, 1)),
                      std::to_string(d.replicates[static_cast<std::size_t>(i)])});
  }
  csv::write(path, t);
}

design::ReplicatedDesign read_design(const fs::path& path) {
  const csv::Table t = csv::read(path);
  const std::string src = path.string();
  if (t.rows.empty()) throw ConfigError(src + ": empty design (0 rows)");
  const std::size_t c1 = t.column("x1");
  const std::size_t c2 = t.column("x2");
  std::optional<std::size_t> cr;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "replicates") cr = i;
  }
  design::ReplicatedDesign d;
  d.points.resize(static_cast<Eigen::Index>(t.rows.size()), 2);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = src + " row " + std::to_string(r + 1);
    const double a = csv::to_double(t.rows[r][c1], where);
    const double b = csv::to_double(t.rows[r][c2], where);
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) throw ConfigError(where + ": input outside [0,1]");
    d.points.row(static_cast<Eigen::Index>(r)) << a, b;
    const long long reps = cr ? csv::to_int(t.rows[r][*cr], where) : 1;
    if (reps < 1) throw ConfigError(where + ": replicates must be >= 1");
    d.replicates.push_back(static_cast<int>(reps));
  }
  return d;
}

void write_runs(const fs::path& path, const std::vector<RunRecord>& runs, const AbmSimulator& sim) {
  csv::Table t{{"x1", "x2", "seed", "outcome", "time", "final_sheep", "final_wolves"}, {}};
  t.rows.reserve(runs.size());
  for (const auto& r : runs) {
    const abm::SimOutcome o = sim.outcome(r.seed);
    t.rows.push_back({csv::format(r.x(0)), csv::format(r.x(1)), std::to_string(r.seed), abm::to_string(o.kind),
                      std::to_string(o.time), std::to_string(o.final_sheep), std::to_string(o.final_wolves)});
  }
  csv::write(path, t);
}

std::vector<RunRecord> read_runs(const fs::path& path, const AbmSimulator* sim) {
  const csv::Table t = csv::read(path);
  const std::string src = path.string();
  if (t.rows.empty()) throw ConfigError(src + ": no runs (0 rows)");
  const std::size_t cx1 = t.column("x1");
  const std::size_t cx2 = t.column("x2");
  const std::size_t cs = t.column("seed");
  const std::size_t co = t.column("outcome");
  const std::size_t ct = t.column("time");
  const std::size_t cfs = t.column("final_sheep");
  const std::size_t cfw = t.column("final_wolves");
  std::vector<RunRecord> runs;
  runs.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = src + " row " + std::to_string(r + 1);
    abm::SimOutcome o;
    try {
      o.kind = abm::outcome_kind_from_string(row[co]);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    o.time = static_cast<int>(csv::to_int(row[ct], where));
    o.final_sheep = static_cast<int>(csv::to_int(row[cfs], where));
    o.final_wolves = static_cast<int>(csv::to_int(row[cfw], where));
    RunRecord rec;
    rec.x = Eigen::Vector2d(csv::to_double(row[cx1], where), csv::to_double(row[cx2], where));
    if ((rec.x.array() < 0.0).any() || (rec.x.array() > 1.0).any()) {
      throw ConfigError(where + ": input outside [0,1]");
    }
    rec.seed = csv::to_u64(row[cs], where);
    rec.output = quantity_of(o);
    if (sim != nullptr) sim->remember(rec.seed, o);
    runs.push_back(std::move(rec));
  }
  return runs;
}

std::vector<std::string> stage_design(const StageContext& ctx) {
  Rng rng = stage_rng(ctx, "design");
  design::ReplicatedDesign d;
  d.points = design::maximin_lhd(ctx.config.design_points, 2, ctx.config.maximin_restarts, rng);
  d.replicates.assign(static_cast<std::size_t>(ctx.config.design_points), ctx.config.design_replicates);
  write_design(ctx.out / kDesignFile, d);
  return {kDesignFile};
}

std::vector<std::string> stage_simulate(const StageContext& ctx) {
  require_file(ctx.out / kDesignFile);
  const design::ReplicatedDesign d = read_design(ctx.out / kDesignFile);
  const AbmSimulator sim(ctx.config.sim, ctx.config.input_ranges);
  const auto runs = run_design(d, sim.as_simulator(), derive_seed(ctx.seed, "simulate"), 0, ctx.jobs);
  write_runs(ctx.out / kRunsFile, runs, sim);
  return {kRunsFile};
}

std::vector<std::string> stage_classify(const StageContext& ctx) {
  require_file(ctx.out / kRunsFile);
  const auto runs = read_runs(ctx.out / kRunsFile);
  const classify::LabeledDesign labels = existence_labels(runs);
  const bool pos = std::find(labels.labels.begin(), labels.labels.end(), 1) != labels.labels.end();
  const bool neg = std::find(labels.labels.begin(), labels.labels.end(), -1) != labels.labels.end();
  if (!pos) throw NumericalError("every design point was censored; no output to emulate");

  const Eigen::MatrixXd G = surface_grid(ctx);
  const int res = ctx.config.grid_resolution;
  Eigen::VectorXd prob = Eigen::VectorXd::Ones(G.rows());
  nlohmann::json doc;
  if (neg) {
    Rng rng = stage_rng(ctx, "classify");
    const classify::ClassifierModel model = classify::fit_classifier(labels, {}, rng);
    prob = classify::predict_prob(model, G);
    doc = {{"fitted", true}, {"model", classify::to_json(model)}};
  } else {
    // Every design point produced an output: nothing to classify.
    doc = {{"fitted", false}};
  }
  write_json(ctx.out / kClassifierFile, doc);

  csv::Table grid{{"x1", "x2", "prob"}, {}};
  Eigen::MatrixXd field(res, res);
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    grid.rows.push_back({csv::format(G(k, 0)), csv::format(G(k, 1)), csv::format(prob(k))});
    field(k % res, k / res) = prob(k);
  }
  csv::write(ctx.out / kClassProbFile, grid);

  csv::Table boundary{{"segment_id", "x1", "x2"}, {}};
  const auto segments = classify::marching_squares(field, 0.5);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (const auto& pt : {segments[s].a, segments[s].b}) {
      boundary.rows.push_back({std::to_string(s), csv::format(pt(0)), csv::format(pt(1))});
    }
  }
  csv::write(ctx.out / kBoundaryFile, boundary);
  return {kClassifierFile, kClassProbFile, kBoundaryFile};
}

std::vector<std::string> stage_fit(const StageContext& ctx) {
  require_file(ctx.out / kRunsFile);
  const auto runs = read_runs(ctx.out / kRunsFile);
  Rng rng = stage_rng(ctx, "fit");
  const hetgp::HetGPModel model = hetgp::fit_hetgp(quantitative_summary(runs), fit_options(), rng);
  write_json(ctx.out / kHetgpFile, hetgp::to_json(model));
  auto files = write_hetgp_grid(ctx, model, kHetgpGridFile);
  files.insert(files.begin(), kHetgpFile);
  return files;
}

std::vector<std::string> stage_sequential(const StageContext& ctx) {
  require_file(ctx.out / kRunsFile);
  require_file(ctx.out / kHetgpFile);
  const AbmSimulator sim(ctx.config.sim, ctx.config.input_ranges);
  auto runs = read_runs(ctx.out / kRunsFile, &sim);
  const hetgp::HetGPModel model = hetgp::hetgp_model_from_json(read_json(ctx.out / kHetgpFile));
  const auto classifier = load_classifier(ctx.out / kClassifierFile);

  const seqdesign::ReferenceSet reference =
      seqdesign::make_reference_set(2, classifier ? &*classifier : nullptr, ctx.config.reference_size);
  seqdesign::SequentialOptions opt;
  opt.n_candidates = ctx.config.n_candidates;
  opt.refit_every = ctx.config.refit_every;
  opt.run_seed_base = derive_seed(ctx.seed, "sequential.runs");
  opt.fit = fit_options();
  opt.classifier = classifier ? &*classifier : nullptr;
  opt.jobs = ctx.jobs;

  Rng rng = stage_rng(ctx, "sequential");
  seqdesign::DesignState state = seqdesign::make_state(std::move(runs), model);
  state = seqdesign::run_sequential(std::move(state), ctx.config.sequential_budget, rng, sim.as_simulator(),
                                    reference, opt);

  write_seq_history(ctx.out / kSeqHistoryFile, state.history);
  write_design(ctx.out / kSeqDesignFile, state.rep_design);
  write_runs(ctx.out / kSeqRunsFile, state.all_runs, sim);
  write_json(ctx.out / kSeqHetgpFile, hetgp::to_json(state.model));
  return {kSeqHistoryFile, kSeqDesignFile, kSeqRunsFile, kSeqHetgpFile};
}

HistoryMatchOutcome stage_history_match(const StageContext& ctx) {
  const fs::path input = fs::exists(ctx.out / kSeqRunsFile) ? ctx.out / kSeqRunsFile : ctx.out / kRunsFile;
  require_file(input);
  const AbmSimulator sim(ctx.config.sim, ctx.config.input_ranges);
  auto runs = read_runs(input, &sim);

  hm::WaveConfig wc;
  wc.n_waves = ctx.config.n_waves;
  wc.points_per_wave = ctx.config.points_per_wave;
  wc.replicates = ctx.config.wave_replicates;
  wc.grid_resolution = ctx.config.grid_resolution;
  wc.nroy_sample_count = ctx.config.nroy_samples;
  wc.criteria.obs = ctx.config.observation;
  wc.criteria.threshold = ctx.config.threshold;
  wc.criteria.implausibility.include_intrinsic = ctx.config.include_intrinsic;
  wc.fit = fit_options();
  wc.run_seed_base = derive_seed(ctx.seed, "history_match.runs");
  wc.jobs = ctx.jobs;

  Rng rng = stage_rng(ctx, "history_match");
  const hm::HistoryMatchResult res = hm::run_waves_from_runs(std::move(runs), sim.as_simulator(), wc, rng);

  HistoryMatchOutcome out;
  nlohmann::json summary = {{"threshold", wc.criteria.threshold},
                            {"observation",
                             {{"z", wc.criteria.obs.z}, {"var_e", wc.criteria.obs.var_e}, {"var_d", wc.criteria.obs.var_d}}},
                            {"include_intrinsic", wc.criteria.implausibility.include_intrinsic},
                            {"waves_completed", res.waves.size()},
                            {"terminated_early", res.terminated_early},
                            {"waves", nlohmann::json::array()}};
  for (const auto& w : res.waves) {
    const std::string k = std::to_string(w.wave_index);
    const std::string grid_name = "hm_wave" + k + "_grid.csv";
    const std::string design_name = "hm_wave" + k + "_design.csv";
    const std::string next_name = "hm_wave" + k + "_next_design.csv";
    const std::string json_name = "hm_wave" + k + ".json";

    csv::Table grid{{"x1", "x2", "implausibility", "in_nroy", "wave"}, {}};
    grid.rows.reserve(static_cast<std::size_t>(res.grid.rows()));
    for (Eigen::Index i = 0; i < res.grid.rows(); ++i) {
      grid.rows.push_back({csv::format(res.grid(i, 0)), csv::format(res.grid(i, 1)),
                           csv::format(w.grid_implausibility(i)),
                           w.grid_in_nroy[static_cast<std::size_t>(i)] ? "1" : "0", k});
    }
    csv::write(ctx.out / grid_name, grid);
    write_design(ctx.out / design_name, w.design);
    out.artifacts.insert(out.artifacts.end(), {grid_name, design_name});

    nlohmann::json wj = {{"wave", w.wave_index},
                         {"threshold", wc.criteria.threshold},
                         {"nroy_fraction", w.nroy_fraction},
                         {"classifier_refit", w.classifier_refit},
                         {"nroy_sample_count", w.nroy_samples.rows()},
                         {"grid_file", grid_name},
                         {"design_file", design_name},
                         {"hetgp", hetgp::to_json(w.emulator.model)}};
    if (w.next_design.size() > 0) {
      write_design(ctx.out / next_name, w.next_design);
      out.artifacts.push_back(next_name);
      wj["next_design_file"] = next_name;
    } else {
      wj["next_design_file"] = nullptr;
    }
    write_json(ctx.out / json_name, wj);
    out.artifacts.push_back(json_name);
    summary["waves"].push_back({{"wave", w.wave_index}, {"nroy_fraction", w.nroy_fraction}, {"file", json_name}});
  }
  write_runs(ctx.out / kHmRunsFile, res.all_runs, sim);
  write_json(ctx.out / kHmSummaryFile, summary);
  out.artifacts.insert(out.artifacts.end(), {kHmRunsFile, kHmSummaryFile});
  out.empty_nroy = res.terminated_early;
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot hash " + path.string());
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  if (md == nullptr || EVP_DigestInit_ex(md, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(md);
    throw std::runtime_error("sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(md, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, digest, &len);
  EVP_MD_CTX_free(md);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

void write_manifest(const StageContext& ctx, const PipelineOutcome& outcome, const std::string& status,
                    const std::string& failed_stage = {}, const std::string& error = {}) {
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& [stage, file] : outcome.artifacts) {
    arts.push_back({{"stage", stage}, {"path", file}, {"sha256", sha256_file(ctx.out / file)}});
  }
  nlohmann::json j = {{"seed", ctx.seed}, {"config", ctx.config}, {"status", status}, {"artifacts", arts}};
  if (!failed_stage.empty()) {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  write_json(ctx.out / kManifestFile, j);
}

}  // namespace

PipelineOutcome run_pipeline(const StageContext& ctx) {
  PipelineOutcome outcome;
  std::string current;
  auto record = [&](const std::string& stage, const std::vector<std::string>& files) {
    for (const auto& f : files) outcome.artifacts.emplace_back(stage, f);
  };
  try {
    current = "design";
    record(current, stage_design(ctx));
    current = "simulate";
    record(current, stage_simulate(ctx));
    current = "classify";
    record(current, stage_classify(ctx));
    current = "fit";
    record(current, stage_fit(ctx));
    current = "sequential";
    record(current, stage_sequential(ctx));
    current = "history-match";
    const HistoryMatchOutcome h = stage_history_match(ctx);
    record(current, h.artifacts);
    outcome.empty_nroy = h.empty_nroy;
  } catch (const std::exception& e) {
    write_manifest(ctx, outcome, "failed", current, e.what());
    throw;
  }
  write_manifest(ctx, outcome, outcome.empty_nroy ? "empty_nroy" : "ok");
  return outcome;
}

int run_command(int argc, const char* const* argv) {
  CLI::App app{"Uncertainty quantification for a stochastic wolf-sheep agent-based model"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"design", "write a maximin Latin hypercube design"},
      {"simulate", "run the ABM on the design"},
      {"classify", "fit the output-existence classifier"},
      {"fit", "fit the heteroskedastic emulator"},
      {"sequential", "add runs by IMSPE sequential design"},
      {"history-match", "run history-matching waves"},
      {"pipeline", "run every stage in order and write a manifest"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "configuration JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "root seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    StageContext ctx;
    if (!config_path.empty()) ctx.config = load_config(config_path);
    if (seed) ctx.config.seed = seed;
    if (!ctx.config.seed) throw ConfigError("a seed is required (--seed or \"seed\" in the config)");
    ctx.config.validate();
    ctx.seed = *ctx.config.seed;
    ctx.out = out_dir;
    ctx.jobs = jobs;
    fs::create_directories(ctx.out);

    std::vector<std::string> files;
    bool empty_nroy = false;
    if (command == "design") {
      files = stage_design(ctx);
    } else if (command == "simulate") {
      files = stage_simulate(ctx);
    } else if (command == "classify") {
      files = stage_classify(ctx);
    } else if (command == "fit") {
      files = stage_fit(ctx);
    } else if (command == "sequential") {
      files = stage_sequential(ctx);
    } else if (command == "history-match") {
      const HistoryMatchOutcome h = stage_history_match(ctx);
      files = h.artifacts;
      empty_nroy = h.empty_nroy;
    } else {
      const PipelineOutcome p = run_pipeline(ctx);
      for (const auto& a : p.artifacts) files.push_back(a.second);
      files.push_back(kManifestFile);
      empty_nroy = p.empty_nroy;
    }
    for (const auto& f : files) std::cout << (ctx.out / f).string() << '\n';
    if (empty_nroy) {
      std::cerr << "history matching stopped early: NROY is empty\n";
      return kExitEmptyNroy;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << command << ": configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << command << ": numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace abmuq::pipeline
