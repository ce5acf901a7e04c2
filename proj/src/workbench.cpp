#include "cntco/workbench.hpp"

#include "cntco/cell_library.hpp"
#include "cntco/mvn.hpp"
#include "cntco/noise.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cntco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSummarySchema = "cntco-summary/1";
constexpr const char* kEliminationSchema = "cntco-elimination/1";
constexpr const char* kSearchSchema = "cntco-search/1";
constexpr const char* kValidationSchema = "cntco-validation/1";
constexpr const char* kMvnSchema = "cntco-mvncdf/1";
constexpr const char* kCsvSchema = "cntco-csv/1";

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_file(const fs::path& p, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError(what + ": cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

class Csv {
 public:
  Csv(const std::string& name, std::initializer_list<const char*> columns) {
    s_ << "# schema_version=" << kCsvSchema << " table=" << name << "\n";
    bool first = true;
    for (const char* c : columns) {
      s_ << (first ? "" : ",") << c;
      first = false;
    }
    s_ << "\n";
  }
  template <typename... T>
  void row(const T&... v) {
    bool first = true;
    ((s_ << (first ? "" : ",") << cell(v), first = false), ...);
    s_ << "\n";
  }
  std::string str() const { return s_.str(); }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  std::ostringstream s_;
};

fs::path resolve(const RunConfig& c, const fs::path& p) { return p.is_absolute() ? p : c.base_dir / p; }

fs::path require_path(const RunConfig& c, const std::optional<fs::path>& p, const std::string& field) {
  if (!p) throw InputError("config field '" + field + "' is required for this command");
  const fs::path full = resolve(c, *p);
  if (!fs::exists(full)) throw InputError("config field '" + field + "': file not found: " + full.string());
  return full;
}

CellLibrary load_library(const RunConfig& c) { return load_cell_library(require_path(c, c.library, "library").string()); }
Design load_netlist(const RunConfig& c) { return load_design(require_path(c, c.netlist, "netlist").string()); }

json params_json(const ProcessingParams& p) {
  return {{"idc", p.idc}, {"p_m", p.p_m}, {"p_rs", p.p_rs}, {"p_rm", p.p_rm}};
}

json knob_json(const KnobVector& v) {
  json j;
  for (int k = 0; k < kNumKnobs; ++k) j[knob_name(k)] = v[k];
  return j;
}

json point_json(const DesignPoint& p) {
  const Metrics& m = p.metrics;
  const Gradients& g = p.gradients;
  return {{"params", params_json(p.params)},
          {"k_sel_upsize", p.k_sel_upsize},
          {"w_min", p.w_min},
          {"metrics",
           {{"t95_s", m.t95},
            {"delay_penalty", m.delay_penalty},
            {"e_tot_j", m.e_tot},
            {"delta_e", m.delta_e},
            {"pnmv", m.pnmv},
            {"pnmv_error", m.pnmv_error},
            {"edp95", m.edp95},
            {"enp", m.enp},
            {"surviving_trials", m.surviving},
            {"count_failures", m.count_failures}}},
          {"gradients",
           {{"e_tot", knob_json(g.e_tot)},
            {"t95", knob_json(g.t95)},
            {"pnmv", knob_json(g.pnmv)},
            {"edp95", knob_json(g.edp95)},
            {"enp", knob_json(g.enp)}}}};
}

json reference_json(const NominalReference& r) {
  return {{"k_opt", r.k_opt}, {"t_nom_opt_s", r.t_nom_opt}, {"e_nom_opt_j", r.e_nom_opt}};
}

json proportion_json(const ProportionEstimate& e) {
  return {{"estimate", e.estimate}, {"lower", e.lower},       {"upper", e.upper},
          {"half_width", e.half_width}, {"successes", e.successes}, {"trials", e.trials}};
}

json validation_json(const ValidationReport& v) {
  return {{"params", params_json(v.params)},
          {"k_sel_upsize", v.k_sel_upsize},
          {"w_min", v.w_min},
          {"linear_delay_penalty", v.linear_delay_penalty},
          {"nonlinear_t95_s", v.nonlinear_t95},
          {"nonlinear_delay_penalty", v.nonlinear_delay_penalty},
          {"nonlinear_surviving", v.nonlinear_surviving},
          {"pnmv", v.pnmv},
          {"pnmv_error", v.pnmv_error},
          {"delta_e", v.delta_e},
          {"passed", v.passed}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void read_knobs(const json& j, KnobVector& v) {
  for (int k = 0; k < kNumKnobs; ++k) read_opt(j, knob_name(k), v[k]);
}

ProcessingParams read_processing(const json& j, ProcessingParams p) {
  read_opt(j, "idc", p.idc);
  read_opt(j, "p_m", p.p_m);
  read_opt(j, "p_rs", p.p_rs);
  read_opt(j, "p_rm", p.p_rm);
  p.validate();
  return p;
}

std::vector<int> default_k_values(const Design& d, const NominalReference& ref) {
  const int step = std::max(1, static_cast<int>(d.netlist.instances.size()) / 25);
  std::vector<int> ks;
  for (int i = 0; i < 7; ++i) ks.push_back(ref.k_opt + i * step);
  return ks;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& config_path, const CliOverrides& ov) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  c.config_path = config_path;
  c.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  try {
    if (j.value("schema_version", std::string()) != kConfigFormat)
      throw InputError(std::string("config field 'schema_version' must be '") + kConfigFormat + "'");
    if (j.contains("netlist")) c.netlist = j.at("netlist").get<std::string>();
    if (j.contains("library")) c.library = j.at("library").get<std::string>();
    read_opt(j, "node_label", c.node_label);
    read_opt(j, "workers", c.workers);
    c.out_dir = j.value("output_dir", std::string("out"));

    if (j.contains("technology")) {
      const json& t = j.at("technology");
      read_opt(t, "cnt_density", c.tech.cnt_density);
      read_opt(t, "region_width", c.tech.region_width);
      read_opt(t, "v_dd", c.tech.v_dd);
      c.tech.snm_r = c.tech.v_dd / 6.0;
      read_opt(t, "snm_r", c.tech.snm_r);
    }
    c.tech.validate();
    c.processing = read_processing(j.value("processing", json::object()), c.processing);

    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      read_opt(s, "x", c.seeds.x);
      read_opt(s, "mvn", c.seeds.mvn);
      read_opt(s, "validation_x", c.seeds.validation_x);
      read_opt(s, "validation_mvn", c.seeds.validation_mvn);
      read_opt(s, "yield", c.seeds.yield);
      read_opt(s, "mc", c.seeds.mc);
      read_opt(s, "generator", c.seeds.generator);
    }

    if (j.contains("mvn")) {
      const json& m = j.at("mvn");
      read_opt(m, "abs_error", c.analysis.mvn.abs_error);
      read_opt(m, "randomizations", c.analysis.mvn.randomizations);
      read_opt(m, "min_points", c.analysis.mvn.min_points);
      read_opt(m, "max_points", c.analysis.mvn.max_points);
      read_opt(m, "singular_tol", c.analysis.mvn.singular_tol);
    }

    if (j.contains("analysis")) {
      const json& a = j.at("analysis");
      read_opt(a, "trials", c.analysis.trials);
      read_opt(a, "delta", c.analysis.delta);
      read_opt(a, "yield_trials", c.yield_trials);
      read_opt(a, "dump_constraints", c.dump_constraints);
      if (a.contains("k_sel_upsize")) c.k_sel_upsize = a.at("k_sel_upsize").get<int>();
      if (a.contains("w_min")) c.w_min = a.at("w_min").get<int>();
    }

    if (j.contains("search")) {
      const json& s = j.at("search");
      SearchConfig& sc = c.search;
      read_opt(s, "delay_penalty_max", sc.delay_penalty_max);
      read_opt(s, "pnmv_max", sc.pnmv_max);
      read_opt(s, "delta_e_max", sc.delta_e_max);
      if (s.contains("delta_e_band")) {
        const auto band = s.at("delta_e_band").get<std::vector<double>>();
        if (band.size() != 2 || !(band[0] > 0.0) || band[1] < band[0])
          throw InputError("config field 'search.delta_e_band' must be [lo, hi] with 0 < lo <= hi");
        sc.delta_e_band_lo = band[0];
        sc.delta_e_band_hi = band[1];
      }
      read_opt(s, "step_total", sc.step_total);
      if (s.contains("hard_limit")) read_knobs(s.at("hard_limit"), sc.hard_limit);
      if (s.contains("weight")) read_knobs(s.at("weight"), sc.weight);
      read_opt(s, "max_steps", sc.max_steps);
      read_opt(s, "max_curve_points", sc.max_curve_points);
      read_opt(s, "yield_target", sc.yield_target);
      read_opt(s, "yield_trials", sc.yield_trials);
      read_opt(s, "nominal_k_max", sc.nominal.k_max);
      read_opt(s, "nominal_k_step", sc.nominal.k_step);
      const std::string sel = s.value("selection", std::string("min_edp95"));
      if (sel == "min_edp95")
        sc.selection = Selection::kMinEdp95;
      else if (sel == "most_relaxed")
        sc.selection = Selection::kMostRelaxed;
      else
        throw InputError("config field 'search.selection' must be 'min_edp95' or 'most_relaxed'");
      if (!(sc.step_total > 0.0 && sc.step_total < 1.0))
        throw InputError("config field 'search.step_total' must be in (0, 1)");
      if (sc.max_steps < 0) throw InputError("config field 'search.max_steps' must be >= 0");
    }

    if (j.contains("generator")) {
      const json& g = j.at("generator");
      GeneratorOptions& o = c.generator;
      read_opt(g, "gates", o.gates);
      read_opt(g, "depth", o.depth);
      read_opt(g, "rows", o.rows);
      read_opt(g, "max_fanout", o.max_fanout);
      read_opt(g, "reuse_probability", o.reuse_probability);
      read_opt(g, "dff_fraction", o.dff_fraction);
      read_opt(g, "aligned", o.aligned);
      read_opt(g, "wire_cap_per_pin", o.wire_cap_per_pin);
      read_opt(g, "input_slew", o.input_slew);
      read_opt(g, "output", c.generator_output);
    }

    if (j.contains("validate")) {
      const json& v = j.at("validate");
      if (v.contains("model_comparison")) {
        const json& m = v.at("model_comparison");
        c.validate_models = true;
        read_opt(m, "netlists", c.model_comparison.netlists);
        read_opt(m, "k_values", c.model_comparison.k_values);
        read_opt(m, "trials", c.model_comparison.trials);
      }
      if (v.contains("distribution")) {
        const json& d = v.at("distribution");
        c.distribution.enabled = true;
        read_opt(d, "trials", c.distribution.trials);
        c.distribution.params = read_processing(d.value("processing", json::object()), c.processing);
      }
      if (v.contains("pnmv_sweep")) {
        const json& p = v.at("pnmv_sweep");
        c.pnmv_sweep.enabled = true;
        read_opt(p, "idcs", c.pnmv_sweep.idcs);
        read_opt(p, "trials", c.pnmv_sweep.trials);
        read_opt(p, "discrete", c.pnmv_sweep.discrete);
      }
    }
    if (j.contains("mvncdf")) c.mvncdf_input = j.at("mvncdf").at("input").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }

  if (ov.seed_override) {
    const std::uint64_t k = *ov.seed_override;
    c.seeds = {k, k + 1, k + 2, k + 3, k + 4, k + 5, k + 6};
  }
  if (ov.workers) c.workers = *ov.workers;
  if (c.workers < 1) throw InputError("workers must be >= 1");
  if (const char* env = std::getenv("CNTCO_OUT_DIR"); env && *env) c.out_dir = env;
  if (ov.out_dir) c.out_dir = *ov.out_dir;
  if (c.out_dir.is_relative() && !ov.out_dir && !std::getenv("CNTCO_OUT_DIR")) c.out_dir = c.base_dir / c.out_dir;

  c.analysis.seed = c.seeds.x;
  c.analysis.mvn.seed = c.seeds.mvn;
  c.analysis.workers = c.workers;
  c.analysis.mvn.workers = c.workers;
  c.generator.seed = c.seeds.generator;
  return c;
}

RunConfig load_run_config(const fs::path& path, const CliOverrides& ov) {
  return parse_run_config(read_file(path, "config"), path, ov);
}

int cmd_analyze(const RunConfig& c, std::ostream& log) {
  const CellLibrary lib = load_library(c);
  const Design design = load_netlist(c);
  const int w_min = c.w_min.value_or(design.netlist.w_min);
  const NominalReference ref = optimize_nominal_edp(design, lib, c.tech, w_min, c.search.nominal);
  const int k = c.k_sel_upsize.value_or(ref.k_opt);
  const PointAnalyzer an(sized_design(design, lib, w_min, k), lib, c.tech, c.analysis);
  SstaResult ssta;
  DesignPoint p = an.analyze(c.processing, ref, true, &ssta);
  p.k_sel_upsize = k;
  const RegionCountModel rm = derive_region_model(c.processing, c.tech);
  const PlacedCircuit& pc = an.circuit();

  json summary = {{"schema_version", kSummarySchema},
                  {"node_label", c.node_label},
                  {"circuit",
                   {{"name", pc.netlist().name},
                    {"instances", pc.netlist().instances.size()},
                    {"stages", pc.stages().size()},
                    {"transistors", pc.transistors().size()},
                    {"regions", pc.region_count()},
                    {"arcs", pc.arcs().size()},
                    {"rows", pc.rows().size()}}},
                  {"technology",
                   {{"cnt_density", c.tech.cnt_density},
                    {"region_width", c.tech.region_width},
                    {"v_dd", c.tech.v_dd},
                    {"snm_r", c.tech.snm_r}}},
                  {"region_model", {{"mu_r", rm.mu_r}, {"sigma_r", rm.sigma_r}, {"mu_m", rm.mu_m}}},
                  {"reference", reference_json(ref)},
                  {"t_nom_s", an.nominal().t_nom},
                  {"point", point_json(p)},
                  {"trials", c.analysis.trials}};
  if (c.yield_trials > 0)
    summary["count_limited_yield"] =
        proportion_json(count_limited_yield(pc, c.processing, c.tech, c.yield_trials, c.seeds.yield, c.workers));
  write_json(c.out_dir / "summary.json", summary);

  Csv cdf("delay_cdf", {"trial", "delay_s", "failed"});
  for (std::size_t t = 0; t < ssta.sample.path_delay.size(); ++t)
    cdf.row(static_cast<int>(t), ssta.sample.path_delay[t], ssta.sample.failed[t] != 0);
  write_file(c.out_dir / "delay_cdf.csv", cdf.str());

  const SnmConstraintSystem& sys = an.snm();
  const EliminationReport& er = sys.elimination.report;
  json blocks = json::array();
  for (const auto& b : sys.blocks) blocks.push_back({{"row", b.row}, {"constraints", b.constraints.size()}});
  write_json(c.out_dir / "elimination.json",
             {{"schema_version", kEliminationSchema},
              {"gate_pairs", sys.constraints.pairs},
              {"ideal_driver_pairs", sys.constraints.ideal_driver_pairs},
              {"total", er.total},
              {"kept", er.kept},
              {"removed", er.removed},
              {"duplicates", er.duplicates},
              {"support_groups", er.support_groups},
              {"removed_fraction", er.removed_fraction},
              {"blocks", blocks}});
  if (c.dump_constraints) {
    Csv k("k_reduced", {"row", "region", "value"});
    const SpMat& kr = sys.elimination.k_reduced;
    for (int i = 0; i < kr.outerSize(); ++i)
      for (SpMat::InnerIterator it(kr, i); it; ++it) k.row(i, static_cast<int>(it.col()), it.value());
    write_file(c.out_dir / "constraints.csv", k.str());
  }
  log << "analyze: T95 " << num(p.metrics.t95) << " s, delay penalty " << num(p.metrics.delay_penalty) << ", PNMV "
      << num(p.metrics.pnmv) << ", dE " << num(p.metrics.delta_e) << "\n";
  return kExitOk;
}

int cmd_optimize(const RunConfig& c, std::ostream& log) {
  const CellLibrary lib = load_library(c);
  const Design design = load_netlist(c);
  Design base = design;
  if (c.w_min) base = min_width_upsize(base, *c.w_min);
  const ValidationSeeds vs{c.seeds.validation_x, c.seeds.validation_mvn, c.seeds.yield};
  const SearchResult r = ap_descent(base, lib, c.tech, c.processing, c.search, c.analysis, vs);

  json branches = json::array();
  for (std::size_t b = 0; b < r.branch_outcomes.size(); ++b)
    branches.push_back({{"branch_id", b},
                        {"k_sel_upsize", r.curve[b].k_sel_upsize},
                        {"outcome", outcome_name(r.branch_outcomes[b])}});
  json curve = json::array(), acc = json::array(), vals = json::array(), pareto = json::array();
  for (const auto& p : r.curve) curve.push_back(point_json(p));
  for (const auto& p : r.acceptable) acc.push_back(point_json(p));
  for (const auto& v : r.validations) vals.push_back(validation_json(v));
  for (const auto& p : r.pareto) pareto.push_back(point_json(p));
  json out = {{"schema_version", kSearchSchema},
              {"node_label", c.node_label},
              {"found", r.found},
              {"message", r.message},
              {"reference", reference_json(r.reference)},
              {"initial", params_json(c.processing)},
              {"w_min", r.w_min},
              {"restarts", r.restarts},
              {"validation_steps", r.validation_steps},
              {"initial_curve", curve},
              {"branches", branches},
              {"acceptable", acc},
              {"validations", vals},
              {"pareto", pareto}};
  if (r.selected) out["selected"] = point_json(*r.selected);
  if (r.yield) out["count_limited_yield"] = proportion_json(*r.yield);

  Csv traj("trajectory",
           {"point_id", "branch_id", "idc", "p_m", "p_rs", "delta_e", "delay_penalty", "pnmv", "edp95"});
  for (const auto& row : r.trajectory) {
    const DesignPoint& p = row.point;
    traj.row(row.point_id, row.branch_id, p.params.idc, p.params.p_m, p.params.p_rs, p.metrics.delta_e,
             p.metrics.delay_penalty, p.metrics.pnmv, p.metrics.edp95);
  }
  write_file(c.out_dir / "trajectory.csv", traj.str());

  if (r.found && r.selected) {
    const ProcessingParams route = merge_route({r.selected->params});
    const RouteImprovement ri = route_improvement(c.processing, route);
    json imp = {{"improvement", knob_json(ri.improvement)}, {"total", ri.total}};
    imp["relative"] = ri.relative ? knob_json(*ri.relative) : json("no improvement");
    out["route"] = {{"params", params_json(route)}, {"improvement", imp}, {"validated", r.validations.back().passed}};
    Csv rt("route", {"node_label", "v_dd", "idc", "p_m", "p_rs", "p_rm"});
    rt.row(c.node_label, c.tech.v_dd, route.idc, route.p_m, route.p_rs, route.p_rm);
    write_file(c.out_dir / "route.csv", rt.str());
  }
  write_json(c.out_dir / "search.json", out);
  log << "optimize: " << r.message << ", " << r.acceptable.size() << " acceptable point(s), "
      << r.trajectory.size() << " analyzed\n";
  return r.found ? kExitOk : kExitInfeasible;
}

int cmd_gen(const RunConfig& c, std::ostream& log) {
  const CellLibrary lib = load_library(c);
  const Design d = generate_design(c.generator, lib);
  PlacedCircuit check(d, lib);  // validates the generated netlist
  const fs::path out = c.out_dir / c.generator_output;
  write_file(out, serialize_design(d));
  log << "gen: " << d.netlist.instances.size() << " instances, " << check.transistors().size() << " transistors, "
      << check.region_count() << " regions -> " << out.string() << "\n";
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& log) {
  const CellLibrary lib = load_library(c);
  const Design design = load_netlist(c);
  const int w_min = c.w_min.value_or(design.netlist.w_min);
  json out = {{"schema_version", kValidationSchema}, {"node_label", c.node_label}};
  bool all_pass = true;

  if (c.validate_models) {
    std::vector<fs::path> paths;
    for (const auto& p : c.model_comparison.netlists) paths.push_back(resolve(c, p));
    if (paths.empty()) paths.push_back(require_path(c, c.netlist, "netlist"));
    json mods = json::array();
    double worst = 0.0, t_lin = 0.0, t_nl = 0.0;
    for (const auto& p : paths) {
      const Design d = load_design(p.string());
      const int w = c.w_min.value_or(d.netlist.w_min);
      const NominalReference ref = optimize_nominal_edp(d, lib, c.tech, w, c.search.nominal);
      const std::vector<int> ks = c.model_comparison.k_values.empty() ? default_k_values(d, ref)
                                                                       : c.model_comparison.k_values;
      const ModelComparison mc = compare_timing_models(d, lib, c.tech, linearization_test_sets(), ks, w,
                                                       c.model_comparison.trials, c.seeds.x, c.workers);
      json pts = json::array();
      for (const auto& q : mc.points)
        pts.push_back({{"set", q.set},
                       {"k", q.k},
                       {"e_tot_j", q.e_tot},
                       {"t95_linear_s", q.t95_linear},
                       {"t95_nonlinear_s", q.t95_nonlinear},
                       {"edp95_linear", q.edp95_linear},
                       {"edp95_nonlinear", q.edp95_nonlinear}});
      mods.push_back({{"netlist", p.filename().string()},
                      {"selected_linear", mc.selected_linear},
                      {"selected_nonlinear", mc.selected_nonlinear},
                      {"edp95_sub_optimality", mc.sub_optimality},
                      {"points", pts}});
      worst = std::max(worst, mc.sub_optimality);
      t_lin += mc.seconds_linear;
      t_nl += mc.seconds_nonlinear;
    }
    const bool pass = worst <= 0.02;
    all_pass = all_pass && pass;
    // Wall times vary run to run, so they go to the log only.
    out["model_comparison"] = {{"modules", mods}, {"worst_sub_optimality", worst}, {"pass", pass}};
    log << "validate: linearized " << num(t_lin) << " s, nonlinear " << num(t_nl) << " s, speedup "
        << num(t_nl / t_lin) << "x, worst EDP95 sub-optimality " << num(worst) << "\n";
  }

  if (c.distribution.enabled) {
    const PlacedCircuit pc(sized_design(design, lib, w_min, c.k_sel_upsize.value_or(0)), lib);
    const DistributionComparison d =
        gaussian_vs_discrete(pc, c.distribution.params, c.tech, c.distribution.trials, c.seeds.mc, c.workers);
    const bool pass = d.median_error <= 0.005 && d.spread_error <= 0.02;
    all_pass = all_pass && pass;
    out["distribution"] = {{"median_gaussian_s", d.median_gaussian}, {"median_discrete_s", d.median_discrete},
                           {"spread_gaussian_s", d.spread_gaussian}, {"spread_discrete_s", d.spread_discrete},
                           {"median_error", d.median_error},         {"spread_error", d.spread_error},
                           {"failed_gaussian", d.failed_gaussian},   {"failed_discrete", d.failed_discrete},
                           {"pass", pass}};
  }

  if (c.pnmv_sweep.enabled) {
    const PlacedCircuit pc(sized_design(design, lib, w_min, c.k_sel_upsize.value_or(0)), lib);
    const PnmvSweep s = pnmv_sweep(pc, c.tech, c.processing, c.pnmv_sweep.idcs, c.pnmv_sweep.trials, c.seeds.mc,
                                   c.pnmv_sweep.discrete, c.analysis.mvn, c.workers);
    Csv t("pnmv_sweep", {"idc", "cv", "pnmv", "pnmv_error", "mc", "mc_lower", "mc_upper", "powered", "pct_error"});
    for (const auto& p : s.points)
      t.row(p.idc, p.cv, p.pnmv, p.pnmv_error, p.mc.estimate, p.mc.lower, p.mc.upper, p.powered, p.pct_error);
    write_file(c.out_dir / "pnmv_sweep.csv", t.str());
    const bool pass = s.powered > 0 && s.rms_pct_error <= 10.0;
    all_pass = all_pass && pass;
    out["pnmv_sweep"] = {{"points", s.points.size()},
                         {"powered", s.powered},
                         {"rms_pct_error", s.rms_pct_error},
                         {"discrete", c.pnmv_sweep.discrete},
                         {"pass", pass}};
  }
  out["pass"] = all_pass;
  write_json(c.out_dir / "validation.json", out);
  log << "validate: " << (all_pass ? "pass" : "FAIL") << "\n";
  return kExitOk;
}

MvnProblem parse_mvn_text(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::vector<double> r;
    std::string tok;
    while (ls >> tok) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw InputError("mvncdf input: bad number '" + tok + "'");
      r.push_back(v);
    }
    if (!r.empty()) rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw InputError("mvncdf input: need p rows of C and one row of bounds");
  const std::size_t p = rows.size() - 1;
  MvnProblem prob{Mat(p, p), Vec(p)};
  for (std::size_t i = 0; i <= p; ++i)
    if (rows[i].size() != p) throw InputError("mvncdf input: every row must have " + std::to_string(p) + " entries");
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < p; ++k) prob.c(i, k) = rows[i][k];
  for (std::size_t i = 0; i < p; ++i) prob.u[i] = rows[p][i];
  return prob;
}

int cmd_mvncdf(const RunConfig& c, std::ostream& log) {
  const MvnProblem prob = parse_mvn_text(read_file(require_path(c, c.mvncdf_input, "mvncdf.input"), "mvncdf.input"));
  const MvnResult r = mvncdf(prob.c, prob.u, c.analysis.mvn);
  write_json(c.out_dir / "mvncdf.json", {{"schema_version", kMvnSchema},
                                         {"dimension", prob.u.size()},
                                         {"probability", r.probability},
                                         {"error", r.error},
                                         {"points", r.points},
                                         {"rank", r.rank}});
  log << "mvncdf: " << num(r.probability) << " +- " << num(r.error) << "\n";
  return kExitOk;
}

int cmd_library(const RunConfig& c, std::ostream& log) {
  const fs::path out = c.out_dir / "refcell.json";
  write_file(out, serialize_cell_library(reference_library()));
  log << "library: " << out.string() << "\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Correlated CNT-count variation analysis and processing co-optimization"};
  app.require_subcommand(1);
  std::string config;
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed_override = 0;
  app.add_option("--config", config, "Run configuration (JSON)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed-override", seed_override, "Replace every seed with one base seed");
  app.fallthrough();
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
  };
  const Sub subs[] = {{"analyze", "Single design point analysis", cmd_analyze},
                      {"optimize", "Gradient-descent search for acceptable design points", cmd_optimize},
                      {"gen", "Generate a synthetic placed netlist", cmd_gen},
                      {"validate", "Model cross-checks", cmd_validate},
                      {"mvncdf", "Evaluate one multivariate normal CDF", cmd_mvncdf},
                      {"library", "Write the reference cell library", cmd_library}};
  for (const auto& s : subs) app.add_subcommand(s.name, s.help);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    CliOverrides ov;
    if (*out_opt) ov.out_dir = out_dir;
    if (*workers_opt) ov.workers = workers;
    if (*seed_opt) ov.seed_override = seed_override;
    RunConfig rc;
    if (!config.empty()) {
      rc = load_run_config(config, ov);
    } else if (cmd == "library") {
      rc = parse_run_config(std::string("{\"schema_version\": \"") + kConfigFormat + "\"}", "./config.json", ov);
    } else {
      throw InputError("--config is required");
    }
    for (const auto& s : subs)
      if (cmd == s.name) return s.fn(rc, out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace cntco
