#include "cntco/optimizer.hpp"

#include "cntco/normal.hpp"
#include "cntco/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

namespace cntco {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// T95 over the base point's surviving trials, each along its recorded path.
double path_t95(const FactoredDelayModel& f, const SstaResult& base, double mu, double sigma) {
  const std::vector<double> d = path_delays(f, base.sample.critical_path, mu, sigma);
  std::vector<double> kept;
  kept.reserve(d.size());
  for (std::size_t t = 0; t < d.size(); ++t) {
    if (base.sample.failed[t]) continue;
    kept.push_back(std::isnan(d[t]) ? 0.0 : d[t]);
  }
  return t95_order_statistic(std::move(kept));
}

void fill_derived(Metrics& m, const NominalReference& ref) {
  m.delay_penalty = m.t95 / ref.t_nom_opt - 1.0;
  m.delta_e = m.e_tot / ref.e_nom_opt - 1.0;
  m.edp95 = m.e_tot * m.t95;
  m.enp = m.e_tot * m.pnmv;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw NumericalError("percentile of an empty sample");
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  const std::size_t idx = std::clamp<std::size_t>(k, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

std::vector<double> surviving(const DelaySample& s) {
  std::vector<double> out;
  for (std::size_t t = 0; t < s.path_delay.size(); ++t)
    if (!s.failed[t]) out.push_back(s.path_delay[t]);
  return out;
}

}  // namespace

PointAnalyzer::PointAnalyzer(const Design& design, const CellLibrary& library, const TechnologyParams& tech,
                             const AnalysisOptions& options)
    : circuit_(design, library), tech_(tech), options_(options) {
  tech_.validate();
  if (options_.trials < 1) throw InputError("trials must be >= 1");
  terms_ = build_arc_terms(circuit_);
  nominal_ = nonlinear_sta(circuit_, terms_, tech_.v_dd,
                           (circuit_.incidence() * Vec::Constant(circuit_.region_count(), tech_.lambda_w())).eval());
  model_ = linearize(circuit_, terms_, nominal_, tech_);
  fdm_ = precompute_factored<double>(
      model_, circuit_.incidence(),
      standard_normal_matrix(circuit_.region_keys(), options_.trials, options_.seed, options_.workers),
      options_.workers);
  snm_ = build_snm_system(circuit_, tech_);
}

double PointAnalyzer::nominal_energy() const { return expected_energy(model_, tech_.lambda_w()); }

DesignPoint PointAnalyzer::analyze(const ProcessingParams& params, const NominalReference& ref, bool gradients,
                                   SstaResult* ssta_out) const {
  params.validate();
  const RegionCountModel rm = derive_region_model(params, tech_);
  SstaOptions so;
  so.record_paths = gradients;
  SstaResult ssta = linearized_ssta(circuit_, fdm_, rm.mu_r, rm.sigma_r, ref.t_nom_opt, so, options_.workers);
  DesignPoint p;
  p.params = params;
  p.w_min = circuit_.netlist().w_min;
  Metrics& m = p.metrics;
  m.t95 = ssta.t95;
  m.surviving = ssta.surviving;
  m.count_failures = options_.trials - ssta.surviving;
  m.e_tot = total_energy(fdm_, rm.mu_r, rm.sigma_r);
  const PnmvResult pr = pnmv(snm_, rm.mu_r, rm.sigma_r, options_.mvn);
  m.pnmv = pr.pnmv;
  m.pnmv_error = pr.error;
  fill_derived(m, ref);
  if (gradients) p.gradients = grad_metrics(*this, params, ssta, ref, options_.delta);
  if (ssta_out) *ssta_out = std::move(ssta);
  return p;
}

Gradients grad_metrics(const PointAnalyzer& an, const ProcessingParams& params, const SstaResult& base,
                       const NominalReference& ref, double delta) {
  if (!(delta > 0.0)) throw InputError("gradient step must be > 0");
  if (base.sample.critical_path.empty()) throw InputError("grad_metrics needs recorded critical paths");
  const TechnologyParams& tech = an.tech();
  const RegionCountModel rm = derive_region_model(params, tech);
  const FactoredDelayModel& f = an.fdm();
  Gradients g;
  const double t0 = path_t95(f, base, rm.mu_r, rm.sigma_r);
  const double e0 = total_energy(f, rm.mu_r, rm.sigma_r);
  std::optional<PnmvEvaluator> ev;
  double p0 = 0.0;
  if (rm.sigma_r > 0.0 && !an.snm().blocks.empty()) {
    ev.emplace(an.snm(), rm.mu_r / rm.sigma_r, an.options().mvn);
    p0 = ev->evaluate(rm.mu_r / rm.sigma_r).pnmv;  // equals a fixed pass at the chosen counts
  }
  for (int k = 0; k < kNumKnobs; ++k) {
    const double v = params.knob(k);
    if (v <= 0.0) continue;  // ideal value is 0 for every knob
    const double h = std::min(delta, v);
    ProcessingParams q = params;
    q.set_knob(k, v - h);
    const RegionCountModel rq = derive_region_model(q, tech);
    g.t95[k] = (t0 - path_t95(f, base, rq.mu_r, rq.sigma_r)) / h;
    g.e_tot[k] = (e0 - total_energy(f, rq.mu_r, rq.sigma_r)) / h;
    if (ev) {
      const double pq = rq.sigma_r > 0.0 ? ev->evaluate_fixed(rq.mu_r / rq.sigma_r).pnmv : 0.0;
      g.pnmv[k] = (p0 - pq) / h;
    }
  }
  (void)ref;
  const double pn = ev ? p0 : 0.0;
  for (int k = 0; k < kNumKnobs; ++k) {
    g.edp95[k] = g.e_tot[k] * t0 + e0 * g.t95[k];
    g.enp[k] = g.e_tot[k] * pn + e0 * g.pnmv[k];
  }
  return g;
}

Design sized_design(const Design& base, const CellLibrary& library, int w_min, int k) {
  Design d = min_width_upsize(base, w_min);
  if (k > 0) d = selective_upsize(std::move(d), library, k).design;
  return d;
}

namespace {

struct NominalValues {
  double t = 0.0, e = 0.0;
};

NominalValues nominal_values(const Design& d, const CellLibrary& library, const TechnologyParams& tech) {
  PlacedCircuit c(d, library);
  const ArcTerms at = build_arc_terms(c);
  const NominalTiming nt =
      nonlinear_sta(c, at, tech.v_dd, (c.incidence() * Vec::Constant(c.region_count(), tech.lambda_w())).eval());
  const AffineCircuitModel m = linearize(c, at, nt, tech);
  return {nt.t_nom, expected_energy(m, tech.lambda_w())};
}

int max_upsizings(const Design& d, const CellLibrary& library) {
  int total = 0;
  for (const auto& inst : d.netlist.instances) total += library.cell(inst.cell).max_drive() - inst.drive;
  return total;
}

}  // namespace

NominalReference optimize_nominal_edp(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                      int w_min, const NominalSweepConfig& sweep) {
  const Design sized = min_width_upsize(base, w_min);
  const int n = static_cast<int>(sized.netlist.instances.size());
  const int k_max = std::min(sweep.k_max >= 0 ? sweep.k_max : n / 2, max_upsizings(sized, library));
  const int k_step = sweep.k_step > 0 ? sweep.k_step : std::max(1, n / 100);
  NominalReference ref;
  double best = std::numeric_limits<double>::infinity();
  // Upsizing is incremental, so walk the chain instead of restarting it.
  Design d = sized;
  int applied = 0;
  for (int k = 0; k <= k_max; k += k_step) {
    if (k > applied) {
      UpsizeResult ur = selective_upsize(std::move(d), library, k - applied);
      d = std::move(ur.design);
      applied += ur.applied;
      if (applied < k) break;
    }
    const NominalValues v = nominal_values(d, library, tech);
    const double edp = v.e * v.t;
    ref.swept_k.push_back(k);
    ref.swept_edp.push_back(edp);
    if (edp < best) {
      best = edp;
      ref.k_opt = k;
      ref.t_nom_opt = v.t;
      ref.e_nom_opt = v.e;
    }
  }
  return ref;
}

DesignPoint sdpa(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                 const ProcessingParams& params, int k, int w_min, const NominalReference& ref,
                 const AnalysisOptions& options) {
  PointAnalyzer an(sized_design(base, library, w_min, k), library, tech, options);
  DesignPoint p = an.analyze(params, ref, true);
  p.k_sel_upsize = k;
  return p;
}

ProcessingParams descent_step(const ProcessingParams& params, const KnobVector& gradient, const SearchConfig& config) {
  double norm = 0.0;
  for (int k = 0; k < kNumKnobs; ++k) norm += config.weight[k] * std::abs(gradient[k]);
  ProcessingParams out = params;
  if (!(norm > 0.0) || !std::isfinite(norm)) return out;
  for (int k = 0; k < kNumKnobs; ++k) {
    const double share = config.weight[k] * gradient[k] / norm;
    if (share <= 0.0) continue;
    const double v = params.knob(k);
    if (v <= config.hard_limit[k]) continue;
    out.set_knob(k, std::max(v * (1.0 - config.step_total * share), config.hard_limit[k]));
  }
  return out;
}

bool acceptable(const Metrics& m, const SearchConfig& config) {
  return m.delay_penalty <= config.delay_penalty_max && m.pnmv <= config.pnmv_max && m.delta_e <= config.delta_e_max;
}

InitialCurve build_initial_curve(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                 const ProcessingParams& initial, int w_min, const SearchConfig& config,
                                 const AnalysisOptions& options) {
  InitialCurve curve;
  curve.reference = optimize_nominal_edp(base, library, tech, w_min, config.nominal);
  const NominalReference& ref = curve.reference;
  const Design start = sized_design(base, library, w_min, ref.k_opt);
  const int k_room = max_upsizings(start, library);
  const RegionCountModel rm = derive_region_model(initial, tech);

  auto delta_e_at = [&](int extra) {
    const Design d = extra > 0 ? selective_upsize(start, library, extra).design : start;
    PlacedCircuit c(d, library);
    const ArcTerms at = build_arc_terms(c);
    const NominalTiming nt =
        nonlinear_sta(c, at, tech.v_dd, (c.incidence() * Vec::Constant(c.region_count(), tech.lambda_w())).eval());
    return expected_energy(linearize(c, at, nt, tech), rm.mu_r) / ref.e_nom_opt - 1.0;
  };

  std::vector<int> ks{0};
  double prev = delta_e_at(0);
  while (static_cast<int>(ks.size()) < config.max_curve_points && prev <= config.delta_e_max) {
    const int last = ks.back();
    if (last >= k_room) break;
    // Smallest k whose increment reaches the band floor.
    int lo = last, hi = last + 1;
    double dhi = delta_e_at(hi);
    while (dhi - prev < config.delta_e_band_lo && hi < k_room) {
      lo = hi;
      hi = std::min(k_room, last + 2 * (hi - last));
      dhi = delta_e_at(hi);
    }
    while (hi - lo > 1) {
      const int mid = lo + (hi - lo) / 2;
      const double dm = delta_e_at(mid);
      if (dm - prev >= config.delta_e_band_lo) {
        hi = mid;
        dhi = dm;
      } else {
        lo = mid;
      }
    }
    if (dhi - prev < config.delta_e_band_lo || dhi > config.delta_e_max) break;
    ks.push_back(hi);
    prev = dhi;
  }
  for (int extra : ks) {
    const Design d = extra > 0 ? selective_upsize(start, library, extra).design : start;
    PointAnalyzer an(d, library, tech, options);
    DesignPoint p = an.analyze(initial, ref, false);
    p.k_sel_upsize = ref.k_opt + extra;
    curve.points.push_back(p);
  }
  return curve;
}

const char* outcome_name(BranchOutcome o) {
  switch (o) {
    case BranchOutcome::kAcceptable: return "acceptable";
    case BranchOutcome::kEnergyExceeded: return "energy_exceeded";
    case BranchOutcome::kStalled: return "stalled";
    case BranchOutcome::kMaxSteps: return "max_steps";
  }
  return "unknown";
}

ValidationReport validate_point(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                const DesignPoint& point, const NominalReference& ref, const SearchConfig& config,
                                const AnalysisOptions& options, const ValidationSeeds& seeds) {
  AnalysisOptions fresh = options;
  fresh.seed = seeds.x_seed;
  fresh.mvn.seed = seeds.mvn_seed;
  PointAnalyzer an(sized_design(base, library, point.w_min, point.k_sel_upsize), library, tech, fresh);
  const DesignPoint lin = an.analyze(point.params, ref, false);
  ValidationReport r;
  r.params = point.params;
  r.k_sel_upsize = point.k_sel_upsize;
  r.w_min = point.w_min;
  r.linear_delay_penalty = lin.metrics.delay_penalty;
  r.pnmv = lin.metrics.pnmv;
  r.pnmv_error = lin.metrics.pnmv_error;
  r.delta_e = lin.metrics.delta_e;
  const RegionCountModel rm = derive_region_model(point.params, tech);
  const RowMat counts = (an.fdm().x.array() * rm.sigma_r + rm.mu_r).matrix();
  const DelaySample nl = nonlinear_mc(an.circuit(), an.terms(), tech.v_dd, counts, options.workers);
  std::vector<double> kept = surviving(nl);
  r.nonlinear_surviving = static_cast<int>(kept.size());
  if (r.nonlinear_surviving < 100) throw NumericalError("validation: fewer than 100 surviving trials");
  r.nonlinear_t95 = t95_order_statistic(std::move(kept));
  r.nonlinear_delay_penalty = r.nonlinear_t95 / ref.t_nom_opt - 1.0;
  r.passed = r.nonlinear_delay_penalty <= config.delay_penalty_max && r.linear_delay_penalty <= config.delay_penalty_max &&
             r.pnmv <= config.pnmv_max && r.delta_e <= config.delta_e_max;
  return r;
}

namespace {

bool more_relaxed(const ProcessingParams& a, const ProcessingParams& b) {
  if (a.idc != b.idc) return a.idc > b.idc;
  if (a.p_m != b.p_m) return a.p_m > b.p_m;
  return a.p_rs > b.p_rs;
}

bool dominates(const Metrics& a, const Metrics& b) {
  const bool le = a.delay_penalty <= b.delay_penalty && a.pnmv <= b.pnmv && a.delta_e <= b.delta_e;
  const bool lt = a.delay_penalty < b.delay_penalty || a.pnmv < b.pnmv || a.delta_e < b.delta_e;
  return le && lt;
}

// Steps until acceptable or stopped. `point` holds the last analyzed point.
BranchOutcome descend(const PointAnalyzer& an, DesignPoint& point, const NominalReference& ref,
                      const SearchConfig& config, int branch, std::vector<TrajectoryRow>& trajectory) {
  const int k = point.k_sel_upsize;
  for (int step = 0;; ++step) {
    trajectory.push_back({static_cast<int>(trajectory.size()), branch, point});
    if (acceptable(point.metrics, config)) return BranchOutcome::kAcceptable;
    if (point.metrics.delta_e > config.delta_e_max) return BranchOutcome::kEnergyExceeded;
    if (step >= config.max_steps) return BranchOutcome::kMaxSteps;
    const bool delay_phase = point.metrics.delay_penalty > config.delay_penalty_max;
    const KnobVector& g = delay_phase ? point.gradients.edp95 : point.gradients.enp;
    ProcessingParams next = descent_step(point.params, g, config);
    if (next == point.params) {
      // The active objective is flat here; try the other one before giving up.
      next = descent_step(point.params, delay_phase ? point.gradients.enp : point.gradients.edp95, config);
      if (next == point.params) return BranchOutcome::kStalled;
    }
    point = an.analyze(next, ref, true);
    point.k_sel_upsize = k;
  }
}

}  // namespace

SearchResult ap_descent(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                        const ProcessingParams& initial, const SearchConfig& config, const AnalysisOptions& options,
                        const ValidationSeeds& seeds) {
  initial.validate();
  std::vector<int> widths = library.available_widths();
  std::sort(widths.begin(), widths.end());
  SearchResult res;
  res.w_min = std::max(1, base.netlist.w_min);
  for (;;) {
    const InitialCurve curve = build_initial_curve(base, library, tech, initial, res.w_min, config, options);
    res.reference = curve.reference;
    res.curve = curve.points;
    res.trajectory.clear();
    res.branch_outcomes.clear();
    res.acceptable.clear();
    res.selected.reset();
    res.validations.clear();
    res.validation_steps = 0;

    std::vector<std::unique_ptr<PointAnalyzer>> analyzers;
    for (std::size_t b = 0; b < curve.points.size(); ++b) {
      const int k = curve.points[b].k_sel_upsize;
      analyzers.push_back(std::make_unique<PointAnalyzer>(sized_design(base, library, res.w_min, k), library, tech,
                                                          options));
      DesignPoint p = analyzers.back()->analyze(initial, res.reference, true);
      p.k_sel_upsize = k;
      const BranchOutcome o = descend(*analyzers.back(), p, res.reference, config, static_cast<int>(b), res.trajectory);
      res.branch_outcomes.push_back(o);
      if (o == BranchOutcome::kAcceptable) res.acceptable.push_back(p);
    }

    if (res.acceptable.empty()) {
      for (const auto& row : res.trajectory) {
        bool dominated = false;
        for (const auto& other : res.trajectory)
          if (dominates(other.point.metrics, row.point.metrics)) {
            dominated = true;
            break;
          }
        if (!dominated) res.pareto.push_back(row.point);
      }
      res.message = "no acceptable design point found";
      return res;
    }

    std::size_t pick = 0;
    for (std::size_t i = 1; i < res.acceptable.size(); ++i) {
      const DesignPoint& a = res.acceptable[i];
      const DesignPoint& b = res.acceptable[pick];
      if (config.selection == Selection::kMinEdp95 ? a.metrics.edp95 < b.metrics.edp95
                                                   : more_relaxed(a.params, b.params))
        pick = i;
    }
    DesignPoint sel = res.acceptable[pick];
    std::size_t branch = 0;
    for (std::size_t b = 0; b < curve.points.size(); ++b)
      if (curve.points[b].k_sel_upsize == sel.k_sel_upsize) branch = b;

    // Validation with fresh seeds and the nonlinear model; a failure takes
    // one more descent step on the selected branch.
    bool validated = false;
    for (int budget = config.max_steps;; --budget) {
      const ValidationReport v = validate_point(base, library, tech, sel, res.reference, config, options, seeds);
      res.validations.push_back(v);
      if (v.passed) {
        validated = true;
        break;
      }
      if (budget <= 0) break;
      const bool delay_phase = std::max(v.nonlinear_delay_penalty, v.linear_delay_penalty) > config.delay_penalty_max;
      const ProcessingParams next =
          descent_step(sel.params, delay_phase ? sel.gradients.edp95 : sel.gradients.enp, config);
      if (next == sel.params) break;
      const int k = sel.k_sel_upsize;
      sel = analyzers[branch]->analyze(next, res.reference, true);
      sel.k_sel_upsize = k;
      res.trajectory.push_back({static_cast<int>(res.trajectory.size()), static_cast<int>(branch), sel});
      ++res.validation_steps;
      if (sel.metrics.delta_e > config.delta_e_max) break;
    }
    if (!validated) {
      res.message = "selected point failed validation";
      res.selected = sel;
      return res;
    }
    res.selected = sel;

    {
      PlacedCircuit c(sized_design(base, library, res.w_min, sel.k_sel_upsize), library);
      res.yield = count_limited_yield(c, sel.params, tech, config.yield_trials, seeds.yield_seed, options.workers);
    }
    if (res.yield->estimate >= config.yield_target) {
      res.found = true;
      res.message = "acceptable point validated";
      return res;
    }
    const auto next = std::upper_bound(widths.begin(), widths.end(), res.w_min);
    if (next == widths.end()) {
      res.message = "count-limited yield below target at the largest library width";
      return res;
    }
    res.w_min = *next;
    ++res.restarts;
  }
}

ProcessingParams merge_route(const std::vector<ProcessingParams>& selected) {
  if (selected.empty()) throw InputError("route extraction needs at least one selected point");
  ProcessingParams r = selected.front();
  for (const auto& p : selected) {
    r.idc = std::min(r.idc, p.idc);
    r.p_m = std::min(r.p_m, p.p_m);
    r.p_rs = std::min(r.p_rs, p.p_rs);
    r.p_rm = std::max(r.p_rm, p.p_rm);
  }
  return r;
}

RouteImprovement route_improvement(const ProcessingParams& initial, const ProcessingParams& final_params) {
  RouteImprovement r;
  for (int k = 0; k < kNumKnobs; ++k) {
    const double v0 = initial.knob(k);
    r.improvement[k] = v0 > 0.0 ? 1.0 - final_params.knob(k) / v0 : 0.0;
    r.total += r.improvement[k];
  }
  if (r.total != 0.0) {
    KnobVector rel{};
    for (int k = 0; k < kNumKnobs; ++k) rel[k] = r.improvement[k] / r.total;
    r.relative = rel;
  }
  return r;
}

std::vector<ProcessingParams> linearization_test_sets() {
  return {{0.50, 0.10, 0.05, 0.9999},  {0.50, 0.05, 0.05, 0.9999}, {0.50, 0.01, 0.05, 0.9999},
          {0.50, 0.001, 0.05, 0.9999}, {0.35, 0.05, 0.05, 0.9999}, {0.10, 0.05, 0.05, 0.9999},
          {0.25, 0.05, 0.05, 0.9999},  {0.25, 0.05, 0.025, 0.9999}};
}

ModelComparison compare_timing_models(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                      const std::vector<ProcessingParams>& sets, const std::vector<int>& ks, int w_min,
                                      int trials, std::uint64_t seed, int workers) {
  if (sets.empty() || ks.empty()) throw InputError("model comparison needs processing sets and k values");
  ModelComparison out;
  FactoredDelayModelT<float> f;  // refilled per k
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const Design d = sized_design(base, library, w_min, ks[ki]);
    PlacedCircuit c(d, library);
    const RowMat x = standard_normal_matrix(c.region_keys(), trials, seed, workers);
    const Vec nominal_counts = c.incidence() * Vec::Constant(c.region_count(), tech.lambda_w());

    auto t0 = std::chrono::steady_clock::now();
    const ArcTerms at = build_arc_terms(c);
    const NominalTiming nt = nonlinear_sta(c, at, tech.v_dd, nominal_counts);
    const AffineCircuitModel model = linearize(c, at, nt, tech);
    // Single precision is enough to rank design points.
    precompute_factored(model, c.incidence(), x, f, workers);
    std::vector<std::pair<float, float>> moments;
    for (const auto& set : sets) {
      const RegionCountModel rm = derive_region_model(set, tech);
      moments.emplace_back(static_cast<float>(rm.mu_r), static_cast<float>(rm.sigma_r));
    }
    SstaOptions so;
    so.record_paths = false;
    const std::vector<SstaResult> lin = linearized_ssta(c, f, moments, 1.0, so, workers);
    std::vector<ModelComparisonPoint> rows;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      ModelComparisonPoint p;
      p.set = static_cast<int>(s);
      p.k = ks[ki];
      p.e_tot = total_energy(f, moments[s].first, moments[s].second);
      p.t95_linear = lin[s].t95;
      p.edp95_linear = p.e_tot * p.t95_linear;
      rows.push_back(p);
    }
    out.seconds_linear += seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const ArcTerms at2 = build_arc_terms(c);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const RegionCountModel rm = derive_region_model(sets[s], tech);
      const RowMat counts = (x.array() * rm.sigma_r + rm.mu_r).matrix();
      const DelaySample nl = nonlinear_mc(c, at2, tech.v_dd, counts, workers);
      std::vector<double> kept = surviving(nl);
      if (kept.size() < 100) throw NumericalError("model comparison: fewer than 100 surviving trials");
      rows[s].t95_nonlinear = t95_order_statistic(std::move(kept));
      rows[s].edp95_nonlinear = rows[s].e_tot * rows[s].t95_nonlinear;
    }
    out.seconds_nonlinear += seconds_since(t0);
    out.points.insert(out.points.end(), rows.begin(), rows.end());
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (out.points[i].edp95_linear < out.points[out.selected_linear].edp95_linear)
      out.selected_linear = static_cast<int>(i);
    if (out.points[i].edp95_nonlinear < out.points[out.selected_nonlinear].edp95_nonlinear)
      out.selected_nonlinear = static_cast<int>(i);
  }
  out.sub_optimality =
      out.points[out.selected_linear].edp95_nonlinear / out.points[out.selected_nonlinear].edp95_nonlinear - 1.0;
  return out;
}

DistributionComparison gaussian_vs_discrete(const PlacedCircuit& c, const ProcessingParams& params,
                                            const TechnologyParams& tech, int trials, std::uint64_t seed,
                                            int workers) {
  const RegionCountModel rm = derive_region_model(params, tech);
  const ArcTerms at = build_arc_terms(c);
  const RowMat g = (standard_normal_matrix(c.region_keys(), trials, seed, workers).array() * rm.sigma_r + rm.mu_r)
                       .matrix();
  const RowMat dsc = sample_regions_discrete(params, tech, c.region_keys(), trials, seed, workers).cast<double>();
  const DelaySample sg = nonlinear_mc(c, at, tech.v_dd, g, workers);
  const DelaySample sd = nonlinear_mc(c, at, tech.v_dd, dsc, workers);
  const std::vector<double> vg = surviving(sg), vd = surviving(sd);
  DistributionComparison r;
  r.failed_gaussian = trials - static_cast<int>(vg.size());
  r.failed_discrete = trials - static_cast<int>(vd.size());
  r.median_gaussian = percentile(vg, 0.5);
  r.median_discrete = percentile(vd, 0.5);
  r.spread_gaussian = percentile(vg, 0.95) - percentile(vg, 0.05);
  r.spread_discrete = percentile(vd, 0.95) - percentile(vd, 0.05);
  r.median_error = std::abs(r.median_gaussian / r.median_discrete - 1.0);
  r.spread_error = std::abs(r.spread_gaussian / r.spread_discrete - 1.0);
  return r;
}

bool mc_powered(double p, long long trials) {
  if (!(p > 0.0) || p >= 1.0 || trials < 1) return false;
  const double rel_se = std::sqrt((1.0 - p) / (p * static_cast<double>(trials)));
  return normal_cdf(0.1 / rel_se - 1.959963984540054) >= 0.9;
}

PnmvSweep pnmv_sweep(const PlacedCircuit& c, const TechnologyParams& tech, const ProcessingParams& base,
                     const std::vector<double>& idcs, long long trials, std::uint64_t seed, bool discrete,
                     const MvnOptions& mvn, int workers) {
  const SnmConstraintSystem sys = build_snm_system(c, tech);
  PnmvSweep out;
  double sq = 0.0;
  for (double idc : idcs) {
    ProcessingParams p = base;
    p.idc = idc;
    const RegionCountModel rm = derive_region_model(p, tech);
    PnmvSweepPoint pt;
    pt.idc = idc;
    pt.cv = rm.mu_r > 0.0 ? rm.sigma_r / rm.mu_r : 0.0;
    const PnmvResult a = pnmv(sys, rm.mu_r, rm.sigma_r, mvn);
    pt.pnmv = a.pnmv;
    pt.pnmv_error = a.error;
    pt.mc = pnmv_mc(sys.k, c.incidence(), c.region_keys(), p, tech, trials, seed, discrete, workers).estimate;
    pt.powered = mc_powered(pt.pnmv, pt.mc.trials);
    if (pt.mc.estimate > 0.0) pt.pct_error = 100.0 * (pt.pnmv / pt.mc.estimate - 1.0);
    if (pt.powered) {
      ++out.powered;
      sq += pt.pct_error * pt.pct_error;
    }
    out.points.push_back(pt);
  }
  out.rms_pct_error = out.powered > 0 ? std::sqrt(sq / out.powered) : 0.0;
  return out;
}

}  // namespace cntco
