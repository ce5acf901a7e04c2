#include "cntco/timing.hpp"

#include "cntco/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cntco {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kTrialBlock = 128;
}  // namespace

double solve_stage_delay(double q, double i1, double i2, double t_in) {
  if (!(i1 >= 0.0) || !(i2 >= 0.0) || !(i1 + i2 > 0.0)) throw NumericalError("stage delay: nonpositive drive current");
  if (!(t_in > 0.0)) throw NumericalError("stage delay: input slew must be > 0");
  if (q <= 0.0) return 0.0;
  const double fast = q / (i1 + i2);
  if (2.0 * fast >= t_in) return fast;
  const double a = 2.0 * i1 / t_in;
  const double d = 2.0 * q / (i2 + std::sqrt(i2 * i2 + 4.0 * a * q));
  if (!(2.0 * d <= t_in * (1.0 + 1e-12))) throw NumericalError("stage delay: no self-consistent branch");
  return d;
}

ArcTerms build_arc_terms(const PlacedCircuit& c) {
  const auto& arcs = c.arcs();
  const auto m = static_cast<Eigen::Index>(arcs.size());
  const auto t = static_cast<Eigen::Index>(c.transistors().size());
  ArcTerms at;
  at.c_par_per_cnt.resize(m);
  at.c_fixed.resize(m);
  at.i1_per_cnt.resize(m);
  at.i1_fixed.resize(m);
  at.i2_per_cnt.resize(m);
  at.i2_fixed.resize(m);
  at.d_fix.setZero(m);
  at.energy_weight.resize(m);
  std::vector<Triplet> members, group;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto& arc = arcs[a];
    const auto& si = c.stages()[arc.stage_instance];
    const StageArcModel mdl = c.arc_model(arc.stage_instance, arc.input, 0);
    const SensitizationCase& sc = c.case_model(arc.stage_instance, arc.input, 0).sensitization;
    for (int k = 0; k < si.transistor_count; ++k)
      members.emplace_back(static_cast<int>(a), si.first_transistor + k, 1.0);
    for (int k : sc.p_group) group.emplace_back(static_cast<int>(a), si.first_transistor + k, 1.0);
    for (int k : sc.n_group) group.emplace_back(static_cast<int>(a), si.first_transistor + k, 1.0);
    at.c_par_per_cnt[a] = mdl.c_par_per_cnt;
    at.c_fixed[a] = mdl.c_par_fixed + c.load_capacitance(arc.to_net);
    at.i1_per_cnt[a] = mdl.i1_per_cnt;
    at.i1_fixed[a] = mdl.i1_fixed;
    at.i2_per_cnt[a] = mdl.i2_per_cnt;
    at.i2_fixed[a] = mdl.i2_fixed;
    const auto& from = c.nets()[arc.from_net];
    if (from.primary_input >= 0) at.d_fix[a] = c.netlist().primary_inputs[from.primary_input].d_fix;
    at.energy_weight[a] = 1.0 / static_cast<double>(c.arcs_of_stage(arc.stage_instance).size());
  }
  at.stage_members.resize(m, t);
  at.stage_members.setFromTriplets(members.begin(), members.end());
  at.drive_group.resize(m, t);
  at.drive_group.setFromTriplets(group.begin(), group.end());
  return at;
}

namespace {

// Nonlinear STA kernel over preallocated buffers. Returns the max endpoint
// arrival, or NaN if the counts contain a nonpositive entry.
struct NonlinearWorkspace {
  Vec members, group, arrival, slew, delay, in_slew;
};

double run_nonlinear(const PlacedCircuit& c, const ArcTerms& at, double v_dd, const Vec& counts, NonlinearWorkspace& w,
                     bool keep_arcs) {
  w.members.noalias() = at.stage_members * counts;
  w.group.noalias() = at.drive_group * counts;
  const auto& nets = c.nets();
  w.arrival.setConstant(static_cast<Eigen::Index>(nets.size()), kNegInf);
  w.slew.setZero(static_cast<Eigen::Index>(nets.size()));
  const double src_slew = c.netlist().input_slew;
  for (int s : c.sources()) {
    w.arrival[s] = 0.0;
    w.slew[s] = src_slew;
  }
  if (keep_arcs) {
    w.delay.resize(static_cast<Eigen::Index>(c.arcs().size()));
    w.in_slew.resize(static_cast<Eigen::Index>(c.arcs().size()));
  }
  const auto& arcs = c.arcs();
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const auto& arc = arcs[a];
    const double q = v_dd * (at.c_par_per_cnt[a] * w.members[a] + at.c_fixed[a]);
    const double i1 = at.i1_per_cnt[a] * w.group[a] + at.i1_fixed[a];
    const double i2 = at.i2_per_cnt[a] * w.group[a] + at.i2_fixed[a];
    const double t_in = w.slew[arc.from_net];
    const double d = solve_stage_delay(q, i1, i2, t_in);
    const double total = d + at.d_fix[a];
    if (keep_arcs) {
      w.delay[a] = total;
      w.in_slew[a] = t_in;
    }
    const double cand = w.arrival[arc.from_net] + total;
    if (cand > w.arrival[arc.to_net]) {
      w.arrival[arc.to_net] = cand;
      w.slew[arc.to_net] = 2.0 * d;
    }
  }
  double best = kNegInf;
  for (int e : c.endpoints()) best = std::max(best, w.arrival[e]);
  return best;
}

}  // namespace

NominalTiming nonlinear_sta(const PlacedCircuit& c, const ArcTerms& at, double v_dd, const Vec& counts) {
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (!(counts[i] > 0.0)) throw NumericalError("nonlinear STA needs positive transistor counts");
  NonlinearWorkspace w;
  NominalTiming nt;
  nt.t_nom = run_nonlinear(c, at, v_dd, counts, w, true);
  nt.delay = w.delay;
  nt.input_slew = w.in_slew;
  nt.net_arrival = w.arrival;
  nt.net_slew = w.slew;
  return nt;
}

namespace {
Vec nominal_transistor_counts(const PlacedCircuit& c, const TechnologyParams& tech) {
  return c.incidence() * Vec::Constant(c.region_count(), tech.lambda_w());
}
}  // namespace

NominalTiming nominal_sta_nonlinear(const PlacedCircuit& c, const TechnologyParams& tech) {
  tech.validate();
  const ArcTerms at = build_arc_terms(c);
  return nonlinear_sta(c, at, tech.v_dd, nominal_transistor_counts(c, tech));
}

AffineCircuitModel linearize(const PlacedCircuit& c, const ArcTerms& at, const NominalTiming& nt,
                             const TechnologyParams& tech) {
  const auto m = static_cast<Eigen::Index>(c.arcs().size());
  if (nt.delay.size() != m) throw InputError("linearize: nominal timing does not match the circuit");
  AffineCircuitModel am;
  am.v_dd = tech.v_dd;
  am.nominal_count = tech.lambda_w();
  am.frozen_factor.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const double d = nt.delay[a] - at.d_fix[a];
    am.frozen_factor[a] = std::min(2.0 * d / nt.input_slew[a], 1.0);
  }
  const SpMat& b = c.incidence();
  const SpMat sb = at.stage_members * b;
  const SpMat gb = at.drive_group * b;
  am.a_cload = at.c_par_per_cnt.asDiagonal() * sb;
  am.b_cload = at.c_fixed;
  const Vec i_per = am.frozen_factor.cwiseProduct(at.i1_per_cnt) + at.i2_per_cnt;
  am.a_idrive = i_per.asDiagonal() * gb;
  am.b_idrive = am.frozen_factor.cwiseProduct(at.i1_fixed) + at.i2_fixed;
  am.a_cload.makeCompressed();
  am.a_idrive.makeCompressed();
  am.d_fix = at.d_fix;
  am.energy_weight = at.energy_weight;
  const Vec nominal_current = am.a_idrive * Vec::Constant(c.region_count(), am.nominal_count) + am.b_idrive;
  if (!(nominal_current.minCoeff() > 0.0)) throw NumericalError("linearize: nonpositive nominal drive current");
  return am;
}

AffineCircuitModel linearize(const PlacedCircuit& c, const NominalTiming& nt, const TechnologyParams& tech) {
  return linearize(c, build_arc_terms(c), nt, tech);
}

namespace {

template <typename Scalar>
void sparse_times_rows(const SpMat& a, const RowMatX<Scalar>& x, RowMatX<Scalar>& out, Scalar factor, int workers) {
  out.setZero(a.rows(), x.cols());
  parallel_for(static_cast<std::size_t>(a.rows()), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto row = out.row(static_cast<Eigen::Index>(i));
      for (SpMat::InnerIterator it(a, static_cast<Eigen::Index>(i)); it; ++it)
        row.noalias() += (factor * static_cast<Scalar>(it.value())) * x.row(it.col());
    }
  });
}

// Fills f from f.x, reusing any storage f already holds.
template <typename Scalar>
void factor_into(const AffineCircuitModel& model, const SpMat& incidence, FactoredDelayModelT<Scalar>& f,
                 int workers) {
  const RowMatX<Scalar>& x = f.x;
  if (x.rows() != model.a_cload.cols()) throw InputError("precompute: X rows must equal the region count");
  if (incidence.cols() != x.rows()) throw InputError("precompute: incidence columns must equal the region count");
  const Scalar v = static_cast<Scalar>(model.v_dd);
  f.v_dd = v;
  sparse_times_rows<Scalar>(model.a_cload, x, f.q_mc, v, workers);
  sparse_times_rows<Scalar>(model.a_idrive, x, f.i_mc, Scalar(1), workers);
  const Vec ones = Vec::Ones(model.a_cload.cols());
  f.q_exp = (model.v_dd * (model.a_cload * ones)).template cast<Scalar>();
  f.q_fix = (model.v_dd * model.b_cload).template cast<Scalar>();
  f.i_exp = (model.a_idrive * ones).template cast<Scalar>();
  f.i_fix = model.b_idrive.template cast<Scalar>();
  f.d_fix = model.d_fix.template cast<Scalar>();
  f.energy_weight = model.energy_weight.template cast<Scalar>();
  f.q_mc_mean = f.q_mc.rowwise().mean();

  // Transistors covering the same regions give the same count; visit each
  // distinct incidence row once without materializing B X.
  std::vector<std::vector<std::pair<Eigen::Index, double>>> supports;
  supports.reserve(static_cast<std::size_t>(incidence.rows()));
  for (Eigen::Index i = 0; i < incidence.rows(); ++i) {
    std::vector<std::pair<Eigen::Index, double>> row;
    for (SpMat::InnerIterator it(incidence, i); it; ++it) row.emplace_back(it.col(), it.value());
    supports.push_back(std::move(row));
  }
  std::sort(supports.begin(), supports.end());
  supports.erase(std::unique(supports.begin(), supports.end()), supports.end());
  f.worst_count_z.setConstant(x.cols(), std::numeric_limits<Scalar>::infinity());
  VecX<Scalar> acc(x.cols());
  for (const auto& row : supports) {
    if (row.empty()) continue;
    acc.setZero();
    double width = 0.0;
    for (const auto& [col, v] : row) {
      acc.noalias() += static_cast<Scalar>(v) * x.row(col).transpose();
      width += v;
    }
    f.worst_count_z = f.worst_count_z.cwiseMin(acc / static_cast<Scalar>(width));
  }
}

}  // namespace

template <typename Scalar>
FactoredDelayModelT<Scalar> precompute_factored(const AffineCircuitModel& model, const SpMat& incidence,
                                                RowMatX<Scalar> x, int workers) {
  FactoredDelayModelT<Scalar> f;
  f.x = std::move(x);
  factor_into(model, incidence, f, workers);
  return f;
}

template <typename Scalar>
void precompute_factored(const AffineCircuitModel& model, const SpMat& incidence, const RowMat& x,
                         FactoredDelayModelT<Scalar>& out, int workers) {
  out.x = x.template cast<Scalar>();
  factor_into(model, incidence, out, workers);
}


template <typename Scalar>
std::vector<char> count_failures(const FactoredDelayModelT<Scalar>& f, Scalar mu, Scalar sigma) {
  std::vector<char> failed(static_cast<std::size_t>(f.trials()), 0);
  if (sigma > Scalar(0)) {
    const Scalar limit = -mu / sigma;
    for (int t = 0; t < f.trials(); ++t) failed[t] = f.worst_count_z[t] <= limit ? 1 : 0;
  } else if (!(mu > Scalar(0))) {
    std::fill(failed.begin(), failed.end(), 1);
  }
  return failed;
}

template <typename Scalar>
void evaluate_delays(const FactoredDelayModelT<Scalar>& f, Scalar mu, Scalar sigma, DelayMatrixT<Scalar>& out,
                     int workers) {
  out.d.resize(f.q_mc.rows(), f.q_mc.cols());
  parallel_for(static_cast<std::size_t>(f.q_mc.rows()), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto a = static_cast<Eigen::Index>(i);
      const Scalar cq = mu * f.q_exp[a] + f.q_fix[a];
      const Scalar ci = mu * f.i_exp[a] + f.i_fix[a];
      out.d.row(a).array() =
          (sigma * f.q_mc.row(a).array() + cq) / (sigma * f.i_mc.row(a).array() + ci) + f.d_fix[a];
    }
  });
  out.failed = count_failures(f, mu, sigma);
}

template <typename Scalar>
DelayMatrixT<Scalar> evaluate_delays(const FactoredDelayModelT<Scalar>& f, Scalar mu, Scalar sigma, int workers) {
  DelayMatrixT<Scalar> out;
  evaluate_delays(f, mu, sigma, out, workers);
  return out;
}

template <typename Scalar>
Scalar total_energy(const FactoredDelayModelT<Scalar>& f, Scalar mu, Scalar sigma) {
  const VecX<Scalar> charge = sigma * f.q_mc_mean + mu * f.q_exp + f.q_fix;
  return Scalar(0.5) * f.v_dd * f.energy_weight.dot(charge);
}

double expected_energy(const AffineCircuitModel& m, double mu) {
  const Vec ones = Vec::Ones(m.a_cload.cols());
  const Vec charge = m.v_dd * (mu * (m.a_cload * ones) + m.b_cload);
  return 0.5 * m.v_dd * m.energy_weight.dot(charge);
}

template FactoredDelayModelT<double> precompute_factored(const AffineCircuitModel&, const SpMat&, RowMatX<double>, int);
template FactoredDelayModelT<float> precompute_factored(const AffineCircuitModel&, const SpMat&, RowMatX<float>, int);
template void precompute_factored(const AffineCircuitModel&, const SpMat&, const RowMat&, FactoredDelayModelT<double>&,
                                  int);
template void precompute_factored(const AffineCircuitModel&, const SpMat&, const RowMat&, FactoredDelayModelT<float>&,
                                  int);
template std::vector<char> count_failures(const FactoredDelayModelT<double>&, double, double);
template std::vector<char> count_failures(const FactoredDelayModelT<float>&, float, float);
template DelayMatrixT<double> evaluate_delays(const FactoredDelayModelT<double>&, double, double, int);
template DelayMatrixT<float> evaluate_delays(const FactoredDelayModelT<float>&, float, float, int);
template void evaluate_delays(const FactoredDelayModelT<double>&, double, double, DelayMatrixT<double>&, int);
template void evaluate_delays(const FactoredDelayModelT<float>&, float, float, DelayMatrixT<float>&, int);
template double total_energy(const FactoredDelayModelT<double>&, double, double);
template float total_energy(const FactoredDelayModelT<float>&, float, float);

double t95_order_statistic(std::vector<double> v) {
  if (v.empty()) throw NumericalError("T95 of an empty sample");
  const std::size_t n = v.size();
  const std::size_t k = (95 * n + 99) / 100;  // ceil(0.95 n), 1-based
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

namespace {

// Block STA over trials [t0, t1). delay(a, t) supplies arc delays.
template <typename Scalar, typename DelayFn>
void sta_block(const PlacedCircuit& c, int t0, int t1, bool record, DelayFn&& delay, DelaySample& out) {
  const int nb = t1 - t0;
  const auto nn = static_cast<Eigen::Index>(c.nets().size());
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  RowMatX<Scalar> arr = RowMatX<Scalar>::Constant(nn, nb, neg_inf);
  IntRowMat pred;
  if (record) pred = IntRowMat::Constant(nn, nb, -1);
  for (int s : c.sources()) arr.row(s).setZero();
  const auto& arcs = c.arcs();
  std::vector<Scalar> dbuf(static_cast<std::size_t>(nb));
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    delay(static_cast<Eigen::Index>(a), t0, t1, dbuf.data());
    const Scalar* from = arr.row(arcs[a].from_net).data();
    Scalar* to = arr.row(arcs[a].to_net).data();
    if (record) {
      int* pr = pred.row(arcs[a].to_net).data();
      for (int j = 0; j < nb; ++j) {
        const Scalar cand = from[j] + dbuf[j];
        if (cand > to[j]) {
          to[j] = cand;
          pr[j] = static_cast<int>(a);
        }
      }
    } else {
      for (int j = 0; j < nb; ++j) to[j] = std::max(to[j], from[j] + dbuf[j]);
    }
  }
  const auto& ends = c.endpoints();
  for (int j = 0; j < nb; ++j) {
    Scalar best = neg_inf;
    int best_net = -1;
    for (int e : ends)
      if (arr(e, j) > best) {
        best = arr(e, j);
        best_net = e;
      }
    out.path_delay[t0 + j] = best == neg_inf ? kNegInf : static_cast<double>(best);
    if (record) {
      std::vector<int>& path = out.critical_path[t0 + j];
      path.clear();
      for (int net = best_net; net >= 0 && pred(net, j) >= 0;) {
        const int a = pred(net, j);
        path.push_back(a);
        net = arcs[a].from_net;
      }
      std::reverse(path.begin(), path.end());
    }
  }
}

// T95 and penalty over the surviving trials of r.sample.
void finish_ssta(SstaResult& r, double t_nom_opt, const SstaOptions& opt) {
  const std::size_t n = r.sample.path_delay.size();
  std::vector<double> kept;
  kept.reserve(n);
  for (std::size_t t = 0; t < n; ++t)
    if (!(opt.exclude_failures && r.sample.failed[t])) kept.push_back(r.sample.path_delay[t]);
  r.surviving = static_cast<int>(kept.size());
  if (r.surviving < opt.min_surviving)
    throw NumericalError("only " + std::to_string(r.surviving) +
                         " trials survive count failures; raise yield (w_min) before timing analysis");
  r.t95 = t95_order_statistic(std::move(kept));
  r.delay_penalty = r.t95 / t_nom_opt - 1.0;
}

template <typename Scalar, typename DelayFn>
SstaResult run_ssta(const PlacedCircuit& c, int n, std::vector<char> failed, double t_nom_opt, const SstaOptions& opt,
                    int workers, DelayFn&& delay) {
  SstaResult r;
  r.sample.path_delay.assign(n, 0.0);
  r.sample.failed = std::move(failed);
  if (opt.record_paths) r.sample.critical_path.assign(n, {});
  const int blocks = (n + kTrialBlock - 1) / kTrialBlock;
  parallel_for(static_cast<std::size_t>(blocks), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t blk = b; blk < e; ++blk) {
      const int t0 = static_cast<int>(blk) * kTrialBlock;
      const int t1 = std::min(n, t0 + kTrialBlock);
      sta_block<Scalar>(c, t0, t1, opt.record_paths, delay, r.sample);
    }
  });
  finish_ssta(r, t_nom_opt, opt);
  return r;
}

constexpr int kSetTrialBlock = 32;

// Block STA over trials [t0, t1) for several (mu, sigma) pairs at once, so
// each factored row segment is read once per block.
template <typename Scalar>
void sta_block_sets(const PlacedCircuit& c, const FactoredDelayModelT<Scalar>& f,
                    const std::vector<std::pair<Scalar, Scalar>>& moments, int t0, int t1,
                    std::vector<SstaResult>& out) {
  const int nb = t1 - t0;
  const int ns = static_cast<int>(moments.size());
  const auto nn = static_cast<Eigen::Index>(c.nets().size());
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  RowMatX<Scalar> arr = RowMatX<Scalar>::Constant(nn, static_cast<Eigen::Index>(ns) * nb, neg_inf);
  for (int s : c.sources()) arr.row(s).setZero();
  const auto& arcs = c.arcs();
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    const Scalar* q = f.q_mc.row(ai).data() + t0;
    const Scalar* i = f.i_mc.row(ai).data() + t0;
    const Scalar df = f.d_fix[ai];
    const Scalar* from = arr.row(arcs[a].from_net).data();
    Scalar* to = arr.row(arcs[a].to_net).data();
    for (int s = 0; s < ns; ++s) {
      const auto [mu, sigma] = moments[s];
      const Scalar cq = mu * f.q_exp[ai] + f.q_fix[ai];
      const Scalar ci = mu * f.i_exp[ai] + f.i_fix[ai];
      const Scalar* fs = from + s * nb;
      Scalar* ts = to + s * nb;
      for (int j = 0; j < nb; ++j) {
        const Scalar d = (sigma * q[j] + cq) / (sigma * i[j] + ci) + df;
        ts[j] = std::max(ts[j], fs[j] + d);
      }
    }
  }
  for (int s = 0; s < ns; ++s)
    for (int j = 0; j < nb; ++j) {
      Scalar best = neg_inf;
      for (int e : c.endpoints()) best = std::max(best, arr(e, s * nb + j));
      out[s].sample.path_delay[t0 + j] = best == neg_inf ? kNegInf : static_cast<double>(best);
    }
}

}  // namespace

SstaResult mc_ssta(const PlacedCircuit& c, const RowMat& d, const std::vector<char>& failed, double t_nom_opt,
                   const SstaOptions& opt, int workers) {
  if (d.rows() != static_cast<Eigen::Index>(c.arcs().size())) throw InputError("mc_ssta: D rows must equal arc count");
  if (static_cast<Eigen::Index>(failed.size()) != d.cols()) throw InputError("mc_ssta: failure flags size mismatch");
  return run_ssta<double>(c, static_cast<int>(d.cols()), failed, t_nom_opt, opt, workers,
                  [&](Eigen::Index a, int t0, int t1, double* out) {
                    const double* row = d.row(a).data();
                    std::copy(row + t0, row + t1, out);
                  });
}

template <typename Scalar>
SstaResult linearized_ssta(const PlacedCircuit& c, const FactoredDelayModelT<Scalar>& f, Scalar mu, Scalar sigma,
                           double t_nom_opt, const SstaOptions& opt, int workers) {
  if (f.arcs() != static_cast<int>(c.arcs().size())) throw InputError("linearized_ssta: model/circuit mismatch");
  return run_ssta<Scalar>(c, f.trials(), count_failures(f, mu, sigma), t_nom_opt, opt, workers,
                          [&](Eigen::Index a, int t0, int t1, Scalar* out) {
                            const Scalar cq = mu * f.q_exp[a] + f.q_fix[a];
                            const Scalar ci = mu * f.i_exp[a] + f.i_fix[a];
                            const Scalar df = f.d_fix[a];
                            const Scalar* q = f.q_mc.row(a).data();
                            const Scalar* i = f.i_mc.row(a).data();
                            for (int t = t0; t < t1; ++t) out[t - t0] = (sigma * q[t] + cq) / (sigma * i[t] + ci) + df;
                          });
}

template <typename Scalar>
std::vector<SstaResult> linearized_ssta(const PlacedCircuit& c, const FactoredDelayModelT<Scalar>& f,
                                        const std::vector<std::pair<Scalar, Scalar>>& moments, double t_nom_opt,
                                        const SstaOptions& opt, int workers) {
  if (f.arcs() != static_cast<int>(c.arcs().size())) throw InputError("linearized_ssta: model/circuit mismatch");
  const int n = f.trials();
  std::vector<SstaResult> out(moments.size());
  for (std::size_t s = 0; s < moments.size(); ++s) {
    out[s].sample.path_delay.assign(n, 0.0);
    out[s].sample.failed = count_failures(f, moments[s].first, moments[s].second);
  }
  const int blocks = (n + kSetTrialBlock - 1) / kSetTrialBlock;
  parallel_for(static_cast<std::size_t>(blocks), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t blk = b; blk < e; ++blk) {
      const int t0 = static_cast<int>(blk) * kSetTrialBlock;
      sta_block_sets(c, f, moments, t0, std::min(n, t0 + kSetTrialBlock), out);
    }
  });
  for (auto& r : out) finish_ssta(r, t_nom_opt, opt);
  return out;
}

template SstaResult linearized_ssta(const PlacedCircuit&, const FactoredDelayModelT<double>&, double, double, double,
                                    const SstaOptions&, int);
template SstaResult linearized_ssta(const PlacedCircuit&, const FactoredDelayModelT<float>&, float, float, double,
                                    const SstaOptions&, int);
template std::vector<SstaResult> linearized_ssta(const PlacedCircuit&, const FactoredDelayModelT<double>&,
                                                 const std::vector<std::pair<double, double>>&, double,
                                                 const SstaOptions&, int);
template std::vector<SstaResult> linearized_ssta(const PlacedCircuit&, const FactoredDelayModelT<float>&,
                                                 const std::vector<std::pair<float, float>>&, double,
                                                 const SstaOptions&, int);

std::vector<double> path_delays(const FactoredDelayModel& f, const std::vector<std::vector<int>>& paths, double mu,
                                double sigma) {
  std::vector<double> out(paths.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < paths.size(); ++t) {
    if (paths[t].empty()) continue;
    double s = 0.0;
    for (int a : paths[t])
      s += (sigma * f.q_mc(a, static_cast<Eigen::Index>(t)) + (mu * f.q_exp[a] + f.q_fix[a])) /
               (sigma * f.i_mc(a, static_cast<Eigen::Index>(t)) + (mu * f.i_exp[a] + f.i_fix[a])) +
           f.d_fix[a];
    out[t] = s;
  }
  return out;
}

DelaySample nonlinear_mc(const PlacedCircuit& c, const ArcTerms& at, double v_dd, const RowMat& region_counts,
                         int workers) {
  if (region_counts.rows() != c.region_count()) throw InputError("nonlinear_mc: counts rows must equal region count");
  const int n = static_cast<int>(region_counts.cols());
  DelaySample out;
  out.path_delay.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.failed.assign(n, 0);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t b, std::size_t e) {
    NonlinearWorkspace w;
    Vec counts;
    for (std::size_t t = b; t < e; ++t) {
      counts.noalias() = c.incidence() * region_counts.col(static_cast<Eigen::Index>(t));
      if (!(counts.minCoeff() > 0.0)) {
        out.failed[t] = 1;
        continue;
      }
      out.path_delay[t] = run_nonlinear(c, at, v_dd, counts, w, false);
    }
  });
  return out;
}

}  // namespace cntco
