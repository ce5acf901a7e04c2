#include "cntco/mvn.hpp"

#include "cntco/normal.hpp"
#include "cntco/parallel.hpp"
#include "cntco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace cntco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<double>& richtmyer_generator(int dims) {
  static std::vector<double> z;
  static std::once_flag once;
  std::call_once(once, [] {
    int candidate = 2;
    while (z.size() < 512) {
      bool prime = true;
      for (int d = 2; d * d <= candidate; ++d)
        if (candidate % d == 0) prime = false;
      if (prime) {
        const double r = std::sqrt(static_cast<double>(candidate));
        z.push_back(r - std::floor(r));
      }
      ++candidate;
    }
  });
  if (dims > static_cast<int>(z.size())) throw NumericalError("MVN dimension exceeds lattice generator table");
  return z;
}

}  // namespace

MvnPlan::Core::Core(const Mat& c, const Vec& u_order, double tol) : p(static_cast<int>(c.rows())) {
  if (c.rows() != c.cols() || c.rows() < 1) throw InputError("MVN covariance must be square with p >= 1");
  if (u_order.size() != c.rows()) throw InputError("MVN bound vector size mismatch");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InputError("MVN covariance is not symmetric");
  for (int i = 0; i < p; ++i)
    if (c(i, i) < 0.0) throw NumericalError("MVN covariance has a negative diagonal entry");

  Mat l = Mat::Zero(p, p);
  std::vector<int> remaining(p);
  for (int i = 0; i < p; ++i) remaining[i] = i;
  std::vector<double> ybar;
  struct Degenerate {
    int index;
    int k;
  };
  std::vector<Degenerate> degenerate;
  int k = 0;
  while (!remaining.empty()) {
    std::vector<int> keep;
    double best_prob = kInf;
    int best = -1;
    double best_var = 0.0;
    for (int i : remaining) {
      double v = c(i, i);
      double shift = 0.0;
      for (int q = 0; q < k; ++q) {
        v -= l(i, q) * l(i, q);
        shift += l(i, q) * ybar[q];
      }
      const double ref = std::max(c(i, i), std::numeric_limits<double>::min());
      if (v <= tol * ref) {
        if (v < -1e-8 * ref) throw NumericalError("MVN covariance is not positive semidefinite");
        degenerate.push_back({i, k});
        continue;
      }
      keep.push_back(i);
      const double prob = normal_cdf((u_order[i] - shift) / std::sqrt(v));
      if (prob < best_prob || (prob == best_prob && i < best)) {
        best_prob = prob;
        best = i;
        best_var = v;
      }
    }
    remaining = keep;
    if (best < 0) break;
    const double lkk = std::sqrt(best_var);
    l(best, k) = lkk;
    for (int j : remaining) {
      if (j == best) continue;
      double s = c(j, best);
      for (int q = 0; q < k; ++q) s -= l(j, q) * l(best, q);
      l(j, k) = s / lkk;
    }
    double shift = 0.0;
    for (int q = 0; q < k; ++q) shift += l(best, q) * ybar[q];
    const double b = (u_order[best] - shift) / lkk;
    const double phi_b = normal_cdf(b);
    ybar.push_back(phi_b > 1e-300 ? -normal_pdf(b) / phi_b : b);
    Bound bd{best, {}};
    bd.coeff.resize(k + 1);
    for (int q = 0; q <= k; ++q) bd.coeff[q] = l(best, q);
    vars.push_back({bd});
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
    ++k;
  }
  for (const auto& dg : degenerate) {
    const double ref = std::sqrt(std::max(c(dg.index, dg.index), std::numeric_limits<double>::min()));
    int last = -1;
    for (int q = 0; q < dg.k; ++q)
      if (std::fabs(l(dg.index, q)) > 1e-10 * ref) last = q;
    if (last < 0) {
      constant.push_back(dg.index);
      continue;
    }
    Bound bd{dg.index, {}};
    bd.coeff.resize(last + 1);
    for (int q = 0; q <= last; ++q) bd.coeff[q] = l(dg.index, q);
    vars[last].push_back(bd);
  }
}

double MvnPlan::Core::integrand(const Vec& u, const double* w, std::vector<double>& y) const {
  double f = 1.0;
  const int r = rank();
  for (int k = 0; k < r; ++k) {
    double lo = -kInf, hi = kInf;
    for (const Bound& b : vars[k]) {
      double s = u[b.index];
      for (int q = 0; q < k; ++q) s -= b.coeff[q] * y[q];
      const double ck = b.coeff[k];
      const double v = s / ck;
      if (ck > 0.0)
        hi = std::min(hi, v);
      else
        lo = std::max(lo, v);
    }
    if (!(lo < hi)) return 0.0;
    const double a = lo == -kInf ? 0.0 : normal_cdf(lo);
    const double e = (hi == kInf ? 1.0 : normal_cdf(hi)) - a;
    if (!(e > 0.0)) return 0.0;
    f *= e;
    if (k + 1 < r) {
      const double arg = std::clamp(a + w[k] * e, 1e-300, 1.0 - 1e-16);
      y[k] = normal_quantile(arg);
    }
  }
  return f;
}

bool MvnPlan::Core::exact(const Vec& u, MvnResult& res) const {
  res = {};
  res.rank = rank();
  for (int idx : constant)
    if (u[idx] < 0.0) return true;  // probability 0
  if (rank() == 0) {
    res.probability = 1.0;
    return true;
  }
  if (rank() == 1) {
    std::vector<double> y(1);
    res.probability = integrand(u, nullptr, y);
    return true;
  }
  return false;
}

// Adds lattice points (from, to] of every randomization to `sums`. Points
// continue the same sequence, so growing a pass in chunks gives the same sums
// as one pass.
void MvnPlan::Core::accumulate(const Vec& u, const MvnOptions& opt, long from, long to, std::vector<double>& sums) const {
  const int dims = rank() - 1;
  const auto& z = richtmyer_generator(dims);
  parallel_for(sums.size(), opt.workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> yy(rank()), w(dims), wa(dims), shift(dims);
    for (std::size_t r = b; r < e; ++r) {
      CounterRng rng(opt.seed, 0x51a7 + r);
      for (int d = 0; d < dims; ++d) shift[d] = rng.uniform();
      double sum = sums[r];
      for (long j = from + 1; j <= to; ++j) {
        for (int d = 0; d < dims; ++d) {
          double x = static_cast<double>(j) * z[d] + shift[d];
          x -= std::floor(x);
          x = 1.0 - std::fabs(2.0 * x - 1.0);
          w[d] = x;
          wa[d] = 1.0 - x;
        }
        sum += 0.5 * (integrand(u, w.data(), yy) + integrand(u, wa.data(), yy));
      }
      sums[r] = sum;
    }
  });
}

MvnResult MvnPlan::Core::summarize(const std::vector<double>& sums, long points) const {
  const int reps = static_cast<int>(sums.size());
  double mean = 0.0;
  for (double v : sums) mean += v / static_cast<double>(points);
  mean /= reps;
  double var = 0.0;
  for (double v : sums) {
    const double d = v / static_cast<double>(points) - mean;
    var += d * d;
  }
  var /= static_cast<double>(reps) * (reps - 1);
  MvnResult res;
  res.rank = rank();
  res.probability = std::clamp(mean, 0.0, 1.0);
  res.error = 3.5 * std::sqrt(var);
  res.points = points;
  return res;
}

MvnPlan::MvnPlan(const Mat& c, const Vec& u_order, double tol) : direct_(c, u_order, tol) {
  const int p = direct_.p;
  if (p < 2) return;
  std::vector<double> eps(p);
  double total = 0.0;
  for (int i = 0; i < p; ++i) {
    if (!(c(i, i) > 0.0)) return;
    eps[i] = normal_cdf(-u_order[i] / std::sqrt(c(i, i)));
    total += eps[i];
  }
  if (!(total < kComplementThreshold)) return;
  std::vector<int> order(p);
  for (int i = 0; i < p; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return eps[x] > eps[y]; });
  for (int t = 0; t < p; ++t) {
    Term term;
    term.vars.assign(order.begin(), order.begin() + t + 1);
    Mat sub(t + 1, t + 1);
    for (int i = 0; i <= t; ++i)
      for (int j = 0; j <= t; ++j) sub(i, j) = c(term.vars[i], term.vars[j]) * ((i == t) != (j == t) ? -1.0 : 1.0);
    terms_.push_back(std::move(term));
    terms_.back().core = Core(sub, term_bounds(terms_.back(), u_order), tol);
  }
}

Vec MvnPlan::term_bounds(const Term& t, const Vec& u) const {
  const int n = static_cast<int>(t.vars.size());
  Vec b(n);
  for (int i = 0; i < n; ++i) b[i] = u[t.vars[i]];
  b[n - 1] = -b[n - 1];
  return b;
}

MvnResult MvnPlan::run(const Vec& u, const MvnOptions& opt, long fixed_points) const {
  if (u.size() != direct_.p) throw InputError("MVN bound vector size mismatch");
  if (fixed_points < 0 && !(opt.abs_error > 0.0)) throw InputError("MVN target error must be > 0");
  const std::size_t reps = static_cast<std::size_t>(std::max(2, opt.randomizations));
  const auto target = [&](const MvnResult& x) {
    return std::max(opt.abs_error, opt.rel_error * std::min(x.probability, 1.0 - x.probability));
  };
  long n = fixed_points >= 0 ? std::max(8L, fixed_points) : std::max(8L, opt.min_points);
  const long cap = fixed_points >= 0 ? n : opt.max_points;

  if (terms_.empty()) {
    MvnResult r;
    if (direct_.exact(u, r)) return r;
    std::vector<double> sums(reps, 0.0);
    direct_.accumulate(u, opt, 0, n, sums);
    r = direct_.summarize(sums, n);
    while (r.error > target(r) && n < cap) {
      const long next = std::min(2 * n, cap);
      direct_.accumulate(u, opt, n, next, sums);
      n = next;
      r = direct_.summarize(sums, n);
    }
    return r;
  }

  // Complement: independent randomizations per term, errors add in quadrature.
  const std::size_t nt = terms_.size();
  std::vector<Vec> bounds(nt);
  std::vector<MvnResult> parts(nt);
  std::vector<char> exact(nt, 0);
  std::vector<MvnOptions> topt(nt, opt);
  std::vector<std::vector<double>> sums(nt, std::vector<double>(reps, 0.0));
  for (std::size_t t = 0; t < nt; ++t) {
    bounds[t] = term_bounds(terms_[t], u);
    topt[t].seed = mix64(opt.seed + 0x9e3779b97f4a7c15ULL * (t + 1));
    exact[t] = terms_[t].core.exact(bounds[t], parts[t]);
  }
  auto grow = [&](long from, long to) {
    for (std::size_t t = 0; t < nt; ++t) {
      if (exact[t]) continue;
      terms_[t].core.accumulate(bounds[t], topt[t], from, to, sums[t]);
      parts[t] = terms_[t].core.summarize(sums[t], to);
    }
  };
  auto combine = [&](long points) {
    MvnResult r;
    double tail = 0.0, var = 0.0;
    for (const auto& q : parts) {
      tail += q.probability;
      var += q.error * q.error;
    }
    r.probability = std::clamp(1.0 - tail, 0.0, 1.0);
    r.error = std::sqrt(var);
    r.points = points;
    r.rank = rank();
    return r;
  };
  grow(0, n);
  MvnResult r = combine(n);
  while (r.error > target(r) && n < cap) {
    const long next = std::min(2 * n, cap);
    grow(n, next);
    n = next;
    r = combine(n);
  }
  return r;
}

MvnResult MvnPlan::integrate(const Vec& u, const MvnOptions& opt) const { return run(u, opt, -1); }

MvnResult MvnPlan::integrate_fixed(const Vec& u, const MvnOptions& opt, long points) const {
  return run(u, opt, std::max(0L, points));
}

MvnResult mvncdf(const Mat& c, const Vec& u, const MvnOptions& opt) {
  return MvnPlan(c, u, opt.singular_tol).integrate(u, opt);
}

MvnResult combine_block_results(std::span<const MvnResult> parts) {
  MvnResult out;
  out.probability = 1.0;
  for (const auto& p : parts) {
    out.probability *= p.probability;
    out.points = std::max(out.points, p.points);
    out.rank += p.rank;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    double others = 1.0;
    for (std::size_t j = 0; j < parts.size(); ++j)
      if (j != i) others *= std::min(1.0, parts[j].probability + parts[j].error);
    err += parts[i].error * others;
  }
  out.error = err;
  return out;
}

MvnResult block_mvncdf(std::span<const MvnProblem> blocks, const MvnOptions& opt) {
  std::vector<MvnResult> parts;
  parts.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    MvnOptions o = opt;
    o.seed = mix64(opt.seed + b);
    parts.push_back(mvncdf(blocks[b].c, blocks[b].u, o));
  }
  return combine_block_results(parts);
}

}  // namespace cntco
