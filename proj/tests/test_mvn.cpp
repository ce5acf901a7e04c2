#include "cntco/mvn.hpp"
#include "cntco/normal.hpp"

#include <Eigen/Cholesky>
#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

using namespace cntco;

namespace {

struct RandomProblem {
  Mat c;
  Vec u;
};

RandomProblem random_problem(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> z(0.0, 1.0);
  const int k = std::max(1, p - static_cast<int>(rng() % 2));  // sometimes singular
  Mat l(p, k);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < k; ++j) l(i, j) = z(rng);
  RandomProblem r;
  r.c = l * l.transpose();
  r.u.resize(p);
  for (int i = 0; i < p; ++i) r.u[i] = 0.5 + z(rng) * std::sqrt(r.c(i, i));
  return r;
}

// Plain Monte Carlo estimate with its 99% half-width.
std::pair<double, double> plain_mc(const Mat& c, const Vec& u, int n, std::uint64_t seed) {
  Eigen::LDLT<Mat> ldlt(c);
  const Mat l = ldlt.transpositionsP().transpose() * Mat(ldlt.matrixL()) *
                ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  long hits = 0;
  Vec w(c.rows());
  for (int t = 0; t < n; ++t) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = z(rng);
    if (((l * w).array() <= u.array()).all()) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  return {p, 2.576 * std::sqrt(std::max(p * (1 - p), 1.0 / n) / n)};
}

}  // namespace

TEST_CASE("analytic low-dimensional cases") {
  CHECK(mvncdf(Mat::Ones(1, 1), Vec::Zero(1)).probability == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::fabs(mvncdf(Mat::Identity(2, 2), Vec::Zero(2)).probability - 0.25) < 1e-4);
  Mat c(2, 2);
  c << 1.0, 0.5, 0.5, 1.0;
  const MvnResult r = mvncdf(c, Vec::Zero(2));
  CHECK(std::fabs(r.probability - 1.0 / 3.0) < 1e-4);
  CHECK(r.error < 1e-4);
  // univariate with scale
  Mat s(1, 1);
  s << 4.0;
  Vec u(1);
  u << 1.3;
  CHECK(mvncdf(s, u).probability == doctest::Approx(normal_cdf(0.65)).epsilon(1e-12));
}

TEST_CASE("orthant error estimate covers the actual error") {
  int covered = 0, total = 0;
  MvnOptions o;
  o.abs_error = 1e-5;
  for (double rho = -0.95; rho <= 0.951; rho += 0.05) {
    Mat c(2, 2);
    c << 1.0, rho, rho, 1.0;
    o.seed = static_cast<std::uint64_t>(1000 + total);
    const MvnResult r = mvncdf(c, Vec::Zero(2), o);
    const double exact = 0.25 + std::asin(rho) / (2.0 * M_PI);
    if (std::fabs(r.probability - exact) <= r.error + 1e-15) ++covered;
    ++total;
  }
  CHECK(covered >= total - 1);
}

TEST_CASE("singular and degenerate covariances") {
  Mat c(2, 2);
  c << 1.0, 1.0, 1.0, 1.0;
  Vec u(2);
  u << 0.0, 1.0;
  CHECK(mvncdf(c, u).probability == doctest::Approx(0.5).epsilon(1e-9));
  Mat z = Mat::Zero(2, 2);
  Vec pos(2);
  pos << 0.1, 0.0;
  CHECK(mvncdf(z, pos).probability == 1.0);
  pos[1] = -0.1;
  CHECK(mvncdf(z, pos).probability == 0.0);

  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(mvncdf(bad, Vec::Zero(2)), NumericalError);
  Mat asym(2, 2);
  asym << 1.0, 0.3, 0.2, 1.0;
  CHECK_THROWS_AS(mvncdf(asym, Vec::Zero(2)), InputError);
  CHECK_THROWS_AS(mvncdf(Mat::Identity(2, 2), Vec::Zero(3)), InputError);
}

TEST_CASE("block products") {
  const MvnProblem one{Mat::Ones(1, 1), Vec::Zero(1)};
  const std::vector<MvnProblem> single{{Mat::Identity(3, 3), Vec::Constant(3, 0.3)}};
  CHECK(block_mvncdf(single).probability == doctest::Approx(mvncdf(single[0].c, single[0].u).probability));
  const std::vector<MvnProblem> two{one, one};
  CHECK(block_mvncdf(two).probability == doctest::Approx(0.25).epsilon(1e-12));
  MvnProblem zero{Mat::Zero(1, 1), Vec::Constant(1, -1.0)};
  const std::vector<MvnProblem> with_zero{one, zero};
  CHECK(block_mvncdf(with_zero).probability == 0.0);
}

TEST_CASE("monotonicity, permutation invariance and plain MC agreement") {
  std::mt19937_64 rng(42);
  MvnOptions o;
  o.abs_error = 1e-4;
  int mc_agree = 0;
  for (int k = 0; k < 200; ++k) {
    const int p = 1 + static_cast<int>(rng() % 10);
    const RandomProblem pr = random_problem(rng, p);
    o.seed = rng();
    const MvnResult base = mvncdf(pr.c, pr.u, o);

    Vec up = pr.u;
    up[static_cast<Eigen::Index>(rng() % p)] += 0.7;
    const MvnResult raised = mvncdf(pr.c, up, o);
    CHECK(raised.probability >= base.probability - base.error - raised.error);

    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat pc(p, p);
    Vec pu(p);
    for (int i = 0; i < p; ++i) {
      pu[i] = pr.u[perm[i]];
      for (int j = 0; j < p; ++j) pc(i, j) = pr.c(perm[i], perm[j]);
    }
    const MvnResult permuted = mvncdf(pc, pu, o);
    CHECK(std::fabs(permuted.probability - base.probability) <= base.error + permuted.error + 1e-12);

    if (k < 40) {
      const auto [mc, half] = plain_mc(pr.c, pr.u, 40000, 7 + k);
      if (std::fabs(mc - base.probability) <= 3.0 * (half + base.error)) ++mc_agree;
    }
  }
  CHECK(mc_agree == 40);
}

TEST_CASE("adaptive integration equals a fixed pass at the same point count") {
  Mat c(3, 3);
  c << 2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 1.5;
  Vec u(3);
  u << 0.4, 1.1, -0.2;
  MvnOptions o;
  o.abs_error = 1e-6;
  o.rel_error = 0.0;
  const MvnPlan plan(c, u);
  const MvnResult a = plan.integrate(u, o);
  CHECK(a.points > o.min_points);
  const MvnResult b = plan.integrate_fixed(u, o, a.points);
  CHECK(a.probability == b.probability);
  CHECK(a.error == b.error);
  o.workers = 5;
  CHECK(plan.integrate(u, o).probability == a.probability);
}

TEST_CASE("relative stopping rule in the far tail") {
  Mat c(2, 2);
  c << 1.0, 0.4, 0.4, 1.0;
  const Vec u = Vec::Constant(2, -3.5);
  MvnOptions o;
  o.abs_error = 1e-12;
  o.rel_error = 1e-2;
  const MvnResult r = mvncdf(c, u, o);
  CHECK(r.probability > 0.0);
  CHECK(r.error <= 1e-2 * r.probability);
}

TEST_CASE("rare violations are integrated through the complement") {
  const Vec u = Vec::Constant(5, 4.0);
  const MvnPlan plan(Mat::Identity(5, 5), u);
  CHECK(plan.complement());
  const MvnResult r = plan.integrate(u, {});
  const double tail = 1.0 - std::pow(normal_cdf(4.0), 5);
  CHECK((1.0 - r.probability) == doctest::Approx(tail).epsilon(1e-4));
  CHECK(r.error <= 1e-2 * tail);

  // both modes agree where both are accurate
  std::mt19937_64 rng(77);
  MvnOptions o;
  o.abs_error = 2e-5;
  o.rel_error = 0.0;
  for (int k = 0; k < 10; ++k) {
    RandomProblem pr = random_problem(rng, 2 + static_cast<int>(rng() % 6));
    const Vec sd = pr.c.diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i)
      if (!(sd[i] > 0.0)) pr.c(i, i) = 1.0;
    const Vec ub = 2.3 * pr.c.diagonal().cwiseSqrt();
    const MvnPlan tail_plan(pr.c, ub);
    const MvnPlan direct(pr.c, Vec::Constant(ub.size(), -5.0));  // large union bound: direct mode
    REQUIRE(tail_plan.complement());
    REQUIRE_FALSE(direct.complement());
    o.seed = rng();
    const MvnResult a = tail_plan.integrate(ub, o);
    const MvnResult b = direct.integrate(ub, o);
    CHECK(std::fabs(a.probability - b.probability) <= a.error + b.error + 1e-12);
  }

  // fixed passes reproduce the adaptive estimate in complement mode too
  Mat c(3, 3);
  c << 1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0;
  const Vec v = Vec::Constant(3, 3.0);
  o.abs_error = 1e-9;
  const MvnPlan cp(c, v);
  const MvnResult ad = cp.integrate(v, o);
  CHECK(ad.probability == cp.integrate_fixed(v, o, ad.points).probability);
}
