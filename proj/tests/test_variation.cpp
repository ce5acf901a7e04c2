#include "cntco/variation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace cntco;

namespace {

TechnologyParams default_tech() { return {}; }

// Independent renewal oracle: one long line of gamma-spaced CNTs, thinned,
// counted in consecutive windows.
struct Moments {
  double mean, var;
};

Moments renewal_oracle(double idc, double keep, double density, double width, long windows, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double mean_gap = 1.0 / density;
  auto gap = [&] {
    if (idc <= 0.0) return mean_gap;
    std::gamma_distribution<double> g(1.0 / idc, idc * mean_gap);
    return g(rng);
  };
  double x = 0.0;
  for (int i = 0; i < 1000; ++i) x += gap();  // burn in towards stationarity
  double origin = x + gap() * u(rng);
  double next = x;
  while (next < origin) next += gap();
  double sum = 0.0, sum2 = 0.0;
  for (long w = 0; w < windows; ++w) {
    const double end = origin + width;
    int count = 0;
    while (next < end) {
      if (u(rng) < keep) ++count;
      next += gap();
    }
    origin = end;
    sum += count;
    sum2 += static_cast<double>(count) * count;
  }
  const double n = static_cast<double>(windows);
  return {sum / n, sum2 / n - (sum / n) * (sum / n)};
}

}  // namespace

TEST_CASE("region model at the experimental processing point") {
  const ProcessingParams p{0.50, 0.01, 0.04, 0.9999};
  const RegionCountModel m = derive_region_model(p, default_tech());
  CHECK(m.mu_r == doctest::Approx(4.752).epsilon(1e-12));
  CHECK(m.sigma_r == doctest::Approx(1.579).epsilon(1e-3));

  const Moments o = renewal_oracle(0.5, p.thinning(), 250.0, 0.020, 1000000, 7);
  CHECK(std::fabs(o.mean / m.mu_r - 1.0) < 0.01);
  CHECK(std::fabs(o.var / (m.sigma_r * m.sigma_r) - 1.0) < 0.05);
}

TEST_CASE("region model degenerate cases") {
  const RegionCountModel a = derive_region_model({0.0, 0.0, 0.0, 1.0}, default_tech());
  CHECK(a.mu_r == 5.0);
  CHECK(a.sigma_r == 0.0);
  for (double idc : {0.0, 0.3, 2.0})
    for (double prs : {0.0, 0.5, 1.0}) {
      const RegionCountModel b = derive_region_model({idc, 1.0, prs, 1.0}, default_tech());
      CHECK(b.mu_r == 0.0);
      CHECK(b.mu_m == 0.0);
    }
  const RegionCountModel c = derive_region_model({0.5, 0.2, 0.0, 0.9}, default_tech());
  CHECK(c.mu_m == doctest::Approx(5.0 * 0.2 * 0.1));
}

TEST_CASE("region model rejects bad inputs") {
  TechnologyParams t;
  t.cnt_density = 0.0;
  CHECK_THROWS_AS(derive_region_model({}, t), InputError);
  CHECK_THROWS_AS(derive_region_model({-0.1, 0.0, 0.0, 1.0}, default_tech()), InputError);
  CHECK_THROWS_AS(derive_region_model({0.1, 1.5, 0.0, 1.0}, default_tech()), InputError);
}

TEST_CASE("region model monotonicity") {
  const TechnologyParams t;
  double prev_sigma = -1.0;
  for (double idc = 0.0; idc <= 2.0; idc += 0.05) {
    const RegionCountModel m = derive_region_model({idc, 0.01, 0.04, 1.0}, t);
    CHECK(m.mu_r == doctest::Approx(4.752));
    CHECK(m.sigma_r > prev_sigma);
    prev_sigma = m.sigma_r;
  }
  double prev_mu = 1e9;
  for (double pm = 0.0; pm <= 1.0; pm += 0.1) {
    const RegionCountModel m = derive_region_model({0.5, pm, 0.04, 1.0}, t);
    CHECK(m.mu_r <= prev_mu);
    prev_mu = m.mu_r;
  }
  prev_mu = 1e9;
  for (double prs = 0.0; prs <= 1.0; prs += 0.1) {
    const RegionCountModel m = derive_region_model({0.5, 0.01, prs, 1.0}, t);
    CHECK(m.mu_r <= prev_mu);
    prev_mu = m.mu_r;
  }
  // sigma_r = 0 exactly when idc = 0 and the keep probability is 0 or 1.
  CHECK(derive_region_model({0.0, 0.0, 0.0, 1.0}, t).sigma_r == 0.0);
  CHECK(derive_region_model({0.0, 1.0, 0.0, 1.0}, t).sigma_r == 0.0);
  CHECK(derive_region_model({0.0, 0.1, 0.0, 1.0}, t).sigma_r > 0.0);
  CHECK(derive_region_model({0.1, 0.0, 0.0, 1.0}, t).sigma_r > 0.0);
}

TEST_CASE("gaussian sampler") {
  const RegionCountModel flat{4.0, 0.0, 0.0};
  const GaussianSample s0 = sample_regions_gaussian(flat, 5, 7, 3);
  CHECK((s0.counts.array() == 4.0).all());

  const RegionCountModel m{4.752, 1.579, 0.0};
  const GaussianSample a = sample_regions_gaussian(m, 1000, 1000, 11);
  const GaussianSample b = sample_regions_gaussian(m, 1000, 1000, 11, 8);
  CHECK(a.counts == b.counts);
  CHECK(a.x == b.x);
  CHECK(std::fabs(a.counts.mean() - m.mu_r) < 4.0 * m.sigma_r / 1000.0);
  CHECK(gaussian_counts(m, a.x) == a.counts);
}

TEST_CASE("discrete sampler") {
  const TechnologyParams t;
  const IntRowMat z = sample_regions_discrete({0.5, 1.0, 0.3, 1.0}, t, 20, 50, 5);
  CHECK((z.array() == 0).all());

  const ProcessingParams p{0.50, 0.01, 0.04, 0.9999};
  const RegionCountModel m = derive_region_model(p, t);
  const IntRowMat n = sample_regions_discrete(p, t, 1000, 1000, 9, 4);
  CHECK((n.array() >= 0).all());
  const Eigen::ArrayXd v = n.cast<double>().reshaped().array();
  const double mean = v.mean();
  const double var = (v - mean).square().mean();
  CHECK(std::fabs(mean / m.mu_r - 1.0) < 0.01);
  CHECK(std::fabs((var / mean) / (m.sigma_r * m.sigma_r / m.mu_r) - 1.0) < 0.05);

  const IntRowMat n1 = sample_regions_discrete(p, t, 1000, 1000, 9, 1);
  CHECK(n1 == n);
}

// Finite-window count variance of the discrete sampler sits above the
// asymptotic region-model variance for low idc. Recorded, not bounded at 5%.
TEST_CASE("discrete window variance versus the asymptotic formula") {
  const TechnologyParams t;
  double prev = 0.0;
  for (double idc : {1.0, 0.5, 0.25, 0.1}) {
    const ProcessingParams p{idc, 0.01, 0.04, 0.9999};
    const RegionCountModel m = derive_region_model(p, t);
    const Eigen::ArrayXd v = sample_regions_discrete(p, t, 1000, 1000, 9).cast<double>().reshaped().array();
    const double mean = v.mean();
    const double ratio = (v - mean).square().mean() / (m.sigma_r * m.sigma_r);
    CAPTURE(idc);
    CHECK(std::fabs(mean / m.mu_r - 1.0) < 0.01);
    CHECK(ratio > prev - 0.01);
    CHECK(ratio < 1.3);
    if (idc >= 1.0) CHECK(std::fabs(ratio - 1.0) < 0.05);
    prev = ratio;
  }
  CHECK(prev > 1.1);
}

TEST_CASE("wilson interval") {
  const ProportionEstimate e = wilson_interval(50, 100);
  CHECK(e.estimate == 0.5);
  CHECK(e.lower < 0.5);
  CHECK(e.upper > 0.5);
  CHECK(e.half_width == doctest::Approx(0.0962).epsilon(0.01));
}

TEST_CASE("count-limited yield") {
  const TechnologyParams t;
  SpMat one(1, 3);
  one.insert(0, 0) = 1.0;
  one.insert(0, 1) = 1.0;
  one.insert(0, 2) = 1.0;
  std::vector<std::uint64_t> keys{0, 1, 2};
  CHECK(count_limited_yield(one, keys, {0.5, 1.0, 0.0, 1.0}, t, 10000, 1).estimate == 0.0);
  CHECK_THROWS_AS(count_limited_yield(one, keys, {}, t, 100, 1), InputError);

  // idc = 0 puts exactly lambdaW = 5 CNTs in every region, so a region is
  // empty with probability (1 - keep)^5 and regions are independent.
  const ProcessingParams p{0.0, 0.5, 0.5, 1.0};
  const double q = std::pow(1.0 - p.thinning(), 5);
  for (int k : {1, 2, 3}) {
    SpMat b(1, k);
    for (int j = 0; j < k; ++j) b.insert(0, j) = 1.0;
    std::vector<std::uint64_t> kk(keys.begin(), keys.begin() + k);
    const ProportionEstimate y = count_limited_yield(b, kk, p, t, 200000, 21, 4);
    CHECK(std::fabs(y.estimate - (1.0 - std::pow(q, k))) <= y.half_width);
  }

  SpMat zero(1, 3);
  CHECK_THROWS_AS(count_limited_yield(zero, keys, {}, t, 10000, 1), InputError);
}

TEST_CASE("widening transistors never lowers yield with common random numbers") {
  const TechnologyParams t;
  const ProcessingParams p{1.0, 0.3, 0.3, 1.0};
  const int transistors = 20;
  std::vector<std::uint64_t> keys(transistors * 4);
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = i;
  double prev = -1.0;
  for (int w = 1; w <= 4; ++w) {
    SpMat b(transistors, transistors * 4);
    for (int i = 0; i < transistors; ++i)
      for (int j = 0; j < w; ++j) b.insert(i, i * 4 + j) = 1.0;
    const ProportionEstimate y = count_limited_yield(b, keys, p, t, 20000, 5);
    CHECK(y.estimate >= prev);
    prev = y.estimate;
  }
}
