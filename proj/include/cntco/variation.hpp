#pragma once

#include "cntco/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>

namespace cntco {

// Optimization knobs, in gradient-vector order. p_rm is not a knob.
enum Knob : int { kIdc = 0, kPm = 1, kPrs = 2 };
inline constexpr int kNumKnobs = 3;

struct ProcessingParams {
  double idc = 0.5;
  double p_m = 0.01;
  double p_rs = 0.04;
  double p_rm = 0.9999;

  static ProcessingParams ideal() { return {0.0, 0.0, 0.0, 1.0}; }
  double thinning() const { return (1.0 - p_m) * (1.0 - p_rs); }
  double knob(int k) const;
  void set_knob(int k, double v);
  void validate() const;
  friend bool operator==(const ProcessingParams&, const ProcessingParams&) = default;
};

const char* knob_name(int k);

struct TechnologyParams {
  double cnt_density = 250.0;   // CNTs per micrometer
  double region_width = 0.020;  // micrometers
  double v_dd = 0.5;            // volts
  double snm_r = 0.5 / 6.0;     // volts

  double lambda_w() const { return cnt_density * region_width; }
  void validate() const;
};

template <typename Scalar>
struct RegionCountModelT {
  Scalar mu_r{};
  Scalar sigma_r{};
  Scalar mu_m{};
};
using RegionCountModel = RegionCountModelT<double>;

// Renewal count of mean lambdaW with variance/mean = idc, then Bernoulli
// thinning with keep probability p.
template <typename Scalar>
RegionCountModelT<Scalar> region_moments(Scalar idc, Scalar p_m, Scalar p_rs, Scalar p_rm, Scalar lambda_w) {
  using std::sqrt;
  const Scalar p = (Scalar(1) - p_m) * (Scalar(1) - p_rs);
  const Scalar var = p * p * idc * lambda_w + p * (Scalar(1) - p) * lambda_w;
  RegionCountModelT<Scalar> m;
  m.mu_r = lambda_w * p;
  m.sigma_r = var > Scalar(0) ? sqrt(var) : Scalar(0);
  m.mu_m = lambda_w * p_m * (Scalar(1) - p_rm);
  return m;
}

RegionCountModel derive_region_model(const ProcessingParams& params, const TechnologyParams& tech);

// Standard normal matrix, one row per key. Entry (i, t) depends only on
// (seed, keys[i], t).
RowMat standard_normal_matrix(std::span<const std::uint64_t> keys, int n, std::uint64_t seed, int workers = 1);
RowMat standard_normal_matrix(int r, int n, std::uint64_t seed, int workers = 1);

struct GaussianSample {
  RowMat x;       // r x n standard normal draws
  RowMat counts;  // mu_r + sigma_r * x
};

GaussianSample sample_regions_gaussian(const RegionCountModel& model, int r, int n, std::uint64_t seed,
                                       int workers = 1);
RowMat gaussian_counts(const RegionCountModel& model, const RowMat& x);

// Count of kept CNTs in one region window for one (stream) substream.
int sample_region_count(const ProcessingParams& params, const TechnologyParams& tech, std::uint64_t seed,
                        std::uint64_t stream);

IntRowMat sample_regions_discrete(const ProcessingParams& params, const TechnologyParams& tech,
                                  std::span<const std::uint64_t> keys, int n, std::uint64_t seed, int workers = 1);
IntRowMat sample_regions_discrete(const ProcessingParams& params, const TechnologyParams& tech, int r, int n,
                                  std::uint64_t seed, int workers = 1);

struct ProportionEstimate {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double half_width = 0.0;
  long long successes = 0;
  long long trials = 0;
};

ProportionEstimate wilson_interval(long long successes, long long trials, double z = 1.959963984540054);

// incidence: t x r 0/1 matrix; region_keys: sampling key per region column.
ProportionEstimate count_limited_yield(const SpMat& incidence, std::span<const std::uint64_t> region_keys,
                                       const ProcessingParams& params, const TechnologyParams& tech, long long trials,
                                       std::uint64_t seed, int workers = 1);

}  // namespace cntco
