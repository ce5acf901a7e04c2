#include "cntco/variation.hpp"

#include "cntco/normal.hpp"
#include "cntco/parallel.hpp"
#include "cntco/rng.hpp"

#include <numeric>
#include <random>
#include <vector>

namespace cntco {

namespace {
constexpr std::uint64_t kDiscreteDomain = 0xd15c3e7e5a3b1e00ULL;
}

double ProcessingParams::knob(int k) const {
  switch (k) {
    case kIdc: return idc;
    case kPm: return p_m;
    case kPrs: return p_rs;
  }
  throw std::out_of_range("knob index");
}

void ProcessingParams::set_knob(int k, double v) {
  switch (k) {
    case kIdc: idc = v; return;
    case kPm: p_m = v; return;
    case kPrs: p_rs = v; return;
  }
  throw std::out_of_range("knob index");
}

const char* knob_name(int k) {
  static const char* names[] = {"idc", "p_m", "p_rs"};
  return names[k];
}

void ProcessingParams::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string("processing.") + name + " must lie in [0, 1]");
  };
  if (!(idc >= 0.0) || !std::isfinite(idc)) throw InputError("processing.idc must be >= 0");
  prob(p_m, "p_m");
  prob(p_rs, "p_rs");
  prob(p_rm, "p_rm");
}

void TechnologyParams::validate() const {
  if (!(cnt_density > 0.0)) throw InputError("technology.cnt_density must be > 0");
  if (!(region_width > 0.0)) throw InputError("technology.region_width must be > 0");
  if (!(v_dd > 0.0)) throw InputError("technology.v_dd must be > 0");
  if (!(snm_r >= 0.0) || !(snm_r < v_dd)) throw InputError("technology.snm_r must satisfy 0 <= snm_r < v_dd");
}

RegionCountModel derive_region_model(const ProcessingParams& params, const TechnologyParams& tech) {
  params.validate();
  const double lw = tech.lambda_w();
  if (!(lw > 0.0)) throw InputError("cnt_density * region_width must be > 0");
  return region_moments(params.idc, params.p_m, params.p_rs, params.p_rm, lw);
}

RowMat standard_normal_matrix(std::span<const std::uint64_t> keys, int n, std::uint64_t seed, int workers) {
  if (n < 1) throw InputError("trial count must be >= 1");
  RowMat x(static_cast<Eigen::Index>(keys.size()), n);
  parallel_for(keys.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double* row = x.row(static_cast<Eigen::Index>(i)).data();
      for (int t = 0; t < n; ++t) row[t] = normal_quantile(to_open_unit(hash3(seed, keys[i], t)));
    }
  });
  return x;
}

RowMat standard_normal_matrix(int r, int n, std::uint64_t seed, int workers) {
  if (r < 1) throw InputError("region count must be >= 1");
  std::vector<std::uint64_t> keys(r);
  std::iota(keys.begin(), keys.end(), 0);
  return standard_normal_matrix(keys, n, seed, workers);
}

RowMat gaussian_counts(const RegionCountModel& model, const RowMat& x) {
  RowMat counts = (model.sigma_r * x.array() + model.mu_r).matrix();
  return counts;
}

GaussianSample sample_regions_gaussian(const RegionCountModel& model, int r, int n, std::uint64_t seed, int workers) {
  GaussianSample s;
  s.x = standard_normal_matrix(r, n, seed, workers);
  s.counts = gaussian_counts(model, s.x);
  return s;
}

int sample_region_count(const ProcessingParams& params, const TechnologyParams& tech, std::uint64_t seed,
                        std::uint64_t stream) {
  CounterRng rng(seed ^ kDiscreteDomain, stream);
  const double width = tech.region_width;
  const double mean_gap = 1.0 / tech.cnt_density;
  const double keep = params.thinning();
  int count = 0;
  auto visit = [&] {
    if (rng.uniform() < keep) ++count;
  };
  if (params.idc <= 0.0) {
    for (double x = rng.uniform() * mean_gap; x < width; x += mean_gap) visit();
    return count;
  }
  const double shape = 1.0 / params.idc;
  const double scale = params.idc * mean_gap;
  // Stationary start: the window origin falls in a length-biased gap.
  std::gamma_distribution<double> biased(shape + 1.0, scale);
  std::gamma_distribution<double> gap(shape, scale);
  for (double x = rng.uniform() * biased(rng); x < width; x += gap(rng)) visit();
  return count;
}

IntRowMat sample_regions_discrete(const ProcessingParams& params, const TechnologyParams& tech,
                                  std::span<const std::uint64_t> keys, int n, std::uint64_t seed, int workers) {
  params.validate();
  tech.validate();
  if (n < 1) throw InputError("trial count must be >= 1");
  IntRowMat out(static_cast<Eigen::Index>(keys.size()), n);
  parallel_for(keys.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      for (int t = 0; t < n; ++t)
        out(static_cast<Eigen::Index>(i), t) = sample_region_count(params, tech, seed, cell_stream(keys[i], t));
  });
  return out;
}

IntRowMat sample_regions_discrete(const ProcessingParams& params, const TechnologyParams& tech, int r, int n,
                                  std::uint64_t seed, int workers) {
  if (r < 1) throw InputError("region count must be >= 1");
  std::vector<std::uint64_t> keys(r);
  std::iota(keys.begin(), keys.end(), 0);
  return sample_regions_discrete(params, tech, keys, n, seed, workers);
}

ProportionEstimate wilson_interval(long long successes, long long trials, double z) {
  ProportionEstimate est;
  est.successes = successes;
  est.trials = trials;
  if (trials <= 0) return est;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  est.estimate = phat;
  est.lower = std::max(0.0, center - half);
  est.upper = std::min(1.0, center + half);
  est.half_width = half;
  return est;
}

ProportionEstimate count_limited_yield(const SpMat& incidence, std::span<const std::uint64_t> region_keys,
                                       const ProcessingParams& params, const TechnologyParams& tech, long long trials,
                                       std::uint64_t seed, int workers) {
  params.validate();
  tech.validate();
  if (trials < 10000) throw InputError("count-limited yield needs at least 10000 trials");
  if (static_cast<std::size_t>(incidence.cols()) != region_keys.size())
    throw InputError("incidence columns do not match region keys");
  for (Eigen::Index i = 0; i < incidence.rows(); ++i)
    if (incidence.outerIndexPtr()[i + 1] == incidence.outerIndexPtr()[i])
      throw InputError("transistor " + std::to_string(i) + " overlaps zero sampling regions");

  std::vector<char> pass(static_cast<std::size_t>(trials), 0);
  parallel_for(pass.size(), workers, [&](std::size_t b, std::size_t e) {
    std::vector<int> counts(region_keys.size());
    for (std::size_t t = b; t < e; ++t) {
      for (std::size_t j = 0; j < region_keys.size(); ++j)
        counts[j] = sample_region_count(params, tech, seed, cell_stream(region_keys[j], t));
      bool ok = true;
      for (Eigen::Index i = 0; i < incidence.rows() && ok; ++i) {
        int s = 0;
        for (SpMat::InnerIterator it(incidence, i); it; ++it) s += counts[it.col()];
        ok = s >= 1;
      }
      pass[t] = ok ? 1 : 0;
    }
  });
  long long ok = 0;
  for (char c : pass) ok += c;
  return wilson_interval(ok, trials);
}

}  // namespace cntco
