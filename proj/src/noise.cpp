#include "cntco/noise.hpp"

#include "cntco/normal.hpp"
#include "cntco/parallel.hpp"
#include "cntco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cntco {

PairCoefficients pair_coefficients(const OutputLevels& dr, const SnmCoeffs& ld, double snm_r) {
  if (!(ld.t_vih1 > 0.0) || !(ld.t_vil1 > 0.0))
    throw InputError("SNM constraint degenerates: loader t_vih1 and t_vil1 must be > 0");
  return {-std::pow(10.0, (dr.v_oh - ld.t_vih0 - snm_r) / ld.t_vih1),
          -std::pow(10.0, (ld.t_vil0 - dr.v_ol - snm_r) / ld.t_vil1)};
}

ConstraintSet build_constraints(const PlacedCircuit& c, const TechnologyParams& tech) {
  tech.validate();
  ConstraintSet cs;
  std::vector<Triplet> trip;
  int row = 0;
  const OutputLevels ideal{tech.v_dd, 0.0};
  for (std::size_t n = 0; n < c.nets().size(); ++n) {
    const auto& net = c.nets()[n];
    std::vector<std::pair<int, OutputLevels>> drivers;
    if (net.primary_input >= 0) drivers.emplace_back(-1, ideal);
    for (int d : net.drivers) {
      std::vector<SnmCoeffs> sets;
      for (const auto& per_input : c.stage_of(d).cases)
        for (const auto& cm : per_input) sets.push_back(cm.snm);
      drivers.emplace_back(d, worst_output_levels(sets));
    }
    for (const auto& [drv, levels] : drivers) {
      for (const auto& [ld, input] : net.loads) {
        ++cs.pairs;
        if (drv < 0) ++cs.ideal_driver_pairs;
        const auto& cases = c.stage_of(ld).cases.at(input);
        const int lrow = c.instance_row(c.stages()[ld].instance);
        for (std::size_t k = 0; k < cases.size(); ++k) {
          const PairCoefficients pc = pair_coefficients(levels, cases[k].snm, tech.snm_r);
          const auto& sc = cases[k].sensitization;
          for (int high = 1; high >= 0; --high) {
            const double cp = high ? 1.0 : pc.h21;
            const double cn = high ? pc.h12 : 1.0;
            for (int t : sc.p_group) trip.emplace_back(row, c.global_transistor(ld, t), cp);
            for (int t : sc.n_group) trip.emplace_back(row, c.global_transistor(ld, t), cn);
            cs.tags.push_back({static_cast<int>(n), drv, ld, input, static_cast<int>(k), high == 1, lrow});
            ++row;
          }
        }
      }
    }
  }
  cs.h.resize(row, static_cast<Eigen::Index>(c.transistors().size()));
  cs.h.setFromTriplets(trip.begin(), trip.end());
  cs.h.makeCompressed();
  return cs;
}

SpMat to_region_space(const SpMat& h, const SpMat& b) {
  if (h.cols() != b.rows()) throw InputError("K = HB: inner dimensions differ");
  SpMat k = (h * b).pruned();
  k.makeCompressed();
  return k;
}

Elimination eliminate_noncritical(const SpMat& k) {
  Elimination out;
  const int rows = static_cast<int>(k.rows());
  std::map<std::vector<int>, std::vector<int>> groups;
  std::vector<std::vector<double>> values(rows);
  for (int i = 0; i < rows; ++i) {
    std::vector<int> support;
    for (SpMat::InnerIterator it(k, i); it; ++it) {
      support.push_back(static_cast<int>(it.col()));
      values[i].push_back(it.value());
    }
    groups[support].push_back(i);
  }
  std::vector<char> removed(rows, 0);
  for (auto& [support, members] : groups) {
    (void)support;
    for (std::size_t a = 0; a < members.size(); ++a) {
      const int i = members[a];
      if (removed[i]) continue;
      for (std::size_t b2 = a + 1; b2 < members.size(); ++b2)
        if (!removed[members[b2]] && values[members[b2]] == values[i]) {
          removed[members[b2]] = 1;
          ++out.report.duplicates;
        }
    }
    for (int i : members) {
      if (removed[i]) continue;
      for (int j : members) {
        if (j == i) continue;
        bool dominated = true;
        for (std::size_t q = 0; q < values[i].size() && dominated; ++q) dominated = values[i][q] <= values[j][q];
        if (dominated && values[i] != values[j]) {
          removed[i] = 2;
          break;
        }
      }
    }
  }
  std::vector<Triplet> trip;
  for (int i = 0; i < rows; ++i) {
    if (removed[i]) continue;
    const int r = static_cast<int>(out.kept.size());
    for (SpMat::InnerIterator it(k, i); it; ++it) trip.emplace_back(r, it.col(), it.value());
    out.kept.push_back(i);
  }
  out.k_reduced.resize(static_cast<Eigen::Index>(out.kept.size()), k.cols());
  out.k_reduced.setFromTriplets(trip.begin(), trip.end());
  out.k_reduced.makeCompressed();
  out.report.total = rows;
  out.report.kept = static_cast<int>(out.kept.size());
  out.report.removed = rows - out.report.kept;
  out.report.support_groups = static_cast<int>(groups.size());
  out.report.removed_fraction = rows > 0 ? static_cast<double>(out.report.removed) / rows : 0.0;
  return out;
}

std::vector<CovarianceBlock> assemble_blocks(const SpMat& kr, std::span<const int> constraint_row) {
  if (static_cast<Eigen::Index>(constraint_row.size()) != kr.rows())
    throw InputError("assemble_blocks: one placement row per constraint required");
  std::map<int, std::vector<int>> by_row;
  for (std::size_t i = 0; i < constraint_row.size(); ++i) by_row[constraint_row[i]].push_back(static_cast<int>(i));
  std::vector<CovarianceBlock> blocks;
  for (auto& [row, members] : by_row) {
    CovarianceBlock blk;
    blk.row = row;
    blk.constraints = members;
    const auto p = static_cast<Eigen::Index>(members.size());
    std::vector<Triplet> trip;
    for (Eigen::Index a = 0; a < p; ++a)
      for (SpMat::InnerIterator it(kr, members[a]); it; ++it) trip.emplace_back(a, it.col(), it.value());
    SpMat ku(p, kr.cols());
    ku.setFromTriplets(trip.begin(), trip.end());
    blk.c = Mat(ku * ku.transpose());
    blk.b = -(ku * Vec::Ones(kr.cols()));
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

SnmConstraintSystem build_snm_system(const PlacedCircuit& c, const TechnologyParams& tech) {
  SnmConstraintSystem s;
  s.constraints = build_constraints(c, tech);
  s.k = to_region_space(s.constraints.h, c.incidence());
  s.elimination = eliminate_noncritical(s.k);
  for (int i : s.elimination.kept) s.reduced_row.push_back(s.constraints.tags[i].row);
  s.blocks = assemble_blocks(s.elimination.k_reduced, s.reduced_row);
  s.b = -(s.elimination.k_reduced * Vec::Ones(s.k.cols()));
  return s;
}

PnmvEvaluator::PnmvEvaluator(const SnmConstraintSystem& system, double ratio, MvnOptions options)
    : system_(&system), options_(options) {
  // Rows built from the same cells give identical blocks; integrate each once.
  const auto& blocks = system.blocks;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    int found = -1;
    for (std::size_t u = 0; u < unique_.size() && found < 0; ++u) {
      const auto& rep = blocks[static_cast<std::size_t>(unique_[u])];
      if (rep.c.rows() == blocks[i].c.rows() && rep.c == blocks[i].c && rep.b == blocks[i].b)
        found = static_cast<int>(u);
    }
    if (found < 0) {
      found = static_cast<int>(unique_.size());
      unique_.push_back(static_cast<int>(i));
      plans_.emplace_back(blocks[i].c, ratio * blocks[i].b, options.singular_tol);
    }
    block_to_unique_.push_back(found);
  }
  points_.assign(plans_.size(), options.min_points);
}

PnmvResult PnmvEvaluator::combine(const std::vector<MvnResult>& unique_parts) const {
  // Copies of one estimate are fully correlated; the additive error bound
  // below stays valid for them.
  std::vector<MvnResult> parts;
  parts.reserve(block_to_unique_.size());
  for (int u : block_to_unique_) parts.push_back(unique_parts[static_cast<std::size_t>(u)]);
  const MvnResult prod = combine_block_results(parts);
  PnmvResult r;
  r.pnmv = std::clamp(1.0 - prod.probability, 0.0, 1.0);
  r.error = prod.error;
  r.blocks = static_cast<int>(parts.size());
  return r;
}

PnmvResult PnmvEvaluator::evaluate(double ratio) {
  std::vector<MvnResult> parts;
  for (std::size_t u = 0; u < plans_.size(); ++u) {
    MvnOptions o = options_;
    o.seed = mix64(options_.seed + u);
    parts.push_back(plans_[u].integrate(ratio * system_->blocks[static_cast<std::size_t>(unique_[u])].b, o));
    points_[u] = std::max(parts.back().points, options_.min_points);
  }
  return combine(parts);
}

PnmvResult PnmvEvaluator::evaluate_fixed(double ratio) const {
  std::vector<MvnResult> parts;
  for (std::size_t u = 0; u < plans_.size(); ++u) {
    MvnOptions o = options_;
    o.seed = mix64(options_.seed + u);
    parts.push_back(
        plans_[u].integrate_fixed(ratio * system_->blocks[static_cast<std::size_t>(unique_[u])].b, o, points_[u]));
  }
  return combine(parts);
}

PnmvResult pnmv(const SnmConstraintSystem& system, double mu, double sigma, const MvnOptions& options) {
  if (system.blocks.empty()) return {};
  if (!(sigma > 0.0)) {
    PnmvResult r;
    r.blocks = static_cast<int>(system.blocks.size());
    const bool all_hold = mu <= 0.0 || system.b.minCoeff() >= 0.0;
    r.pnmv = all_hold ? 0.0 : 1.0;
    return r;
  }
  PnmvEvaluator ev(system, mu / sigma, options);
  return ev.evaluate(mu / sigma);
}

namespace {

template <typename Visit>
long long sample_trials(const SpMat& incidence, std::span<const std::uint64_t> keys, const ProcessingParams& params,
                        const TechnologyParams& tech, long long trials, std::uint64_t seed, bool discrete,
                        int workers, Visit&& visit) {
  const RegionCountModel model = derive_region_model(params, tech);
  constexpr long long kChunk = 4096;
  const long long chunks = (trials + kChunk - 1) / kChunk;
  std::vector<long long> failures(static_cast<std::size_t>(chunks), 0);
  parallel_for(static_cast<std::size_t>(chunks), workers, [&](std::size_t b, std::size_t e) {
    Vec n(static_cast<Eigen::Index>(keys.size()));
    Vec s;
    for (std::size_t ch = b; ch < e; ++ch) {
      const long long t0 = static_cast<long long>(ch) * kChunk;
      const long long t1 = std::min(trials, t0 + kChunk);
      for (long long t = t0; t < t1; ++t) {
        for (std::size_t j = 0; j < keys.size(); ++j)
          n[static_cast<Eigen::Index>(j)] =
              discrete ? static_cast<double>(sample_region_count(params, tech, seed, cell_stream(keys[j], t)))
                       : model.mu_r + model.sigma_r * normal_quantile(to_open_unit(hash3(seed, keys[j], t)));
        s.noalias() = incidence * n;
        if (s.size() > 0 && !(s.minCoeff() > 0.0)) {
          ++failures[ch];
          continue;
        }
        visit(ch, n);
      }
    }
  });
  long long f = 0;
  for (long long x : failures) f += x;
  return f;
}

bool violates(const SpMat& k, const Vec& n) {
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    double v = 0.0;
    for (SpMat::InnerIterator it(k, i); it; ++it) v += it.value() * n[it.col()];
    if (v > 0.0) return true;
  }
  return false;
}

}  // namespace

PnmvMcResult pnmv_mc(const SpMat& k, const SpMat& incidence, std::span<const std::uint64_t> keys,
                     const ProcessingParams& params, const TechnologyParams& tech, long long trials,
                     std::uint64_t seed, bool discrete, int workers) {
  if (trials < 1) throw InputError("pnmv_mc: trials must be >= 1");
  if (k.cols() != static_cast<Eigen::Index>(keys.size())) throw InputError("pnmv_mc: K columns must equal regions");
  const long long chunks = (trials + 4095) / 4096;
  std::vector<long long> viol(static_cast<std::size_t>(chunks), 0), used(static_cast<std::size_t>(chunks), 0);
  PnmvMcResult r;
  r.count_failures = sample_trials(incidence, keys, params, tech, trials, seed, discrete, workers,
                                   [&](std::size_t ch, const Vec& n) {
                                     ++used[ch];
                                     if (violates(k, n)) ++viol[ch];
                                   });
  long long v = 0, u = 0;
  for (std::size_t i = 0; i < viol.size(); ++i) {
    v += viol[i];
    u += used[i];
  }
  r.estimate = wilson_interval(v, u);
  if (v == 0 && u > 0) r.estimate.upper = 1.0 - std::pow(0.05, 1.0 / static_cast<double>(u));
  return r;
}

ViolationAgreement compare_violations(const SpMat& a, const SpMat& b, const SpMat& incidence,
                                      std::span<const std::uint64_t> keys, const ProcessingParams& params,
                                      const TechnologyParams& tech, long long trials, std::uint64_t seed,
                                      bool discrete, int workers) {
  const long long chunks = (trials + 4095) / 4096;
  std::vector<ViolationAgreement> parts(static_cast<std::size_t>(chunks));
  sample_trials(incidence, keys, params, tech, trials, seed, discrete, workers, [&](std::size_t ch, const Vec& n) {
    const bool va = violates(a, n), vb = violates(b, n);
    auto& p = parts[ch];
    ++p.trials_used;
    p.violations_a += va;
    p.violations_b += vb;
    p.mismatches += va != vb;
  });
  ViolationAgreement out;
  for (const auto& p : parts) {
    out.trials_used += p.trials_used;
    out.violations_a += p.violations_a;
    out.violations_b += p.violations_b;
    out.mismatches += p.mismatches;
  }
  return out;
}

}  // namespace cntco
