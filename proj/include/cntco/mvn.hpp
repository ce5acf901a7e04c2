#pragma once

#include "cntco/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cntco {

struct MvnOptions {
  double abs_error = 1e-7;
  // Also stop once the error is below rel_error * min(P, 1 - P).
  double rel_error = 1e-2;
  std::uint64_t seed = 0x6d766e;
  int randomizations = 12;
  long min_points = 128;        // lattice points per randomization, first pass
  long max_points = 1L << 17;   // cap per randomization
  double singular_tol = 1e-10;  // relative residual variance treated as zero
  int workers = 1;
};

struct MvnResult {
  double probability = 0.0;
  double error = 0.0;  // ~99% bound (3.5 standard errors over randomizations)
  long points = 0;     // lattice points per randomization actually used
  int rank = 0;
};

struct MvnProblem {
  Mat c;
  Vec u;
};

// Variable ordering and rank-revealing Cholesky factor of C for
// P{Z <= u}, Z ~ N(0, C). The ordering is chosen from `u_order`; the plan can
// then integrate any bound vector (used with scaled bounds).
//
// When a violation is unlikely at `u_order` (union bound below
// kComplementThreshold) the plan integrates the complement instead, as a sum
// of first-violation terms P{Z_i > u_i, Z_j <= u_j for j before i}. Each term
// carries its small marginal exactly, which keeps the relative error of
// P{violation} small in the tail.
class MvnPlan {
 public:
  static constexpr double kComplementThreshold = 0.5;

  MvnPlan(const Mat& c, const Vec& u_order, double singular_tol = 1e-10);

  MvnResult integrate(const Vec& u, const MvnOptions& opt) const;
  // One pass with a fixed number of points per randomization.
  MvnResult integrate_fixed(const Vec& u, const MvnOptions& opt, long points) const;

  int dimension() const { return direct_.p; }
  int rank() const { return direct_.rank(); }
  bool complement() const { return !terms_.empty(); }

 private:
  struct Bound {
    int index;                  // original variable
    std::vector<double> coeff;  // on pivot variables 0..var, last entry nonzero
  };
  struct Core {
    int p = 0;
    std::vector<std::vector<Bound>> vars;  // bounds attached to each pivot variable
    std::vector<int> constant;             // rows with no random part: need u >= 0

    Core() = default;
    Core(const Mat& c, const Vec& u_order, double tol);
    int rank() const { return static_cast<int>(vars.size()); }
    double integrand(const Vec& u, const double* w, std::vector<double>& y) const;
    bool exact(const Vec& u, MvnResult& res) const;
    void accumulate(const Vec& u, const MvnOptions& opt, long from, long to, std::vector<double>& sums) const;
    MvnResult summarize(const std::vector<double>& sums, long points) const;
  };
  // First-violation term: variables `vars` (original indices), the last one
  // sign-flipped.
  struct Term {
    std::vector<int> vars;
    Core core;
  };

  Core direct_;
  std::vector<Term> terms_;

  Vec term_bounds(const Term& t, const Vec& u) const;
  MvnResult run(const Vec& u, const MvnOptions& opt, long fixed_points) const;
};

MvnResult mvncdf(const Mat& c, const Vec& u, const MvnOptions& opt = {});

// Product of independent block probabilities with a first-order error bound.
MvnResult combine_block_results(std::span<const MvnResult> parts);
MvnResult block_mvncdf(std::span<const MvnProblem> blocks, const MvnOptions& opt = {});

}  // namespace cntco
