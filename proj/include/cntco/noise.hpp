#pragma once

#include "cntco/circuit.hpp"
#include "cntco/mvn.hpp"
#include "cntco/types.hpp"
#include "cntco/variation.hpp"

#include <span>
#include <vector>

namespace cntco {

struct ConstraintTag {
  int net = 0;
  int driver_stage = -1;  // -1: primary input (ideal driver)
  int loader_stage = 0;
  int loader_input = 0;
  int case_index = 0;
  bool high = true;  // SNMH (true) or SNML (false)
  int row = 0;       // placement row of the loader
};

struct ConstraintSet {
  SpMat h;  // c x t
  std::vector<ConstraintTag> tags;
  int pairs = 0;
  int ideal_driver_pairs = 0;
};

// Coefficients of the two count-ratio constraints of one gate pair:
// SNMH: n_P + h12 n_N <= 0, SNML: h21 n_P + n_N <= 0.
struct PairCoefficients {
  double h12, h21;
};
PairCoefficients pair_coefficients(const OutputLevels& driver, const SnmCoeffs& loader, double snm_r);

ConstraintSet build_constraints(const PlacedCircuit& circuit, const TechnologyParams& tech);

SpMat to_region_space(const SpMat& h, const SpMat& b);

struct EliminationReport {
  int total = 0;
  int kept = 0;
  int removed = 0;
  int duplicates = 0;
  int support_groups = 0;
  double removed_fraction = 0.0;
};

struct Elimination {
  SpMat k_reduced;
  std::vector<int> kept;  // original row per reduced row, ascending
  EliminationReport report;
};

// Rows are compared only within groups of identical support; exact
// duplicates collapse first, then a row dominated elementwise by another row
// of its group is dropped (valid for strictly positive counts).
Elimination eliminate_noncritical(const SpMat& k);

struct CovarianceBlock {
  int row = 0;                   // placement row
  std::vector<int> constraints;  // reduced-row indices
  Mat c;                         // K_u K_u^T
  Vec b;                         // -K_u 1
};

std::vector<CovarianceBlock> assemble_blocks(const SpMat& k_reduced, std::span<const int> constraint_row);

struct SnmConstraintSystem {
  ConstraintSet constraints;
  SpMat k;
  Elimination elimination;
  std::vector<int> reduced_row;  // placement row per reduced constraint
  std::vector<CovarianceBlock> blocks;
  Vec b;  // -K_reduced 1
};

SnmConstraintSystem build_snm_system(const PlacedCircuit& circuit, const TechnologyParams& tech);

struct PnmvResult {
  double pnmv = 0.0;
  double error = 0.0;
  int blocks = 0;
};

// PNMV = 1 - prod_u P{Z_u <= (mu/sigma) b_u}. Block plans are built once at
// a reference ratio; evaluate_fixed reuses the point counts of the last
// adaptive evaluation so nearby ratios share random numbers.
class PnmvEvaluator {
 public:
  PnmvEvaluator(const SnmConstraintSystem& system, double ratio, MvnOptions options);
  PnmvResult evaluate(double ratio);
  PnmvResult evaluate_fixed(double ratio) const;

 private:
  const SnmConstraintSystem* system_;
  MvnOptions options_;
  std::vector<MvnPlan> plans_;     // one per distinct block
  std::vector<int> unique_;         // representative block per plan
  std::vector<int> block_to_unique_;
  std::vector<long> points_;
  PnmvResult combine(const std::vector<MvnResult>& parts) const;
};

PnmvResult pnmv(const SnmConstraintSystem& system, double mu, double sigma, const MvnOptions& options = {});

struct PnmvMcResult {
  ProportionEstimate estimate;  // violations among non-failed trials
  long long count_failures = 0;
};

// Monte Carlo PNMV. Trials with a nonpositive transistor count are excluded.
PnmvMcResult pnmv_mc(const SpMat& k, const SpMat& incidence, std::span<const std::uint64_t> region_keys,
                     const ProcessingParams& params, const TechnologyParams& tech, long long trials,
                     std::uint64_t seed, bool discrete, int workers = 1);

struct ViolationAgreement {
  long long trials_used = 0;
  long long violations_a = 0;
  long long violations_b = 0;
  long long mismatches = 0;
};

// Per-trial comparison of violation indicators of two constraint matrices
// on common random region counts.
ViolationAgreement compare_violations(const SpMat& a, const SpMat& b, const SpMat& incidence,
                                      std::span<const std::uint64_t> region_keys, const ProcessingParams& params,
                                      const TechnologyParams& tech, long long trials, std::uint64_t seed,
                                      bool discrete, int workers = 1);

}  // namespace cntco
