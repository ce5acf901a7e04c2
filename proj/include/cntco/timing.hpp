#pragma once

#include "cntco/circuit.hpp"
#include "cntco/types.hpp"
#include "cntco/variation.hpp"

#include <utility>
#include <vector>

namespace cntco {

// Positive solution d of d * (i1 * min(2d / t_in, 1) + i2) = q.
double solve_stage_delay(double q, double i1, double i2, double t_in);

// Per-arc coefficients in transistor space. Charge is affine in the counts
// of every transistor of the arc's stage; current is affine in the counts of
// the arc's first sensitization case (P and N groups together).
struct ArcTerms {
  SpMat stage_members;  // m x t
  SpMat drive_group;    // m x t
  Vec c_par_per_cnt, c_fixed;  // c_fixed = parasitic fixed + external load
  Vec i1_per_cnt, i1_fixed, i2_per_cnt, i2_fixed;
  Vec d_fix;
  Vec energy_weight;  // 1 / (arcs of the stage)
};

ArcTerms build_arc_terms(const PlacedCircuit& circuit);

struct NominalTiming {
  Vec delay;       // per arc
  Vec input_slew;  // per arc
  Vec net_arrival;
  Vec net_slew;
  double t_nom = 0.0;
};

// Nonlinear STA at a given vector of transistor counts.
NominalTiming nonlinear_sta(const PlacedCircuit& circuit, const ArcTerms& terms, double v_dd, const Vec& counts);
// Nonlinear STA with every region at its ideal count lambdaW.
NominalTiming nominal_sta_nonlinear(const PlacedCircuit& circuit, const TechnologyParams& tech);

struct AffineCircuitModel {
  SpMat a_cload;  // m x r
  Vec b_cload;
  SpMat a_idrive;  // m x r
  Vec b_idrive;
  Vec d_fix;
  Vec energy_weight;
  Vec frozen_factor;  // min(2 d_nom / t_in_nom, 1) per arc
  double v_dd = 0.0;
  double nominal_count = 0.0;
};

AffineCircuitModel linearize(const PlacedCircuit& circuit, const ArcTerms& terms, const NominalTiming& nominal,
                             const TechnologyParams& tech);
AffineCircuitModel linearize(const PlacedCircuit& circuit, const NominalTiming& nominal, const TechnologyParams& tech);

template <typename Scalar>
struct FactoredDelayModelT {
  RowMatX<Scalar> q_mc;  // m x n
  RowMatX<Scalar> i_mc;  // m x n
  VecX<Scalar> q_exp, q_fix, i_exp, i_fix, d_fix;
  VecX<Scalar> energy_weight;
  VecX<Scalar> q_mc_mean;  // row means of q_mc
  // Per trial, min over transistors of (B X)_(i,t) / width_i; the trial
  // count-fails iff this is <= -mu / sigma.
  VecX<Scalar> worst_count_z;
  RowMatX<Scalar> x;  // r x n sample the model was built from
  Scalar v_dd{};

  int arcs() const { return static_cast<int>(q_mc.rows()); }
  int trials() const { return static_cast<int>(q_mc.cols()); }
};
using FactoredDelayModel = FactoredDelayModelT<double>;

template <typename Scalar>
FactoredDelayModelT<Scalar> precompute_factored(const AffineCircuitModel& model, const SpMat& incidence,
                                                RowMatX<Scalar> x, int workers = 1);
// Same, refilling an existing model; storage is reused when the sizes match.
template <typename Scalar>
void precompute_factored(const AffineCircuitModel& model, const SpMat& incidence, const RowMat& x,
                         FactoredDelayModelT<Scalar>& out, int workers = 1);

template <typename Scalar>
std::vector<char> count_failures(const FactoredDelayModelT<Scalar>& fdm, Scalar mu, Scalar sigma);

template <typename Scalar>
struct DelayMatrixT {
  RowMatX<Scalar> d;         // m x n
  std::vector<char> failed;  // per trial
};
using DelayMatrix = DelayMatrixT<double>;

template <typename Scalar>
DelayMatrixT<Scalar> evaluate_delays(const FactoredDelayModelT<Scalar>& fdm, Scalar mu, Scalar sigma,
                                     int workers = 1);
// Same, writing into existing storage; repeated re-evaluation reuses it.
template <typename Scalar>
void evaluate_delays(const FactoredDelayModelT<Scalar>& fdm, Scalar mu, Scalar sigma, DelayMatrixT<Scalar>& out,
                     int workers = 1);

template <typename Scalar>
Scalar total_energy(const FactoredDelayModelT<Scalar>& fdm, Scalar mu, Scalar sigma);

// Expectation of total_energy over X (the sigma term has zero mean).
double expected_energy(const AffineCircuitModel& model, double mu);

struct DelaySample {
  std::vector<double> path_delay;
  std::vector<char> failed;
  std::vector<std::vector<int>> critical_path;  // arc indices, source to endpoint
};

struct SstaOptions {
  bool record_paths = true;
  bool exclude_failures = true;
  int min_surviving = 100;
};

struct SstaResult {
  DelaySample sample;
  double t95 = 0.0;
  double delay_penalty = 0.0;
  int surviving = 0;
};

// ceil(0.95 n)-th smallest value.
double t95_order_statistic(std::vector<double> values);

SstaResult mc_ssta(const PlacedCircuit& circuit, const RowMat& d, const std::vector<char>& failed, double t_nom_opt,
                   const SstaOptions& options = {}, int workers = 1);

// Same result as evaluate_delays + mc_ssta without materializing D.
template <typename Scalar>
SstaResult linearized_ssta(const PlacedCircuit& circuit, const FactoredDelayModelT<Scalar>& fdm, Scalar mu,
                           Scalar sigma, double t_nom_opt, const SstaOptions& options = {}, int workers = 1);

// One result per (mu, sigma) pair, sharing each pass over the factored rows.
// Critical paths are not recorded.
template <typename Scalar>
std::vector<SstaResult> linearized_ssta(const PlacedCircuit& circuit, const FactoredDelayModelT<Scalar>& fdm,
                                        const std::vector<std::pair<Scalar, Scalar>>& moments, double t_nom_opt,
                                        const SstaOptions& options = {}, int workers = 1);

// Per-trial delay of the given path under (mu, sigma); paths[t] empty -> NaN.
std::vector<double> path_delays(const FactoredDelayModel& fdm, const std::vector<std::vector<int>>& paths, double mu,
                                double sigma);

// Nonlinear Monte Carlo: per trial, counts -> nonlinear STA with slew
// propagation. Counts are region counts (r x n).
DelaySample nonlinear_mc(const PlacedCircuit& circuit, const ArcTerms& terms, double v_dd, const RowMat& region_counts,
                         int workers = 1);

}  // namespace cntco
