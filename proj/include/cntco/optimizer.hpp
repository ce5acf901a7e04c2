#pragma once

#include "cntco/circuit.hpp"
#include "cntco/mvn.hpp"
#include "cntco/noise.hpp"
#include "cntco/timing.hpp"
#include "cntco/types.hpp"
#include "cntco/variation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cntco {

using KnobVector = std::array<double, kNumKnobs>;

struct Metrics {
  double t95 = 0.0;
  double delay_penalty = 0.0;
  double e_tot = 0.0;
  double delta_e = 0.0;
  double pnmv = 0.0;
  double pnmv_error = 0.0;
  double edp95 = 0.0;
  double enp = 0.0;
  int surviving = 0;
  int count_failures = 0;
};

struct Gradients {
  KnobVector e_tot{}, t95{}, pnmv{}, edp95{}, enp{};
};

struct DesignPoint {
  ProcessingParams params;
  int k_sel_upsize = 0;
  int w_min = 1;
  Metrics metrics;
  Gradients gradients;
};

// EDP-optimized nominal design: the reference for delay penalty and delta E.
struct NominalReference {
  int k_opt = 0;
  double t_nom_opt = 0.0;
  double e_nom_opt = 0.0;
  std::vector<int> swept_k;
  std::vector<double> swept_edp;
};

struct AnalysisOptions {
  int trials = 2000;
  std::uint64_t seed = 1;  // X sample
  MvnOptions mvn;
  double delta = 1e-6;  // backward-difference step per knob
  int workers = 1;
};

// Everything about one sized design that does not depend on the processing
// parameters: placed circuit, linearization, factored model, SNM system.
class PointAnalyzer {
 public:
  PointAnalyzer(const Design& design, const CellLibrary& library, const TechnologyParams& tech,
                const AnalysisOptions& options);

  const PlacedCircuit& circuit() const { return circuit_; }
  const ArcTerms& terms() const { return terms_; }
  const NominalTiming& nominal() const { return nominal_; }
  const AffineCircuitModel& model() const { return model_; }
  const FactoredDelayModel& fdm() const { return fdm_; }
  const SnmConstraintSystem& snm() const { return snm_; }
  const TechnologyParams& tech() const { return tech_; }
  const AnalysisOptions& options() const { return options_; }
  // E_Tot with every region at lambdaW.
  double nominal_energy() const;

  DesignPoint analyze(const ProcessingParams& params, const NominalReference& ref, bool gradients = true,
                      SstaResult* ssta = nullptr) const;

 private:
  PlacedCircuit circuit_;
  TechnologyParams tech_;
  AnalysisOptions options_;
  ArcTerms terms_;
  NominalTiming nominal_;
  AffineCircuitModel model_;
  FactoredDelayModel fdm_;
  SnmConstraintSystem snm_;
};

// Design after min-width and k selective upsizing steps.
Design sized_design(const Design& base, const CellLibrary& library, int w_min, int k);

struct NominalSweepConfig {
  int k_max = -1;   // -1: half the instance count
  int k_step = -1;  // -1: about 1% of the instance count
};

NominalReference optimize_nominal_edp(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                      int w_min, const NominalSweepConfig& sweep = {});

DesignPoint sdpa(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                 const ProcessingParams& params, int k, int w_min, const NominalReference& ref,
                 const AnalysisOptions& options);

// Metric derivatives by backward difference; a knob already at its ideal
// value gets a zero component.
Gradients grad_metrics(const PointAnalyzer& analyzer, const ProcessingParams& params, const SstaResult& base,
                       const NominalReference& ref, double delta);

enum class Selection { kMinEdp95, kMostRelaxed };

struct SearchConfig {
  double delay_penalty_max = 0.05;
  double pnmv_max = 1e-5;
  double delta_e_max = 0.05;
  double delta_e_band_lo = 0.01;
  double delta_e_band_hi = 0.02;
  double step_total = 0.10;
  KnobVector hard_limit{0.0, 0.0, 0.0};  // a knob never goes below its limit
  KnobVector weight{1.0, 1.0, 1.0};
  int max_steps = 200;
  int max_curve_points = 8;
  Selection selection = Selection::kMinEdp95;
  double yield_target = 0.999;
  long long yield_trials = 20000;
  NominalSweepConfig nominal;
};

// One l1-normalized step toward the ideal point; components pointing away
// from ideal or blocked by a hard limit are left unchanged.
ProcessingParams descent_step(const ProcessingParams& params, const KnobVector& gradient, const SearchConfig& config);

bool acceptable(const Metrics& m, const SearchConfig& config);

struct InitialCurve {
  NominalReference reference;
  std::vector<DesignPoint> points;  // analyzed at the initial parameters, no gradients
};

InitialCurve build_initial_curve(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                 const ProcessingParams& initial, int w_min, const SearchConfig& config,
                                 const AnalysisOptions& options);

struct TrajectoryRow {
  int point_id = 0;
  int branch_id = 0;
  DesignPoint point;
};

enum class BranchOutcome { kAcceptable, kEnergyExceeded, kStalled, kMaxSteps };
const char* outcome_name(BranchOutcome o);

struct ValidationReport {
  ProcessingParams params;
  int k_sel_upsize = 0;
  int w_min = 1;
  double linear_delay_penalty = 0.0;
  double nonlinear_t95 = 0.0;
  double nonlinear_delay_penalty = 0.0;
  int nonlinear_surviving = 0;
  double pnmv = 0.0;
  double pnmv_error = 0.0;
  double delta_e = 0.0;
  bool passed = false;
};

struct ValidationSeeds {
  std::uint64_t x_seed = 2;
  std::uint64_t mvn_seed = 0x76616c;
  std::uint64_t yield_seed = 3;
};

ValidationReport validate_point(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                const DesignPoint& point, const NominalReference& ref, const SearchConfig& config,
                                const AnalysisOptions& options, const ValidationSeeds& seeds);

struct SearchResult {
  bool found = false;
  NominalReference reference;
  std::vector<DesignPoint> curve;
  std::vector<TrajectoryRow> trajectory;
  std::vector<BranchOutcome> branch_outcomes;
  std::vector<DesignPoint> acceptable;
  std::optional<DesignPoint> selected;
  std::vector<ValidationReport> validations;  // every attempt, last one decides
  std::optional<ProportionEstimate> yield;
  int w_min = 1;
  int restarts = 0;
  int validation_steps = 0;
  std::vector<DesignPoint> pareto;  // non-dominated trajectory points when nothing is acceptable
  std::string message;
};

SearchResult ap_descent(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                        const ProcessingParams& initial, const SearchConfig& config, const AnalysisOptions& options,
                        const ValidationSeeds& seeds);

struct RouteImprovement {
  KnobVector improvement{};  // 1 - final / initial
  double total = 0.0;
  std::optional<KnobVector> relative;  // empty when total is 0
};

// Most constrained value per knob over the selected points.
ProcessingParams merge_route(const std::vector<ProcessingParams>& selected);
RouteImprovement route_improvement(const ProcessingParams& initial, const ProcessingParams& final_params);

// Linearized versus nonlinear selection over a grid of processing sets and
// upsizing counts.
struct ModelComparisonPoint {
  int set = 0;
  int k = 0;
  double e_tot = 0.0;
  double t95_linear = 0.0;
  double t95_nonlinear = 0.0;
  double edp95_linear = 0.0;
  double edp95_nonlinear = 0.0;
};

struct ModelComparison {
  std::vector<ModelComparisonPoint> points;
  int selected_linear = 0;
  int selected_nonlinear = 0;
  double sub_optimality = 0.0;
  double seconds_linear = 0.0;
  double seconds_nonlinear = 0.0;
};

ModelComparison compare_timing_models(const Design& base, const CellLibrary& library, const TechnologyParams& tech,
                                      const std::vector<ProcessingParams>& sets, const std::vector<int>& ks, int w_min,
                                      int trials, std::uint64_t seed, int workers = 1);

// Processing sets used to validate the linearized model.
std::vector<ProcessingParams> linearization_test_sets();

struct DistributionComparison {
  double median_gaussian = 0.0, median_discrete = 0.0;
  double spread_gaussian = 0.0, spread_discrete = 0.0;  // 95th minus 5th percentile
  double median_error = 0.0, spread_error = 0.0;        // relative to discrete
  int failed_gaussian = 0, failed_discrete = 0;
};

DistributionComparison gaussian_vs_discrete(const PlacedCircuit& circuit, const ProcessingParams& params,
                                            const TechnologyParams& tech, int trials, std::uint64_t seed,
                                            int workers = 1);

struct PnmvSweepPoint {
  double idc = 0.0;
  double cv = 0.0;
  double pnmv = 0.0;
  double pnmv_error = 0.0;
  ProportionEstimate mc;
  bool powered = false;
  double pct_error = 0.0;
};

struct PnmvSweep {
  std::vector<PnmvSweepPoint> points;
  double rms_pct_error = 0.0;
  int powered = 0;
};

// The MC estimate resolves P to 10% relative error with 90% power.
bool mc_powered(double p, long long trials);

PnmvSweep pnmv_sweep(const PlacedCircuit& circuit, const TechnologyParams& tech, const ProcessingParams& base,
                     const std::vector<double>& idcs, long long trials, std::uint64_t seed, bool discrete,
                     const MvnOptions& mvn, int workers = 1);

}  // namespace cntco
