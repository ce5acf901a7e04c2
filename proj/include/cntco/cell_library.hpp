#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cntco {

// Timing/energy coefficients of one (stage, input, case). Drive current and
// parasitic capacitance are affine in CNT counts.
struct StageArcModel {
  double i1_per_cnt = 0.0;
  double i1_fixed = 0.0;
  double i2_per_cnt = 0.0;
  double i2_fixed = 0.0;
  double c_par_per_cnt = 0.0;
  double c_par_fixed = 0.0;
  double c_in = 0.0;

  void validate(const std::string& where) const;
  // Fixed terms and pin capacitance scaled by `factor`; per-CNT terms kept.
  StageArcModel scaled(double factor) const;
  friend bool operator==(const StageArcModel&, const StageArcModel&) = default;
};

// VTC coefficient matrix T: V = T * [1, log10(n_p / n_n)], with the
// V_OH and V_OL slopes fixed at zero.
struct SnmCoeffs {
  double t_voh0 = 0.0;
  double t_vih0 = 0.0;
  double t_vih1 = 0.0;
  double t_vil0 = 0.0;
  double t_vil1 = 0.0;
  double t_vol0 = 0.0;

  void validate(const std::string& where) const;
  friend bool operator==(const SnmCoeffs&, const SnmCoeffs&) = default;
};

struct VtcParams {
  double v_oh, v_ih, v_il, v_ol;
};

struct NoiseMargins {
  double snmh, snml, snm;
};

struct OutputLevels {
  double v_oh, v_ol;
};

VtcParams eval_vtc_params(const SnmCoeffs& coeffs, double n_p, double n_n);

// Worst case (min V_OH, max V_OL) over the parameter sets of a driver stage.
OutputLevels worst_output_levels(std::span<const SnmCoeffs> driver_sets);

NoiseMargins snm_of_pair(const OutputLevels& driver, const SnmCoeffs& loader, double n_p, double n_n);
NoiseMargins snm_of_pair(const SnmCoeffs& driver, const SnmCoeffs& loader, double n_p, double n_n);
NoiseMargins snm_of_pair(std::span<const SnmCoeffs> driver_sets, const SnmCoeffs& loader, double n_p, double n_n);

enum class Polarity { P, N };

struct Transistor {
  std::string name;
  Polarity polarity = Polarity::N;
  std::string gate;  // stage input driving the gate
  int width = 1;     // in sampling-region units
  int offset = 0;    // track offset within the instance, region units
};

struct SensitizationCase {
  std::vector<std::pair<std::string, int>> other_inputs;  // input name -> logic value
  std::vector<int> p_group;                               // stage-local transistor indices
  std::vector<int> n_group;
};

struct CaseModel {
  SensitizationCase sensitization;
  StageArcModel arc;
  SnmCoeffs snm;
};

struct Stage {
  std::string name;
  std::vector<std::string> inputs;
  std::string output;
  std::vector<Transistor> transistors;
  // Conducting paths from the output to VDD (p devices) and to ground
  // (n devices), as stage-local transistor indices in series order.
  std::vector<std::vector<int>> pull_up;
  std::vector<std::vector<int>> pull_down;
  std::vector<std::vector<CaseModel>> cases;  // per input

  int input_index(std::string_view pin) const;
  // Output logic value for a full input assignment (bit i = inputs[i]).
  bool evaluate(std::uint32_t state) const;
  // Largest c_in over the input's cases.
  double pin_capacitance(int input) const;
};

std::vector<SensitizationCase> sensitization_cases(const Stage& stage, int input);
std::vector<SensitizationCase> sensitization_cases(const Stage& stage, std::string_view input);

struct StandardCell {
  std::string name;
  std::vector<std::string> inputs;
  std::string output;
  bool sequential = false;  // D-style boundary: inputs are capture pins, output a launch pin
  std::vector<Stage> stages;
  std::vector<int> drive_chain{1, 2, 4, 8, 16};
  double drive_scale = 2.0;

  int max_drive() const { return static_cast<int>(drive_chain.size()) - 1; }
  double scale_at(int drive) const;
  std::string drive_label(int drive) const { return "X" + std::to_string(drive_chain.at(drive)); }
  // Total input capacitance of an external pin at a drive index.
  double pin_capacitance(std::string_view pin, int drive) const;
  int input_index(std::string_view pin) const;
};

class CellLibrary {
 public:
  std::string name = "unnamed";

  // Validates topology, case coverage and coefficients. Stages must already
  // carry their case models (see attach_case_models).
  void add(StandardCell cell);
  const StandardCell& cell(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<StandardCell>& cells() const { return cells_; }
  // Distinct transistor widths over all cells and drive strengths, ascending.
  std::vector<int> available_widths() const;

 private:
  std::vector<StandardCell> cells_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Fills stage.cases from topology, using per-input default models and any
// (input, other-input state) overrides.
struct InputModelSpec {
  StageArcModel arc;
  SnmCoeffs snm;
  struct Override {
    std::vector<std::pair<std::string, int>> when;
    StageArcModel arc;
    SnmCoeffs snm;
  };
  std::vector<Override> overrides;
};
void attach_case_models(Stage& stage, const std::map<std::string, InputModelSpec>& models);

// Versioned JSON document ("format": "cntco-cell-library/1").
CellLibrary parse_cell_library(std::string_view json_text);
CellLibrary load_cell_library(const std::string& path);
std::string serialize_cell_library(const CellLibrary& lib);

// Synthetic reference library: INV, BUF, NAND2, NOR2, AOI21, DFF; X1..X16.
CellLibrary reference_library();

inline constexpr const char* kCellLibraryFormat = "cntco-cell-library/1";

}  // namespace cntco
