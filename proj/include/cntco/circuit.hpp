#pragma once

#include "cntco/cell_library.hpp"
#include "cntco/types.hpp"
#include "cntco/variation.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cntco {

struct Instance {
  std::string name;
  std::string cell;
  int drive = 0;                    // index into the cell's drive chain
  std::vector<std::string> inputs;  // net per cell input pin, in pin order
  std::string output;
};

struct PrimaryInput {
  std::string net;
  double d_fix = 0.0;  // external arrival delay, seconds
};

struct Netlist {
  std::string name = "circuit";
  std::vector<Instance> instances;
  std::vector<PrimaryInput> primary_inputs;
  std::vector<std::string> primary_outputs;
  double wire_cap_per_pin = 0.0;  // farads per instance pin on a net
  double input_slew = 5e-12;      // slew at primary inputs and launch pins, seconds
  int w_min = 1;                  // minimum transistor width, region units
};

// Row placement. Each row owns a p-type and an n-type region track. An
// instance occupies track regions starting at its offset; same-polarity
// transistors at equal offsets share regions (aligned-active layout).
struct PlacedCell {
  int instance = 0;
  int offset = 0;
};

struct PlacementRow {
  std::vector<PlacedCell> cells;  // in order along the row
  int p_height = 0;               // minimum track heights; grown to fit
  int n_height = 0;
};

struct Placement {
  std::vector<PlacementRow> rows;
};

struct Design {
  Netlist netlist;
  Placement placement;
};

// Frozen, validated view of a Design against a library: nets, stage
// instances, transistor geometry, the incidence matrix B and timing arcs.
class PlacedCircuit {
 public:
  struct Net {
    std::string name;
    std::vector<int> drivers;                 // stage instances
    std::vector<std::pair<int, int>> loads;   // (stage instance, stage input)
    int primary_input = -1;                   // index into netlist.primary_inputs
    bool primary_output = false;
    bool launch = false;   // driven by a sequential cell output
    bool capture = false;  // loaded by a sequential cell input
    bool external = false;
    double wire_cap = 0.0;
  };
  struct StageInstance {
    int instance = 0;
    int stage = 0;  // index within the cell
    std::vector<int> input_nets;
    int output_net = 0;
    double scale = 1.0;
    bool timed = true;  // false for stages inside sequential cells
    int first_transistor = 0;
    int transistor_count = 0;
  };
  struct TransistorInstance {
    int stage_instance = 0;
    int local = 0;
    Polarity polarity = Polarity::N;
    int width = 0;
    int row = 0;
    int region_begin = 0;  // global region index
  };
  struct Arc {
    int stage_instance = 0;
    int input = 0;
    int from_net = 0;
    int to_net = 0;
  };
  struct RowTracks {
    int p_begin = 0, p_height = 0;
    int n_begin = 0, n_height = 0;
  };

  PlacedCircuit(Design design, const CellLibrary& library);

  const Design& design() const { return design_; }
  const Netlist& netlist() const { return design_.netlist; }
  const CellLibrary& library() const { return *library_; }
  const StandardCell& cell_of(int instance) const { return *cells_[instance]; }
  const Stage& stage_of(int stage_instance) const;

  const std::vector<Net>& nets() const { return nets_; }
  const std::vector<StageInstance>& stages() const { return stages_; }
  const std::vector<TransistorInstance>& transistors() const { return transistors_; }
  const std::vector<RowTracks>& rows() const { return rows_; }
  int instance_row(int instance) const { return instance_row_[instance]; }

  int region_count() const { return region_count_; }
  const std::vector<std::uint64_t>& region_keys() const { return region_keys_; }
  const SpMat& incidence() const { return incidence_; }

  // Timing arcs grouped by stage in topological order.
  const std::vector<Arc>& arcs() const { return arcs_; }
  const std::vector<int>& arcs_of_stage(int stage_instance) const { return stage_arcs_[stage_instance]; }
  const std::vector<int>& sources() const { return sources_; }
  const std::vector<int>& endpoints() const { return endpoints_; }

  // Case coefficients with drive scaling applied.
  StageArcModel arc_model(int stage_instance, int input, int case_index = 0) const;
  const CaseModel& case_model(int stage_instance, int input, int case_index) const;
  // Pin capacitance of one stage input at the instance's drive.
  double input_capacitance(int stage_instance, int input) const;
  // External load on a net: pin capacitances of its loads plus wire.
  double load_capacitance(int net) const;
  int global_transistor(int stage_instance, int local) const { return stages_[stage_instance].first_transistor + local; }

 private:
  Design design_;
  const CellLibrary* library_;
  std::vector<const StandardCell*> cells_;
  std::vector<Net> nets_;
  std::vector<StageInstance> stages_;
  std::vector<TransistorInstance> transistors_;
  std::vector<RowTracks> rows_;
  std::vector<int> instance_row_;
  int region_count_ = 0;
  std::vector<std::uint64_t> region_keys_;
  SpMat incidence_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> stage_arcs_;
  std::vector<int> sources_;
  std::vector<int> endpoints_;
  std::vector<double> load_cap_;
};

// Incidence matrix B (transistors x regions) of a placed design.
SpMat build_incidence(const Design& design, const CellLibrary& library);

// Transistor width after drive scaling and the minimum-width rule.
int effective_width(const Transistor& t, const StandardCell& cell, int drive, int w_min);

Design min_width_upsize(Design design, int w_min);

struct UpsizeResult {
  Design design;
  int applied = 0;
  std::vector<int> upsized;  // instance index per applied step
};

// Fan-out of an instance: output-net load over its smallest pin capacitance.
std::vector<double> instance_fanouts(const Design& design, const CellLibrary& library);
UpsizeResult selective_upsize(Design design, const CellLibrary& library, int k);

ProportionEstimate count_limited_yield(const PlacedCircuit& circuit, const ProcessingParams& params,
                                       const TechnologyParams& tech, long long trials, std::uint64_t seed,
                                       int workers = 1);

// Versioned JSON ("format": "cntco-netlist/1").
Design parse_design(std::string_view json_text);
Design load_design(const std::string& path);
std::string serialize_design(const Design& design);

inline constexpr const char* kNetlistFormat = "cntco-netlist/1";

struct GeneratorOptions {
  int gates = 1000;
  int depth = 20;
  int rows = 0;               // 0: about sqrt(gates)
  int max_fanout = 6;
  double reuse_probability = 0.3;  // chance an input taps an already-loaded net
  double dff_fraction = 0.02;
  bool aligned = true;
  std::uint64_t seed = 1;
  double wire_cap_per_pin = 0.05e-15;
  double input_slew = 5e-12;
};

Design generate_design(const GeneratorOptions& options, const CellLibrary& library);

}  // namespace cntco
