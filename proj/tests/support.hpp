#pragma once

#include "cntco/cell_library.hpp"
#include "cntco/circuit.hpp"

#include <map>
#include <string>
#include <vector>

namespace cntco::test {

// Inverter VTC coefficients of the 5 nm example device.
inline SnmCoeffs fig9_coeffs() { return {0.33, 0.20, 0.05, 0.15, 0.05, 0.02}; }

inline StageArcModel plain_arc(double c_in = 0.25e-15) {
  StageArcModel a;
  a.i1_per_cnt = 3.0e-6;
  a.i2_per_cnt = 1.0e-6;
  a.c_par_per_cnt = 12.0e-18;
  a.c_par_fixed = 0.05e-15;
  a.c_in = c_in;
  return a;
}

inline Stage inverter(const std::string& in, const std::string& out, int width, const StageArcModel& arc,
                      const SnmCoeffs& snm) {
  Stage s;
  s.name = "s0";
  s.inputs = {in};
  s.output = out;
  s.transistors = {{"MP", Polarity::P, in, width, 0}, {"MN", Polarity::N, in, width, 0}};
  s.pull_up = {{0}};
  s.pull_down = {{1}};
  attach_case_models(s, {{in, InputModelSpec{arc, snm, {}}}});
  return s;
}

inline StandardCell single_stage(const std::string& name, Stage s) {
  StandardCell c;
  c.name = name;
  c.inputs = s.inputs;
  c.output = "Y";
  s.output = "Y";
  c.stages = {std::move(s)};
  return c;
}

// Library of inverters with the example VTC coefficients: INV1 and INV3 have
// width-1 and width-3 devices.
inline CellLibrary fig9_library() {
  CellLibrary lib;
  lib.name = "fig9";
  lib.add(single_stage("INV1", inverter("A", "Y", 1, plain_arc(), fig9_coeffs())));
  lib.add(single_stage("INV3", inverter("A", "Y", 3, plain_arc(), fig9_coeffs())));
  return lib;
}

// Compact netlist construction for hand-built fixtures.
class Builder {
 public:
  Builder& pi(const std::string& net, double d_fix = 0.0) {
    d_.netlist.primary_inputs.push_back({net, d_fix});
    return *this;
  }
  Builder& po(const std::string& net) {
    d_.netlist.primary_outputs.push_back(net);
    return *this;
  }
  Builder& gate(const std::string& name, const std::string& cell, std::vector<std::string> inputs,
                const std::string& output, int row = 0, int offset = 0, int drive = 0) {
    const int idx = static_cast<int>(d_.netlist.instances.size());
    d_.netlist.instances.push_back({name, cell, drive, std::move(inputs), output});
    if (static_cast<int>(d_.placement.rows.size()) <= row) d_.placement.rows.resize(row + 1);
    d_.placement.rows[row].cells.push_back({idx, offset});
    return *this;
  }
  Builder& wire_cap(double c) {
    d_.netlist.wire_cap_per_pin = c;
    return *this;
  }
  Design build() const { return d_; }

 private:
  Design d_;
};

// Chain of `n` cells of one type, all in one row at aligned offsets.
inline Design inverter_chain(int n, const std::string& cell = "INV", int rows = 1) {
  Builder b;
  b.pi("in");
  std::string prev = "in";
  for (int i = 0; i < n; ++i) {
    const std::string out = "n" + std::to_string(i);
    b.gate("g" + std::to_string(i), cell, {prev}, out, i % rows);
    prev = out;
  }
  b.po(prev);
  return b.build();
}

}  // namespace cntco::test
