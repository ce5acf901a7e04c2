#include "cntco/cell_library.hpp"

namespace cntco {

namespace {

// Coefficients sized for V_DD = 0.5 V and SNM_R = V_DD / 6.
StageArcModel base_arc(double drive_factor, double par_factor) {
  StageArcModel a;
  a.i1_per_cnt = 3.0e-6 * drive_factor;
  a.i2_per_cnt = 1.0e-6 * drive_factor;
  a.c_par_per_cnt = 12.0e-18 * par_factor;
  a.c_par_fixed = 0.05e-15;
  a.c_in = 0.25e-15;
  return a;
}

SnmCoeffs base_snm() {
  SnmCoeffs s;
  s.t_voh0 = 0.47;
  s.t_vih0 = 0.3588;
  s.t_vih1 = 0.07;
  s.t_vil0 = 0.1412;
  s.t_vil1 = 0.07;
  s.t_vol0 = 0.03;
  return s;
}

Transistor dev(const char* name, Polarity pol, const std::string& gate, int width) {
  return Transistor{name, pol, gate, width, 0};
}

std::map<std::string, InputModelSpec> uniform_models(const Stage& s, const StageArcModel& arc) {
  std::map<std::string, InputModelSpec> m;
  for (const auto& in : s.inputs) m[in] = InputModelSpec{arc, base_snm(), {}};
  return m;
}

Stage inverter_stage(const std::string& name, const std::string& in, const std::string& out, int w,
                     const StageArcModel& arc) {
  Stage s;
  s.name = name;
  s.inputs = {in};
  s.output = out;
  s.transistors = {dev("MP", Polarity::P, in, w), dev("MN", Polarity::N, in, w)};
  s.pull_up = {{0}};
  s.pull_down = {{1}};
  attach_case_models(s, uniform_models(s, arc));
  return s;
}

StandardCell combinational(const std::string& name, std::vector<std::string> inputs, std::vector<Stage> stages) {
  StandardCell c;
  c.name = name;
  c.inputs = std::move(inputs);
  c.output = "Y";
  c.stages = std::move(stages);
  return c;
}

}  // namespace

CellLibrary reference_library() {
  constexpr int w = 3;
  CellLibrary lib;
  lib.name = "refcell";

  lib.add(combinational("INV", {"A"}, {inverter_stage("s0", "A", "Y", w, base_arc(1.0, 1.0))}));

  lib.add(combinational("BUF", {"A"},
                        {inverter_stage("s0", "A", "n1", w, base_arc(1.0, 1.0)),
                         inverter_stage("s1", "n1", "Y", w, base_arc(1.0, 1.0))}));

  {
    Stage s;
    s.name = "s0";
    s.inputs = {"A", "B"};
    s.output = "Y";
    s.transistors = {dev("PA", Polarity::P, "A", w), dev("PB", Polarity::P, "B", w), dev("NA", Polarity::N, "A", w),
                     dev("NB", Polarity::N, "B", w)};
    s.pull_up = {{0}, {1}};
    s.pull_down = {{2, 3}};
    attach_case_models(s, uniform_models(s, base_arc(0.75, 1.0)));
    lib.add(combinational("NAND2", {"A", "B"}, {s}));
  }
  {
    Stage s;
    s.name = "s0";
    s.inputs = {"A", "B"};
    s.output = "Y";
    s.transistors = {dev("PA", Polarity::P, "A", w), dev("PB", Polarity::P, "B", w), dev("NA", Polarity::N, "A", w),
                     dev("NB", Polarity::N, "B", w)};
    s.pull_up = {{0, 1}};
    s.pull_down = {{2}, {3}};
    attach_case_models(s, uniform_models(s, base_arc(0.7, 1.0)));
    lib.add(combinational("NOR2", {"A", "B"}, {s}));
  }
  {
    // Y = (A + B*C)'
    Stage s;
    s.name = "s0";
    s.inputs = {"A", "B", "C"};
    s.output = "Y";
    s.transistors = {dev("PA", Polarity::P, "A", w), dev("PB", Polarity::P, "B", w), dev("PC", Polarity::P, "C", w),
                     dev("NA", Polarity::N, "A", w), dev("NB", Polarity::N, "B", w), dev("NC", Polarity::N, "C", w)};
    s.pull_up = {{0, 1}, {0, 2}};
    s.pull_down = {{3}, {4, 5}};
    attach_case_models(s, uniform_models(s, base_arc(0.65, 1.0)));
    lib.add(combinational("AOI21", {"A", "B", "C"}, {s}));
  }
  {
    // Master and slave cross-coupled inverter latches plus an output buffer.
    StandardCell c;
    c.name = "DFF";
    c.inputs = {"D"};
    c.output = "Q";
    c.sequential = true;
    const StageArcModel a = base_arc(1.0, 1.0);
    c.stages = {inverter_stage("mi", "D", "ma", w, a), inverter_stage("mk", "ma", "mb", w, a),
                inverter_stage("mf", "mb", "ma", w, a), inverter_stage("si", "mb", "sa", w, a),
                inverter_stage("sk", "sa", "sb", w, a), inverter_stage("sf", "sb", "sa", w, a),
                inverter_stage("so", "sb", "Q", w, a)};
    lib.add(std::move(c));
  }
  return lib;
}

}  // namespace cntco
