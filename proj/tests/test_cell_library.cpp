#include "cntco/cell_library.hpp"
#include "cntco/circuit.hpp"
#include "cntco/noise.hpp"
#include "cntco/timing.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cntco;
using test::fig9_coeffs;

TEST_CASE("VTC parameters of the example device") {
  const VtcParams v = eval_vtc_params(fig9_coeffs(), 7.0, 7.0);
  CHECK(v.v_oh == 0.33);
  CHECK(v.v_ih == 0.20);
  CHECK(v.v_il == 0.15);
  CHECK(v.v_ol == 0.02);

  const VtcParams r = eval_vtc_params(fig9_coeffs(), 10.0, 1.0);
  CHECK(r.v_ih == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.v_il == doctest::Approx(0.20).epsilon(1e-12));

  CHECK_THROWS_AS(eval_vtc_params(fig9_coeffs(), 0.0, 1.0), InputError);
  CHECK_THROWS_AS(eval_vtc_params(fig9_coeffs(), 1.0, -2.0), InputError);
}

TEST_CASE("VTC parameters depend only on the count ratio") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double np = u(rng), nn = u(rng), s = u(rng);
    const VtcParams a = eval_vtc_params(fig9_coeffs(), np, nn);
    const VtcParams b = eval_vtc_params(fig9_coeffs(), s * np, s * nn);
    CHECK(a.v_ih == doctest::Approx(b.v_ih).epsilon(1e-12));
    CHECK(a.v_il == doctest::Approx(b.v_il).epsilon(1e-12));
    CHECK(a.v_oh == b.v_oh);
    CHECK(a.v_ol == b.v_ol);
  }
  const SnmCoeffs c{0.47, 0.36, 0.07, 0.14, 0.07, 0.03};
  CHECK(eval_vtc_params(c, 3.3, 3.3).v_ih == c.t_vih0);
}

TEST_CASE("noise margins of a gate pair") {
  const NoiseMargins m = snm_of_pair(fig9_coeffs(), fig9_coeffs(), 4.0, 4.0);
  CHECK(m.snmh == doctest::Approx(0.13).epsilon(1e-12));
  CHECK(m.snml == doctest::Approx(0.13).epsilon(1e-12));
  CHECK(m.snm == m.snmh);

  // min of the two margins
  SnmCoeffs d = fig9_coeffs();
  d.t_voh0 = 0.26;  // snmh = 0.06
  d.t_vol0 = 0.07;  // snml = 0.08
  const NoiseMargins mm = snm_of_pair(d, fig9_coeffs(), 1.0, 1.0);
  CHECK(mm.snmh == doctest::Approx(0.06));
  CHECK(mm.snml == doctest::Approx(0.08));
  CHECK(mm.snm == mm.snmh);

  double prev = 1e9;
  for (double ratio = 0.01; ratio < 1e6; ratio *= 3.0) {
    const double h = snm_of_pair(fig9_coeffs(), fig9_coeffs(), ratio, 1.0).snmh;
    CHECK(h < prev);
    prev = h;
  }
  CHECK(prev < -0.1);
}

TEST_CASE("worst-case driver levels over multiple parameter sets") {
  SnmCoeffs a = fig9_coeffs(), b = fig9_coeffs();
  b.t_voh0 = 0.31;
  b.t_vol0 = 0.01;
  a.t_vol0 = 0.04;
  const std::vector<SnmCoeffs> sets{a, b};
  const OutputLevels w = worst_output_levels(sets);
  CHECK(w.v_oh == 0.31);
  CHECK(w.v_ol == 0.04);
  const NoiseMargins m = snm_of_pair(sets, fig9_coeffs(), 1.0, 1.0);
  CHECK(m.snmh == doctest::Approx(0.11));
  CHECK(m.snml == doctest::Approx(0.11));
}

TEST_CASE("high margin requirement as a linear count constraint") {
  const double snm_r = 0.07;
  const OutputLevels drv{0.33, 0.02};
  const PairCoefficients h = pair_coefficients(drv, fig9_coeffs(), snm_r);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 40.0);
  int near = 0;
  for (int i = 0; i < 5000; ++i) {
    const double nn = u(rng);
    // counts on both sides of the boundary n_p = -h12 n_n
    const double np = -h.h12 * nn * std::exp(std::uniform_real_distribution<double>(-0.5, 0.5)(rng));
    const NoiseMargins m = snm_of_pair(drv, fig9_coeffs(), np, nn);
    const bool margin_ok = m.snmh >= snm_r;
    const bool linear_ok = np + h.h12 * nn <= 0.0;
    if (std::fabs(m.snmh - snm_r) > 1e-12) CHECK(margin_ok == linear_ok);
    if (std::fabs(m.snmh - snm_r) < 0.01) ++near;
    const bool low_ok = m.snml >= snm_r;
    const bool low_linear = h.h21 * np + nn <= 0.0;
    if (std::fabs(m.snml - snm_r) > 1e-12) CHECK(low_ok == low_linear);
  }
  CHECK(near > 100);
}

TEST_CASE("sensitization cases") {
  const CellLibrary lib = reference_library();
  const Stage& inv = lib.cell("INV").stages[0];
  const auto ci = sensitization_cases(inv, "A");
  REQUIRE(ci.size() == 1);
  CHECK(ci[0].p_group == std::vector<int>{0});
  CHECK(ci[0].n_group == std::vector<int>{1});

  const Stage& nand = lib.cell("NAND2").stages[0];
  const auto ca = sensitization_cases(nand, "A");
  REQUIRE(ca.size() == 1);
  CHECK(ca[0].other_inputs == std::vector<std::pair<std::string, int>>{{"B", 1}});
  CHECK(ca[0].p_group == std::vector<int>{0});  // PA
  CHECK(ca[0].n_group == std::vector<int>{2});  // NA
  const auto cb = sensitization_cases(nand, "B");
  REQUIRE(cb.size() == 1);
  CHECK(cb[0].p_group == std::vector<int>{1});
  CHECK(cb[0].n_group == std::vector<int>{3});

  // out = (A + B C)'
  const Stage& aoi = lib.cell("AOI21").stages[0];
  const auto cs = sensitization_cases(aoi, "A");
  REQUIRE(cs.size() == 3);
  std::vector<std::pair<int, int>> states;
  for (const auto& c : cs) {
    states.emplace_back(c.other_inputs.at(0).second, c.other_inputs.at(1).second);
    CHECK(c.p_group == std::vector<int>{0});
    CHECK(c.n_group == std::vector<int>{3});
  }
  CHECK(states == std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {0, 1}});
}

TEST_CASE("input gating two parallel pull-down devices") {
  // out = (A + A B)' with devices A1 and A2 on separate pull-down paths.
  Stage s;
  s.name = "s0";
  s.inputs = {"A", "B"};
  s.output = "Y";
  s.transistors = {{"PA", Polarity::P, "A", 1, 0},
                   {"PB", Polarity::P, "B", 1, 0},
                   {"A1", Polarity::N, "A", 1, 0},
                   {"A2", Polarity::N, "A", 1, 0},
                   {"NB", Polarity::N, "B", 1, 0}};
  s.pull_up = {{0}};
  s.pull_down = {{2}, {3, 4}};
  const auto cs = sensitization_cases(s, "A");
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].other_inputs.at(0).second == 0);
  CHECK(cs[0].n_group == std::vector<int>{2});
  CHECK(cs[1].other_inputs.at(0).second == 1);
  CHECK(cs[1].n_group == std::vector<int>{2, 3});
  CHECK(sensitization_cases(s, "B").empty());  // B never changes the output alone
}

TEST_CASE("drive chain scales pin capacitance and nominal drive by the step factor") {
  const CellLibrary lib = reference_library();
  const TechnologyParams tech;
  for (const char* name : {"INV", "NAND2", "NOR2", "AOI21"}) {
    const StandardCell& c = lib.cell(name);
    double prev_cap = 0.0, prev_current = 0.0;
    for (int d = 0; d <= c.max_drive(); ++d) {
      std::vector<std::string> pins;
      test::Builder bld;
      for (std::size_t k = 0; k < c.inputs.size(); ++k) {
        pins.push_back(std::string(1, static_cast<char>('a' + k)));
        bld.pi(pins.back());
      }
      const Design des = bld.gate("u", name, pins, "y", 0, 0, d).po("y").build();
      const PlacedCircuit pc(des, lib);
      const ArcTerms t = build_arc_terms(pc);
      const Vec counts = pc.incidence() * Vec::Constant(pc.region_count(), tech.lambda_w());
      const double current = t.i2_per_cnt[0] * (t.drive_group.row(0) * counts).sum() + t.i2_fixed[0] +
                             t.i1_per_cnt[0] * (t.drive_group.row(0) * counts).sum() + t.i1_fixed[0];
      const double cap = c.pin_capacitance(c.inputs[0], d);
      if (d > 0) {
        CHECK(cap == doctest::Approx(prev_cap * c.drive_scale));
        CHECK(current == doctest::Approx(prev_current * c.drive_scale));
      }
      prev_cap = cap;
      prev_current = current;
    }
  }
}

TEST_CASE("reference library invariants and JSON round trip") {
  const CellLibrary lib = reference_library();
  for (const auto& c : lib.cells())
    for (const auto& s : c.stages)
      for (std::size_t i = 0; i < s.inputs.size(); ++i) {
        CHECK(!s.cases[i].empty());
        for (const auto& cm : s.cases[i]) {
          CHECK(cm.snm.t_voh0 > cm.snm.t_vih0);
          CHECK(cm.snm.t_vih0 > cm.snm.t_vil0);
          CHECK(cm.snm.t_vil0 > cm.snm.t_vol0);
          CHECK(cm.snm.t_vih1 > 0.0);
          CHECK(cm.snm.t_vil1 > 0.0);
        }
      }
  const std::string text = serialize_cell_library(lib);
  const CellLibrary back = parse_cell_library(text);
  CHECK(serialize_cell_library(back) == text);
  CHECK(back.cells().size() == lib.cells().size());
  CHECK(back.cell("AOI21").stages[0].cases[0][1].arc == lib.cell("AOI21").stages[0].cases[0][1].arc);
  CHECK_THROWS_AS(parse_cell_library(R"({"format": "other"})"), InputError);
  CHECK_THROWS_AS(parse_cell_library("not json"), InputError);
}

TEST_CASE("library rejects degenerate coefficients") {
  SnmCoeffs bad = fig9_coeffs();
  bad.t_vih1 = 0.0;
  CHECK_THROWS_AS(bad.validate("x"), InputError);
  SnmCoeffs order = fig9_coeffs();
  order.t_vil0 = 0.25;
  CHECK_THROWS_AS(order.validate("x"), InputError);
  StageArcModel a;
  CHECK_THROWS_AS(a.validate("x"), InputError);
}
