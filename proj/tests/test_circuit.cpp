#include "cntco/circuit.hpp"
#include "cntco/optimizer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace cntco;
using test::Builder;

namespace {

// Structural invariants every placed circuit must satisfy.
void check_invariants(const PlacedCircuit& pc) {
  const SpMat& b = pc.incidence();
  REQUIRE(b.rows() == static_cast<Eigen::Index>(pc.transistors().size()));
  REQUIRE(b.cols() == pc.region_count());
  std::vector<std::pair<int, int>> ranges;
  for (const auto& r : pc.rows()) {
    ranges.emplace_back(r.p_begin, r.p_begin + r.p_height);
    ranges.emplace_back(r.n_begin, r.n_begin + r.n_height);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) CHECK(ranges[i].first >= ranges[i - 1].second);
  for (std::size_t i = 0; i < pc.transistors().size(); ++i) {
    const auto& t = pc.transistors()[i];
    double sum = 0.0;
    int lo = pc.region_count(), hi = -1;
    for (SpMat::InnerIterator it(b, static_cast<Eigen::Index>(i)); it; ++it) {
      CHECK(it.value() == 1.0);
      sum += it.value();
      lo = std::min(lo, static_cast<int>(it.col()));
      hi = std::max(hi, static_cast<int>(it.col()));
    }
    CHECK(sum == t.width);
    CHECK(t.width >= 1);
    CHECK(hi - lo + 1 == t.width);  // consecutive
    const auto& rt = pc.rows()[t.row];
    if (t.polarity == Polarity::P)
      CHECK((lo >= rt.p_begin && hi < rt.p_begin + rt.p_height));
    else
      CHECK((lo >= rt.n_begin && hi < rt.n_begin + rt.n_height));
  }
}

std::vector<double> dense_row(const SpMat& b, int i, int from, int count) {
  std::vector<double> out(count, 0.0);
  for (SpMat::InnerIterator it(b, i); it; ++it)
    if (it.col() >= from && it.col() < from + count) out[it.col() - from] = it.value();
  return out;
}

}  // namespace

TEST_CASE("incidence rows follow transistor intervals") {
  const CellLibrary lib = test::fig9_library();
  const Design d =
      Builder().pi("a").gate("u1", "INV3", {"a"}, "x", 0, 0).gate("u2", "INV3", {"x"}, "y", 0, 3).po("y").build();
  const PlacedCircuit pc(d, lib);
  check_invariants(pc);
  const int p0 = pc.rows()[0].p_begin;
  CHECK(dense_row(pc.incidence(), 0, p0, 6) == std::vector<double>{1, 1, 1, 0, 0, 0});
  CHECK(dense_row(pc.incidence(), 2, p0, 6) == std::vector<double>{0, 0, 0, 1, 1, 1});
  CHECK(build_incidence(d, lib).isApprox(pc.incidence()));

  const Design w1 = Builder().pi("a").gate("u1", "INV1", {"a"}, "y").po("y").build();
  const PlacedCircuit p1(w1, lib);
  for (int i = 0; i < p1.incidence().rows(); ++i) CHECK(p1.incidence().row(i).nonZeros() == 1);
}

TEST_CASE("stacked cells share regions and counts") {
  const CellLibrary lib = reference_library();
  const Design d =
      Builder().pi("a").gate("u1", "INV", {"a"}, "x", 0, 0).gate("u2", "INV", {"a"}, "y", 0, 0).po("x").po("y").build();
  const PlacedCircuit pc(d, lib);
  check_invariants(pc);
  const SpMat& b = pc.incidence();
  CHECK(Mat(b.row(0)) == Mat(b.row(2)));  // both p devices
  CHECK(Mat(b.row(1)) == Mat(b.row(3)));
  const IntRowMat n = sample_regions_discrete({0.5, 0.01, 0.04, 1.0}, {}, pc.region_keys(), 500, 3);
  const RowMat s = b * n.cast<double>();
  CHECK(s.row(0) == s.row(2));
  CHECK(s.row(1) == s.row(3));
}

TEST_CASE("generated designs satisfy the placement invariants") {
  const CellLibrary lib = reference_library();
  for (bool aligned : {true, false}) {
    GeneratorOptions o;
    o.gates = 1000;
    o.aligned = aligned;
    o.seed = 5;
    const Design d = generate_design(o, lib);
    const PlacedCircuit pc(d, lib);
    check_invariants(pc);
    CHECK(d.netlist.instances.size() == 1000);
    // every instance input driven by exactly one net driver
    for (const auto& st : pc.stages())
      for (int n : st.input_nets) {
        const auto& net = pc.nets()[n];
        CHECK(((net.primary_input >= 0) != !net.drivers.empty()));
      }
    const UpsizeResult up = selective_upsize(min_width_upsize(d, 4), lib, 50);
    const PlacedCircuit pu(up.design, lib);
    check_invariants(pu);
  }
}

TEST_CASE("combinational cycles are rejected") {
  const CellLibrary lib = reference_library();
  const Design d = Builder().pi("a").gate("u1", "NAND2", {"a", "y"}, "x").gate("u2", "INV", {"x"}, "y").po("y").build();
  CHECK_THROWS_AS(PlacedCircuit(d, lib), InputError);
}

TEST_CASE("minimum-width upsizing") {
  const CellLibrary lib = test::fig9_library();
  const Design d = Builder().pi("a").gate("u1", "INV1", {"a"}, "x").gate("u2", "INV3", {"x"}, "y").po("y").build();
  const Design same = min_width_upsize(d, 1);
  CHECK(serialize_design(same) == serialize_design(d));

  const PlacedCircuit pc(min_width_upsize(d, 3), lib);
  check_invariants(pc);
  for (const auto& t : pc.transistors()) CHECK(t.width == 3);
  const PlacedCircuit p4(min_width_upsize(d, 4), lib);
  for (const auto& t : p4.transistors()) CHECK(t.width == 4);
  CHECK_THROWS_AS(min_width_upsize(d, 0), InputError);

  // energy never drops after widening, same X sample
  const TechnologyParams tech;
  AnalysisOptions ao;
  ao.trials = 200;
  const ProcessingParams p;
  const NominalReference ref{0, 1e-10, 1e-15, {}, {}};
  double prev = 0.0;
  for (int w = 1; w <= 5; ++w) {
    const PointAnalyzer an(min_width_upsize(d, w), lib, tech, ao);
    const double e = an.analyze(p, ref, false).metrics.e_tot;
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("selective upsizing picks the largest fan-out") {
  const CellLibrary lib = reference_library();
  // a drives b plus 7 sinks, b drives c plus 3 sinks, c drives 2 sinks
  Builder bld;
  bld.pi("in").gate("a", "INV", {"in"}, "na").gate("b", "INV", {"na"}, "nb").gate("c", "INV", {"nb"}, "nc");
  int sink = 0;
  auto sinks = [&](const std::string& net, int count) {
    for (int i = 0; i < count; ++i) {
      const std::string out = "s" + std::to_string(sink);
      bld.gate(out, "INV", {net}, out + "o").po(out + "o");
      ++sink;
    }
  };
  sinks("na", 7);
  sinks("nb", 3);
  sinks("nc", 2);
  const Design d = bld.build();
  const std::vector<double> fo = instance_fanouts(d, lib);
  CHECK(fo[0] == doctest::Approx(8.0));
  CHECK(fo[1] == doctest::Approx(4.0));
  CHECK(fo[2] == doctest::Approx(2.0));

  const UpsizeResult none = selective_upsize(d, lib, 0);
  CHECK(none.applied == 0);
  CHECK(serialize_design(none.design) == serialize_design(d));

  const UpsizeResult one = selective_upsize(d, lib, 1);
  CHECK(one.upsized == std::vector<int>{0});
  for (std::size_t i = 0; i < d.netlist.instances.size(); ++i)
    CHECK(one.design.netlist.instances[i].drive == (i == 0 ? 1 : 0));
}

TEST_CASE("selective upsizing re-sorts after every step") {
  // Hand trace, all pin capacitances c at X1:
  //   a drives b, c, d, e (4c / c = 4); b drives c, d, e (3c / c = 3).
  //   step 1: a (4) -> X2, a = 4c / 2c = 2
  //   step 2: b (3) -> X2, b = 3c / 2c = 1.5, a = (2c + 3c) / 2c = 2.5
  //   step 3: a (2.5) -> X4
  //   step 4: a = 5c / 4c = 1.25 < b = 1.5 -> b
  const CellLibrary lib = reference_library();
  const Design d = Builder()
                       .pi("in")
                       .gate("a", "INV", {"in"}, "na")
                       .gate("b", "INV", {"na"}, "nb")
                       .gate("c", "NAND2", {"na", "nb"}, "y1")
                       .gate("d", "NAND2", {"na", "nb"}, "y2")
                       .gate("e", "NAND2", {"na", "nb"}, "y3")
                       .po("y1")
                       .po("y2")
                       .po("y3")
                       .build();
  CHECK(selective_upsize(d, lib, 2).upsized == std::vector<int>{0, 1});
  CHECK(selective_upsize(d, lib, 4).upsized == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("selective upsizing stops when every cell is at max drive") {
  const CellLibrary lib = reference_library();
  const Design d = Builder().pi("a").gate("u", "INV", {"a"}, "y").po("y").build();
  const UpsizeResult r = selective_upsize(d, lib, 10);
  CHECK(r.applied == lib.cell("INV").max_drive());
  CHECK(r.design.netlist.instances[0].drive == lib.cell("INV").max_drive());
  const PlacedCircuit pc(r.design, lib);
  check_invariants(pc);
}

TEST_CASE("netlist JSON round trip") {
  const CellLibrary lib = reference_library();
  GeneratorOptions o;
  o.gates = 60;
  const Design d = generate_design(o, lib);
  const std::string text = serialize_design(d);
  CHECK(serialize_design(parse_design(text)) == text);
  CHECK_THROWS_AS(parse_design(R"({"format":"cntco-netlist/0"})"), InputError);
  CHECK_THROWS_AS(parse_design("{"), InputError);
}
