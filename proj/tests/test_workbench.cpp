#include "cntco/workbench.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace cntco;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = CNTCO_TEST_DATA;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cntco");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file under a directory, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) m[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return m;
}

class Scratch {
 public:
  explicit Scratch(const std::string& tag) {
    dir_ = fs::temp_directory_path() / ("cntco-wb-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    fs::copy_file(kData + "/golden_netlist.json", dir_ / "netlist.json");
    REQUIRE(cli({"library", "--out", dir_.string()}).code == kExitOk);
  }
  ~Scratch() { fs::remove_all(dir_); }
  const fs::path& dir() const { return dir_; }
  fs::path config(const std::string& name, json j) const {
    j["schema_version"] = kConfigFormat;
    if (!j.contains("netlist")) j["netlist"] = "netlist.json";
    if (!j.contains("library")) j["library"] = "refcell.json";
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

 private:
  fs::path dir_;
};

void check_schema_headers(const fs::path& dir) {
  for (const auto& [name, text] : tree(dir)) {
    CAPTURE(name);
    if (name.ends_with(".json") && name != "netlist.json")
      CHECK(json::parse(text).contains("schema_version"));
    else if (name.ends_with(".csv"))
      CHECK(text.starts_with("# schema_version="));
  }
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(R"({"schema_version": "cntco-config/1", "netlist": "n.json",
      "technology": {"v_dd": 0.6}, "processing": {"idc": 0.3}, "seeds": {"x": 9},
      "search": {"delta_e_band": [0.01, 0.03], "hard_limit": {"idc": 0.2}}})",
                                       "/cfg/run.json");
  CHECK(c.base_dir == fs::path("/cfg"));
  CHECK(c.out_dir == fs::path("/cfg/out"));
  CHECK(c.tech.v_dd == 0.6);
  CHECK(c.tech.snm_r == doctest::Approx(0.1));
  CHECK(c.processing.idc == 0.3);
  CHECK(c.processing.p_m == 0.01);
  CHECK(c.analysis.seed == 9);
  CHECK(c.search.delta_e_band_hi == 0.03);
  CHECK(c.search.hard_limit[0] == 0.2);

  CliOverrides ov;
  ov.seed_override = 100;
  ov.workers = 4;
  ov.out_dir = "elsewhere";
  const RunConfig o = parse_run_config(R"({"schema_version": "cntco-config/1"})", "run.json", ov);
  CHECK(o.seeds.x == 100);
  CHECK(o.seeds.generator == 106);
  CHECK(o.analysis.mvn.workers == 4);
  CHECK(o.out_dir == fs::path("elsewhere"));

  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": "cntco-config/0"})", "c.json"), InputError);
  CHECK_THROWS_AS(parse_run_config("{", "c.json"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": "cntco-config/1", "processing": {"p_m": 1.5}})", "c.json"),
                  InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"schema_version": "cntco-config/1", "search": {"selection": "x"}})", "c.json"),
                  InputError);
}

TEST_CASE("input errors exit with code 2 and name the field") {
  Scratch s("err");
  const fs::path cfg = s.config("c.json", {{"library", "missing.json"}});
  const Run r = cli({"analyze", "--config", cfg.string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("'library'") != std::string::npos);

  json no_lib = {{"schema_version", kConfigFormat}, {"netlist", "netlist.json"}};
  std::ofstream(s.dir() / "n.json") << no_lib.dump();
  const Run r2 = cli({"gen", "--config", (s.dir() / "n.json").string()});
  CHECK(r2.code == kExitInput);
  CHECK(r2.err.find("'library'") != std::string::npos);

  CHECK(cli({"analyze"}).code == kExitInput);
  CHECK(cli({"bogus"}).code == kExitInput);
  CHECK(cli({"analyze", "--config", cfg.string(), "--workers", "0"}).code == kExitInput);
}

TEST_CASE("gen writes valid, reproducible netlists") {
  Scratch s("gen");
  const fs::path one = s.config("one.json", {{"generator", {{"gates", 1}, {"output", "one.json"}}}});
  REQUIRE(cli({"gen", "--config", one.string(), "--out", (s.dir() / "a").string()}).code == kExitOk);
  const Design d = load_design((s.dir() / "a/one.json").string());
  REQUIRE(d.netlist.instances.size() == 1);
  CHECK(d.netlist.instances[0].cell == "INV");

  const fs::path k = s.config("k.json", {{"generator", {{"gates", 300}}}, {"seeds", {{"generator", 7}}}});
  REQUIRE(cli({"gen", "--config", k.string(), "--out", (s.dir() / "b").string()}).code == kExitOk);
  REQUIRE(cli({"gen", "--config", k.string(), "--out", (s.dir() / "c").string()}).code == kExitOk);
  const std::string b = slurp(s.dir() / "b/netlist.json");
  CHECK(b == slurp(s.dir() / "c/netlist.json"));
  REQUIRE(cli({"gen", "--config", k.string(), "--out", (s.dir() / "d").string(), "--seed-override", "8"}).code ==
          kExitOk);
  CHECK(b != slurp(s.dir() / "d/netlist.json"));
}

TEST_CASE("analyze is deterministic and independent of worker count") {
  Scratch s("det");
  const fs::path cfg = s.config("c.json", {{"analysis", {{"trials", 400}, {"yield_trials", 20000}}}});
  std::map<std::string, std::string> first;
  for (const char* w : {"1", "1", "8"}) {
    const fs::path out = s.dir() / ("out" + std::string(w) + std::to_string(first.size()));
    REQUIRE(cli({"analyze", "--config", cfg.string(), "--workers", w, "--out", out.string()}).code == kExitOk);
    const auto files = tree(out);
    CHECK(files.size() == 3);
    if (first.empty())
      first = files;
    else
      CHECK(files == first);
    check_schema_headers(out);
  }
}

TEST_CASE("analyze golden summary") {
  Scratch s("golden");
  std::ifstream pin(kData + "/golden_point.json");
  REQUIRE(pin);
  const json point = json::parse(pin);
  const int k = point.at("k_opt").get<int>() + 3;
  const fs::path cfg = s.config(
      "c.json", {{"seeds", {{"x", 21}, {"mvn", 22}}}, {"analysis", {{"trials", 1000}, {"k_sel_upsize", k}}}});
  REQUIRE(cli({"analyze", "--config", cfg.string()}).code == kExitOk);
  const json got = json::parse(slurp(s.dir() / "out/summary.json"));

  // Same point as the library-level golden, which is checked against a dense oracle.
  const auto hexval = [&](const char* key) { return std::strtod(point.at(key).get<std::string>().c_str(), nullptr); };
  CHECK(got["point"]["metrics"]["t95_s"].get<double>() == hexval("t95"));
  CHECK(got["point"]["metrics"]["e_tot_j"].get<double>() == hexval("e_tot"));
  CHECK(got["point"]["metrics"]["pnmv"].get<double>() == hexval("pnmv"));
  CHECK(got["reference"]["t_nom_opt_s"].get<double>() == hexval("t_nom_opt"));

  const std::string golden_path = kData + "/golden_summary.json";
  if (std::getenv("CNTCO_UPDATE_GOLDEN")) {
    std::ofstream(golden_path) << got.dump(2) << "\n";
    MESSAGE("golden file rewritten");
  }
  std::ifstream gin(golden_path);
  REQUIRE(gin);
  CHECK(got == json::parse(gin));
}

TEST_CASE("infeasible optimize exits 1 with a Pareto report") {
  Scratch s("inf");
  const fs::path cfg = s.config(
      "c.json", {{"analysis", {{"trials", 500}}},
                 {"search",
                  {{"hard_limit", {{"idc", 0.5}, {"p_m", 0.01}, {"p_rs", 0.04}}},
                   {"delay_penalty_max", 0.001},
                   {"max_steps", 20}}}});
  const Run r = cli({"optimize", "--config", cfg.string()});
  CHECK(r.code == kExitInfeasible);
  const json out = json::parse(slurp(s.dir() / "out/search.json"));
  CHECK(out["found"] == false);
  CHECK_FALSE(out["pareto"].empty());
  CHECK_FALSE(out["message"].get<std::string>().empty());
  CHECK_FALSE(fs::exists(s.dir() / "out/route.csv"));
  check_schema_headers(s.dir() / "out");
}

TEST_CASE("optimize writes the route table") {
  Scratch s("route");
  const fs::path cfg =
      s.config("c.json", {{"node_label", "n5"},
                          {"analysis", {{"trials", 500}}},
                          {"search", {{"delay_penalty_max", 0.2}, {"pnmv_max", 0.5}, {"delta_e_max", 0.2}}}});
  const Run r = cli({"optimize", "--config", cfg.string()});
  REQUIRE(r.code == kExitOk);
  const std::string route = slurp(s.dir() / "out/route.csv");
  std::istringstream in(route);
  std::string header, columns, row;
  std::getline(in, header);
  std::getline(in, columns);
  std::getline(in, row);
  CHECK(header.starts_with("# schema_version="));
  CHECK(columns == "node_label,v_dd,idc,p_m,p_rs,p_rm");
  CHECK(row.starts_with("n5,"));
  const std::string traj = slurp(s.dir() / "out/trajectory.csv");
  CHECK(traj.find("point_id,branch_id,idc,p_m,p_rs,delta_e,delay_penalty,pnmv,edp95") != std::string::npos);
  check_schema_headers(s.dir() / "out");
}

TEST_CASE("mvncdf subcommand") {
  Scratch s("mvn");
  std::ofstream(s.dir() / "m.txt") << "# C then u\n1 0.5\n0.5 1\n0 0\n";
  const fs::path cfg = s.config("c.json", {{"mvncdf", {{"input", "m.txt"}}}});
  REQUIRE(cli({"mvncdf", "--config", cfg.string()}).code == kExitOk);
  const json r = json::parse(slurp(s.dir() / "out/mvncdf.json"));
  CHECK(r["schema_version"] == "cntco-mvncdf/1");
  CHECK(std::fabs(r["probability"].get<double>() - 1.0 / 3.0) < 1e-4);

  CHECK_THROWS_AS(parse_mvn_text("1 2\n3\n"), InputError);
  CHECK_THROWS_AS(parse_mvn_text("1 x\n"), InputError);
  CHECK_THROWS_AS(parse_mvn_text("1\n"), InputError);
  const MvnProblem p = parse_mvn_text("2\n0.5\n");
  CHECK(p.c(0, 0) == 2.0);
  CHECK(p.u[0] == 0.5);
}

TEST_CASE("validate emits schema-tagged reports") {
  Scratch s("val");
  const fs::path cfg =
      s.config("c.json", {{"validate",
                           {{"distribution", {{"trials", 300}}},
                            {"pnmv_sweep", {{"idcs", {0.5, 1.0}}, {"trials", 20000}}},
                            {"model_comparison", {{"k_values", {0, 2}}, {"trials", 200}}}}}});
  std::string first;
  for (const char* w : {"1", "3"}) {
    const fs::path out = s.dir() / ("o" + std::string(w));
    REQUIRE(cli({"validate", "--config", cfg.string(), "--workers", w, "--out", out.string()}).code == kExitOk);
    const json v = json::parse(slurp(out / "validation.json"));
    CHECK(v.contains("distribution"));
    CHECK(v.contains("pnmv_sweep"));
    CHECK(v.contains("model_comparison"));
    check_schema_headers(out);
    const std::string all = slurp(out / "validation.json") + slurp(out / "pnmv_sweep.csv");
    if (first.empty())
      first = all;
    else
      CHECK(all == first);
  }
}
