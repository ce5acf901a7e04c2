#include "cntco/cell_library.hpp"

#include "cntco/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cntco {

using nlohmann::json;

void StageArcModel::validate(const std::string& where) const {
  const double v[] = {i1_per_cnt, i1_fixed, i2_per_cnt, i2_fixed, c_par_per_cnt, c_par_fixed, c_in};
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError(where + ": arc coefficients must be finite and >= 0");
  if (!(i1_fixed + i2_fixed + i1_per_cnt + i2_per_cnt > 0.0))
    throw InputError(where + ": arc has no drive current");
}

StageArcModel StageArcModel::scaled(double factor) const {
  StageArcModel s = *this;
  s.i1_fixed *= factor;
  s.i2_fixed *= factor;
  s.c_par_fixed *= factor;
  s.c_in *= factor;
  return s;
}

void SnmCoeffs::validate(const std::string& where) const {
  if (!(t_voh0 > t_vih0 && t_vih0 > t_vil0 && t_vil0 > t_vol0))
    throw InputError(where + ": SNM coefficients must satisfy t_voh0 > t_vih0 > t_vil0 > t_vol0");
  if (!(t_vih1 > 0.0) || !(t_vil1 > 0.0)) throw InputError(where + ": t_vih1 and t_vil1 must be > 0");
}

VtcParams eval_vtc_params(const SnmCoeffs& c, double n_p, double n_n) {
  if (!(n_p > 0.0) || !(n_n > 0.0)) throw InputError("VTC parameters need positive CNT counts");
  const double lr = std::log10(n_p / n_n);
  return {c.t_voh0, c.t_vih0 + c.t_vih1 * lr, c.t_vil0 + c.t_vil1 * lr, c.t_vol0};
}

OutputLevels worst_output_levels(std::span<const SnmCoeffs> sets) {
  if (sets.empty()) throw InputError("driver has no SNM parameter sets");
  OutputLevels o{sets[0].t_voh0, sets[0].t_vol0};
  for (const auto& s : sets) {
    o.v_oh = std::min(o.v_oh, s.t_voh0);
    o.v_ol = std::max(o.v_ol, s.t_vol0);
  }
  return o;
}

NoiseMargins snm_of_pair(const OutputLevels& driver, const SnmCoeffs& loader, double n_p, double n_n) {
  const VtcParams ld = eval_vtc_params(loader, n_p, n_n);
  NoiseMargins m;
  m.snmh = driver.v_oh - ld.v_ih;
  m.snml = ld.v_il - driver.v_ol;
  m.snm = std::min(m.snmh, m.snml);
  return m;
}

NoiseMargins snm_of_pair(const SnmCoeffs& driver, const SnmCoeffs& loader, double n_p, double n_n) {
  return snm_of_pair(OutputLevels{driver.t_voh0, driver.t_vol0}, loader, n_p, n_n);
}

NoiseMargins snm_of_pair(std::span<const SnmCoeffs> driver_sets, const SnmCoeffs& loader, double n_p, double n_n) {
  return snm_of_pair(worst_output_levels(driver_sets), loader, n_p, n_n);
}

int Stage::input_index(std::string_view pin) const {
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i] == pin) return static_cast<int>(i);
  return -1;
}

namespace {

bool gate_value(const Stage& s, const Transistor& t, std::uint32_t state) {
  const int g = s.input_index(t.gate);
  return (state >> g) & 1u;
}

bool device_on(const Stage& s, int idx, std::uint32_t state) {
  const Transistor& t = s.transistors[idx];
  const bool g = gate_value(s, t, state);
  return t.polarity == Polarity::P ? !g : g;
}

bool path_on(const Stage& s, const std::vector<int>& path, std::uint32_t state, int skip = -1) {
  for (int idx : path)
    if (idx != skip && !device_on(s, idx, state)) return false;
  return true;
}

bool network_on(const Stage& s, const std::vector<std::vector<int>>& paths, std::uint32_t state) {
  return std::any_of(paths.begin(), paths.end(), [&](const auto& p) { return path_on(s, p, state); });
}

// Devices gated by `input` lying on a path whose other devices all conduct.
std::vector<int> conducting_group(const Stage& s, const std::vector<std::vector<int>>& paths, int input,
                                  std::uint32_t state) {
  std::set<int> group;
  for (const auto& path : paths) {
    for (int idx : path) {
      if (s.input_index(s.transistors[idx].gate) != input) continue;
      bool others_on = true;
      for (int o : path)
        if (s.transistors[o].gate != s.transistors[idx].gate && !device_on(s, o, state)) others_on = false;
      if (others_on) group.insert(idx);
    }
  }
  return {group.begin(), group.end()};
}

void validate_stage(const Stage& s, const std::string& where) {
  if (s.inputs.empty()) throw InputError(where + ": stage has no inputs");
  if (s.inputs.size() > 16) throw InputError(where + ": too many stage inputs");
  if (s.transistors.empty()) throw InputError(where + ": stage has no transistors");
  for (const auto& t : s.transistors) {
    if (s.input_index(t.gate) < 0) throw InputError(where + ": transistor " + t.name + " gate is not a stage input");
    if (t.width < 1) throw InputError(where + ": transistor " + t.name + " width must be >= 1");
    if (t.offset < 0) throw InputError(where + ": transistor " + t.name + " offset must be >= 0");
  }
  auto check_net = [&](const std::vector<std::vector<int>>& paths, Polarity pol, const char* label) {
    if (paths.empty()) throw InputError(where + ": empty " + label + " network");
    for (const auto& p : paths) {
      if (p.empty()) throw InputError(where + ": empty path in " + label);
      for (int idx : p) {
        if (idx < 0 || idx >= static_cast<int>(s.transistors.size()))
          throw InputError(where + ": bad transistor reference in " + label);
        if (s.transistors[idx].polarity != pol) throw InputError(where + ": wrong polarity in " + label);
      }
    }
  };
  check_net(s.pull_up, Polarity::P, "pull_up");
  check_net(s.pull_down, Polarity::N, "pull_down");
  const std::uint32_t states = 1u << s.inputs.size();
  for (std::uint32_t st = 0; st < states; ++st) {
    const bool up = network_on(s, s.pull_up, st);
    const bool down = network_on(s, s.pull_down, st);
    if (up == down) throw InputError(where + ": pull-up and pull-down networks are not complementary");
  }
}

}  // namespace

bool Stage::evaluate(std::uint32_t state) const { return network_on(*this, pull_up, state); }

double Stage::pin_capacitance(int input) const {
  double c = 0.0;
  for (const auto& cm : cases.at(input)) c = std::max(c, cm.arc.c_in);
  return c;
}

std::vector<SensitizationCase> sensitization_cases(const Stage& s, int input) {
  if (input < 0 || input >= static_cast<int>(s.inputs.size())) throw InputError("input does not belong to stage");
  std::vector<SensitizationCase> out;
  const std::uint32_t k = static_cast<std::uint32_t>(s.inputs.size());
  const std::uint32_t bit = 1u << input;
  for (std::uint32_t st = 0; st < (1u << k); ++st) {
    if (st & bit) continue;
    const std::uint32_t lo = st, hi = st | bit;
    if (s.evaluate(lo) == s.evaluate(hi)) continue;
    SensitizationCase c;
    for (std::uint32_t j = 0; j < k; ++j)
      if (static_cast<int>(j) != input) c.other_inputs.emplace_back(s.inputs[j], static_cast<int>((st >> j) & 1u));
    c.p_group = conducting_group(s, s.pull_up, input, lo);
    c.n_group = conducting_group(s, s.pull_down, input, hi);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<SensitizationCase> sensitization_cases(const Stage& s, std::string_view input) {
  return sensitization_cases(s, s.input_index(input));
}

void attach_case_models(Stage& stage, const std::map<std::string, InputModelSpec>& models) {
  validate_stage(stage, "stage " + stage.name);
  stage.cases.assign(stage.inputs.size(), {});
  for (std::size_t i = 0; i < stage.inputs.size(); ++i) {
    auto it = models.find(stage.inputs[i]);
    if (it == models.end()) throw InputError("stage " + stage.name + ": no model for input " + stage.inputs[i]);
    const InputModelSpec& spec = it->second;
    for (auto& sc : sensitization_cases(stage, static_cast<int>(i))) {
      CaseModel cm{sc, spec.arc, spec.snm};
      for (const auto& ov : spec.overrides) {
        bool match = true;
        for (const auto& [pin, val] : ov.when) {
          auto f = std::find_if(sc.other_inputs.begin(), sc.other_inputs.end(),
                                [&](const auto& p) { return p.first == pin; });
          if (f == sc.other_inputs.end() || f->second != val) match = false;
        }
        if (match) {
          cm.arc = ov.arc;
          cm.snm = ov.snm;
        }
      }
      stage.cases[i].push_back(std::move(cm));
    }
  }
}

double StandardCell::scale_at(int drive) const {
  if (drive < 0 || drive > max_drive()) throw InputError("cell " + name + ": drive index out of range");
  return std::pow(drive_scale, drive);
}

int StandardCell::input_index(std::string_view pin) const {
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i] == pin) return static_cast<int>(i);
  return -1;
}

double StandardCell::pin_capacitance(std::string_view pin, int drive) const {
  double c = 0.0;
  for (const auto& st : stages) {
    const int k = st.input_index(pin);
    if (k >= 0) c += st.pin_capacitance(k);
  }
  return c * scale_at(drive);
}

void CellLibrary::add(StandardCell cell) {
  const std::string where = "cell " + cell.name;
  if (cell.name.empty()) throw InputError("cell without a name");
  if (index_.count(cell.name)) throw InputError(where + ": duplicate cell name");
  if (cell.stages.empty()) throw InputError(where + ": no stages");
  if (cell.drive_chain.empty()) throw InputError(where + ": empty drive chain");
  for (std::size_t i = 1; i < cell.drive_chain.size(); ++i)
    if (cell.drive_chain[i] <= cell.drive_chain[i - 1]) throw InputError(where + ": drive chain must increase");
  if (!(cell.drive_scale > 1.0)) throw InputError(where + ": drive_scale must be > 1");
  std::set<std::string> driven(cell.inputs.begin(), cell.inputs.end());
  for (const auto& st : cell.stages) {
    const std::string sw = where + " stage " + st.name;
    validate_stage(st, sw);
    if (st.cases.size() != st.inputs.size()) throw InputError(sw + ": case models not attached");
    for (std::size_t i = 0; i < st.inputs.size(); ++i) {
      if (st.cases[i].empty()) throw InputError(sw + ": input " + st.inputs[i] + " is never sensitized");
      for (const auto& cm : st.cases[i]) {
        cm.arc.validate(sw);
        cm.snm.validate(sw);
      }
    }
    driven.insert(st.output);
  }
  for (const auto& st : cell.stages)
    for (const auto& in : st.inputs)
      if (!driven.count(in)) throw InputError(where + ": stage input " + in + " is undriven");
  bool has_output = std::any_of(cell.stages.begin(), cell.stages.end(),
                                [&](const Stage& s) { return s.output == cell.output; });
  if (!has_output) throw InputError(where + ": output pin " + cell.output + " has no driving stage");
  index_.emplace(cell.name, cells_.size());
  cells_.push_back(std::move(cell));
}

const StandardCell& CellLibrary::cell(std::string_view n) const {
  auto it = index_.find(n);
  if (it == index_.end()) throw InputError("unknown cell '" + std::string(n) + "'");
  return cells_[it->second];
}

bool CellLibrary::contains(std::string_view n) const { return index_.find(n) != index_.end(); }

std::vector<int> CellLibrary::available_widths() const {
  std::set<int> w;
  for (const auto& c : cells_)
    for (int d = 0; d <= c.max_drive(); ++d)
      for (const auto& st : c.stages)
        for (const auto& t : st.transistors) w.insert(static_cast<int>(std::lround(t.width * c.scale_at(d))));
  return {w.begin(), w.end()};
}

// ---------------------------------------------------------------- JSON

namespace {

json arc_to_json(const StageArcModel& a) {
  return json{{"i1_per_cnt", a.i1_per_cnt}, {"i1_fixed", a.i1_fixed},         {"i2_per_cnt", a.i2_per_cnt},
              {"i2_fixed", a.i2_fixed},     {"c_par_per_cnt", a.c_par_per_cnt}, {"c_par_fixed", a.c_par_fixed},
              {"c_in", a.c_in}};
}

json snm_to_json(const SnmCoeffs& s) {
  return json{{"t_voh0", s.t_voh0}, {"t_vih0", s.t_vih0}, {"t_vih1", s.t_vih1},
              {"t_vil0", s.t_vil0}, {"t_vil1", s.t_vil1}, {"t_vol0", s.t_vol0}};
}

double req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) throw InputError(where + ": missing numeric field '" + key + "'");
  return j[key].get<double>();
}

StageArcModel arc_from_json(const json& j, const std::string& w) {
  StageArcModel a;
  a.i1_per_cnt = req(j, "i1_per_cnt", w);
  a.i1_fixed = req(j, "i1_fixed", w);
  a.i2_per_cnt = req(j, "i2_per_cnt", w);
  a.i2_fixed = req(j, "i2_fixed", w);
  a.c_par_per_cnt = req(j, "c_par_per_cnt", w);
  a.c_par_fixed = req(j, "c_par_fixed", w);
  a.c_in = req(j, "c_in", w);
  return a;
}

SnmCoeffs snm_from_json(const json& j, const std::string& w) {
  SnmCoeffs s;
  s.t_voh0 = req(j, "t_voh0", w);
  s.t_vih0 = req(j, "t_vih0", w);
  s.t_vih1 = req(j, "t_vih1", w);
  s.t_vil0 = req(j, "t_vil0", w);
  s.t_vil1 = req(j, "t_vil1", w);
  s.t_vol0 = req(j, "t_vol0", w);
  return s;
}

std::vector<std::pair<std::string, int>> state_from_json(const json& j) {
  std::vector<std::pair<std::string, int>> v;
  for (auto it = j.begin(); it != j.end(); ++it) v.emplace_back(it.key(), it.value().get<int>());
  return v;
}

json state_to_json(const std::vector<std::pair<std::string, int>>& v) {
  json j = json::object();
  for (const auto& [k, x] : v) j[k] = x;
  return j;
}

Stage stage_from_json(const json& j, const std::string& cell) {
  Stage s;
  s.name = j.value("name", "");
  const std::string w = "cell " + cell + " stage " + s.name;
  s.inputs = j.at("inputs").get<std::vector<std::string>>();
  s.output = j.at("output").get<std::string>();
  std::map<std::string, int> by_name;
  for (const auto& t : j.at("transistors")) {
    Transistor tr;
    tr.name = t.at("name").get<std::string>();
    const std::string type = t.at("type").get<std::string>();
    if (type != "p" && type != "n") throw InputError(w + ": transistor type must be 'p' or 'n'");
    tr.polarity = type == "p" ? Polarity::P : Polarity::N;
    tr.gate = t.at("gate").get<std::string>();
    tr.width = t.at("width").get<int>();
    tr.offset = t.value("offset", 0);
    if (by_name.count(tr.name)) throw InputError(w + ": duplicate transistor " + tr.name);
    by_name[tr.name] = static_cast<int>(s.transistors.size());
    s.transistors.push_back(tr);
  }
  auto paths = [&](const char* key) {
    std::vector<std::vector<int>> out;
    for (const auto& p : j.at(key)) {
      std::vector<int> path;
      for (const auto& n : p) {
        auto it = by_name.find(n.get<std::string>());
        if (it == by_name.end()) throw InputError(w + ": unknown transistor in " + key);
        path.push_back(it->second);
      }
      out.push_back(std::move(path));
    }
    return out;
  };
  s.pull_up = paths("pull_up");
  s.pull_down = paths("pull_down");
  std::map<std::string, InputModelSpec> models;
  const json& jm = j.at("models");
  for (auto it = jm.begin(); it != jm.end(); ++it) {
    InputModelSpec spec;
    spec.arc = arc_from_json(it.value().at("arc"), w);
    spec.snm = snm_from_json(it.value().at("snm"), w);
    if (it.value().contains("cases"))
      for (const auto& c : it.value()["cases"])
        spec.overrides.push_back({state_from_json(c.at("when")), arc_from_json(c.at("arc"), w),
                                  snm_from_json(c.at("snm"), w)});
    models[it.key()] = spec;
  }
  attach_case_models(s, models);
  return s;
}

json stage_to_json(const Stage& s) {
  json j;
  j["name"] = s.name;
  j["inputs"] = s.inputs;
  j["output"] = s.output;
  json ts = json::array();
  for (const auto& t : s.transistors)
    ts.push_back({{"name", t.name},
                  {"type", t.polarity == Polarity::P ? "p" : "n"},
                  {"gate", t.gate},
                  {"width", t.width},
                  {"offset", t.offset}});
  j["transistors"] = ts;
  auto paths = [&](const std::vector<std::vector<int>>& ps) {
    json a = json::array();
    for (const auto& p : ps) {
      json q = json::array();
      for (int idx : p) q.push_back(s.transistors[idx].name);
      a.push_back(q);
    }
    return a;
  };
  j["pull_up"] = paths(s.pull_up);
  j["pull_down"] = paths(s.pull_down);
  json models = json::object();
  for (std::size_t i = 0; i < s.inputs.size(); ++i) {
    const auto& cs = s.cases[i];
    json m;
    m["arc"] = arc_to_json(cs.front().arc);
    m["snm"] = snm_to_json(cs.front().snm);
    json ov = json::array();
    for (std::size_t c = 1; c < cs.size(); ++c)
      if (!(cs[c].arc == cs.front().arc) || !(cs[c].snm == cs.front().snm))
        ov.push_back({{"when", state_to_json(cs[c].sensitization.other_inputs)},
                      {"arc", arc_to_json(cs[c].arc)},
                      {"snm", snm_to_json(cs[c].snm)}});
    if (!ov.empty()) m["cases"] = ov;
    models[s.inputs[i]] = m;
  }
  j["models"] = models;
  return j;
}

}  // namespace

CellLibrary parse_cell_library(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("cell library: invalid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kCellLibraryFormat)
    throw InputError(std::string("cell library: field 'format' must be '") + kCellLibraryFormat + "'");
  CellLibrary lib;
  try {
    lib.name = j.value("name", "unnamed");
    for (const auto& jc : j.at("cells")) {
      StandardCell c;
      c.name = jc.at("name").get<std::string>();
      c.inputs = jc.at("inputs").get<std::vector<std::string>>();
      c.output = jc.at("output").get<std::string>();
      c.sequential = jc.value("sequential", false);
      if (jc.contains("drive_chain")) c.drive_chain = jc["drive_chain"].get<std::vector<int>>();
      c.drive_scale = jc.value("drive_scale", 2.0);
      for (const auto& js : jc.at("stages")) c.stages.push_back(stage_from_json(js, c.name));
      lib.add(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("cell library: ") + e.what());
  }
  return lib;
}

CellLibrary load_cell_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open cell library '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cell_library(ss.str());
}

std::string serialize_cell_library(const CellLibrary& lib) {
  json j;
  j["format"] = kCellLibraryFormat;
  j["name"] = lib.name;
  json cells = json::array();
  for (const auto& c : lib.cells()) {
    json jc;
    jc["name"] = c.name;
    jc["inputs"] = c.inputs;
    jc["output"] = c.output;
    jc["sequential"] = c.sequential;
    jc["drive_chain"] = c.drive_chain;
    jc["drive_scale"] = c.drive_scale;
    json st = json::array();
    for (const auto& s : c.stages) st.push_back(stage_to_json(s));
    jc["stages"] = st;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

}  // namespace cntco
