#include "cntco/circuit.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace cntco {

using nlohmann::json;

Design parse_design(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("netlist: invalid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kNetlistFormat)
    throw InputError(std::string("netlist: field 'format' must be '") + kNetlistFormat + "'");
  Design d;
  Netlist& nl = d.netlist;
  try {
    nl.name = j.value("name", "circuit");
    nl.w_min = j.value("w_min", 1);
    nl.wire_cap_per_pin = j.value("wire_cap_per_pin", 0.0);
    nl.input_slew = j.value("input_slew", 5e-12);
    for (const auto& pi : j.at("primary_inputs")) nl.primary_inputs.push_back({pi.at("net"), pi.value("d_fix", 0.0)});
    nl.primary_outputs = j.at("primary_outputs").get<std::vector<std::string>>();
    std::map<std::string, int> by_name;
    for (const auto& ji : j.at("instances")) {
      Instance inst;
      inst.name = ji.at("name").get<std::string>();
      inst.cell = ji.at("cell").get<std::string>();
      inst.drive = ji.value("drive", 0);
      inst.inputs = ji.at("inputs").get<std::vector<std::string>>();
      inst.output = ji.at("output").get<std::string>();
      by_name[inst.name] = static_cast<int>(nl.instances.size());
      nl.instances.push_back(std::move(inst));
    }
    for (const auto& jr : j.at("placement").at("rows")) {
      PlacementRow row;
      row.p_height = jr.value("p_height", 0);
      row.n_height = jr.value("n_height", 0);
      for (const auto& jc : jr.at("cells")) {
        const std::string name = jc.at("instance").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw InputError("placement: unknown instance '" + name + "'");
        row.cells.push_back({it->second, jc.value("offset", 0)});
      }
      d.placement.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("netlist: ") + e.what());
  }
  return d;
}

Design load_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open netlist '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_design(ss.str());
}

std::string serialize_design(const Design& d) {
  const Netlist& nl = d.netlist;
  json j;
  j["format"] = kNetlistFormat;
  j["name"] = nl.name;
  j["w_min"] = nl.w_min;
  j["wire_cap_per_pin"] = nl.wire_cap_per_pin;
  j["input_slew"] = nl.input_slew;
  json pis = json::array();
  for (const auto& pi : nl.primary_inputs) pis.push_back({{"net", pi.net}, {"d_fix", pi.d_fix}});
  j["primary_inputs"] = pis;
  j["primary_outputs"] = nl.primary_outputs;
  json insts = json::array();
  for (const auto& inst : nl.instances)
    insts.push_back({{"name", inst.name},
                     {"cell", inst.cell},
                     {"drive", inst.drive},
                     {"inputs", inst.inputs},
                     {"output", inst.output}});
  j["instances"] = insts;
  json rows = json::array();
  for (const auto& r : d.placement.rows) {
    json cells = json::array();
    for (const auto& c : r.cells) cells.push_back({{"instance", nl.instances.at(c.instance).name}, {"offset", c.offset}});
    rows.push_back({{"p_height", r.p_height}, {"n_height", r.n_height}, {"cells", cells}});
  }
  j["placement"] = {{"rows", rows}};
  return j.dump(1) + "\n";
}

}  // namespace cntco
