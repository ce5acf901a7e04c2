#include "cntco/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

namespace cntco {

namespace {

std::uint64_t region_key(int row, Polarity pol, int local) {
  return (static_cast<std::uint64_t>(row) << 33) | (static_cast<std::uint64_t>(pol == Polarity::P ? 1 : 0) << 32) |
         static_cast<std::uint64_t>(local);
}

}  // namespace

int effective_width(const Transistor& t, const StandardCell& cell, int drive, int w_min) {
  const int scaled = static_cast<int>(std::lround(t.width * cell.scale_at(drive)));
  return std::max(scaled, w_min);
}

PlacedCircuit::PlacedCircuit(Design design, const CellLibrary& library)
    : design_(std::move(design)), library_(&library) {
  const Netlist& nl = design_.netlist;
  if (nl.w_min < 1) throw InputError("netlist.w_min must be >= 1");
  if (!(nl.wire_cap_per_pin >= 0.0)) throw InputError("netlist.wire_cap_per_pin must be >= 0");
  if (!(nl.input_slew > 0.0)) throw InputError("netlist.input_slew must be > 0");

  std::map<std::string, int> net_id;
  auto net_of = [&](const std::string& name, bool external) {
    auto it = net_id.find(name);
    if (it != net_id.end()) return it->second;
    const int id = static_cast<int>(nets_.size());
    net_id.emplace(name, id);
    Net n;
    n.name = name;
    n.external = external;
    nets_.push_back(std::move(n));
    return id;
  };

  for (std::size_t i = 0; i < nl.primary_inputs.size(); ++i) {
    const auto& pi = nl.primary_inputs[i];
    if (net_id.count(pi.net)) throw InputError("primary input net '" + pi.net + "' listed twice");
    if (!(pi.d_fix >= 0.0)) throw InputError("primary input '" + pi.net + "': d_fix must be >= 0");
    nets_[net_of(pi.net, true)].primary_input = static_cast<int>(i);
  }

  std::set<std::string> inst_names;
  std::vector<int> external_driver_count;
  for (std::size_t ii = 0; ii < nl.instances.size(); ++ii) {
    const Instance& inst = nl.instances[ii];
    if (!inst_names.insert(inst.name).second) throw InputError("duplicate instance name '" + inst.name + "'");
    const StandardCell& cell = library.cell(inst.cell);
    cells_.push_back(&cell);
    if (inst.drive < 0 || inst.drive > cell.max_drive())
      throw InputError("instance '" + inst.name + "': drive out of range for " + cell.name);
    if (inst.inputs.size() != cell.inputs.size())
      throw InputError("instance '" + inst.name + "': expected " + std::to_string(cell.inputs.size()) + " input nets");
    auto resolve = [&](const std::string& pin) {
      const int k = cell.input_index(pin);
      if (k >= 0) return net_of(inst.inputs[k], true);
      if (pin == cell.output) return net_of(inst.output, true);
      return net_of(inst.name + "/" + pin, false);
    };
    const double scale = cell.scale_at(inst.drive);
    for (std::size_t s = 0; s < cell.stages.size(); ++s) {
      const Stage& st = cell.stages[s];
      StageInstance si;
      si.instance = static_cast<int>(ii);
      si.stage = static_cast<int>(s);
      si.scale = scale;
      si.timed = !cell.sequential;
      for (const auto& in : st.inputs) si.input_nets.push_back(resolve(in));
      si.output_net = resolve(st.output);
      si.first_transistor = static_cast<int>(transistors_.size());
      si.transistor_count = static_cast<int>(st.transistors.size());
      const int sid = static_cast<int>(stages_.size());
      for (std::size_t t = 0; t < st.transistors.size(); ++t) {
        TransistorInstance ti;
        ti.stage_instance = sid;
        ti.local = static_cast<int>(t);
        ti.polarity = st.transistors[t].polarity;
        ti.width = effective_width(st.transistors[t], cell, inst.drive, nl.w_min);
        transistors_.push_back(ti);
      }
      nets_[si.output_net].drivers.push_back(sid);
      for (std::size_t k = 0; k < si.input_nets.size(); ++k) nets_[si.input_nets[k]].loads.emplace_back(sid, k);
      stages_.push_back(std::move(si));
    }
    if (cell.sequential) {
      nets_[net_id.at(inst.output)].launch = true;
      for (const auto& n : inst.inputs) nets_[net_id.at(n)].capture = true;
    }
  }

  for (const auto& po : nl.primary_outputs) {
    auto it = net_id.find(po);
    if (it == net_id.end()) throw InputError("primary output '" + po + "' is not a net");
    nets_[it->second].primary_output = true;
  }

  // Driver rules: external nets have exactly one source.
  for (const auto& n : nets_) {
    const bool pi = n.primary_input >= 0;
    if (n.external) {
      std::set<int> driving_instances;
      for (int d : n.drivers) driving_instances.insert(stages_[d].instance);
      const std::size_t sources = driving_instances.size() + (pi ? 1 : 0);
      if (sources == 0) throw InputError("net '" + n.name + "' has no driver");
      if (sources > 1) throw InputError("net '" + n.name + "' has more than one driver");
    } else if (n.drivers.empty()) {
      throw InputError("internal net '" + n.name + "' has no driver");
    } else if (n.drivers.size() > 1 && !cells_[stages_[n.drivers[0]].instance]->sequential) {
      throw InputError("internal net '" + n.name + "' has more than one driver");
    }
  }

  // Placement and region tracks.
  const auto& rows = design_.placement.rows;
  instance_row_.assign(nl.instances.size(), -1);
  std::vector<int> inst_offset(nl.instances.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& pc : rows[r].cells) {
      if (pc.instance < 0 || pc.instance >= static_cast<int>(nl.instances.size()))
        throw InputError("placement references an unknown instance");
      if (instance_row_[pc.instance] >= 0)
        throw InputError("instance '" + nl.instances[pc.instance].name + "' placed twice");
      if (pc.offset < 0) throw InputError("placement offset must be >= 0");
      instance_row_[pc.instance] = static_cast<int>(r);
      inst_offset[pc.instance] = pc.offset;
    }
  }
  for (std::size_t i = 0; i < nl.instances.size(); ++i)
    if (instance_row_[i] < 0) throw InputError("instance '" + nl.instances[i].name + "' is not placed");

  rows_.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows_[r].p_height = std::max(0, rows[r].p_height);
    rows_[r].n_height = std::max(0, rows[r].n_height);
  }
  for (auto& ti : transistors_) {
    const StageInstance& si = stages_[ti.stage_instance];
    const Transistor& t = cells_[si.instance]->stages[si.stage].transistors[ti.local];
    const int r = instance_row_[si.instance];
    ti.row = r;
    const int end = inst_offset[si.instance] + t.offset + ti.width;
    int& h = ti.polarity == Polarity::P ? rows_[r].p_height : rows_[r].n_height;
    h = std::max(h, end);
  }
  int cursor = 0;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    rows_[r].p_begin = cursor;
    for (int j = 0; j < rows_[r].p_height; ++j) region_keys_.push_back(region_key(static_cast<int>(r), Polarity::P, j));
    cursor += rows_[r].p_height;
    rows_[r].n_begin = cursor;
    for (int j = 0; j < rows_[r].n_height; ++j) region_keys_.push_back(region_key(static_cast<int>(r), Polarity::N, j));
    cursor += rows_[r].n_height;
  }
  region_count_ = cursor;
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < transistors_.size(); ++i) {
    auto& ti = transistors_[i];
    const StageInstance& si = stages_[ti.stage_instance];
    const Transistor& t = cells_[si.instance]->stages[si.stage].transistors[ti.local];
    const RowTracks& rt = rows_[ti.row];
    ti.region_begin = (ti.polarity == Polarity::P ? rt.p_begin : rt.n_begin) + inst_offset[si.instance] + t.offset;
    for (int j = 0; j < ti.width; ++j) trip.emplace_back(static_cast<int>(i), ti.region_begin + j, 1.0);
  }
  incidence_.resize(static_cast<Eigen::Index>(transistors_.size()), region_count_);
  incidence_.setFromTriplets(trip.begin(), trip.end());
  incidence_.makeCompressed();

  // Timing graph over combinational stages.
  for (std::size_t n = 0; n < nets_.size(); ++n)
    if (nets_[n].primary_input >= 0 || nets_[n].launch) sources_.push_back(static_cast<int>(n));
  for (std::size_t n = 0; n < nets_.size(); ++n)
    if (nets_[n].primary_output || nets_[n].capture) endpoints_.push_back(static_cast<int>(n));
  if (endpoints_.empty()) throw InputError("netlist has no primary outputs or capture pins");

  std::vector<int> indeg(stages_.size(), 0);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (!stages_[s].timed) continue;
    for (int n : stages_[s].input_nets)
      for (int d : nets_[n].drivers)
        if (stages_[d].timed) ++indeg[s];
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (std::size_t s = 0; s < stages_.size(); ++s)
    if (stages_[s].timed && indeg[s] == 0) ready.push(static_cast<int>(s));
  stage_arcs_.assign(stages_.size(), {});
  std::size_t timed_total = 0, visited = 0;
  for (const auto& s : stages_) timed_total += s.timed ? 1 : 0;
  while (!ready.empty()) {
    const int s = ready.top();
    ready.pop();
    ++visited;
    for (std::size_t k = 0; k < stages_[s].input_nets.size(); ++k) {
      stage_arcs_[s].push_back(static_cast<int>(arcs_.size()));
      arcs_.push_back(Arc{s, static_cast<int>(k), stages_[s].input_nets[k], stages_[s].output_net});
    }
    for (const auto& [ld, k] : nets_[stages_[s].output_net].loads) {
      (void)k;
      if (stages_[ld].timed && --indeg[ld] == 0) ready.push(ld);
    }
  }
  if (visited != timed_total) throw InputError("combinational cycle in netlist");

  load_cap_.assign(nets_.size(), 0.0);
  for (std::size_t n = 0; n < nets_.size(); ++n) {
    std::set<int> pins;
    for (const auto& [s, k] : nets_[n].loads) {
      load_cap_[n] += input_capacitance(s, k);
      pins.insert(stages_[s].instance);
    }
    if (nets_[n].external) nets_[n].wire_cap = nl.wire_cap_per_pin * static_cast<double>(pins.size());
    load_cap_[n] += nets_[n].wire_cap;
  }
}

const Stage& PlacedCircuit::stage_of(int s) const {
  const StageInstance& si = stages_[s];
  return cells_[si.instance]->stages[si.stage];
}

const CaseModel& PlacedCircuit::case_model(int s, int input, int case_index) const {
  return stage_of(s).cases.at(input).at(case_index);
}

StageArcModel PlacedCircuit::arc_model(int s, int input, int case_index) const {
  return case_model(s, input, case_index).arc.scaled(stages_[s].scale);
}

double PlacedCircuit::input_capacitance(int s, int input) const {
  return stage_of(s).pin_capacitance(input) * stages_[s].scale;
}

double PlacedCircuit::load_capacitance(int net) const { return load_cap_[net]; }

SpMat build_incidence(const Design& design, const CellLibrary& library) {
  return PlacedCircuit(design, library).incidence();
}

Design min_width_upsize(Design design, int w_min) {
  if (w_min < 1) throw InputError("w_min must be >= 1");
  design.netlist.w_min = std::max(design.netlist.w_min, w_min);
  return design;
}

std::vector<double> instance_fanouts(const Design& design, const CellLibrary& library) {
  const Netlist& nl = design.netlist;
  std::map<std::string, double> net_load;
  for (const auto& inst : nl.instances) {
    const StandardCell& c = library.cell(inst.cell);
    std::set<std::string> seen;
    for (std::size_t k = 0; k < inst.inputs.size(); ++k) {
      net_load[inst.inputs[k]] += c.pin_capacitance(c.inputs[k], inst.drive);
      if (seen.insert(inst.inputs[k]).second) net_load[inst.inputs[k]] += nl.wire_cap_per_pin;
    }
  }
  std::vector<double> fo(nl.instances.size(), 0.0);
  for (std::size_t i = 0; i < nl.instances.size(); ++i) {
    const auto& inst = nl.instances[i];
    const StandardCell& c = library.cell(inst.cell);
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& pin : c.inputs) cmin = std::min(cmin, c.pin_capacitance(pin, inst.drive));
    auto it = net_load.find(inst.output);
    const double load = it == net_load.end() ? 0.0 : it->second;
    fo[i] = cmin > 0.0 ? load / cmin : std::numeric_limits<double>::infinity();
  }
  return fo;
}

UpsizeResult selective_upsize(Design design, const CellLibrary& library, int k) {
  if (k < 0) throw InputError("k_sel_upsize must be >= 0");
  UpsizeResult res;
  for (int step = 0; step < k; ++step) {
    const std::vector<double> fo = instance_fanouts(design, library);
    int best = -1;
    for (std::size_t i = 0; i < fo.size(); ++i) {
      const auto& inst = design.netlist.instances[i];
      if (inst.drive >= library.cell(inst.cell).max_drive()) continue;
      if (best < 0 || fo[i] > fo[best]) best = static_cast<int>(i);
    }
    if (best < 0) break;
    ++design.netlist.instances[best].drive;
    res.upsized.push_back(best);
    ++res.applied;
  }
  res.design = std::move(design);
  return res;
}

ProportionEstimate count_limited_yield(const PlacedCircuit& circuit, const ProcessingParams& params,
                                       const TechnologyParams& tech, long long trials, std::uint64_t seed,
                                       int workers) {
  return count_limited_yield(circuit.incidence(), circuit.region_keys(), params, tech, trials, seed, workers);
}

}  // namespace cntco
