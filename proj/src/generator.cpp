#include "cntco/circuit.hpp"
#include "cntco/rng.hpp"

#include <algorithm>
#include <cmath>

namespace cntco {

namespace {

struct NetSlot {
  std::string name;
  int level = 0;
  int loads = 0;
};

int pick_index(CounterRng& rng, std::size_t n) {
  return static_cast<int>(std::min<std::size_t>(n - 1, static_cast<std::size_t>(rng.uniform() * n)));
}

}  // namespace

Design generate_design(const GeneratorOptions& o, const CellLibrary& library) {
  if (o.gates < 1) throw InputError("generator: gates must be >= 1");
  if (o.depth < 1) throw InputError("generator: depth must be >= 1");
  if (o.max_fanout < 1) throw InputError("generator: max_fanout must be >= 1");
  if (!(o.reuse_probability >= 0.0 && o.reuse_probability <= 1.0))
    throw InputError("generator: reuse_probability must lie in [0, 1]");
  if (!(o.dff_fraction >= 0.0 && o.dff_fraction < 1.0)) throw InputError("generator: dff_fraction must lie in [0, 1)");

  CounterRng rng(o.seed, 0x67656e);
  const int gates = o.gates;
  const int depth = std::min(o.depth, gates);

  Design d;
  Netlist& nl = d.netlist;
  nl.name = "gen_" + std::to_string(gates) + "_s" + std::to_string(o.seed);
  nl.wire_cap_per_pin = o.wire_cap_per_pin;
  nl.input_slew = o.input_slew;

  std::vector<NetSlot> nets;
  const int n_pi = gates == 1 ? 1 : std::max(2, gates / 10);
  for (int i = 0; i < n_pi; ++i) {
    nets.push_back({"pi" + std::to_string(i), 0, 0});
    nl.primary_inputs.push_back({nets.back().name, 0.0});
  }

  struct Choice {
    const char* cell;
    double weight;
  };
  const double comb = 1.0 - o.dff_fraction;
  const Choice choices[] = {{"INV", 0.25 * comb}, {"NAND2", 0.25 * comb}, {"NOR2", 0.2 * comb},
                            {"AOI21", 0.15 * comb}, {"BUF", 0.15 * comb}, {"DFF", o.dff_fraction}};
  for (const auto& c : choices)
    if (c.weight > 0.0 && !library.contains(c.cell))
      throw InputError(std::string("generator: library lacks cell ") + c.cell);

  auto pick = [&](std::vector<int>& cand) {
    std::vector<int> open, unloaded, loaded;
    for (int c : cand)
      if (nets[c].loads < o.max_fanout) open.push_back(c);
    if (open.empty()) open = cand;
    for (int c : open) (nets[c].loads == 0 ? unloaded : loaded).push_back(c);
    const bool reuse = !loaded.empty() && (unloaded.empty() || rng.uniform() < o.reuse_probability);
    const std::vector<int>& pool = reuse ? loaded : unloaded;
    return pool[pick_index(rng, pool.size())];
  };

  int gate = 0;
  for (int level = 1; level <= depth; ++level) {
    const int count = gates / depth + (level <= gates % depth ? 1 : 0);
    for (int g = 0; g < count; ++g, ++gate) {
      std::string cell = "INV";
      if (gates > 1) {
        double u = rng.uniform(), acc = 0.0;
        for (const auto& c : choices) {
          acc += c.weight;
          if (u < acc) {
            cell = c.cell;
            break;
          }
        }
      }
      const StandardCell& sc = library.cell(cell);
      Instance inst;
      inst.name = "g" + std::to_string(gate);
      inst.cell = cell;
      std::vector<int> chosen;
      for (std::size_t k = 0; k < sc.inputs.size(); ++k) {
        std::vector<int> cand;
        for (std::size_t n = 0; n < nets.size(); ++n) {
          const bool lvl_ok = k == 0 ? nets[n].level == level - 1 : nets[n].level < level;
          if (lvl_ok && std::find(chosen.begin(), chosen.end(), static_cast<int>(n)) == chosen.end())
            cand.push_back(static_cast<int>(n));
        }
        if (cand.empty())
          for (std::size_t n = 0; n < nets.size(); ++n)
            if (nets[n].level < level) cand.push_back(static_cast<int>(n));
        const int c = pick(cand);
        chosen.push_back(c);
        ++nets[c].loads;
        inst.inputs.push_back(nets[c].name);
      }
      inst.output = (sc.sequential ? "q" : "n") + std::to_string(gate);
      nets.push_back({inst.output, sc.sequential ? 0 : level, 0});
      nl.instances.push_back(std::move(inst));
    }
  }
  for (std::size_t n = n_pi; n < nets.size(); ++n)
    if (nets[n].loads == 0) nl.primary_outputs.push_back(nets[n].name);

  const int rows = o.rows > 0 ? o.rows : std::max(1, static_cast<int>(std::lround(std::sqrt(gates))));
  d.placement.rows.resize(rows);
  for (int i = 0; i < gates; ++i) {
    const int offset = o.aligned ? 0 : pick_index(rng, 4);
    d.placement.rows[i % rows].cells.push_back({i, offset});
  }
  return d;
}

}  // namespace cntco
