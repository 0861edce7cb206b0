#include "gansearch/arch_export.hpp"

#include <sstream>

#include "gansearch/errors.hpp"

namespace gansearch {

std::size_t subnet_parameter_count(const SearchSpace& space, const Genome& genome) {
  require_compatible(space, genome);
  std::size_t count = 0;
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (genome.op(e) == Op::kNone) continue;
    const std::size_t ds = space.node_dim(edges[e].source);
    const std::size_t dt = space.node_dim(edges[e].target);
    count += dt * ds + dt;
  }
  return count;
}

std::string to_dot(const SearchSpace& space, const Genome& genome) {
  require_compatible(space, genome);
  std::ostringstream os;
  os << "digraph " << role_name(space.role()) << " {\n";
  os << "  rankdir=LR;\n";
  for (int n = 0; n < space.num_nodes(); ++n) {
    os << "  n" << n << " [label=\"" << space.node_label(n);
    if (!space.is_input(n)) os << "\\n" << space.node_dim(n);
    os << "\"" << (space.is_input(n) ? ", shape=box" : "") << "];\n";
  }
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (genome.op(e) == Op::kNone) continue;
    os << "  n" << edges[e].source << " -> n" << edges[e].target << " [label=\""
       << op_name(genome.op(e)) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

nlohmann::json genome_to_json(const SearchSpace& space, const Genome& genome) {
  require_compatible(space, genome);
  nlohmann::json ops = nlohmann::json::array();
  for (Op op : genome.ops()) ops.push_back(static_cast<int>(op));
  return {{"role", role_name(space.role())},
          {"ops", ops},
          {"node_dims", space.node_dims()},
          {"input_dims", space.input_dims()}};
}

std::pair<SearchSpace, Genome> genome_and_space_from_json(const nlohmann::json& j) {
  try {
    const Role role = role_from_name(j.at("role").get<std::string>());
    const auto input_dims = j.at("input_dims").get<std::vector<std::size_t>>();
    const auto node_dims = j.at("node_dims").get<std::vector<std::size_t>>();
    if (input_dims.size() != 3 || input_dims[2] != input_dims[0] + input_dims[1])
      throw FormatError("genome json: input_dims must be [|A|, d, |A|+d]");
    SearchSpace space(role, input_dims[0], input_dims[1], node_dims);
    std::vector<Op> ops;
    for (int v : j.at("ops").get<std::vector<int>>()) ops.push_back(op_from_index(v));
    Genome g(role, std::move(ops));
    require_compatible(space, g);
    return {std::move(space), std::move(g)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("genome json: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("genome json: ") + e.what());
  }
}

Genome genome_from_json(const nlohmann::json& j, const SearchSpace& space) {
  auto [stored, genome] = genome_and_space_from_json(j);
  if (!(stored == space))
    throw FormatError("genome json: stored search space does not match the expected one");
  return genome;
}

ArchReport export_arch(const SearchSpace& space, const Genome& genome) {
  if (!is_canonical(space, genome))
    throw ContractViolation("export_arch requires a canonical genome");
  ArchReport report{genome, genome.active_edge_count(),
                    std::vector<std::size_t>(static_cast<std::size_t>(space.num_nodes()), 0),
                    subnet_parameter_count(space, genome), to_dot(space, genome),
                    genome_to_json(space, genome)};
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (genome.op(e) != Op::kNone) ++report.fan_in[static_cast<std::size_t>(edges[e].target)];
  report.json["hash"] = genome.hash_hex();
  report.json["active_edges"] = report.active_edges;
  report.json["parameter_count"] = report.parameter_count;
  report.json["fan_in"] = report.fan_in;
  return report;
}

}  // namespace gansearch
