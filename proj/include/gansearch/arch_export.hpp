#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gansearch/genome.hpp"

namespace gansearch {

struct ArchReport {
  Genome genome;
  std::size_t active_edges = 0;
  std::vector<std::size_t> fan_in;  // per node, inputs included (always 0)
  std::size_t parameter_count = 0;  // FC weights + biases of the active edges
  std::string dot;
  nlohmann::json json;
};

// Parameters of the subnet the genome selects: sum of d_t*d_s + d_t over
// active edges.
std::size_t subnet_parameter_count(const SearchSpace& space, const Genome& genome);

ArchReport export_arch(const SearchSpace& space, const Genome& genome);

std::string to_dot(const SearchSpace& space, const Genome& genome);

// {role, ops:[E ints], node_dims:[...], input_dims:[3 ints]}
nlohmann::json genome_to_json(const SearchSpace& space, const Genome& genome);

// Parses a genome JSON object and checks it against `space` (role, dims and
// edge count must all agree). Throws FormatError on mismatch.
Genome genome_from_json(const nlohmann::json& j, const SearchSpace& space);
// Parses without a reference space; rebuilds the space from the stored dims.
std::pair<SearchSpace, Genome> genome_and_space_from_json(const nlohmann::json& j);

}  // namespace gansearch
