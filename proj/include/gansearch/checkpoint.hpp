#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gansearch/supernet.hpp"

namespace gansearch {

// Versioned binary checkpoint holding one or more supernets: search space,
// activation settings, every materialized (edge, op) layer and its Adam state.
// Doubles are written verbatim (host byte order, little-endian on every
// supported target) so a save/load round trip is bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const std::vector<const SupernetParams*>& nets);
std::vector<SupernetParams> deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const SupernetParams*>& nets);
std::vector<SupernetParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace gansearch
