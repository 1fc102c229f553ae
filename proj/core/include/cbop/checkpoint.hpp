#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbop/agent.hpp"

namespace cbop {

inline constexpr std::uint32_t checkpoint_format_version = 1;

/// "CBPC", u32 version, u64 manifest length, JSON manifest, then every
/// parameter block as little-endian f64 in manifest order.
std::vector<std::uint8_t> encode_checkpoint(const AgentState& agent);
AgentState decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const AgentState& agent, const std::string& path);
AgentState load_checkpoint(const std::string& path);

}  // namespace cbop
