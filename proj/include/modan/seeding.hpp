#pragma once

#include <cstdint>
#include <string_view>

namespace modan {

/// Stream seed for (master, role, index). Frozen definition:
///
///   r = fnv1a64(role)
///   s = splitmix64(master ^ r)
///   s = splitmix64(s + index * 0x9e3779b97f4a7c15)
///
/// Roles in use: "init", "shuffle", "augment", "fold", "pretrain",
/// "downstream", "synth", "cap".
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view role, std::uint64_t index);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace modan
