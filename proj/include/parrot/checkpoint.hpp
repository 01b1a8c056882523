#pragma once

#include <span>
#include <string>

#include "parrot/graph.hpp"

namespace parrot::nd {

/// Flat binary parameter checkpoint, magic "NDIF1":
///   magic (5 bytes) | u64 param count | per parameter:
///   u32 name length | name bytes | u32 rank | u64 dims... | f64 data (LE)
/// Round-trips bit-exactly.
void save_params(const std::string& path, std::span<const Param* const> params);

/// Loads by name into the given parameters. Rejects wrong magic, missing or
/// extra names, and shape mismatches.
void load_params(const std::string& path, std::span<Param* const> params);

} // namespace parrot::nd
