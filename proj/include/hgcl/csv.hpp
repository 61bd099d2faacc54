#pragma once

#include <span>
#include <string>
#include <vector>

#include "hgcl/types.hpp"

namespace hgcl {

/// Shortest round-trip decimal form (std::to_chars), locale-independent.
std::string format_scalar(Scalar v);

std::string format_index(Index v);

/// Comma-delimited file with a header row; cells must not contain commas or
/// newlines (all emitted values are numeric or fixed labels).
void write_csv(const std::string& path, std::span<const std::string> header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace hgcl
