#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hgcl/types.hpp"

namespace hgcl {

/// Interaction records with dense integer ids. Ids are assigned in order of
/// first appearance, duplicates are collapsed to a single record, and every
/// integer in [0, m) x [0, n) is used.
struct InteractionDataset {
  std::vector<std::pair<Index, Index>> interactions;  // (user id, item id)
  std::unordered_map<std::string, Index> user_index;
  std::unordered_map<std::string, Index> item_index;
  Index dropped = 0;  // test-split records whose user or item is unknown

  Index num_users() const { return static_cast<Index>(user_index.size()); }
  Index num_items() const { return static_cast<Index>(item_index.size()); }
};

/// Load a training split. Each non-empty, non-comment line is
/// `user_key<ws>item_key[<ws>weight]`; the weight is ignored beyond edge
/// existence. Throws on malformed lines (with line number) and empty files.
InteractionDataset load_interactions(const std::string& path);

/// Load a test split against an existing training vocabulary. Records whose
/// user or item never appeared in training are dropped and counted.
InteractionDataset load_interactions(const std::string& path,
                                     const InteractionDataset& train);

}  // namespace hgcl
