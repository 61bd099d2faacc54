#include "hgcl/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace hgcl {

namespace {

// Packs an id pair for dedup lookups. Ids stay well below 2^32.
std::uint64_t pack(Index u, Index i) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
}

InteractionDataset load_lines(const std::string& path,
                              const InteractionDataset* train) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open interaction file: " + path);
  }

  InteractionDataset ds;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string user_key, item_key;
    if (!(ls >> user_key >> item_key)) {
      if (user_key.empty()) continue;  // whitespace-only line
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected `user_key item_key [weight]`");
    }

    Index u, i;
    if (train) {
      auto uit = train->user_index.find(user_key);
      auto iit = train->item_index.find(item_key);
      if (uit == train->user_index.end() || iit == train->item_index.end()) {
        ++ds.dropped;
        continue;
      }
      u = uit->second;
      i = iit->second;
    } else {
      auto [uit, unew] =
          ds.user_index.try_emplace(user_key, ds.num_users());
      auto [iit, inew] =
          ds.item_index.try_emplace(item_key, ds.num_items());
      u = uit->second;
      i = iit->second;
    }
    if (seen.insert(pack(u, i)).second) {
      ds.interactions.emplace_back(u, i);
    }
  }

  if (ds.interactions.empty() && !train) {
    throw std::runtime_error(path + ": no interactions found");
  }
  if (train) {
    // test split inherits the training vocabulary
    ds.user_index = train->user_index;
    ds.item_index = train->item_index;
  }
  return ds;
}

}  // namespace

InteractionDataset load_interactions(const std::string& path) {
  return load_lines(path, nullptr);
}

InteractionDataset load_interactions(const std::string& path,
                                     const InteractionDataset& train) {
  return load_lines(path, &train);
}

}  // namespace hgcl
