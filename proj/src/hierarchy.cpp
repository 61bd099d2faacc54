#include "hgcl/hierarchy.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace hgcl {

HierarchyGraph build_user_cluster_graph(const BipartiteGraph& g,
                                        const ClusterAssignment& a) {
  if (static_cast<Index>(a.assign.size()) < g.num_items) {
    throw std::invalid_argument(
        "build_user_cluster_graph: assignment covers " +
        std::to_string(a.assign.size()) + " items, graph has " +
        std::to_string(g.num_items));
  }
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(g.edge_count));
  for (Index u = 0; u < g.num_users; ++u) {
    for (Index i : g.user_to_items.row(u)) {
      pairs.emplace_back(u, a.assign[static_cast<std::size_t>(i)]);
    }
  }
  HierarchyGraph h;
  h.graph = build_graph(std::move(pairs), g.num_users, a.num_clusters());
  h.adj = normalize_adjacency(h.graph);
  return h;
}

}  // namespace hgcl
