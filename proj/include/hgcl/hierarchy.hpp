#pragma once

#include "hgcl/graph.hpp"
#include "hgcl/polar.hpp"

namespace hgcl {

/// User-cluster graph: the "items" of `graph` are cluster ids. An edge (u, c)
/// exists iff the user interacts with at least one item assigned to c;
/// multiplicities are discarded. Empty clusters stay as isolated nodes.
struct HierarchyGraph {
  BipartiteGraph graph;     // num_items == number of clusters
  NormalizedAdjacency adj;  // over m + rho*theta nodes
};

/// Throws when the assignment covers fewer items than the graph has.
HierarchyGraph build_user_cluster_graph(const BipartiteGraph& g,
                                        const ClusterAssignment& a);

}  // namespace hgcl
