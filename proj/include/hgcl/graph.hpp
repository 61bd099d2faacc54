#pragma once

#include <span>
#include <vector>

#include "hgcl/dataset.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/types.hpp"

namespace hgcl {

/// Compressed sparse rows with strictly increasing column ids per row.
struct Csr {
  std::vector<Index> offsets;  // size rows+1
  std::vector<Index> cols;

  Index rows() const { return static_cast<Index>(offsets.size()) - 1; }
  Index nnz() const { return static_cast<Index>(cols.size()); }
  Index degree(Index r) const { return offsets[r + 1] - offsets[r]; }

  std::span<const Index> row(Index r) const {
    return {cols.data() + offsets[r],
            static_cast<std::size_t>(offsets[r + 1] - offsets[r])};
  }

  /// Membership test by binary search within the row.
  bool contains(Index r, Index c) const;
};

/// User-item bipartite interaction graph. item_to_users is the exact
/// transpose of user_to_items; edge ids index user_to_items storage order.
struct BipartiteGraph {
  Index num_users = 0;
  Index num_items = 0;
  Csr user_to_items;
  Csr item_to_users;
  std::vector<Index> edge_user;  // user of each edge id, aligned with cols
  Index edge_count = 0;

  Index edge_item(Index e) const { return user_to_items.cols[e]; }
};

BipartiteGraph build_graph(const InteractionDataset& ds);

/// Build from explicit (user, item) pairs with fixed dimensions; duplicate
/// pairs are collapsed. Lets callers keep ids beyond the observed maximum
/// (e.g. empty clusters).
BipartiteGraph build_graph(std::vector<std::pair<Index, Index>> pairs,
                           Index num_users, Index num_items);

/// D^{-1/2} A D^{-1/2} over the (m+n) node ordering (users first), stored as
/// the two rectangular blocks. Zero-degree nodes get empty rows; propagation
/// carries such rows forward unchanged (see propagate).
struct NormalizedAdjacency {
  Index num_users = 0;
  Index num_items = 0;
  SparseMatrix user_item;               // m x n
  SparseMatrix item_user;               // n x m
  std::vector<std::uint8_t> zero_degree;  // size m+n

  Index nodes() const { return num_users + num_items; }
};

NormalizedAdjacency normalize_adjacency(const BipartiteGraph& g);

struct BprTriple {
  Index user;
  Index pos;
  Index neg;
};

/// Uniform negative sampling over [0, num_items) with rejection of the
/// user's positives; throws after `kNegativeSampleRetries` rejections.
inline constexpr int kNegativeSampleRetries = 1000;

Index sample_negative(const BipartiteGraph& g, Index user, Rng& rng);

/// One triple per given edge id; negatives rejection-sampled.
std::vector<BprTriple> triples_for_edges(const BipartiteGraph& g,
                                         std::span<const Index> edges,
                                         Rng& rng);

/// batch_size triples with (user, pos) uniform over training edges.
std::vector<BprTriple> sample_bpr_triples(const BipartiteGraph& g,
                                          Index batch_size, Rng& rng);

}  // namespace hgcl
