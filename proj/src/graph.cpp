#include "hgcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hgcl {

bool Csr::contains(Index r, Index c) const {
  auto row_span = row(r);
  return std::binary_search(row_span.begin(), row_span.end(), c);
}

namespace {

Csr csr_from_pairs(Index rows, std::vector<std::pair<Index, Index>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  Csr csr;
  csr.offsets.assign(static_cast<std::size_t>(rows) + 1, 0);
  csr.cols.reserve(pairs.size());
  for (const auto& [r, c] : pairs) {
    ++csr.offsets[static_cast<std::size_t>(r) + 1];
    csr.cols.push_back(c);
  }
  for (Index r = 0; r < rows; ++r) {
    csr.offsets[static_cast<std::size_t>(r) + 1] +=
        csr.offsets[static_cast<std::size_t>(r)];
  }
  return csr;
}

}  // namespace

BipartiteGraph build_graph(const InteractionDataset& ds) {
  return build_graph(ds.interactions, ds.num_users(), ds.num_items());
}

BipartiteGraph build_graph(std::vector<std::pair<Index, Index>> pairs,
                           Index num_users, Index num_items) {
  if (pairs.empty()) {
    throw std::invalid_argument("build_graph: no interactions");
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (const auto& [u, i] : pairs) {
    if (u < 0 || u >= num_users || i < 0 || i >= num_items) {
      throw std::out_of_range("build_graph: pair (" + std::to_string(u) +
                              ", " + std::to_string(i) + ") outside " +
                              std::to_string(num_users) + " x " +
                              std::to_string(num_items));
    }
  }

  BipartiteGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.edge_count = static_cast<Index>(pairs.size());

  std::vector<std::pair<Index, Index>> reversed;
  reversed.reserve(pairs.size());
  for (const auto& [u, i] : pairs) reversed.emplace_back(i, u);

  g.user_to_items = csr_from_pairs(g.num_users, std::move(pairs));
  g.item_to_users = csr_from_pairs(g.num_items, std::move(reversed));

  g.edge_user.resize(static_cast<std::size_t>(g.edge_count));
  for (Index u = 0; u < g.num_users; ++u) {
    for (Index e = g.user_to_items.offsets[u];
         e < g.user_to_items.offsets[u + 1]; ++e) {
      g.edge_user[static_cast<std::size_t>(e)] = u;
    }
  }
  return g;
}

NormalizedAdjacency normalize_adjacency(const BipartiteGraph& g) {
  NormalizedAdjacency adj;
  adj.num_users = g.num_users;
  adj.num_items = g.num_items;
  adj.zero_degree.assign(static_cast<std::size_t>(g.num_users + g.num_items),
                         0);
  for (Index u = 0; u < g.num_users; ++u) {
    if (g.user_to_items.degree(u) == 0) adj.zero_degree[u] = 1;
  }
  for (Index i = 0; i < g.num_items; ++i) {
    if (g.item_to_users.degree(i) == 0) {
      adj.zero_degree[static_cast<std::size_t>(g.num_users + i)] = 1;
    }
  }

  using Triplet = Eigen::Triplet<Scalar>;
  std::vector<Triplet> ui_triplets, iu_triplets;
  ui_triplets.reserve(static_cast<std::size_t>(g.edge_count));
  iu_triplets.reserve(static_cast<std::size_t>(g.edge_count));
  for (Index u = 0; u < g.num_users; ++u) {
    const Scalar du = static_cast<Scalar>(g.user_to_items.degree(u));
    for (Index e = g.user_to_items.offsets[u];
         e < g.user_to_items.offsets[u + 1]; ++e) {
      const Index i = g.user_to_items.cols[e];
      const Scalar di = static_cast<Scalar>(g.item_to_users.degree(i));
      const Scalar w = 1.0 / std::sqrt(du * di);
      ui_triplets.emplace_back(static_cast<int>(u), static_cast<int>(i), w);
      iu_triplets.emplace_back(static_cast<int>(i), static_cast<int>(u), w);
    }
  }
  adj.user_item.resize(g.num_users, g.num_items);
  adj.item_user.resize(g.num_items, g.num_users);
  adj.user_item.setFromTriplets(ui_triplets.begin(), ui_triplets.end());
  adj.item_user.setFromTriplets(iu_triplets.begin(), iu_triplets.end());
  adj.user_item.makeCompressed();
  adj.item_user.makeCompressed();
  return adj;
}

Index sample_negative(const BipartiteGraph& g, Index user, Rng& rng) {
  for (int tries = 0; tries < kNegativeSampleRetries; ++tries) {
    const Index candidate =
        static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(g.num_items)));
    if (!g.user_to_items.contains(user, candidate)) return candidate;
  }
  throw std::runtime_error(
      "sample_negative: retry budget exhausted for user " +
      std::to_string(user) + " (user interacts with nearly every item?)");
}

std::vector<BprTriple> triples_for_edges(const BipartiteGraph& g,
                                         std::span<const Index> edges,
                                         Rng& rng) {
  std::vector<BprTriple> triples;
  triples.reserve(edges.size());
  for (Index e : edges) {
    const Index u = g.edge_user[static_cast<std::size_t>(e)];
    triples.push_back({u, g.edge_item(e), sample_negative(g, u, rng)});
  }
  return triples;
}

std::vector<BprTriple> sample_bpr_triples(const BipartiteGraph& g,
                                          Index batch_size, Rng& rng) {
  if (batch_size < 1) {
    throw std::invalid_argument("sample_bpr_triples: batch_size must be >= 1");
  }
  std::vector<Index> edges(static_cast<std::size_t>(batch_size));
  for (Index& e : edges) {
    e = static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(g.edge_count)));
  }
  return triples_for_edges(g, edges, rng);
}

}  // namespace hgcl
