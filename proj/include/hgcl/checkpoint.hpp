#pragma once

#include <string>

#include "hgcl/types.hpp"

namespace hgcl {

/// Embedding checkpoint block: one ASCII header line
///   HGCL-EMB v1 rows=<r> d=<d>\n
/// followed by r*d little-endian float64 values in row-major order. A file
/// may hold several consecutive blocks.
void save_embeddings(const std::string& path, const Matrix& e);

Matrix load_embeddings(const std::string& path);

/// Three concatenated blocks: user, item, cluster.
struct ModelBlocks {
  Matrix user;
  Matrix item;
  Matrix cluster;
};

void save_model_blocks(const std::string& path, const ModelBlocks& blocks);

ModelBlocks load_model_blocks(const std::string& path);

}  // namespace hgcl
