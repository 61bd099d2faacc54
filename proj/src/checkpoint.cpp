#include "hgcl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace hgcl {

namespace {

void write_block(std::ofstream& out, const Matrix& e) {
  out << "HGCL-EMB v1 rows=" << e.rows() << " d=" << e.cols() << "\n";
  // Matrix is row-major, so the buffer already has row-major layout.
  out.write(reinterpret_cast<const char*>(e.data()),
            static_cast<std::streamsize>(sizeof(Scalar)) * e.size());
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Matrix read_block(std::ifstream& in, const std::string& path) {
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("checkpoint: missing header in " + path);
  }
  Index rows = -1, d = -1;
  if (std::sscanf(header.c_str(), "HGCL-EMB v1 rows=%td d=%td", &rows, &d) != 2 ||
      rows < 0 || d < 1) {
    throw std::runtime_error("checkpoint: bad header '" + header + "' in " +
                             path);
  }
  Matrix e(rows, d);
  in.read(reinterpret_cast<char*>(e.data()),
          static_cast<std::streamsize>(sizeof(Scalar)) * e.size());
  if (in.gcount() != static_cast<std::streamsize>(sizeof(Scalar)) * e.size()) {
    throw std::runtime_error("checkpoint: truncated payload in " + path);
  }
  return e;
}

}  // namespace

void save_embeddings(const std::string& path, const Matrix& e) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  write_block(out, e);
}

Matrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  Matrix e = read_block(in, path);
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw std::runtime_error("checkpoint: trailing data in " + path +
                             " (multi-block file? use load_model_blocks)");
  }
  return e;
}

void save_model_blocks(const std::string& path, const ModelBlocks& blocks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  write_block(out, blocks.user);
  write_block(out, blocks.item);
  write_block(out, blocks.cluster);
}

ModelBlocks load_model_blocks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  ModelBlocks blocks;
  blocks.user = read_block(in, path);
  blocks.item = read_block(in, path);
  blocks.cluster = read_block(in, path);
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw std::runtime_error("checkpoint: trailing data in " + path);
  }
  return blocks;
}

}  // namespace hgcl
