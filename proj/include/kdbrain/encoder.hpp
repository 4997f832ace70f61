#pragma once

#include <span>
#include <string>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/weights.hpp"

// Per-subnetwork topology encoder: bidirectional row/column convolution, then
// channel fusion, LeakyReLU, mean pooling over regions and projection to d.
namespace kdbrain::encoder {

// H_k = sum_c (A_kc W_row[k,c] + A_kc^T W_col[k,c]); blocks are N_k x N_k.
inline ad::Var bidirectional_features(std::span<const ad::Var> blocks, std::span<const ad::Var> row_kernels,
                                      std::span<const ad::Var> col_kernels) {
  if (blocks.empty()) throw DimensionError("bidirectional_features: no input channels");
  if (row_kernels.size() != blocks.size() || col_kernels.size() != blocks.size()) {
    throw DimensionError("bidirectional_features: " + std::to_string(blocks.size()) + " channel(s) but " +
                         std::to_string(row_kernels.size()) + " row / " + std::to_string(col_kernels.size()) +
                         " column kernels");
  }
  ad::Var h;
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    const std::size_t nk = blocks[c].rows();
    if (blocks[c].cols() != nk) {
      throw DimensionError("bidirectional_features: block " + blocks[c].value().shape_string() + " is not square");
    }
    if (row_kernels[c].rows() != nk || col_kernels[c].rows() != nk) {
      throw DimensionError("bidirectional_features: kernels " + row_kernels[c].value().shape_string() + "/" +
                           col_kernels[c].value().shape_string() + " do not match subnetwork size " +
                           std::to_string(nk));
    }
    const ad::Var term = ad::add(ad::matmul(blocks[c], row_kernels[c]),
                                 ad::matmul(ad::transpose(blocks[c]), col_kernels[c]));
    h = h.valid() ? ad::add(h, term) : term;
  }
  return h;
}

// Z_k = mean_rows(LeakyReLU(H_k W_fuse)) W_proj, a 1 x d row.
inline ad::Var fuse_project(const ad::Var& features, const ad::Var& fuse, const ad::Var& project) {
  return ad::matmul(ad::mean_rows(ad::leaky_relu(ad::matmul(features, fuse))), project);
}

// Stacks Z_k for every subnetwork into the |T| x d initial representation.
// blocks[k][c] is channel c of subnetwork k.
inline ad::Var encode_all(const std::vector<std::vector<ad::Var>>& blocks, const EncoderWeights<ad::Var>& w) {
  if (blocks.size() != w.row_kernels.size()) {
    throw DimensionError("encode_all: " + std::to_string(blocks.size()) + " subnetworks but weights for " +
                         std::to_string(w.row_kernels.size()));
  }
  std::vector<ad::Var> rows;
  rows.reserve(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const ad::Var h = bidirectional_features(blocks[k], w.row_kernels[k], w.col_kernels[k]);
    rows.push_back(fuse_project(h, w.fuse, w.project));
  }
  return ad::concat_rows(rows);
}

}  // namespace kdbrain::encoder
