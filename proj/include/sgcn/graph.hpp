// Road graph construction: edge list -> CSR adjacency -> symmetric degree
// normalization with self-loops -> sparse-dense products for the GCN layers.
#pragma once

#include <cstddef>
#include <vector>

#include "sgcn/tensor.hpp"

namespace sgcn {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 0.0;
};

/// Raw directed edge list. Duplicate (src, dst) pairs sum at build time.
struct EdgeList {
  std::vector<Edge> edges;
  std::size_t num_nodes = 0;
};

/// Compressed sparse row storage; col_indices sorted within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;  // length rows + 1
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  /// Entry lookup for tests and validation; 0 when absent.
  double at(std::size_t i, std::size_t j) const;
};

/// CSR of the raw weighted adjacency. With `symmetrize`, each directed edge
/// lands on both (i,j) and (j,i); when both directions were given their
/// duplicate-summed weights are reconciled by max. Zero-weight entries are
/// dropped.
CsrMatrix build_adjacency(const EdgeList& edges, bool symmetrize);

/// The normalized operator D^{-1/2} (A + I) D^{-1/2} shared by both GCN
/// layers. Immutable once built; safe to share across workers.
class SparseAdjacency {
 public:
  std::size_t num_nodes() const { return matrix_.rows; }
  const CsrMatrix& matrix() const { return matrix_; }

 private:
  friend SparseAdjacency normalize_adjacency(const CsrMatrix& raw);
  CsrMatrix matrix_;
};

/// Adds self-loops, forms weighted degrees and returns D^{-1/2}(A+I)D^{-1/2}.
/// Each unordered pair's value is computed once, so symmetry is exact.
/// The input must be square, non-negative and symmetric.
SparseAdjacency normalize_adjacency(const CsrMatrix& raw);

/// y = N.x for x of shape (k*num_nodes) x f: the operator applies blockwise,
/// so a mini-batch of k graph copies goes through in one call. Each output
/// element folds its products in sorted-by-value order, which makes the
/// result a function of the product multiset only: relabeling nodes permutes
/// the output bit-exactly. By symmetry the same routine is also the backward
/// map (dX = N.dY).
Tensor spmm(const SparseAdjacency& n, const Tensor& x);

}  // namespace sgcn
