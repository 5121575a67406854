#include "sgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "sgcn/errors.hpp"

namespace sgcn {

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
  const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_indices.begin())];
}

namespace {

CsrMatrix from_entry_map(const std::map<std::pair<std::size_t, std::size_t>, double>& entries,
                         std::size_t n) {
  CsrMatrix m;
  m.rows = n;
  m.cols = n;
  m.row_offsets.assign(n + 1, 0);
  m.col_indices.reserve(entries.size());
  m.values.reserve(entries.size());
  for (const auto& [key, value] : entries) {
    m.row_offsets[key.first + 1]++;
  }
  for (std::size_t i = 0; i < n; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
  // std::map iterates (row, col) lexicographically, so per-row cols arrive sorted
  for (const auto& [key, value] : entries) {
    m.col_indices.push_back(key.second);
    m.values.push_back(value);
  }
  return m;
}

}  // namespace

CsrMatrix build_adjacency(const EdgeList& list, bool symmetrize) {
  const std::size_t n = list.num_nodes;
  std::map<std::pair<std::size_t, std::size_t>, double> summed;
  for (const Edge& e : list.edges) {
    if (e.src >= n || e.dst >= n) {
      throw IndexError("edge (" + std::to_string(e.src) + "," +
                       std::to_string(e.dst) + ") references a node outside 0.." +
                       std::to_string(n == 0 ? 0 : n - 1));
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw ValidationError("edge (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") has invalid weight " +
                            std::to_string(e.weight));
    }
    summed[{e.src, e.dst}] += e.weight;
  }

  std::map<std::pair<std::size_t, std::size_t>, double> entries;
  if (symmetrize) {
    for (const auto& [key, w] : summed) {
      const auto rev = std::make_pair(key.second, key.first);
      const auto other = summed.find(rev);
      const double value = other == summed.end() ? w : std::max(w, other->second);
      if (value > 0.0) {
        entries[key] = value;
        entries[rev] = value;
      }
    }
  } else {
    for (const auto& [key, w] : summed) {
      if (w > 0.0) entries[key] = w;
    }
  }
  return from_entry_map(entries, n);
}

SparseAdjacency normalize_adjacency(const CsrMatrix& raw) {
  if (raw.rows != raw.cols) {
    throw ValidationError("normalize_adjacency: matrix is not square (" +
                          std::to_string(raw.rows) + "x" + std::to_string(raw.cols) + ")");
  }
  const std::size_t n = raw.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = raw.row_offsets[i]; p < raw.row_offsets[i + 1]; ++p) {
      const std::size_t j = raw.col_indices[p];
      const double v = raw.values[p];
      if (v < 0.0 || !std::isfinite(v)) {
        throw ValidationError("normalize_adjacency: negative or non-finite entry at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (raw.at(j, i) != v) {
        throw ValidationError("normalize_adjacency: asymmetric input at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  // A_hat = raw + I; weighted degrees d_i >= 1, so no zero-degree rows exist.
  // Each degree folds its terms in sorted order so the sum depends only on
  // the row's value multiset; relabeling nodes then reproduces every
  // normalized entry bitwise, matching spmm's folding discipline.
  std::vector<double> degree(n, 0.0);
  std::vector<double> terms;
  for (std::size_t i = 0; i < n; ++i) {
    terms.clear();
    terms.push_back(1.0 + raw.at(i, i));
    for (std::size_t p = raw.row_offsets[i]; p < raw.row_offsets[i + 1]; ++p) {
      if (raw.col_indices[p] != i) terms.push_back(raw.values[p]);
    }
    std::sort(terms.begin(), terms.end());
    double d = 0.0;
    for (const double t : terms) d += t;
    degree[i] = d;
  }

  std::map<std::pair<std::size_t, std::size_t>, double> entries;
  auto put_pair = [&](std::size_t i, std::size_t j, double a_hat) {
    // one normalization per unordered pair keeps symmetry exact
    const double v = a_hat / std::sqrt(degree[i] * degree[j]);
    entries[{i, j}] = v;
    entries[{j, i}] = v;
  };
  for (std::size_t i = 0; i < n; ++i) {
    put_pair(i, i, 1.0 + raw.at(i, i));
    for (std::size_t p = raw.row_offsets[i]; p < raw.row_offsets[i + 1]; ++p) {
      const std::size_t j = raw.col_indices[p];
      if (j > i && raw.values[p] > 0.0) put_pair(i, j, raw.values[p]);
    }
  }

  SparseAdjacency out;
  out.matrix_ = from_entry_map(entries, n);
  return out;
}

Tensor spmm(const SparseAdjacency& n, const Tensor& x) {
  if (x.rank() != 2) {
    throw DimensionError("spmm: expected a rank-2 right operand, got " + x.shape_str());
  }
  const std::size_t nodes = n.num_nodes();
  const std::size_t rows = x.dim(0);
  const std::size_t f = x.dim(1);
  if (nodes == 0 || rows % nodes != 0) {
    throw DimensionError("spmm: row count " + std::to_string(rows) +
                         " is not a multiple of num_nodes " + std::to_string(nodes));
  }
  const std::size_t copies = rows / nodes;
  const CsrMatrix& m = n.matrix();

  Tensor y({rows, f});
  std::vector<double> products;
  for (std::size_t c = 0; c < copies; ++c) {
    const std::size_t base = c * nodes;
    for (std::size_t i = 0; i < nodes; ++i) {
      const std::size_t lo = m.row_offsets[i];
      const std::size_t hi = m.row_offsets[i + 1];
      double* yrow = y.data() + (base + i) * f;
      for (std::size_t k = 0; k < f; ++k) {
        products.clear();
        for (std::size_t p = lo; p < hi; ++p) {
          products.push_back(m.values[p] * x(base + m.col_indices[p], k));
        }
        std::sort(products.begin(), products.end());
        double acc = 0.0;
        for (double v : products) acc += v;
        yrow[k] = acc;
      }
    }
  }
  require_finite(y, "spmm");
  return y;
}

}  // namespace sgcn
