// Shared test utilities: random inputs, independent dense oracles for the
// sparse graph kernels, and a scratch-directory guard for file-based tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sgcn/graph.hpp"
#include "sgcn/rng.hpp"
#include "sgcn/tensor.hpp"

namespace testutil {

inline sgcn::Tensor random_tensor(std::vector<std::size_t> shape, sgcn::Rng& rng,
                                  double lo = -1.0, double hi = 1.0) {
  sgcn::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform(lo, hi);
  }
  return t;
}

/// Random undirected weighted graph: each unordered pair joins with
/// probability p, weight uniform in (0.1, 1]. No connectivity guarantee;
/// self-loops added later by normalization cover isolated nodes.
inline sgcn::EdgeList random_edges(std::size_t nodes, sgcn::Rng& rng,
                                   double p = 0.3) {
  sgcn::EdgeList list;
  list.num_nodes = nodes;
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = i + 1; j < nodes; ++j) {
      if (rng.uniform() < p) {
        list.edges.push_back({i, j, rng.uniform(0.1, 1.0)});
      }
    }
  }
  return list;
}

/// Dense adjacency under the build rules (duplicates sum per direction, then
/// symmetrize by max), written with straightforward loops.
inline sgcn::Tensor dense_adjacency(const sgcn::EdgeList& e, bool symmetrize) {
  const std::size_t n = e.num_nodes;
  sgcn::Tensor summed({n, n});
  for (const auto& edge : e.edges) {
    summed(edge.src, edge.dst) += edge.weight;
  }
  if (!symmetrize) {
    return summed;
  }
  sgcn::Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = std::max(summed(i, j), summed(j, i));
    }
  }
  return out;
}

/// Dense D^-1/2 (A + I) D^-1/2 with weighted degrees.
inline sgcn::Tensor dense_normalized(const sgcn::Tensor& a) {
  const std::size_t n = a.dim(0);
  sgcn::Tensor ahat = a;
  for (std::size_t i = 0; i < n; ++i) {
    ahat(i, i) += 1.0;
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      d += ahat(i, j);
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  sgcn::Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = ahat(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }
  return out;
}

inline sgcn::Tensor densify(const sgcn::CsrMatrix& m) {
  sgcn::Tensor out({m.rows, m.cols});
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      out(i, j) = m.at(i, j);
    }
  }
  return out;
}

inline double max_abs_diff(const sgcn::Tensor& a, const sgcn::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

inline bool bitwise_equal(const sgcn::Tensor& a, const sgcn::Tensor& b) {
  return a.shape() == b.shape() && a.raw() == b.raw();
}

/// Fresh empty directory under the test's working directory; removed and
/// recreated on construction so reruns start clean.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::current_path() / "scratch" / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
