// The network: two GCN layers with ReLU, an LSTM over the per-timestep
// spatial features, and a linear head emitting one value per node.
// Forward passes record every intermediate needed for the exact backward.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcn/graph.hpp"
#include "sgcn/tensor.hpp"

namespace sgcn {

struct ModelDims {
  std::size_t f_in = 1;
  std::size_t h_g = 64;
  std::size_t h_l = 64;
};

/// Gate blocks inside lstm_* tensors are packed [input | forget | candidate | output].
struct ModelParams {
  ModelDims dims;
  GradPair w0, b0;  // GCN layer 1: [f_in x h_g], [h_g]
  GradPair w1, b1;  // GCN layer 2: [h_g x h_g], [h_g]
  GradPair lstm_wx; // [h_g x 4 h_l]
  GradPair lstm_wh; // [h_l x 4 h_l]
  GradPair lstm_b;  // [4 h_l]
  GradPair head_w;  // [h_l x 1]
  GradPair head_b;  // [1]

  std::vector<GradPair*> all();
  std::vector<const GradPair*> all() const;
  /// Canonical field names matching all() order; checkpoints key tensors by these.
  static const std::vector<std::string>& names();

  void zero_grads();
  /// Shape consistency with dims plus finiteness of every entry.
  void require_consistent() const;
};

/// Glorot-uniform for w0/w1/head_w, +-1/sqrt(h_l) for the LSTM matrices,
/// zero biases except the forget-gate slice of lstm_b at 1.0.
/// Draw order is fixed (w0, w1, lstm_wx, lstm_wh, head_w) so a seed pins every bit.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState zero_state(std::size_t rows, std::size_t h_l);

struct GcnCache {
  Tensor m0, z1, h1, m1, z2;  // m = diffused, z = pre-activation
};

struct LstmStepCache {
  Tensor x, h_prev, c_prev;
  Tensor i, f, g, o;  // post-nonlinearity gate values
  Tensor c, tanh_c, h;
};

struct LstmCache {
  std::vector<LstmStepCache> steps;
};

struct ForwardCache {
  const SparseAdjacency* adjacency = nullptr;
  std::size_t batch = 0;
  std::size_t nodes = 0;
  std::vector<GcnCache> gcn;  // one per timestep
  LstmCache lstm;
  Tensor h_last;  // [batch*nodes x h_l]
};

/// H2 = ReLU(N.H1.W1 + b1) where H1 = ReLU(N.X.W0 + b0).
/// x is [rows x f_in] with rows a multiple of the node count (batched copies).
Tensor gcn_forward(const SparseAdjacency& n, const Tensor& x, const ModelParams& p,
                   GcnCache* cache);

/// Accumulates parameter gradients into p; returns dX when want_dx (empty otherwise).
/// The adjoint of spmm is spmm itself because the normalized adjacency is symmetric.
Tensor gcn_backward(const SparseAdjacency& n, const GcnCache& cache,
                    const Tensor& d_h2, ModelParams& p, bool want_dx);

/// seq holds N tensors [rows x h_g]; returns h_N. s0 nullptr means zero state.
Tensor lstm_forward(const std::vector<Tensor>& seq, const ModelParams& p,
                    LstmCache* cache, const LstmState* s0 = nullptr);

struct LstmGrads {
  std::vector<Tensor> d_seq;
  LstmState d_s0;
};

LstmGrads lstm_backward(const LstmCache& cache, const Tensor& d_h_last,
                        ModelParams& p);

/// Single window [N x nodes x f_in] -> y_pred [nodes].
Tensor model_forward(const SparseAdjacency& n, const Tensor& window,
                     const ModelParams& p, ForwardCache* cache);

/// Batched pass: steps has N entries [batch*nodes x f_in], one per timestep,
/// each holding `batch` stacked graph copies. Returns y [batch x nodes].
Tensor model_forward_steps(const SparseAdjacency& n, const std::vector<Tensor>& steps,
                           std::size_t batch, const ModelParams& p,
                           ForwardCache* cache);

/// d_ypred shaped like the matching forward's output ([nodes] or [batch x nodes]).
/// Parameter gradients accumulate into p; per-timestep dX returned when want_dx.
std::vector<Tensor> model_backward(const ForwardCache& cache, const Tensor& d_ypred,
                                   ModelParams& p, bool want_dx = false);

}  // namespace sgcn
