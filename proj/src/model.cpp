#include "sgcn/model.hpp"

#include <cmath>

#include "sgcn/errors.hpp"
#include "sgcn/rng.hpp"

namespace sgcn {

std::vector<GradPair*> ModelParams::all() {
  return {&w0, &b0, &w1, &b1, &lstm_wx, &lstm_wh, &lstm_b, &head_w, &head_b};
}

std::vector<const GradPair*> ModelParams::all() const {
  return {&w0, &b0, &w1, &b1, &lstm_wx, &lstm_wh, &lstm_b, &head_w, &head_b};
}

const std::vector<std::string>& ModelParams::names() {
  static const std::vector<std::string> kNames = {
      "w0", "b0", "w1", "b1", "lstm_wx", "lstm_wh", "lstm_b", "head_w", "head_b"};
  return kNames;
}

void ModelParams::zero_grads() {
  for (GradPair* p : all()) p->zero_grad();
}

void ModelParams::require_consistent() const {
  const auto expect = [](const Tensor& t, std::vector<std::size_t> shape,
                         const char* name) {
    if (t.shape() != shape) {
      throw ValidationError(std::string("params: ") + name + " has shape " +
                            t.shape_str());
    }
    if (!t.all_finite()) {
      throw ValidationError(std::string("params: ") + name + " has non-finite entries");
    }
  };
  expect(w0.value, {dims.f_in, dims.h_g}, "w0");
  expect(b0.value, {dims.h_g}, "b0");
  expect(w1.value, {dims.h_g, dims.h_g}, "w1");
  expect(b1.value, {dims.h_g}, "b1");
  expect(lstm_wx.value, {dims.h_g, 4 * dims.h_l}, "lstm_wx");
  expect(lstm_wh.value, {dims.h_l, 4 * dims.h_l}, "lstm_wh");
  expect(lstm_b.value, {4 * dims.h_l}, "lstm_b");
  expect(head_w.value, {dims.h_l, 1}, "head_w");
  expect(head_b.value, {1}, "head_b");
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  if (dims.f_in < 1 || dims.h_g < 1 || dims.h_l < 1) {
    throw ValidationError("init_params: all dims must be >= 1");
  }
  Rng rng(seed);
  const auto draw = [&rng](std::vector<std::size_t> shape, double bound) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
  };
  const double fin = static_cast<double>(dims.f_in);
  const double hg = static_cast<double>(dims.h_g);
  const double hl = static_cast<double>(dims.h_l);

  ModelParams p;
  p.dims = dims;
  // Glorot-uniform GCN layers, 1/sqrt(h_l) LSTM weights, zero biases except
  // the forget gate, which starts at 1 so the cell state survives the first
  // epochs instead of being forgotten before BPTT can assign it credit.
  p.w0 = GradPair(draw({dims.f_in, dims.h_g}, std::sqrt(6.0 / (fin + hg))));
  p.b0 = GradPair(Tensor({dims.h_g}));
  p.w1 = GradPair(draw({dims.h_g, dims.h_g}, std::sqrt(6.0 / (hg + hg))));
  p.b1 = GradPair(Tensor({dims.h_g}));
  const double lstm_bound = 1.0 / std::sqrt(hl);
  p.lstm_wx = GradPair(draw({dims.h_g, 4 * dims.h_l}, lstm_bound));
  p.lstm_wh = GradPair(draw({dims.h_l, 4 * dims.h_l}, lstm_bound));
  Tensor lb({4 * dims.h_l});
  for (std::size_t j = dims.h_l; j < 2 * dims.h_l; ++j) lb(j) = 1.0;
  p.lstm_b = GradPair(std::move(lb));
  p.head_w = GradPair(draw({dims.h_l, 1}, lstm_bound));
  p.head_b = GradPair(Tensor({1}));
  return p;
}

LstmState zero_state(std::size_t rows, std::size_t h_l) {
  return LstmState{Tensor({rows, h_l}), Tensor({rows, h_l})};
}

Tensor gcn_forward(const SparseAdjacency& n, const Tensor& x, const ModelParams& p,
                   GcnCache* cache) {
  GcnCache local;
  GcnCache& c = cache ? *cache : local;
  c.m0 = spmm(n, x);
  c.z1 = add_bias(matmul(c.m0, p.w0.value), p.b0.value);
  c.h1 = relu(c.z1);
  c.m1 = spmm(n, c.h1);
  c.z2 = add_bias(matmul(c.m1, p.w1.value), p.b1.value);
  return relu(c.z2);
}

Tensor gcn_backward(const SparseAdjacency& n, const GcnCache& cache,
                    const Tensor& d_h2, ModelParams& p, bool want_dx) {
  const Tensor d_z2 = relu_backward(cache.z2, d_h2);
  const MatmulGrads g2 = matmul_backward(cache.m1, p.w1.value, d_z2);
  p.w1.accumulate(g2.db);
  p.b1.accumulate(bias_backward(d_z2));
  const Tensor d_h1 = spmm(n, g2.da);
  const Tensor d_z1 = relu_backward(cache.z1, d_h1);
  const MatmulGrads g1 = matmul_backward(cache.m0, p.w0.value, d_z1);
  p.w0.accumulate(g1.db);
  p.b0.accumulate(bias_backward(d_z1));
  if (!want_dx) return Tensor{};
  return spmm(n, g1.da);
}

Tensor lstm_forward(const std::vector<Tensor>& seq, const ModelParams& p,
                    LstmCache* cache, const LstmState* s0) {
  if (seq.empty()) throw ValidationError("lstm_forward: empty sequence");
  const std::size_t rows = seq.front().dim(0);
  const std::size_t h = p.dims.h_l;
  LstmState state = s0 ? *s0 : zero_state(rows, h);
  if (state.h.shape() != std::vector<std::size_t>{rows, h} ||
      !state.h.same_shape(state.c)) {
    throw DimensionError("lstm_forward: initial state " + state.h.shape_str() +
                         " does not match rows " + std::to_string(rows));
  }
  if (cache) cache->steps.clear();

  for (const Tensor& x : seq) {
    if (x.rank() != 2 || x.dim(0) != rows) {
      throw DimensionError("lstm_forward: step shape " + x.shape_str() +
                           " breaks the sequence's row count");
    }
    Tensor z = add_bias(add(matmul(x, p.lstm_wx.value), matmul(state.h, p.lstm_wh.value)),
                        p.lstm_b.value);
    LstmStepCache sc;
    sc.x = x;
    sc.h_prev = state.h;
    sc.c_prev = state.c;
    sc.i = sigmoid(slice_cols(z, 0, h));
    sc.f = sigmoid(slice_cols(z, h, 2 * h));
    sc.g = tanh(slice_cols(z, 2 * h, 3 * h));
    sc.o = sigmoid(slice_cols(z, 3 * h, 4 * h));
    sc.c = add(hadamard(sc.f, sc.c_prev), hadamard(sc.i, sc.g));
    sc.tanh_c = tanh(sc.c);
    sc.h = hadamard(sc.o, sc.tanh_c);
    state.h = sc.h;
    state.c = sc.c;
    if (cache) cache->steps.push_back(std::move(sc));
  }
  return state.h;
}

LstmGrads lstm_backward(const LstmCache& cache, const Tensor& d_h_last,
                        ModelParams& p) {
  if (cache.steps.empty()) throw ValidationError("lstm_backward: empty cache");
  LstmGrads out;
  out.d_seq.resize(cache.steps.size());
  Tensor d_h = d_h_last;
  Tensor d_c = Tensor::zeros_like(cache.steps.back().c);
  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    const LstmStepCache& sc = cache.steps[t];
    const Tensor d_o = hadamard(d_h, sc.tanh_c);
    const Tensor d_c_total = add(d_c, tanh_backward(sc.tanh_c, hadamard(d_h, sc.o)));
    const Tensor d_f = hadamard(d_c_total, sc.c_prev);
    const Tensor d_i = hadamard(d_c_total, sc.g);
    const Tensor d_g = hadamard(d_c_total, sc.i);
    const Tensor d_z = concat_cols({sigmoid_backward(sc.i, d_i),
                                    sigmoid_backward(sc.f, d_f),
                                    tanh_backward(sc.g, d_g),
                                    sigmoid_backward(sc.o, d_o)});
    const MatmulGrads gx = matmul_backward(sc.x, p.lstm_wx.value, d_z);
    const MatmulGrads gh = matmul_backward(sc.h_prev, p.lstm_wh.value, d_z);
    p.lstm_wx.accumulate(gx.db);
    p.lstm_wh.accumulate(gh.db);
    p.lstm_b.accumulate(bias_backward(d_z));
    out.d_seq[t] = gx.da;
    d_h = gh.da;
    d_c = hadamard(d_c_total, sc.f);
  }
  out.d_s0 = LstmState{std::move(d_h), std::move(d_c)};
  return out;
}

Tensor model_forward_steps(const SparseAdjacency& n, const std::vector<Tensor>& steps,
                           std::size_t batch, const ModelParams& p,
                           ForwardCache* cache) {
  if (steps.empty()) throw ValidationError("model_forward: empty window");
  if (batch < 1) throw ValidationError("model_forward: batch must be >= 1");
  const std::size_t nodes = n.num_nodes();
  const std::size_t rows = batch * nodes;
  for (const Tensor& x : steps) {
    if (x.rank() != 2 || x.dim(0) != rows || x.dim(1) != p.dims.f_in) {
      throw DimensionError("model_forward: timestep shape " + x.shape_str() +
                           " does not match batch " + std::to_string(batch) +
                           " over " + std::to_string(nodes) + " nodes");
    }
  }

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.adjacency = &n;
  c.batch = batch;
  c.nodes = nodes;
  c.gcn.assign(steps.size(), GcnCache{});
  c.lstm.steps.clear();

  std::vector<Tensor> features;
  features.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    features.push_back(gcn_forward(n, steps[t], p, &c.gcn[t]));
  }
  c.h_last = lstm_forward(features, p, &c.lstm);
  const Tensor y_col = add_bias(matmul(c.h_last, p.head_w.value), p.head_b.value);

  Tensor y({batch, nodes});
  for (std::size_t i = 0; i < rows; ++i) y[i] = y_col[i];
  return y;
}

Tensor model_forward(const SparseAdjacency& n, const Tensor& window,
                     const ModelParams& p, ForwardCache* cache) {
  if (window.rank() != 3 || window.dim(1) != n.num_nodes() ||
      window.dim(2) != p.dims.f_in) {
    throw DimensionError("model_forward: window shape " + window.shape_str() +
                         " does not match " + std::to_string(n.num_nodes()) +
                         " nodes with f_in " + std::to_string(p.dims.f_in));
  }
  const std::size_t seq_len = window.dim(0);
  const std::size_t nodes = window.dim(1);
  std::vector<Tensor> steps;
  steps.reserve(seq_len);
  for (std::size_t t = 0; t < seq_len; ++t) {
    Tensor x({nodes, p.dims.f_in});
    for (std::size_t i = 0; i < nodes; ++i) {
      for (std::size_t k = 0; k < p.dims.f_in; ++k) x(i, k) = window(t, i, k);
    }
    steps.push_back(std::move(x));
  }
  Tensor y = model_forward_steps(n, steps, 1, p, cache);
  return Tensor({nodes}, std::move(y.raw()));
}

std::vector<Tensor> model_backward(const ForwardCache& cache, const Tensor& d_ypred,
                                   ModelParams& p, bool want_dx) {
  if (!cache.adjacency || cache.gcn.empty() ||
      cache.gcn.size() != cache.lstm.steps.size()) {
    throw ValidationError("model_backward: cache does not hold a forward pass");
  }
  const std::size_t rows = cache.batch * cache.nodes;
  if (cache.h_last.rank() != 2 || cache.h_last.dim(0) != rows ||
      cache.h_last.dim(1) != p.dims.h_l ||
      cache.gcn.front().z1.dim(1) != p.dims.h_g) {
    throw ValidationError("model_backward: cache does not match these parameters");
  }
  if (d_ypred.size() != rows) {
    throw DimensionError("model_backward: gradient shape " + d_ypred.shape_str() +
                         " does not match " + std::to_string(rows) + " outputs");
  }

  Tensor d_y({rows, 1});
  for (std::size_t i = 0; i < rows; ++i) d_y[i] = d_ypred[i];
  const MatmulGrads gh = matmul_backward(cache.h_last, p.head_w.value, d_y);
  p.head_w.accumulate(gh.db);
  p.head_b.accumulate(bias_backward(d_y));

  const LstmGrads lg = lstm_backward(cache.lstm, gh.da, p);

  std::vector<Tensor> dxs;
  if (want_dx) dxs.resize(cache.gcn.size());
  for (std::size_t t = 0; t < cache.gcn.size(); ++t) {
    Tensor dx = gcn_backward(*cache.adjacency, cache.gcn[t], lg.d_seq[t], p, want_dx);
    if (want_dx) dxs[t] = std::move(dx);
  }
  return dxs;
}

}  // namespace sgcn
