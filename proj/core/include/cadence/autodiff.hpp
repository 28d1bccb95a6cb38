#pragma once

// Reverse-mode ops on Tensor<S>. Each op builds a TapeNode when grad mode is
// on and any input requires grad; backward() in tensor.hpp replays the tape.
// Shapes are time-major: sequences are [frames][dims].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cadence/errors.hpp"
#include "cadence/tensor.hpp"

namespace cadence {

namespace detail {

template <typename S>
bool needs_grad(const Tensor<S>& t) {
  return t.requires_grad();
}

template <typename S, typename... Rest>
bool needs_grad(const Tensor<S>& t, const Rest&... rest) {
  return t.requires_grad() || needs_grad(rest...);
}

template <typename S, typename Fn>
void attach(Tensor<S>& out, std::vector<Tensor<S>> parents, Fn&& fn) {
  auto node = std::make_shared<TapeNode<S>>();
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.impl());
  node->backward = std::forward<Fn>(fn);
  out.impl()->node = std::move(node);
}

template <typename S>
std::vector<S>& grad_of(const std::shared_ptr<TensorImpl<S>>& impl) {
  return impl->grad;
}

}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ConfigError("add: shape mismatch");
  const bool rg = grad_enabled() && detail::needs_grad(a, b);
  Tensor<S> out = Tensor<S>::zeros(a.shape(), rg);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (rg) {
    detail::attach(out, {a, b}, [n](TensorImpl<S>& o) {
      auto& pa = *o.node->parents[0];
      auto& pb = *o.node->parents[1];
      if (pa.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) pa.grad[i] += o.grad[i];
      }
      if (pb.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) pb.grad[i] += o.grad[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ConfigError("mul: shape mismatch");
  const bool rg = grad_enabled() && detail::needs_grad(a, b);
  Tensor<S> out = Tensor<S>::zeros(a.shape(), rg);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (rg) {
    detail::attach(out, {a, b}, [n](TensorImpl<S>& o) {
      auto& pa = *o.node->parents[0];
      auto& pb = *o.node->parents[1];
      if (pa.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) pa.grad[i] += o.grad[i] * pb.data[i];
      }
      if (pb.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) pb.grad[i] += o.grad[i] * pa.data[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  const bool rg = grad_enabled() && a.requires_grad();
  Tensor<S> out = Tensor<S>::zeros(a.shape(), rg);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  if (rg) {
    detail::attach(out, {a}, [n, c](TensorImpl<S>& o) {
      auto& pa = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) pa.grad[i] += o.grad[i] * c;
    });
  }
  return out;
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& a) {
  const bool rg = grad_enabled() && a.requires_grad();
  Tensor<S> out = Tensor<S>::zeros(a.shape(), rg);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
  if (rg) {
    detail::attach(out, {a}, [n](TensorImpl<S>& o) {
      auto& pa = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) {
        pa.grad[i] += o.grad[i] * (S(1) - o.data[i] * o.data[i]);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> sigmoid_op(const Tensor<S>& a) {
  const bool rg = grad_enabled() && a.requires_grad();
  Tensor<S> out = Tensor<S>::zeros(a.shape(), rg);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    out.data()[i] = S(1) / (S(1) + std::exp(-a.data()[i]));
  }
  if (rg) {
    detail::attach(out, {a}, [n](TensorImpl<S>& o) {
      auto& pa = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) {
        pa.grad[i] += o.grad[i] * o.data[i] * (S(1) - o.data[i]);
      }
    });
  }
  return out;
}

// y[i] = sum_k M[i][k] v[k]
template <typename S>
Tensor<S> matvec(const Tensor<S>& m, const Tensor<S>& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) {
    throw ConfigError("matvec: shape mismatch");
  }
  const int rows = m.dim(0), cols = m.dim(1);
  const bool rg = grad_enabled() && detail::needs_grad(m, v);
  Tensor<S> out = Tensor<S>::zeros({rows}, rg);
  for (int i = 0; i < rows; ++i) {
    S acc = 0;
    const S* mrow = m.data() + static_cast<std::size_t>(i) * cols;
    for (int k = 0; k < cols; ++k) acc += mrow[k] * v.data()[k];
    out.data()[i] = acc;
  }
  if (rg) {
    detail::attach(out, {m, v}, [rows, cols](TensorImpl<S>& o) {
      auto& pm = *o.node->parents[0];
      auto& pv = *o.node->parents[1];
      for (int i = 0; i < rows; ++i) {
        const S g = o.grad[static_cast<std::size_t>(i)];
        const std::size_t base = static_cast<std::size_t>(i) * cols;
        if (pm.requires_grad) {
          for (int k = 0; k < cols; ++k) pm.grad[base + k] += g * pv.data[k];
        }
        if (pv.requires_grad) {
          for (int k = 0; k < cols; ++k) pv.grad[k] += g * pm.data[base + k];
        }
      }
    });
  }
  return out;
}

// y[k] = sum_i v[i] M[i][k]
template <typename S>
Tensor<S> vecmat(const Tensor<S>& v, const Tensor<S>& m) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(0) != v.dim(0)) {
    throw ConfigError("vecmat: shape mismatch");
  }
  const int rows = m.dim(0), cols = m.dim(1);
  const bool rg = grad_enabled() && detail::needs_grad(v, m);
  Tensor<S> out = Tensor<S>::zeros({cols}, rg);
  for (int i = 0; i < rows; ++i) {
    const S vi = v.data()[i];
    const S* mrow = m.data() + static_cast<std::size_t>(i) * cols;
    for (int k = 0; k < cols; ++k) out.data()[k] += vi * mrow[k];
  }
  if (rg) {
    detail::attach(out, {v, m}, [rows, cols](TensorImpl<S>& o) {
      auto& pv = *o.node->parents[0];
      auto& pm = *o.node->parents[1];
      for (int i = 0; i < rows; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * cols;
        if (pv.requires_grad) {
          S acc = 0;
          for (int k = 0; k < cols; ++k) acc += o.grad[k] * pm.data[base + k];
          pv.grad[i] += acc;
        }
        if (pm.requires_grad) {
          const S vi = pv.data[i];
          for (int k = 0; k < cols; ++k) pm.grad[base + k] += vi * o.grad[k];
        }
      }
    });
  }
  return out;
}

// Y = X W^T + b with X [N][Din], W [Dout][Din], b [Dout]
template <typename S>
Tensor<S> linear_seq(const Tensor<S>& x, const Tensor<S>& w,
                     const Tensor<S>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      w.dim(0) != b.dim(0)) {
    throw ConfigError("linear_seq: shape mismatch");
  }
  const int n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  const bool rg = grad_enabled() && detail::needs_grad(x, w, b);
  Tensor<S> out = Tensor<S>::zeros({n, dout}, rg);
  for (int t = 0; t < n; ++t) {
    const S* xr = x.data() + static_cast<std::size_t>(t) * din;
    S* yr = out.data() + static_cast<std::size_t>(t) * dout;
    for (int o = 0; o < dout; ++o) {
      const S* wr = w.data() + static_cast<std::size_t>(o) * din;
      S acc = b.data()[o];
      for (int k = 0; k < din; ++k) acc += wr[k] * xr[k];
      yr[o] = acc;
    }
  }
  if (rg) {
    detail::attach(out, {x, w, b}, [n, din, dout](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      auto& pw = *o.node->parents[1];
      auto& pb = *o.node->parents[2];
      for (int t = 0; t < n; ++t) {
        const S* gr = o.grad.data() + static_cast<std::size_t>(t) * dout;
        const S* xr = px.data.data() + static_cast<std::size_t>(t) * din;
        for (int oi = 0; oi < dout; ++oi) {
          const S g = gr[oi];
          if (g == S(0)) continue;
          const std::size_t wbase = static_cast<std::size_t>(oi) * din;
          if (px.requires_grad) {
            S* xg = px.grad.data() + static_cast<std::size_t>(t) * din;
            for (int k = 0; k < din; ++k) xg[k] += g * pw.data[wbase + k];
          }
          if (pw.requires_grad) {
            for (int k = 0; k < din; ++k) pw.grad[wbase + k] += g * xr[k];
          }
          if (pb.requires_grad) pb.grad[oi] += g;
        }
      }
    });
  }
  return out;
}

// X [N][D] + broadcast row b [D]
template <typename S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0)) {
    throw ConfigError("add_bias: shape mismatch");
  }
  const int n = x.dim(0), d = x.dim(1);
  const bool rg = grad_enabled() && detail::needs_grad(x, b);
  Tensor<S> out = Tensor<S>::zeros({n, d}, rg);
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < d; ++k) {
      out.data()[static_cast<std::size_t>(t) * d + k] =
          x.data()[static_cast<std::size_t>(t) * d + k] + b.data()[k];
    }
  }
  if (rg) {
    detail::attach(out, {x, b}, [n, d](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      auto& pb = *o.node->parents[1];
      if (px.requires_grad) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) px.grad[i] += o.grad[i];
      }
      if (pb.requires_grad) {
        for (int t = 0; t < n; ++t) {
          for (int k = 0; k < d; ++k) {
            pb.grad[k] += o.grad[static_cast<std::size_t>(t) * d + k];
          }
        }
      }
    });
  }
  return out;
}

// v [N] + broadcast scalar s [1]
template <typename S>
Tensor<S> add_scalar(const Tensor<S>& v, const Tensor<S>& s) {
  if (v.rank() != 1 || s.numel() != 1) {
    throw ConfigError("add_scalar: expects vector and scalar");
  }
  const int n = v.dim(0);
  const bool rg = grad_enabled() && detail::needs_grad(v, s);
  Tensor<S> out = Tensor<S>::zeros({n}, rg);
  for (int i = 0; i < n; ++i) out.data()[i] = v.data()[i] + s.data()[0];
  if (rg) {
    detail::attach(out, {v, s}, [n](TensorImpl<S>& o) {
      auto& pv = *o.node->parents[0];
      auto& ps = *o.node->parents[1];
      if (pv.requires_grad) {
        for (int i = 0; i < n; ++i) pv.grad[i] += o.grad[i];
      }
      if (ps.requires_grad) {
        S acc = 0;
        for (int i = 0; i < n; ++i) acc += o.grad[i];
        ps.grad[0] += acc;
      }
    });
  }
  return out;
}

// 1-d convolution along the first axis, zero-padded to the same length.
// X [N][Cin], W [Cout][Cin][k], b [Cout]; k must be odd.
template <typename S>
Tensor<S> conv1d_same(const Tensor<S>& x, const Tensor<S>& w,
                      const Tensor<S>& b) {
  if (x.rank() != 2 || w.rank() != 3 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      w.dim(0) != b.dim(0) || w.dim(2) % 2 == 0) {
    throw ConfigError("conv1d_same: shape mismatch or even kernel");
  }
  const int n = x.dim(0), cin = x.dim(1), cout = w.dim(0), k = w.dim(2);
  const int half = k / 2;
  const bool rg = grad_enabled() && detail::needs_grad(x, w, b);
  Tensor<S> out = Tensor<S>::zeros({n, cout}, rg);
  for (int t = 0; t < n; ++t) {
    S* yr = out.data() + static_cast<std::size_t>(t) * cout;
    for (int o = 0; o < cout; ++o) {
      S acc = b.data()[o];
      for (int j = 0; j < k; ++j) {
        const int src = t + j - half;
        if (src < 0 || src >= n) continue;
        const S* xr = x.data() + static_cast<std::size_t>(src) * cin;
        const S* wr =
            w.data() + (static_cast<std::size_t>(o) * cin) * k + j;
        // W layout [o][c][j]: stride over c is k
        for (int c = 0; c < cin; ++c) acc += wr[static_cast<std::size_t>(c) * k] * xr[c];
      }
      yr[o] = acc;
    }
  }
  if (rg) {
    detail::attach(out, {x, w, b}, [n, cin, cout, k, half](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      auto& pw = *o.node->parents[1];
      auto& pb = *o.node->parents[2];
      for (int t = 0; t < n; ++t) {
        const S* gr = o.grad.data() + static_cast<std::size_t>(t) * cout;
        for (int oi = 0; oi < cout; ++oi) {
          const S g = gr[oi];
          if (g == S(0)) continue;
          if (pb.requires_grad) pb.grad[oi] += g;
          for (int j = 0; j < k; ++j) {
            const int src = t + j - half;
            if (src < 0 || src >= n) continue;
            const std::size_t xbase = static_cast<std::size_t>(src) * cin;
            const std::size_t wbase =
                (static_cast<std::size_t>(oi) * cin) * k + j;
            if (pw.requires_grad) {
              for (int c = 0; c < cin; ++c) {
                pw.grad[wbase + static_cast<std::size_t>(c) * k] +=
                    g * px.data[xbase + c];
              }
            }
            if (px.requires_grad) {
              for (int c = 0; c < cin; ++c) {
                px.grad[xbase + c] +=
                    g * pw.data[wbase + static_cast<std::size_t>(c) * k];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// Numerically stable softmax over a vector (max subtraction).
template <typename S>
Tensor<S> softmax_vec(const Tensor<S>& v) {
  if (v.rank() != 1 || v.dim(0) == 0) {
    throw ConfigError("softmax_vec: expects nonempty vector");
  }
  const int n = v.dim(0);
  const bool rg = grad_enabled() && v.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({n}, rg);
  S mx = v.data()[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v.data()[i]);
  S denom = 0;
  for (int i = 0; i < n; ++i) {
    out.data()[i] = std::exp(v.data()[i] - mx);
    denom += out.data()[i];
  }
  for (int i = 0; i < n; ++i) out.data()[i] /= denom;
  if (rg) {
    detail::attach(out, {v}, [n](TensorImpl<S>& o) {
      auto& pv = *o.node->parents[0];
      S dot = 0;
      for (int i = 0; i < n; ++i) dot += o.grad[i] * o.data[i];
      for (int i = 0; i < n; ++i) {
        pv.grad[i] += o.data[i] * (o.grad[i] - dot);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> slice_vec(const Tensor<S>& v, int offset, int len) {
  if (v.rank() != 1 || offset < 0 || len <= 0 || offset + len > v.dim(0)) {
    throw ConfigError("slice_vec: bad range");
  }
  const bool rg = grad_enabled() && v.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({len}, rg);
  for (int i = 0; i < len; ++i) out.data()[i] = v.data()[offset + i];
  if (rg) {
    detail::attach(out, {v}, [offset, len](TensorImpl<S>& o) {
      auto& pv = *o.node->parents[0];
      for (int i = 0; i < len; ++i) pv.grad[offset + i] += o.grad[i];
    });
  }
  return out;
}

// Row i of X [N][D] as a vector [D].
template <typename S>
Tensor<S> slice_row(const Tensor<S>& x, int row) {
  if (x.rank() != 2 || row < 0 || row >= x.dim(0)) {
    throw ConfigError("slice_row: bad row index");
  }
  const int d = x.dim(1);
  const bool rg = grad_enabled() && x.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({d}, rg);
  std::copy(x.data() + static_cast<std::size_t>(row) * d,
            x.data() + static_cast<std::size_t>(row + 1) * d, out.data());
  if (rg) {
    detail::attach(out, {x}, [row, d](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      S* dst = px.grad.data() + static_cast<std::size_t>(row) * d;
      for (int k = 0; k < d; ++k) dst[k] += o.grad[k];
    });
  }
  return out;
}

// Same data, new shape.
template <typename S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ConfigError("reshape: element count mismatch");
  }
  const bool rg = grad_enabled() && x.requires_grad();
  Tensor<S> out = Tensor<S>::from(std::move(shape), x.values(), rg);
  if (rg) {
    const std::size_t n = x.numel();
    detail::attach(out, {x}, [n](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[i];
    });
  }
  return out;
}

// y = W x + b for a single vector.
template <typename S>
Tensor<S> linear_vec(const Tensor<S>& x, const Tensor<S>& w,
                     const Tensor<S>& b) {
  return add(matvec(w, x), b);
}

// out[f][d] = sum_l w[l] * stack[l][f][d]; stack [L][F][D] is usually a
// constant (extracted features), w is the softmaxed layer-weight vector.
template <typename S>
Tensor<S> weighted_stack(const Tensor<S>& w, const Tensor<S>& stack) {
  if (w.rank() != 1 || stack.rank() != 3 || w.dim(0) != stack.dim(0)) {
    throw ConfigError("weighted_stack: layer count mismatch");
  }
  const int layers = stack.dim(0), frames = stack.dim(1), d = stack.dim(2);
  const std::size_t plane = static_cast<std::size_t>(frames) * d;
  const bool rg = grad_enabled() && detail::needs_grad(w, stack);
  Tensor<S> out = Tensor<S>::zeros({frames, d}, rg);
  for (int l = 0; l < layers; ++l) {
    const S wl = w.data()[l];
    const S* src = stack.data() + static_cast<std::size_t>(l) * plane;
    for (std::size_t i = 0; i < plane; ++i) out.data()[i] += wl * src[i];
  }
  if (rg) {
    detail::attach(out, {w, stack}, [layers, plane](TensorImpl<S>& o) {
      auto& pw = *o.node->parents[0];
      auto& ps = *o.node->parents[1];
      for (int l = 0; l < layers; ++l) {
        const S* src = ps.data.data() + static_cast<std::size_t>(l) * plane;
        if (pw.requires_grad) {
          S acc = 0;
          for (std::size_t i = 0; i < plane; ++i) acc += o.grad[i] * src[i];
          pw.grad[l] += acc;
        }
        if (ps.requires_grad) {
          const S wl = pw.data[l];
          S* dst = ps.grad.data() + static_cast<std::size_t>(l) * plane;
          for (std::size_t i = 0; i < plane; ++i) dst[i] += wl * o.grad[i];
        }
      }
    });
  }
  return out;
}

// Mean over rows of X [F][D] -> [D]. Each column is summed in ascending value
// order with double accumulation, so any permutation of the rows produces a
// bit-identical result.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& x) {
  if (x.rank() != 2 || x.dim(0) == 0) {
    throw ConfigError("mean_rows: expects nonempty [F][D]");
  }
  const int f = x.dim(0), d = x.dim(1);
  const bool rg = grad_enabled() && x.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({d}, rg);
  std::vector<S> col(static_cast<std::size_t>(f));
  for (int k = 0; k < d; ++k) {
    for (int t = 0; t < f; ++t) {
      col[static_cast<std::size_t>(t)] =
          x.data()[static_cast<std::size_t>(t) * d + k];
    }
    std::sort(col.begin(), col.end());
    double acc = 0;
    for (S v : col) acc += static_cast<double>(v);
    out.data()[k] = static_cast<S>(acc / f);
  }
  if (rg) {
    detail::attach(out, {x}, [f, d](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      const S inv = S(1) / static_cast<S>(f);
      for (int t = 0; t < f; ++t) {
        for (int k = 0; k < d; ++k) {
          px.grad[static_cast<std::size_t>(t) * d + k] += o.grad[k] * inv;
        }
      }
    });
  }
  return out;
}

// Mean and population standard deviation per column of X [F][D] -> [2D]
// (means first, then deviations). Moments accumulate in sorted order like
// mean_rows, so row permutations are bit-identical here too. A constant
// column has deviation exactly 0; its deviation gradient is taken as 0.
template <typename S>
Tensor<S> stats_pool(const Tensor<S>& x) {
  if (x.rank() != 2 || x.dim(0) == 0) {
    throw ConfigError("stats_pool: expects nonempty [F][D]");
  }
  const int f = x.dim(0), d = x.dim(1);
  const bool rg = grad_enabled() && x.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({2 * d}, rg);
  std::vector<double> col(static_cast<std::size_t>(f));
  for (int k = 0; k < d; ++k) {
    for (int t = 0; t < f; ++t) {
      col[static_cast<std::size_t>(t)] =
          static_cast<double>(x.data()[static_cast<std::size_t>(t) * d + k]);
    }
    std::sort(col.begin(), col.end());
    double sum = 0;
    for (double v : col) sum += v;
    const double mean = sum / f;
    for (auto& v : col) v = (v - mean) * (v - mean);
    std::sort(col.begin(), col.end());
    double sq = 0;
    for (double v : col) sq += v;
    out.data()[k] = static_cast<S>(mean);
    out.data()[d + k] = static_cast<S>(std::sqrt(sq / f));
  }
  if (rg) {
    detail::attach(out, {x}, [f, d](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      const S inv = S(1) / static_cast<S>(f);
      for (int k = 0; k < d; ++k) {
        const S gm = o.grad[k] * inv;
        const S sd = o.data[d + k];
        const S gs = sd > S(0) ? o.grad[d + k] * inv / sd : S(0);
        const S mean = o.data[k];
        for (int t = 0; t < f; ++t) {
          const std::size_t idx = static_cast<std::size_t>(t) * d + k;
          px.grad[idx] += gm + gs * (px.data[idx] - mean);
        }
      }
    });
  }
  return out;
}

// Stacks F row vectors [H] into a matrix [F][H].
template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows) {
  if (rows.empty()) throw ConfigError("stack_rows: empty input");
  const int h = rows[0].dim(0);
  bool rg = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.dim(0) != h) {
      throw ConfigError("stack_rows: inconsistent row lengths");
    }
    rg = rg || r.requires_grad();
  }
  rg = rg && grad_enabled();
  const int f = static_cast<int>(rows.size());
  Tensor<S> out = Tensor<S>::zeros({f, h}, rg);
  for (int t = 0; t < f; ++t) {
    std::copy(rows[t].data(), rows[t].data() + h,
              out.data() + static_cast<std::size_t>(t) * h);
  }
  if (rg) {
    detail::attach(out, rows, [f, h](TensorImpl<S>& o) {
      for (int t = 0; t < f; ++t) {
        auto& p = *o.node->parents[t];
        if (!p.requires_grad) continue;
        const S* g = o.grad.data() + static_cast<std::size_t>(t) * h;
        for (int k = 0; k < h; ++k) p.grad[k] += g[k];
      }
    });
  }
  return out;
}

// Length regulator: repeats row p of X [P][H] durations[p] times.
// Zero-duration rows emit nothing. T = sum(durations) must be >= 1.
template <typename S>
Tensor<S> repeat_rows(const Tensor<S>& x, const std::vector<int>& durations) {
  if (x.rank() != 2 ||
      static_cast<std::size_t>(x.dim(0)) != durations.size()) {
    throw ConfigError("repeat_rows: durations length must match rows");
  }
  long total = 0;
  for (int dur : durations) {
    if (dur < 0) throw ConfigError("repeat_rows: negative duration");
    total += dur;
  }
  if (total < 1) throw DataError("length regulator got all-zero durations");
  const int p = x.dim(0), h = x.dim(1);
  const bool rg = grad_enabled() && x.requires_grad();
  Tensor<S> out = Tensor<S>::zeros({static_cast<int>(total), h}, rg);
  std::size_t row = 0;
  for (int i = 0; i < p; ++i) {
    for (int r = 0; r < durations[static_cast<std::size_t>(i)]; ++r) {
      std::copy(x.data() + static_cast<std::size_t>(i) * h,
                x.data() + static_cast<std::size_t>(i + 1) * h,
                out.data() + row * h);
      ++row;
    }
  }
  if (rg) {
    detail::attach(out, {x}, [durations, p, h](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      std::size_t row = 0;
      for (int i = 0; i < p; ++i) {
        for (int r = 0; r < durations[static_cast<std::size_t>(i)]; ++r) {
          const S* g = o.grad.data() + row * h;
          S* dst = px.grad.data() + static_cast<std::size_t>(i) * h;
          for (int k = 0; k < h; ++k) dst[k] += g[k];
          ++row;
        }
      }
    });
  }
  return out;
}

// Mean absolute error against a constant target, accumulated in double.
template <typename S>
Tensor<S> mae_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  if (pred.shape() != target.shape()) throw ConfigError("mae_loss: shape mismatch");
  const std::size_t n = pred.numel();
  if (n == 0) throw ConfigError("mae_loss: empty input");
  const bool rg = grad_enabled() && pred.requires_grad();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::abs(static_cast<double>(pred.data()[i]) -
                    static_cast<double>(target.data()[i]));
  }
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n)), rg);
  if (rg) {
    detail::attach(out, {pred, target}, [n](TensorImpl<S>& o) {
      auto& pp = *o.node->parents[0];
      auto& pt = *o.node->parents[1];
      const S g = o.grad[0] / static_cast<S>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const S diff = pp.data[i] - pt.data[i];
        if (diff > S(0)) {
          pp.grad[i] += g;
        } else if (diff < S(0)) {
          pp.grad[i] -= g;
        }
      }
    });
  }
  return out;
}

// Mean squared error against a constant target.
template <typename S>
Tensor<S> mse_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  if (pred.shape() != target.shape()) throw ConfigError("mse_loss: shape mismatch");
  const std::size_t n = pred.numel();
  if (n == 0) throw ConfigError("mse_loss: empty input");
  const bool rg = grad_enabled() && pred.requires_grad();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = static_cast<double>(pred.data()[i]) -
                        static_cast<double>(target.data()[i]);
    acc += diff * diff;
  }
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n)), rg);
  if (rg) {
    detail::attach(out, {pred, target}, [n](TensorImpl<S>& o) {
      auto& pp = *o.node->parents[0];
      auto& pt = *o.node->parents[1];
      const S g = S(2) * o.grad[0] / static_cast<S>(n);
      for (std::size_t i = 0; i < n; ++i) {
        pp.grad[i] += g * (pp.data[i] - pt.data[i]);
      }
    });
  }
  return out;
}

// Flattened sum of all entries (used by tests and gradient checks).
template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
  const std::size_t n = x.numel();
  const bool rg = grad_enabled() && x.requires_grad();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x.data()[i]);
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc), rg);
  if (rg) {
    detail::attach(out, {x}, [n](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[0];
    });
  }
  return out;
}

// sum_i c[i] * x[i] with constant coefficients; random-projection losses for
// gradient checks.
template <typename S>
Tensor<S> weighted_sum_all(const Tensor<S>& x, const std::vector<S>& coeff) {
  if (x.numel() != coeff.size()) {
    throw ConfigError("weighted_sum_all: coefficient count mismatch");
  }
  const std::size_t n = x.numel();
  const bool rg = grad_enabled() && x.requires_grad();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(x.data()[i]) * static_cast<double>(coeff[i]);
  }
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc), rg);
  if (rg) {
    detail::attach(out, {x}, [n, coeff](TensorImpl<S>& o) {
      auto& px = *o.node->parents[0];
      for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[0] * coeff[i];
    });
  }
  return out;
}

}  // namespace cadence
