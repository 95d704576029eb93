#include "psr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psr/errors.hpp"

namespace psr {

namespace {

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
Tensor& grad_of(Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }
const Tensor& value_of(const Node& self, std::size_t i) { return self.parents[i]->value; }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename Fwd, typename Dfdx>
Var unary(const Var& x, const char* op, Fwd fwd, Dfdx dfdx) {
  Tensor out(x.shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Var::make(std::move(out), op, {x}, [dfdx](Node& self) {
    const Tensor& in = value_of(self, 0);
    Tensor& gx = grad_of(self, 0);
    for (std::size_t i = 0; i < in.size(); ++i) {
      gx[i] += self.grad[i] * dfdx(in[i], self.value[i]);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Var::make(std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      Tensor& g = grad_of(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Var::make(std::move(out), "sub", {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Var::make(std::move(out), "mul", {a, b}, [](Node& self) {
    const Tensor& av = value_of(self, 0);
    const Tensor& bv = value_of(self, 1);
    if (wants(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  return unary(x, "scale", [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double value) {
  return unary(x, "add_scalar", [value](double v) { return v + value; },
               [](double, double) { return 1.0; });
}

Var sum(const Var& x) {
  const auto& vals = x.value().storage();
  double s = std::accumulate(vals.begin(), vals.end(), 0.0);
  return Var::make(Tensor::scalar(s), "sum", {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var log(const Var& x) {
  return unary(x, "log", [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& x) {
  return unary(x, "relu", [](double v) { return v > 0 ? v : 0.0; },
               [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double negative_slope) {
  return unary(x, "leaky_relu",
               [negative_slope](double v) { return v > 0 ? v : negative_slope * v; },
               [negative_slope](double v, double) { return v > 0 ? 1.0 : negative_slope; });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  const int channels = x.dim(0);
  if (bias.value().rank() != 1 || bias.dim(0) != channels) {
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
  }
  const std::size_t inner = x.size() / channels;
  Tensor out = x.value();
  for (int c = 0; c < channels; ++c) {
    const double b = bias.value()[c];
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] += b;
  }
  return Var::make(std::move(out), "add_channel_bias", {x, bias}, [channels, inner](Node& self) {
    if (wants(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (int c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < inner; ++i) s += self.grad[c * inner + i];
        g[c] += s;
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return Var::make(std::move(out), "reshape", {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var permute(const Var& x, const std::vector<int>& axes) {
  const Shape& in_shape = x.shape();
  const int rank = static_cast<int>(in_shape.size());
  if (static_cast<int>(axes.size()) != rank) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for " +
                         shape_str(in_shape));
  }
  std::vector<bool> seen(rank, false);
  for (int a : axes) {
    if (a < 0 || a >= rank || seen[a]) throw DimensionError("permute: invalid axis order");
    seen[a] = true;
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (int i = rank - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in_shape[i + 1];
  Shape out_shape(rank);
  std::vector<std::size_t> src_stride(rank);
  for (int i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    src_stride[i] = in_stride[axes[i]];
  }
  // src_index[o] maps each output position to its input position.
  const std::size_t n = x.size();
  std::vector<std::size_t> src_index(n);
  std::vector<int> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < n; ++o) {
    src_index[o] = src;
    for (int d = rank - 1; d >= 0; --d) {
      src += src_stride[d];
      if (++counter[d] < out_shape[d]) break;
      src -= src_stride[d] * out_shape[d];
      counter[d] = 0;
    }
  }
  Tensor out(out_shape);
  const Tensor& in = x.value();
  for (std::size_t o = 0; o < n; ++o) out[o] = in[src_index[o]];
  return Var::make(std::move(out), "permute", {x},
                   [src_index = std::move(src_index)](Node& self) {
                     Tensor& g = grad_of(self, 0);
                     for (std::size_t o = 0; o < src_index.size(); ++o) {
                       g[src_index[o]] += self.grad[o];
                     }
                   });
}

Var stack(const std::vector<Var>& xs) {
  if (xs.empty()) throw DimensionError("stack: no inputs");
  const Shape& part = xs.front().shape();
  for (const Var& x : xs) {
    if (x.shape() != part) {
      throw DimensionError("stack: shape mismatch " + shape_str(part) + " vs " +
                           shape_str(x.shape()));
    }
  }
  Shape shape{static_cast<int>(xs.size())};
  shape.insert(shape.end(), part.begin(), part.end());
  Tensor out(shape);
  const std::size_t chunk = xs.front().size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::copy_n(xs[i].value().data(), chunk, out.data() + i * chunk);
  }
  return Var::make(std::move(out), "stack", xs, [chunk](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      if (!wants(self, p)) continue;
      Tensor& g = grad_of(self, p);
      for (std::size_t i = 0; i < chunk; ++i) g[i] += self.grad[p * chunk + i];
    }
  });
}

Var select(const Var& x, int index) {
  const Shape& shape = x.shape();
  if (shape.empty() || index < 0 || index >= shape[0]) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range for " +
                         shape_str(shape));
  }
  Shape part(shape.begin() + 1, shape.end());
  if (part.empty()) part = {1};
  const std::size_t chunk = x.size() / shape[0];
  Tensor out(part);
  std::copy_n(x.value().data() + index * chunk, chunk, out.data());
  return Var::make(std::move(out), "select", {x}, [chunk, index](Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < chunk; ++i) g[index * chunk + i] += self.grad[i];
  });
}

Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  Shape tail(xs.front().shape().begin() + 1, xs.front().shape().end());
  int rows = 0;
  for (const Var& x : xs) {
    Shape t(x.shape().begin() + 1, x.shape().end());
    if (t != tail) {
      throw DimensionError("concat: trailing shape mismatch " + shape_str(xs.front().shape()) +
                           " vs " + shape_str(x.shape()));
    }
    rows += x.dim(0);
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor out(shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& x : xs) {
    offsets.push_back(offset);
    std::copy_n(x.value().data(), x.size(), out.data() + offset);
    offset += x.size();
  }
  return Var::make(std::move(out), "concat", xs, [offsets](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      if (!wants(self, p)) continue;
      Tensor& g = grad_of(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[p] + i];
    }
  });
}

Var gather_rows(const Var& x, const std::vector<int>& rows) {
  if (x.value().rank() != 2) throw DimensionError("gather_rows: expects a 2-D tensor");
  const int n = x.dim(0);
  const int m = x.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty row list");
  for (int r : rows) {
    if (r < 0 || r >= n) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  Tensor out({static_cast<int>(rows.size()), m});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.value().data() + static_cast<std::size_t>(rows[i]) * m, m, out.data() + i * m);
  }
  return Var::make(std::move(out), "gather_rows", {x}, [rows, m](Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(rows[i]) * m + j] += self.grad[i * m + j];
    }
  });
}

namespace {

// c[m x n] += a[m x k] . b[k x n]
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a[m x k] . b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * n + j] += s;
    }
  }
}

// c[k x n] += a[m x k]^T . b[m x n]
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return Var::make(std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    if (wants(self, 0)) gemm_nt(self.grad.data(), value_of(self, 1).data(), grad_of(self, 0).data(), m, n, k);
    if (wants(self, 1)) gemm_tn(value_of(self, 0).data(), self.grad.data(), grad_of(self, 1).data(), m, k, n);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape& xs = x.shape();
  if (weight.value().rank() != 2 || xs.empty() || xs.back() != weight.dim(0)) {
    throw DimensionError("linear: input " + shape_str(xs) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const int in = weight.dim(0), out_features = weight.dim(1);
  if (bias.defined() && (bias.value().rank() != 1 || bias.dim(0) != out_features)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const int rows = static_cast<int>(x.size() / in);
  Shape out_shape = xs;
  out_shape.back() = out_features;
  Tensor out(out_shape);
  if (bias.defined()) {
    for (int r = 0; r < rows; ++r) {
      std::copy_n(bias.value().data(), out_features, out.data() + static_cast<std::size_t>(r) * out_features);
    }
  }
  gemm_nn(x.value().data(), weight.value().data(), out.data(), rows, in, out_features);
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Var::make(std::move(out), "linear", std::move(inputs), [rows, in, out_features](Node& self) {
    if (wants(self, 0)) {
      gemm_nt(self.grad.data(), value_of(self, 1).data(), grad_of(self, 0).data(), rows, out_features, in);
    }
    if (wants(self, 1)) {
      gemm_tn(value_of(self, 0).data(), self.grad.data(), grad_of(self, 1).data(), rows, in, out_features);
    }
    if (self.parents.size() > 2 && wants(self, 2)) {
      Tensor& gb = grad_of(self, 2);
      for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < out_features; ++j) gb[j] += self.grad[static_cast<std::size_t>(r) * out_features + j];
      }
    }
  });
}

Var softmax(const Var& x, int axis) {
  const Shape& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("softmax: axis out of range for " + shape_str(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  Tensor out(shape);
  const Tensor& in = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double mx = in[base];
      for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, in[base + l * inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(in[base + l * inner] - mx);
        out[base + l * inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= z;
    }
  }
  return Var::make(std::move(out), "softmax", {x}, [outer, inner, len](Node& self) {
    Tensor& g = grad_of(self, 0);
    const Tensor& y = self.value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < len; ++l) dot += self.grad[base + l * inner] * y[base + l * inner];
        for (std::size_t l = 0; l < len; ++l) {
          const std::size_t idx = base + l * inner;
          g[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int padding) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 3 || ks.size() != 4 || ks[2] != ks[3]) {
    throw DimensionError("conv2d: expects C x H x W input and Co x Ci x k x k kernel, got " +
                         shape_str(xs) + " and " + shape_str(ks));
  }
  if (ks[1] != xs[0]) {
    throw DimensionError("conv2d: kernel " + shape_str(ks) + " expects " + std::to_string(ks[1]) +
                         " input channels, input " + shape_str(xs) + " has " + std::to_string(xs[0]));
  }
  const int k = ks[2];
  if (padding < 0) {
    if (k % 2 == 0) throw DimensionError("conv2d: same padding requires an odd kernel size");
    padding = (k - 1) / 2;
  }
  if (stride < 1) throw DimensionError("conv2d: stride must be positive");
  const int cin = xs[0], h = xs[1], w = xs[2], cout = ks[0];
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  if (oh < 1 || ow < 1) throw DimensionError("conv2d: kernel larger than padded input " + shape_str(xs));
  if (bias.defined() && (bias.value().rank() != 1 || bias.dim(0) != cout)) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }

  // Valid output column range for a kernel column offset.
  auto col_range = [=](int kx) {
    int lo = 0;
    while (lo < ow && lo * stride + kx - padding < 0) ++lo;
    int hi = ow;
    while (hi > lo && (hi - 1) * stride + kx - padding >= w) --hi;
    return std::pair{lo, hi};
  };

  Tensor out({cout, oh, ow});
  const double* in = x.value().data();
  const double* kw = kernel.value().data();
  double* o = out.data();
  for (int co = 0; co < cout; ++co) {
    double* oplane = o + static_cast<std::size_t>(co) * oh * ow;
    if (bias.defined()) std::fill_n(oplane, oh * ow, bias.value()[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* iplane = in + static_cast<std::size_t>(ci) * h * w;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = kw[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
          if (wv == 0.0) continue;
          auto [lo, hi] = col_range(kx);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            const double* irow = iplane + static_cast<std::size_t>(iy) * w;
            const int shift = kx - padding;
            double* orow = oplane + static_cast<std::size_t>(oy) * ow;
            for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * irow[ox * stride + shift];
          }
        }
      }
    }
  }

  std::vector<Var> inputs{x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return Var::make(std::move(out), "conv2d", std::move(inputs),
                   [=](Node& self) {
                     const double* go = self.grad.data();
                     const double* in = value_of(self, 0).data();
                     const double* kw = value_of(self, 1).data();
                     const bool want_x = wants(self, 0);
                     const bool want_k = wants(self, 1);
                     double* gx = want_x ? grad_of(self, 0).data() : nullptr;
                     double* gk = want_k ? grad_of(self, 1).data() : nullptr;
                     for (int co = 0; co < cout; ++co) {
                       const double* gplane = go + static_cast<std::size_t>(co) * oh * ow;
                       for (int ci = 0; ci < cin; ++ci) {
                         const std::size_t ioff = static_cast<std::size_t>(ci) * h * w;
                         for (int ky = 0; ky < k; ++ky) {
                           for (int kx = 0; kx < k; ++kx) {
                             const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx;
                             const double wv = kw[widx];
                             auto [lo, hi] = col_range(kx);
                             double acc = 0.0;
                             for (int oy = 0; oy < oh; ++oy) {
                               const int iy = oy * stride + ky - padding;
                               if (iy < 0 || iy >= h) continue;
                               const std::size_t row = ioff + static_cast<std::size_t>(iy) * w;
                               const int shift = kx - padding;
                               const double* grow = gplane + static_cast<std::size_t>(oy) * ow;
                               if (want_x && wv != 0.0) {
                                 double* gxrow = gx + row;
                                 for (int ox = lo; ox < hi; ++ox) gxrow[ox * stride + shift] += wv * grow[ox];
                               }
                               if (want_k) {
                                 const double* irow = in + row;
                                 for (int ox = lo; ox < hi; ++ox) acc += irow[ox * stride + shift] * grow[ox];
                               }
                             }
                             if (want_k) gk[widx] += acc;
                           }
                         }
                       }
                     }
                     if (self.parents.size() > 2 && wants(self, 2)) {
                       Tensor& gb = grad_of(self, 2);
                       for (int co = 0; co < cout; ++co) {
                         const double* gplane = go + static_cast<std::size_t>(co) * oh * ow;
                         double s = 0.0;
                         for (int i = 0; i < oh * ow; ++i) s += gplane[i];
                         gb[co] += s;
                       }
                     }
                   });
}

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw DimensionError("group_norm: scalar input");
  const int channels = xs[0];
  if (groups < 1 || channels % groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                      std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("group_norm: affine parameters must have shape (" + std::to_string(channels) + ")");
  }
  const std::size_t spatial = x.size() / channels;
  const int per_group = channels / groups;
  const std::size_t n = spatial * per_group;
  Tensor xhat(xs);
  std::vector<double> inv_std(groups);
  const Tensor& in = x.value();
  for (int g = 0; g < groups; ++g) {
    const std::size_t base = static_cast<std::size_t>(g) * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += in[base + i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = in[base + i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[g] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) xhat[base + i] = (in[base + i] - mu) * inv_std[g];
  }
  Tensor out(xs);
  for (int c = 0; c < channels; ++c) {
    const double ga = gamma.value()[c], be = beta.value()[c];
    for (std::size_t i = 0; i < spatial; ++i) {
      const std::size_t idx = c * spatial + i;
      out[idx] = ga * xhat[idx] + be;
    }
  }
  return Var::make(std::move(out), "group_norm", {x, gamma, beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std), groups, channels, spatial, per_group,
                    n](Node& self) {
                     const Tensor& ga = value_of(self, 1);
                     if (wants(self, 1) || wants(self, 2)) {
                       for (int c = 0; c < channels; ++c) {
                         double dg = 0.0, db = 0.0;
                         for (std::size_t i = 0; i < spatial; ++i) {
                           const std::size_t idx = c * spatial + i;
                           dg += self.grad[idx] * xhat[idx];
                           db += self.grad[idx];
                         }
                         if (wants(self, 1)) grad_of(self, 1)[c] += dg;
                         if (wants(self, 2)) grad_of(self, 2)[c] += db;
                       }
                     }
                     if (!wants(self, 0)) return;
                     Tensor& gx = grad_of(self, 0);
                     std::vector<double> dxhat(n);
                     for (int g = 0; g < groups; ++g) {
                       const std::size_t base = static_cast<std::size_t>(g) * n;
                       double s1 = 0.0, s2 = 0.0;
                       for (std::size_t i = 0; i < n; ++i) {
                         const int c = g * per_group + static_cast<int>(i / spatial);
                         dxhat[i] = self.grad[base + i] * ga[c];
                         s1 += dxhat[i];
                         s2 += dxhat[i] * xhat[base + i];
                       }
                       const double dn = static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         gx[base + i] += inv_std[g] / dn * (dn * dxhat[i] - s1 - xhat[base + i] * s2);
                       }
                     }
                   });
}

namespace {

struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

Taps bilinear_taps(int in, int out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.i0[o] = lo;
    t.i1[o] = std::min(lo + 1, in - 1);
    t.frac[o] = src - lo;
  }
  return t;
}

}  // namespace

Var interpolate(const Var& x, int out_h, int out_w) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw DimensionError("interpolate: expects C x H x W, got " + shape_str(xs));
  if (out_h < 1 || out_w < 1) throw DimensionError("interpolate: target size must be positive");
  const int c = xs[0], h = xs[1], w = xs[2];
  if (h == out_h && w == out_w) {
    return Var::make(x.value(), "interpolate", {x}, [](Node& self) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
  }
  Taps ty = bilinear_taps(h, out_h);
  Taps tx = bilinear_taps(w, out_w);
  Tensor out({c, out_h, out_w});
  const Tensor& in = x.value();
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_h; ++oy) {
      const double ly = ty.frac[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const double lx = tx.frac[ox];
        const double top = (1.0 - lx) * in.at(ch, ty.i0[oy], tx.i0[ox]) + lx * in.at(ch, ty.i0[oy], tx.i1[ox]);
        const double bot = (1.0 - lx) * in.at(ch, ty.i1[oy], tx.i0[ox]) + lx * in.at(ch, ty.i1[oy], tx.i1[ox]);
        out.at(ch, oy, ox) = (1.0 - ly) * top + ly * bot;
      }
    }
  }
  return Var::make(std::move(out), "interpolate", {x},
                   [ty = std::move(ty), tx = std::move(tx), c, out_h, out_w](Node& self) {
                     Tensor& g = grad_of(self, 0);
                     for (int ch = 0; ch < c; ++ch) {
                       for (int oy = 0; oy < out_h; ++oy) {
                         const double ly = ty.frac[oy];
                         for (int ox = 0; ox < out_w; ++ox) {
                           const double lx = tx.frac[ox];
                           const double up = self.grad.at(ch, oy, ox);
                           g.at(ch, ty.i0[oy], tx.i0[ox]) += up * (1.0 - ly) * (1.0 - lx);
                           g.at(ch, ty.i0[oy], tx.i1[ox]) += up * (1.0 - ly) * lx;
                           g.at(ch, ty.i1[oy], tx.i0[ox]) += up * ly * (1.0 - lx);
                           g.at(ch, ty.i1[oy], tx.i1[ox]) += up * ly * lx;
                         }
                       }
                     }
                   });
}

}  // namespace psr
