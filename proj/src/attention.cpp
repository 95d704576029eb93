#include <cmath>

#include "psr/errors.hpp"
#include "psr/ops.hpp"

namespace psr {

Var attention_core(const Var& q, const Var& k, const Var& v, int heads, PairCounter* counter) {
  const Shape& qs = q.shape();
  if (qs.size() != 3 || k.shape() != qs || v.shape() != qs) {
    throw DimensionError("attention_core: q/k/v must share a B x L x D shape, got " + shape_str(qs) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const int batch = qs[0], len = qs[1], d = qs[2];
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t ll = static_cast<std::size_t>(len) * len;

  // probs[b][h] is an L x L row-stochastic matrix.
  Tensor probs({batch, heads, len, len});
  Tensor out(qs);
  const double* qd = q.value().data();
  const double* kd = k.value().data();
  const double* vd = v.value().data();
  std::vector<double> row(len);
  for (int b = 0; b < batch; ++b) {
    const std::size_t boff = static_cast<std::size_t>(b) * len * d;
    for (int h = 0; h < heads; ++h) {
      double* p = probs.data() + (static_cast<std::size_t>(b) * heads + h) * ll;
      const int c0 = h * dh;
      for (int i = 0; i < len; ++i) {
        const double* qi = qd + boff + static_cast<std::size_t>(i) * d + c0;
        double mx = -INFINITY;
        for (int j = 0; j < len; ++j) {
          const double* kj = kd + boff + static_cast<std::size_t>(j) * d + c0;
          double s = 0.0;
          for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
          if (counter && h == 0) ++counter->pairs;
        }
        double z = 0.0;
        for (int j = 0; j < len; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        double* oi = out.data() + boff + static_cast<std::size_t>(i) * d + c0;
        for (int j = 0; j < len; ++j) {
          const double a = row[j] / z;
          p[static_cast<std::size_t>(i) * len + j] = a;
          const double* vj = vd + boff + static_cast<std::size_t>(j) * d + c0;
          for (int c = 0; c < dh; ++c) oi[c] += a * vj[c];
        }
      }
    }
  }

  return Var::make(
      std::move(out), "attention", {q, k, v},
      [probs = std::move(probs), batch, len, d, heads, dh, scale, ll](Node& self) {
        const double* qd = self.parents[0]->value.data();
        const double* kd = self.parents[1]->value.data();
        const double* vd = self.parents[2]->value.data();
        const bool want_q = self.parents[0]->requires_grad;
        const bool want_k = self.parents[1]->requires_grad;
        const bool want_v = self.parents[2]->requires_grad;
        double* gq = want_q ? self.parents[0]->grad_buffer().data() : nullptr;
        double* gk = want_k ? self.parents[1]->grad_buffer().data() : nullptr;
        double* gv = want_v ? self.parents[2]->grad_buffer().data() : nullptr;
        const double* go = self.grad.data();
        std::vector<double> dp(len);
        for (int b = 0; b < batch; ++b) {
          const std::size_t boff = static_cast<std::size_t>(b) * len * d;
          for (int h = 0; h < heads; ++h) {
            const double* p = probs.data() + (static_cast<std::size_t>(b) * heads + h) * ll;
            const int c0 = h * dh;
            for (int i = 0; i < len; ++i) {
              const double* goi = go + boff + static_cast<std::size_t>(i) * d + c0;
              const double* pi = p + static_cast<std::size_t>(i) * len;
              double dot = 0.0;
              for (int j = 0; j < len; ++j) {
                const std::size_t joff = boff + static_cast<std::size_t>(j) * d + c0;
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += goi[c] * vd[joff + c];
                dp[j] = s;
                dot += s * pi[j];
                if (want_v) {
                  for (int c = 0; c < dh; ++c) gv[joff + c] += pi[j] * goi[c];
                }
              }
              const std::size_t ioff = boff + static_cast<std::size_t>(i) * d + c0;
              for (int j = 0; j < len; ++j) {
                const double ds = pi[j] * (dp[j] - dot) * scale;
                if (ds == 0.0) continue;
                const std::size_t joff = boff + static_cast<std::size_t>(j) * d + c0;
                if (want_q) {
                  for (int c = 0; c < dh; ++c) gq[ioff + c] += ds * kd[joff + c];
                }
                if (want_k) {
                  for (int c = 0; c < dh; ++c) gk[joff + c] += ds * qd[ioff + c];
                }
              }
            }
          }
        }
      });
}

Var mhsa(const Var& x, const MhsaParams& params, int heads, PairCounter* counter) {
  const Shape& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 3) {
    throw DimensionError("mhsa: expects L x D or B x L x D input, got " + shape_str(xs));
  }
  const int d = xs.back();
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("mhsa: model width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (xs[xs.size() - 2] < 1) throw DimensionError("mhsa: empty sequence");
  Var batched = xs.size() == 2 ? reshape(x, {1, xs[0], xs[1]}) : x;
  Var q = linear(batched, params.wq, params.bq);
  Var k = linear(batched, params.wk, params.bk);
  Var v = linear(batched, params.wv, params.bv);
  Var y = linear(attention_core(q, k, v, heads, counter), params.wo, params.bo);
  return xs.size() == 2 ? reshape(y, xs) : y;
}

}  // namespace psr
