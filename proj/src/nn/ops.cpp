#include "campseg/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "campseg/error.hpp"
#include "campseg/kernels.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {
namespace {

// Gradient buffer of a parent, or nullptr when it does not take one.
real* grad_of(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  t.impl()->ensure_grad();
  return t.impl()->grad.data();
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                                      to_string(b.shape()) + " differ");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double sigmoid_d(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D df) {
  std::vector<real> out(x.numel());
  const real* in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<real>(f(static_cast<double>(in[i])));
  return make_result(x.shape(), std::move(out), {x}, [x, df](TensorImpl& self) {
    real* gx = grad_of(x);
    if (!gx) return;
    const real* in = x.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      gx[i] += static_cast<real>(self.grad[i] * df(static_cast<double>(in[i])));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
    if (real* ga = grad_of(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    if (real* gb = grad_of(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
    if (real* ga = grad_of(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    if (real* gb = grad_of(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
    if (real* ga = grad_of(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * b.data()[i];
    if (real* gb = grad_of(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * a.data()[i];
  });
}

Tensor scale(const Tensor& a, real s) {
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return make_result(a.shape(), std::move(out), {a}, [a, s](TensorImpl& self) {
    if (real* ga = grad_of(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * s;
  });
}

Tensor add_row(const Tensor& x, const Tensor& b) {
  require(x.rank() == 2 && b.numel() == static_cast<std::size_t>(x.dim(1)), "add_row: bias length must equal columns");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<real> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] + b.data()[c];
  return make_result(x.shape(), std::move(out), {x, b}, [x, b, rows, cols](TensorImpl& self) {
    if (real* gx = grad_of(x))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    if (real* gb = grad_of(b)) {
      for (std::size_t c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += self.grad[r * cols + c];
        gb[c] += static_cast<real>(s);
      }
    }
  });
}

Tensor add_channel(const Tensor& x, const Tensor& b) {
  require(x.rank() >= 1 && b.numel() == static_cast<std::size_t>(x.dim(0)), "add_channel: bias length must equal channels");
  const std::size_t channels = x.dim(0);
  const std::size_t plane = x.numel() / channels;
  std::vector<real> out(x.numel());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = x.data()[c * plane + i] + b.data()[c];
  return make_result(x.shape(), std::move(out), {x, b}, [x, b, channels, plane](TensorImpl& self) {
    if (real* gx = grad_of(x))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    if (real* gb = grad_of(b)) {
      for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += self.grad[c * plane + i];
        gb[c] += static_cast<real>(s);
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, [](double v) { return v * normal_cdf(v); },
      [](double v) { return normal_cdf(v) + v * normal_pdf(v); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_d, [](double v) {
    const double s = sigmoid_d(v);
    return s * (1.0 - s);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<real> out(m * n);
  kernels::gemm(m, n, k, a.data(), b.data(), out.data());
  return make_result({static_cast<std::int64_t>(m), static_cast<std::int64_t>(n)}, std::move(out), {a, b},
                     [a, b, m, n, k](TensorImpl& self) {
                       if (real* ga = grad_of(a)) {  // dA = dC * B^T
                         std::vector<real> bt(k * n);
                         kernels::transpose(k, n, b.data(), bt.data());
                         kernels::gemm(m, k, n, self.grad.data(), bt.data(), ga, true);
                       }
                       if (real* gb = grad_of(b)) {  // dB = A^T * dC
                         std::vector<real> at(m * k);
                         kernels::transpose(m, k, a.data(), at.data());
                         kernels::gemm(k, n, m, at.data(), self.grad.data(), gb, true);
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1),
          "linear: input " + to_string(x.shape()) + " does not match weight " + to_string(w.shape()));
  if (b.defined()) require(b.numel() == static_cast<std::size_t>(w.dim(0)), "linear: bias length must equal outputs");
  const std::size_t t = x.dim(0), in = x.dim(1), outd = w.dim(0);
  std::vector<real> wt(in * outd);
  kernels::transpose(outd, in, w.data(), wt.data());
  std::vector<real> out(t * outd);
  kernels::gemm(t, outd, in, x.data(), wt.data(), out.data());
  if (b.defined())
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < outd; ++c) out[r * outd + c] += b.data()[c];
  std::vector<Tensor> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_result({static_cast<std::int64_t>(t), static_cast<std::int64_t>(outd)}, std::move(out), parents,
                     [x, w, b, t, in, outd](TensorImpl& self) {
                       const real* gy = self.grad.data();
                       if (real* gx = grad_of(x)) kernels::gemm(t, in, outd, gy, w.data(), gx, true);
                       if (real* gw = grad_of(w)) {
                         std::vector<real> gyt(outd * t);
                         kernels::transpose(t, outd, gy, gyt.data());
                         kernels::gemm(outd, in, t, gyt.data(), x.data(), gw, true);
                       }
                       if (b.defined()) {
                         if (real* gb = grad_of(b)) {
                           for (std::size_t c = 0; c < outd; ++c) {
                             double s = 0.0;
                             for (std::size_t r = 0; r < t; ++r) s += gy[r * outd + c];
                             gb[c] += static_cast<real>(s);
                           }
                         }
                       }
                     });
}

Tensor transpose2d(const Tensor& x) {
  require(x.rank() == 2, "transpose2d needs a matrix");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<real> out(x.numel());
  kernels::transpose(r, c, x.data(), out.data());
  return make_result({x.dim(1), x.dim(0)}, std::move(out), {x}, [x, r, c](TensorImpl& self) {
    if (real* gx = grad_of(x)) {
      std::vector<real> back(self.grad.size());
      kernels::transpose(c, r, self.grad.data(), back.data());
      for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.numel(), "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  std::vector<real> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {x}, [x](TensorImpl& self) {
    if (real* gx = grad_of(x))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
  require(x.rank() == 2, "layer_norm expects [T, D]");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  require(gamma.numel() == d && beta.numel() == d, "layer_norm: affine parameters must have length D");
  std::vector<real> out(x.numel());
  std::vector<double> xhat(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const real* in = x.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += in[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (in[i] - mu) * inv_std[r];
      out[r * d + i] = static_cast<real>(xhat[r * d + i] * gamma.data()[i] + beta.data()[i]);
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [x, gamma, beta, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& self) {
                       const real* gy = self.grad.data();
                       real* gx = grad_of(x);
                       real* gg = grad_of(gamma);
                       real* gb = grad_of(beta);
                       std::vector<double> sg(d, 0.0), sb(d, 0.0);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double dot = 0.0, total = 0.0;
                         for (std::size_t i = 0; i < d; ++i) {
                           const double g = gy[r * d + i];
                           sg[i] += g * xhat[r * d + i];
                           sb[i] += g;
                           const double gh = g * gamma.data()[i];
                           total += gh;
                           dot += gh * xhat[r * d + i];
                         }
                         if (!gx) continue;
                         for (std::size_t i = 0; i < d; ++i) {
                           const double gh = gy[r * d + i] * gamma.data()[i];
                           gx[r * d + i] += static_cast<real>(
                               inv_std[r] * (gh - total / d - xhat[r * d + i] * dot / d));
                         }
                       }
                       if (gg)
                         for (std::size_t i = 0; i < d; ++i) gg[i] += static_cast<real>(sg[i]);
                       if (gb)
                         for (std::size_t i = 0; i < d; ++i) gb[i] += static_cast<real>(sb[i]);
                     });
}

Tensor softmax_rows(const Tensor& x) {
  require(x.rank() == 2, "softmax_rows expects a matrix");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<real> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const real* in = x.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(in[c] - mx);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = static_cast<real>(std::exp(in[c] - mx) / z);
  }
  Tensor result = make_result(x.shape(), std::move(out), {x}, nullptr);
  if (result.requires_grad()) {
    std::weak_ptr<TensorImpl> weak = result.impl();
    result.impl()->backward_fn = [x, rows, cols](TensorImpl& self) {
      real* gx = grad_of(x);
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const real* p = self.values.data() + r * cols;
        const real* g = self.grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += static_cast<double>(p[c]) * g[c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += static_cast<real>(p[c] * (g[c] - dot));
      }
    };
  }
  return result;
}

namespace {

struct AttentionGroup {
  std::vector<std::size_t> queries;
  std::vector<std::size_t> keys;
};

std::vector<AttentionGroup> attention_groups(std::size_t tq, std::size_t tk, const std::optional<WindowSpec>& window) {
  std::vector<AttentionGroup> groups;
  if (!window) {
    AttentionGroup g;
    for (std::size_t i = 0; i < tq; ++i) g.queries.push_back(i);
    for (std::size_t j = 0; j < tk; ++j) g.keys.push_back(j);
    groups.push_back(std::move(g));
    return groups;
  }
  const int gh = window->grid_h, gw = window->grid_w, ws = window->window;
  for (int wy = 0; wy < gh; wy += ws) {
    for (int wx = 0; wx < gw; wx += ws) {
      AttentionGroup g;
      for (int y = wy; y < std::min(wy + ws, gh); ++y)
        for (int x = wx; x < std::min(wx + ws, gw); ++x) g.queries.push_back(static_cast<std::size_t>(y * gw + x));
      g.keys = g.queries;
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, std::optional<WindowSpec> window) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "attention expects [T, D] inputs");
  require(k.shape() == v.shape() && q.dim(1) == k.dim(1), "attention: q/k/v widths disagree");
  const std::size_t tq = q.dim(0), tk = k.dim(0), d = q.dim(1);
  require(heads >= 1 && d % heads == 0, "attention: width not divisible by head count");
  if (window) {
    require(window->window >= 1 && tq == tk && tq == static_cast<std::size_t>(window->grid_h) * window->grid_w,
            "attention: windowed attention needs a full token grid");
  }
  const std::size_t dh = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  auto groups = std::make_shared<std::vector<AttentionGroup>>(attention_groups(tq, tk, window));

  // probs[g][h] is a |queries| x |keys| row-major block.
  auto probs = std::make_shared<std::vector<std::vector<real>>>();
  std::vector<real> out(tq * d, 0.0);
  const real* Q = q.data();
  const real* K = k.data();
  const real* V = v.data();
  for (const auto& g : *groups) {
    const std::size_t nq = g.queries.size(), nk = g.keys.size();
    for (int h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      std::vector<real> p(nq * nk);
      std::vector<double> row(nk);
      for (std::size_t i = 0; i < nq; ++i) {
        const real* qi = Q + g.queries[i] * d + off;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < nk; ++j) {
          const real* kj = K + g.keys[j] * d + off;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += static_cast<double>(qi[e]) * kj[e];
          row[j] = s * scale_factor;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < nk; ++j) z += (row[j] = std::exp(row[j] - mx));
        std::vector<double> acc(dh, 0.0);
        for (std::size_t j = 0; j < nk; ++j) {
          const double pj = row[j] / z;
          p[i * nk + j] = static_cast<real>(pj);
          const real* vj = V + g.keys[j] * d + off;
          for (std::size_t e = 0; e < dh; ++e) acc[e] += pj * vj[e];
        }
        real* oi = out.data() + g.queries[i] * d + off;
        for (std::size_t e = 0; e < dh; ++e) oi[e] = static_cast<real>(acc[e]);
      }
      probs->push_back(std::move(p));
    }
  }

  return make_result(q.shape(), std::move(out), {q, k, v},
                     [q, k, v, heads, d, dh, scale_factor, groups, probs](TensorImpl& self) {
                       real* gq = grad_of(q);
                       real* gk = grad_of(k);
                       real* gv = grad_of(v);
                       const real* Q = q.data();
                       const real* K = k.data();
                       const real* V = v.data();
                       const real* G = self.grad.data();
                       std::size_t block = 0;
                       for (const auto& g : *groups) {
                         const std::size_t nq = g.queries.size(), nk = g.keys.size();
                         for (int h = 0; h < heads; ++h, ++block) {
                           const std::size_t off = h * dh;
                           const auto& p = (*probs)[block];
                           std::vector<double> ds(nq * nk);
                           for (std::size_t i = 0; i < nq; ++i) {
                             const real* gi = G + g.queries[i] * d + off;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < nk; ++j) {
                               const real* vj = V + g.keys[j] * d + off;
                               double dp = 0.0;
                               for (std::size_t e = 0; e < dh; ++e) dp += static_cast<double>(gi[e]) * vj[e];
                               ds[i * nk + j] = dp;
                               dot += p[i * nk + j] * dp;
                             }
                             for (std::size_t j = 0; j < nk; ++j)
                               ds[i * nk + j] = p[i * nk + j] * (ds[i * nk + j] - dot) * scale_factor;
                           }
                           if (gv) {
                             for (std::size_t j = 0; j < nk; ++j) {
                               real* gvj = gv + g.keys[j] * d + off;
                               for (std::size_t e = 0; e < dh; ++e) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < nq; ++i)
                                   s += static_cast<double>(p[i * nk + j]) * G[g.queries[i] * d + off + e];
                                 gvj[e] += static_cast<real>(s);
                               }
                             }
                           }
                           if (gq) {
                             for (std::size_t i = 0; i < nq; ++i) {
                               real* gqi = gq + g.queries[i] * d + off;
                               for (std::size_t e = 0; e < dh; ++e) {
                                 double s = 0.0;
                                 for (std::size_t j = 0; j < nk; ++j) s += ds[i * nk + j] * K[g.keys[j] * d + off + e];
                                 gqi[e] += static_cast<real>(s);
                               }
                             }
                           }
                           if (gk) {
                             for (std::size_t j = 0; j < nk; ++j) {
                               real* gkj = gk + g.keys[j] * d + off;
                               for (std::size_t e = 0; e < dh; ++e) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < nq; ++i) s += ds[i * nk + j] * Q[g.queries[i] * d + off + e];
                                 gkj[e] += static_cast<real>(s);
                               }
                             }
                           }
                         }
                       }
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  require(x.rank() == 3 && w.rank() == 4 && w.dim(1) == x.dim(0) && w.dim(2) == w.dim(3),
          "conv2d: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2), o = w.dim(0), ks = w.dim(2);
  require(2 * pad + 1 == static_cast<int>(ks), "conv2d: only 'same' padding is supported");
  if (b.defined()) require(b.numel() == o, "conv2d: bias length must equal output channels");
  const std::size_t ckk = c * ks * ks, hw = h * wd;
  auto cols = std::make_shared<std::vector<real>>(ckk * hw);
  kernels::im2col(c, h, wd, ks, pad, x.data(), cols->data());
  std::vector<real> out(o * hw);
  kernels::gemm(o, hw, ckk, w.data(), cols->data(), out.data());
  if (b.defined())
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t i = 0; i < hw; ++i) out[oc * hw + i] += b.data()[oc];
  std::vector<Tensor> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_result({static_cast<std::int64_t>(o), x.dim(1), x.dim(2)}, std::move(out), parents,
                     [x, w, b, c, h, wd, o, ks, pad, ckk, hw, cols](TensorImpl& self) {
                       const real* gy = self.grad.data();
                       if (real* gw = grad_of(w)) {
                         std::vector<real> colst(hw * ckk);
                         kernels::transpose(ckk, hw, cols->data(), colst.data());
                         kernels::gemm(o, ckk, hw, gy, colst.data(), gw, true);
                       }
                       if (real* gx = grad_of(x)) {
                         std::vector<real> wt(ckk * o);
                         kernels::transpose(o, ckk, w.data(), wt.data());
                         std::vector<real> gcols(ckk * hw);
                         kernels::gemm(ckk, hw, o, wt.data(), gy, gcols.data());
                         kernels::col2im(c, h, wd, ks, pad, gcols.data(), gx);
                       }
                       if (b.defined()) {
                         if (real* gb = grad_of(b)) {
                           for (std::size_t oc = 0; oc < o; ++oc) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < hw; ++i) s += gy[oc * hw + i];
                             gb[oc] += static_cast<real>(s);
                           }
                         }
                       }
                     });
}

Tensor conv_transpose2x2(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 3 && w.rank() == 4 && w.dim(0) == x.dim(0) && w.dim(2) == 2 && w.dim(3) == 2,
          "conv_transpose2x2: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2), o = w.dim(1);
  if (b.defined()) require(b.numel() == o, "conv_transpose2x2: bias length must equal output channels");
  const std::size_t hw = h * wd, o4 = o * 4;
  // Y[o4, hw] = W^T[o4, c] * X[c, hw]
  std::vector<real> wt(o4 * c);
  kernels::transpose(c, o4, w.data(), wt.data());
  std::vector<real> y(o4 * hw);
  kernels::gemm(o4, hw, c, wt.data(), x.data(), y.data());
  const std::size_t oh = 2 * h, ow = 2 * wd;
  std::vector<real> out(o * oh * ow);
  for (std::size_t oc = 0; oc < o; ++oc)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const real* src = y.data() + (oc * 4 + i * 2 + j) * hw;
        const real bias = b.defined() ? b.data()[oc] : 0.0;
        for (std::size_t r = 0; r < h; ++r)
          for (std::size_t s = 0; s < wd; ++s) out[(oc * oh + 2 * r + i) * ow + 2 * s + j] = src[r * wd + s] + bias;
      }
  std::vector<Tensor> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_result({static_cast<std::int64_t>(o), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)},
                     std::move(out), parents, [x, w, b, c, h, wd, o, hw, o4, oh, ow](TensorImpl& self) {
                       std::vector<real> gy(o4 * hw);
                       for (std::size_t oc = 0; oc < o; ++oc)
                         for (std::size_t i = 0; i < 2; ++i)
                           for (std::size_t j = 0; j < 2; ++j) {
                             real* dst = gy.data() + (oc * 4 + i * 2 + j) * hw;
                             for (std::size_t r = 0; r < h; ++r)
                               for (std::size_t s = 0; s < wd; ++s)
                                 dst[r * wd + s] = self.grad[(oc * oh + 2 * r + i) * ow + 2 * s + j];
                           }
                       if (real* gx = grad_of(x)) kernels::gemm(c, hw, o4, w.data(), gy.data(), gx, true);
                       if (real* gw = grad_of(w)) {
                         std::vector<real> gyt(hw * o4);
                         kernels::transpose(o4, hw, gy.data(), gyt.data());
                         kernels::gemm(c, o4, hw, x.data(), gyt.data(), gw, true);
                       }
                       if (b.defined()) {
                         if (real* gb = grad_of(b)) {
                           for (std::size_t oc = 0; oc < o; ++oc) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < 4 * hw; ++i) s += gy[oc * 4 * hw + i];
                             gb[oc] += static_cast<real>(s);
                           }
                         }
                       }
                     });
}

Tensor maxpool2x2(const Tensor& x) {
  require(x.rank() == 3 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0, "maxpool2x2 needs even spatial dims");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h / 2, ow = w / 2;
  std::vector<real> out(c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t s = 0; s < ow; ++s) {
        std::size_t best = (ch * h + 2 * r) * w + 2 * s;
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t j = 0; j < 2; ++j) {
            const std::size_t idx = (ch * h + 2 * r + i) * w + 2 * s + j;
            if (x.data()[idx] > x.data()[best]) best = idx;
          }
        const std::size_t o = (ch * oh + r) * ow + s;
        out[o] = x.data()[best];
        (*argmax)[o] = best;
      }
  return make_result({x.dim(0), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)}, std::move(out), {x},
                     [x, argmax](TensorImpl& self) {
                       if (real* gx = grad_of(x))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*argmax)[i]] += self.grad[i];
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial dims differ");
  std::vector<real> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.numel();
  return make_result({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a, b}, [a, b, na](TensorImpl& self) {
    if (real* ga = grad_of(a))
      for (std::size_t i = 0; i < na; ++i) ga[i] += self.grad[i];
    if (real* gb = grad_of(b))
      for (std::size_t i = 0; i < b.numel(); ++i) gb[i] += self.grad[na + i];
  });
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  require(x.rank() == 3 && r >= 1, "pixel_shuffle expects [C*r*r, H, W]");
  if (x.dim(0) % (r * r) != 0)
    fail(ErrorCode::IndivisibleChannels, "pixel_shuffle: " + std::to_string(x.dim(0)) + " channels not divisible by " +
                                             std::to_string(r * r));
  const std::size_t c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2), oh = h * r, ow = w * r;
  // gather[o] = source index of output element o.
  auto gather = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<real> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t i = y % r, j = xx % r;
        const std::size_t src = ((ch * r * r + i * r + j) * h + y / r) * w + xx / r;
        const std::size_t dst = (ch * oh + y) * ow + xx;
        (*gather)[dst] = src;
        out[dst] = x.data()[src];
      }
  return make_result({static_cast<std::int64_t>(c), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)},
                     std::move(out), {x}, [x, gather](TensorImpl& self) {
                       if (real* gx = grad_of(x))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*gather)[i]] += self.grad[i];
                     });
}

Tensor patchify(const Tensor& x, int p) {
  require(x.rank() == 3 && p >= 1 && x.dim(1) % p == 0 && x.dim(2) % p == 0,
          "patchify: image " + to_string(x.shape()) + " not divisible into " + std::to_string(p) + "px patches");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), gh = h / p, gw = w / p, f = c * p * p;
  auto gather = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<real> out(x.numel());
  for (std::size_t ty = 0; ty < gh; ++ty)
    for (std::size_t tx = 0; tx < gw; ++tx)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t py = 0; py < static_cast<std::size_t>(p); ++py)
          for (std::size_t px = 0; px < static_cast<std::size_t>(p); ++px) {
            const std::size_t dst = (ty * gw + tx) * f + (ch * p + py) * p + px;
            const std::size_t src = (ch * h + ty * p + py) * w + tx * p + px;
            (*gather)[dst] = src;
            out[dst] = x.data()[src];
          }
  return make_result({static_cast<std::int64_t>(gh * gw), static_cast<std::int64_t>(f)}, std::move(out), {x},
                     [x, gather](TensorImpl& self) {
                       if (real* gx = grad_of(x))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*gather)[i]] += self.grad[i];
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (real v : x.values()) s += v;
  return make_result({1}, {static_cast<real>(s)}, {x}, [x](TensorImpl& self) {
    if (real* gx = grad_of(x))
      for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<real>(x.numel())); }

Tensor weighted_sum(const Tensor& x, std::span<const real> weights) {
  require(weights.size() == x.numel(), "weighted_sum: weight count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += static_cast<double>(x.data()[i]) * weights[i];
  std::vector<real> w(weights.begin(), weights.end());
  return make_result({1}, {static_cast<real>(s)}, {x}, [x, w = std::move(w)](TensorImpl& self) {
    if (real* gx = grad_of(x))
      for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += self.grad[0] * w[i];
  });
}

Tensor loss_bce_soft_iou(const Tensor& logits, const Tensor& target, real iou_weight) {
  require_same(logits, target, "loss_bce_soft_iou");
  const std::size_t n = logits.numel();
  require(n > 0, "loss_bce_soft_iou: empty input");
  const real* z = logits.data();
  const real* t = target.data();
  double bce = 0.0, inter = 0.0, psum = 0.0, tsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z[i], ti = t[i];
    bce += std::max(zi, 0.0) - zi * ti + std::log1p(std::exp(-std::abs(zi)));
    const double p = sigmoid_d(zi);
    inter += p * ti;
    psum += p;
    tsum += ti;
  }
  bce /= static_cast<double>(n);
  const double uni = psum + tsum - inter + kSoftIouEps;
  const double soft_iou = inter / uni;
  const double loss = bce + iou_weight * (1.0 - soft_iou);
  return make_result({1}, {static_cast<real>(loss)}, {logits},
                     [logits, target, n, inter, uni, iou_weight](TensorImpl& self) {
                       real* gz = grad_of(logits);
                       if (!gz) return;
                       const double g = self.grad[0];
                       const real* z = logits.data();
                       const real* t = target.data();
                       for (std::size_t i = 0; i < n; ++i) {
                         const double p = sigmoid_d(z[i]);
                         const double dbce = (p - t[i]) / static_cast<double>(n);
                         // d(iou)/dp = (t*uni - inter*(1 - t)) / uni^2
                         const double diou_dp = (t[i] * uni - inter * (1.0 - t[i])) / (uni * uni);
                         const double dz = dbce - iou_weight * diou_dp * p * (1.0 - p);
                         gz[i] += static_cast<real>(g * dz);
                       }
                     });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "mse_loss");
  const std::size_t n = pred.numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data()[i]) - target.data()[i];
    s += d * d;
  }
  return make_result({1}, {static_cast<real>(s / n)}, {pred}, [pred, target, n](TensorImpl& self) {
    if (real* gp = grad_of(pred))
      for (std::size_t i = 0; i < n; ++i)
        gp[i] += static_cast<real>(self.grad[0] * 2.0 * (static_cast<double>(pred.data()[i]) - target.data()[i]) / n);
  });
}

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
