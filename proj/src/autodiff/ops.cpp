#include "cycpl/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blas.hpp"
#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"

namespace cycpl::ad {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorCode::ShapeMismatch,
         std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
Node<T>& parent(Node<T>& n, std::size_t i) {
  return *n.parents[i];
}

// outer x axis x inner decomposition of a shape around `axis`
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T, typename F, typename G>
Tensor<T> unary(OpKind kind, const Tensor<T>& x, F f, G dfdx) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(kind, x.shape(), std::move(out), {x}, [dfdx](Node<T>& n) {
    Node<T>& p = parent(n, 0);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * dfdx(p.value[i], n.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result<T>(OpKind::Add, a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node<T>& p = parent(n, k);
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result<T>(OpKind::Sub, a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node<T>& p = parent(n, k);
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result<T>(OpKind::Mul, a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    Node<T>& pa = parent(n, 0);
    Node<T>& pb = parent(n, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "div");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  return make_result<T>(OpKind::Div, a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    Node<T>& pa = parent(n, 0);
    Node<T>& pb = parent(n, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i] * n.value[i] / pb.value[i];
    }
  });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, double c) {
  const T k = static_cast<T>(c);
  return unary(
      OpKind::ScalarMul, a, [k](T x) { return k * x; }, [k](T, T) { return k; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, double c) {
  const T k = static_cast<T>(c);
  return unary(
      OpKind::AddScalar, a, [k](T x) { return x + k; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    fail(ErrorCode::ShapeMismatch,
         "matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = static_cast<int>(a.dim(0)), k = static_cast<int>(a.dim(1)),
            nn = static_cast<int>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m) * nn);
  detail::gemm(false, false, m, nn, k, T(1), a.values().data(), k, b.values().data(), nn, T(0),
               out.data(), nn);
  return make_result<T>(OpKind::MatMul, {a.dim(0), b.dim(1)}, std::move(out), {a, b},
                        [m, k, nn](Node<T>& n) {
                          Node<T>& pa = parent(n, 0);
                          Node<T>& pb = parent(n, 1);
                          if (pa.requires_grad)  // dA = dC * B^T
                            detail::gemm(false, true, m, k, nn, T(1), n.grad.data(), nn,
                                         pb.value.data(), nn, T(1), pa.ensure_grad().data(), k);
                          if (pb.requires_grad)  // dB = A^T * dC
                            detail::gemm(true, false, k, nn, m, T(1), pa.value.data(), k,
                                         n.grad.data(), nn, T(1), pb.ensure_grad().data(), nn);
                        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  // subgradient at 0 is 0
  return unary(
      OpKind::Relu, x, [](T v) { return v > T(0) ? v : T(0); },
      [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      OpKind::Tanh, x, [](T v) { return std::tanh(v); }, [](T, T out) { return T(1) - out * out; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      OpKind::Square, x, [](T v) { return v * v; }, [](T in, T) { return T(2) * in; });
}

namespace {

struct PoolGeom {
  std::size_t planes = 1;  // N*C
  std::size_t d = 1, h = 1, w = 1;
  std::size_t od = 1, oh = 1, ow = 1;
  std::size_t kd = 1, kh = 1, kw = 1;
};

template <typename T>
Tensor<T> max_pool_impl(const Tensor<T>& x, OpKind kind, const PoolGeom& g, Shape out_shape) {
  std::vector<T> out(g.planes * g.od * g.oh * g.ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto xv = x.values();
  std::size_t o = 0;
  for (std::size_t p = 0; p < g.planes; ++p) {
    const std::size_t base = p * g.d * g.h * g.w;
    for (std::size_t a = 0; a < g.od; ++a)
      for (std::size_t b = 0; b < g.oh; ++b)
        for (std::size_t c = 0; c < g.ow; ++c, ++o) {
          std::size_t best = base + ((a * g.kd) * g.h + b * g.kh) * g.w + c * g.kw;
          for (std::size_t i = 0; i < g.kd; ++i)
            for (std::size_t j = 0; j < g.kh; ++j)
              for (std::size_t k = 0; k < g.kw; ++k) {
                const std::size_t idx =
                    base + ((a * g.kd + i) * g.h + (b * g.kh + j)) * g.w + (c * g.kw + k);
                if (xv[idx] > xv[best]) best = idx;
              }
          out[o] = xv[best];
          (*argmax)[o] = best;
        }
  }
  return make_result<T>(kind, std::move(out_shape), std::move(out), {x}, [argmax](Node<T>& n) {
    auto& gx = parent(n, 0).ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gx[(*argmax)[i]] += n.grad[i];
  });
}

}  // namespace

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel) {
  if (kernel < 1) fail(ErrorCode::InvalidAttribute, "max_pool2d: kernel must be >= 1");
  if (x.rank() != 4 || x.dim(2) < kernel || x.dim(3) < kernel)
    fail(ErrorCode::ShapeMismatch, "max_pool2d expects (N,C,H,W) >= kernel, got " +
                                       shape_str(x.shape()));
  PoolGeom g;
  g.planes = x.dim(0) * x.dim(1);
  g.h = x.dim(2), g.w = x.dim(3);
  g.kh = g.kw = kernel;
  g.oh = g.h / kernel, g.ow = g.w / kernel;
  return max_pool_impl(x, OpKind::MaxPool2d, g, {x.dim(0), x.dim(1), g.oh, g.ow});
}

template <typename T>
Tensor<T> max_pool3d(const Tensor<T>& x, std::size_t kernel) {
  if (kernel < 1) fail(ErrorCode::InvalidAttribute, "max_pool3d: kernel must be >= 1");
  if (x.rank() != 5 || x.dim(2) < kernel || x.dim(3) < kernel || x.dim(4) < kernel)
    fail(ErrorCode::ShapeMismatch, "max_pool3d expects (N,C,D,H,W) >= kernel, got " +
                                       shape_str(x.shape()));
  PoolGeom g;
  g.planes = x.dim(0) * x.dim(1);
  g.d = x.dim(2), g.h = x.dim(3), g.w = x.dim(4);
  g.kd = g.kh = g.kw = kernel;
  g.od = g.d / kernel, g.oh = g.h / kernel, g.ow = g.w / kernel;
  return max_pool_impl(x, OpKind::MaxPool3d, g, {x.dim(0), x.dim(1), g.od, g.oh, g.ow});
}

template <typename T>
Tensor<T> nearest_upsample3d(const Tensor<T>& x, std::size_t f) {
  if (f < 1) fail(ErrorCode::InvalidAttribute, "nearest_upsample3d: factor must be >= 1");
  if (x.rank() != 5) fail(ErrorCode::ShapeMismatch, "nearest_upsample3d expects (N,C,D,H,W)");
  const std::size_t planes = x.dim(0) * x.dim(1), d = x.dim(2), h = x.dim(3), w = x.dim(4);
  const std::size_t od = d * f, oh = h * f, ow = w * f;
  std::vector<T> out(planes * od * oh * ow);
  const auto xv = x.values();
  std::size_t o = 0;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t a = 0; a < od; ++a)
      for (std::size_t b = 0; b < oh; ++b) {
        const T* row = xv.data() + ((p * d + a / f) * h + b / f) * w;
        for (std::size_t c = 0; c < ow; ++c) out[o++] = row[c / f];
      }
  return make_result<T>(OpKind::NearestUpsample3d, {x.dim(0), x.dim(1), od, oh, ow}, std::move(out),
                        {x}, [=](Node<T>& n) {
                          auto& gx = parent(n, 0).ensure_grad();
                          std::size_t o2 = 0;
                          for (std::size_t p = 0; p < planes; ++p)
                            for (std::size_t a = 0; a < od; ++a)
                              for (std::size_t b = 0; b < oh; ++b) {
                                T* row = gx.data() + ((p * d + a / f) * h + b / f) * w;
                                for (std::size_t c = 0; c < ow; ++c) row[c / f] += n.grad[o2++];
                              }
                        });
}

template <typename T>
Tensor<T> instance_norm3d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          double eps) {
  if (x.rank() < 3) fail(ErrorCode::ShapeMismatch, "instance_norm3d expects (N,C,...)");
  if (!(eps > 0)) fail(ErrorCode::InvalidAttribute, "instance_norm3d: eps must be positive");
  const std::size_t nb = x.dim(0), ch = x.dim(1), sp = x.numel() / (nb * ch);
  const bool affine = gamma.defined();
  if (affine != beta.defined())
    fail(ErrorCode::InvalidAttribute, "instance_norm3d: gamma and beta go together");
  if (affine && (gamma.numel() != ch || beta.numel() != ch))
    fail(ErrorCode::ShapeMismatch, "instance_norm3d: affine params must have C elements");

  const auto xv = x.values();
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto inv_std = std::make_shared<std::vector<T>>(nb * ch);
  std::vector<T> out(xv.size());
  for (std::size_t g = 0; g < nb * ch; ++g) {
    const T* src = xv.data() + g * sp;
    double m = 0.0;
    for (std::size_t i = 0; i < sp; ++i) m += src[i];
    m /= static_cast<double>(sp);
    double var = 0.0;
    for (std::size_t i = 0; i < sp; ++i) var += (src[i] - m) * (src[i] - m);
    var /= static_cast<double>(sp);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[g] = static_cast<T>(is);
    const std::size_t c = g % ch;
    const T ga = affine ? gamma.values()[c] : T(1);
    const T be = affine ? beta.values()[c] : T(0);
    for (std::size_t i = 0; i < sp; ++i) {
      const T xh = static_cast<T>((src[i] - m) * is);
      (*xhat)[g * sp + i] = xh;
      out[g * sp + i] = ga * xh + be;
    }
  }
  std::vector<Tensor<T>> inputs{x};
  if (affine) {
    inputs.push_back(gamma);
    inputs.push_back(beta);
  }
  return make_result<T>(
      OpKind::InstanceNorm3d, x.shape(), std::move(out), std::move(inputs),
      [=](Node<T>& n) {
        Node<T>& px = parent(n, 0);
        const T* gam = affine ? parent(n, 1).value.data() : nullptr;
        T* dgam = (affine && parent(n, 1).requires_grad) ? parent(n, 1).ensure_grad().data() : nullptr;
        T* dbet = (affine && parent(n, 2).requires_grad) ? parent(n, 2).ensure_grad().data() : nullptr;
        T* dx = px.requires_grad ? px.ensure_grad().data() : nullptr;
        for (std::size_t g = 0; g < nb * ch; ++g) {
          const std::size_t c = g % ch;
          const T* gy = n.grad.data() + g * sp;
          const T* xh = xhat->data() + g * sp;
          double sg = 0.0, sgx = 0.0;
          for (std::size_t i = 0; i < sp; ++i) {
            sg += gy[i];
            sgx += gy[i] * xh[i];
          }
          if (dgam) dgam[c] += static_cast<T>(sgx);
          if (dbet) dbet[c] += static_cast<T>(sg);
          if (dx) {
            const double ga = gam ? gam[c] : 1.0;
            const double mg = sg / static_cast<double>(sp), mgx = sgx / static_cast<double>(sp);
            const double is = (*inv_std)[g];
            for (std::size_t i = 0; i < sp; ++i)
              dx[g * sp + i] += static_cast<T>(ga * is * (gy[i] - mg - xh[i] * mgx));
          }
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidAttribute, "dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Rng rng(seed);
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (auto& m : *mask) m = rng.uniform() < p ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * (*mask)[i];
  return make_result<T>(OpKind::Dropout, x.shape(), std::move(out), {x}, [mask](Node<T>& n) {
    auto& g = parent(n, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (*mask)[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.values()) s += v;
  return make_result<T>(OpKind::Sum, {1}, {static_cast<T>(s)}, {x}, [](Node<T>& n) {
    auto& g = parent(n, 0).ensure_grad();
    for (auto& v : g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.values()) s += v;
  const double cnt = static_cast<double>(x.numel());
  return make_result<T>(OpKind::Mean, {1}, {static_cast<T>(s / cnt)}, {x}, [cnt](Node<T>& n) {
    auto& g = parent(n, 0).ensure_grad();
    const T d = static_cast<T>(n.grad[0] / cnt);
    for (auto& v : g) v += d;
  });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> xs, std::size_t axis) {
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
  const Shape& s0 = xs[0].shape();
  if (axis >= s0.size()) fail(ErrorCode::InvalidAttribute, "concat: axis out of range");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
    if (!ok) fail(ErrorCode::ShapeMismatch, "concat: incompatible " + shape_str(s));
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_at(out_shape, axis);
  std::vector<T> out(numel(out_shape));
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto v = xs[k].values();
    const std::size_t blk = lens[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.data() + o * blk, blk, out.data() + o * sp.len * sp.inner + off * sp.inner);
    off += lens[k];
  }
  std::vector<Tensor<T>> inputs(xs.begin(), xs.end());
  return make_result<T>(OpKind::Concat, out_shape, std::move(out), std::move(inputs),
                        [sp, lens](Node<T>& n) {
                          std::size_t off2 = 0;
                          for (std::size_t k = 0; k < lens.size(); ++k) {
                            Node<T>& p = parent(n, k);
                            const std::size_t blk = lens[k] * sp.inner;
                            if (p.requires_grad) {
                              auto& g = p.ensure_grad();
                              for (std::size_t o = 0; o < sp.outer; ++o) {
                                const T* src = n.grad.data() + o * sp.len * sp.inner + off2 * sp.inner;
                                T* dst = g.data() + o * blk;
                                for (std::size_t i = 0; i < blk; ++i) dst[i] += src[i];
                              }
                            }
                            off2 += lens[k];
                          }
                        });
}

template <typename T>
Tensor<T> slice_view(const Tensor<T>& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank()) fail(ErrorCode::InvalidAttribute, "slice_view: axis out of range");
  if (index >= x.dim(axis)) fail(ErrorCode::InvalidAttribute, "slice_view: index out of range");
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  std::vector<T> out(sp.outer * sp.inner);
  const auto v = x.values();
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(v.data() + (o * sp.len + index) * sp.inner, sp.inner, out.data() + o * sp.inner);
  return make_result<T>(OpKind::SliceView, std::move(out_shape), std::move(out), {x},
                        [sp, index](Node<T>& n) {
                          auto& g = parent(n, 0).ensure_grad();
                          for (std::size_t o = 0; o < sp.outer; ++o) {
                            T* dst = g.data() + (o * sp.len + index) * sp.inner;
                            const T* src = n.grad.data() + o * sp.inner;
                            for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    fail(ErrorCode::ShapeMismatch,
         "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>(OpKind::Reshape, std::move(shape), std::move(out), {x}, [](Node<T>& n) {
    auto& g = parent(n, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::vector<std::size_t> perm) {
  const std::size_t r = x.rank();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  bool ok = perm.size() == r;
  for (std::size_t i = 0; ok && i < r; ++i) ok = check[i] == i;
  if (!ok) fail(ErrorCode::InvalidAttribute, "permute: not a permutation of the axes");

  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(perm[i]);

  // src offset for every output element, in output order
  auto src = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < src->size(); ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_stride[perm[i]];
    (*src)[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<T> out(x.numel());
  const auto v = x.values();
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = v[(*src)[o]];
  return make_result<T>(OpKind::Permute, std::move(out_shape), std::move(out), {x},
                        [src](Node<T>& n) {
                          auto& g = parent(n, 0).ensure_grad();
                          for (std::size_t o = 0; o < n.grad.size(); ++o) g[(*src)[o]] += n.grad[o];
                        });
}

template <typename T>
Tensor<T> minmax_normalize(const Tensor<T>& x, double eps, std::size_t group_dims,
                           bool detach_stats) {
  if (!(eps > 0)) fail(ErrorCode::InvalidAttribute, "minmax_normalize: eps must be positive");
  if (group_dims > x.rank()) fail(ErrorCode::InvalidAttribute, "minmax_normalize: group_dims");
  std::size_t groups = 1;
  for (std::size_t i = 0; i < group_dims; ++i) groups *= x.dim(i);
  const std::size_t gs = x.numel() / groups;
  struct Stat {
    std::size_t argmin, argmax;
    T denom;
  };
  auto stats = std::make_shared<std::vector<Stat>>(groups);
  const auto v = x.values();
  std::vector<T> out(v.size());
  for (std::size_t g = 0; g < groups; ++g) {
    const T* s = v.data() + g * gs;
    const auto [lo, hi] = std::minmax_element(s, s + gs);
    const T mn = *lo;
    const T denom = static_cast<T>(static_cast<double>(*hi) - static_cast<double>(mn) + eps);
    (*stats)[g] = {g * gs + static_cast<std::size_t>(lo - s), g * gs + static_cast<std::size_t>(hi - s),
                   denom};
    for (std::size_t i = 0; i < gs; ++i) out[g * gs + i] = (s[i] - mn) / denom;
  }
  return make_result<T>(OpKind::MinMaxNormalize, x.shape(), std::move(out), {x},
                        [stats, gs, detach_stats](Node<T>& n) {
                          auto& gx = parent(n, 0).ensure_grad();
                          for (std::size_t g = 0; g < stats->size(); ++g) {
                            const Stat& st = (*stats)[g];
                            double to_min = 0.0, to_max = 0.0;
                            for (std::size_t i = g * gs; i < (g + 1) * gs; ++i) {
                              gx[i] += n.grad[i] / st.denom;
                              if (!detach_stats) {
                                // d out_i / d min = (out_i - 1) / R, d out_i / d max = -out_i / R
                                to_min += n.grad[i] * (n.value[i] - 1.0);
                                to_max -= n.grad[i] * n.value[i];
                              }
                            }
                            if (!detach_stats) {
                              gx[st.argmin] += static_cast<T>(to_min / st.denom);
                              gx[st.argmax] += static_cast<T>(to_max / st.denom);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x) {
  auto n = std::make_shared<Node<T>>();
  n->kind = OpKind::StopGradient;
  n->shape = x.shape();
  n->value.assign(x.values().begin(), x.values().end());
  return Tensor<T>(std::move(n));
}

void PrimitiveOp::validate() const {
  if (stride < 1) fail(ErrorCode::InvalidAttribute, "stride must be >= 1");
  if (kernel < 1) fail(ErrorCode::InvalidAttribute, "kernel must be >= 1");
  if (factor < 1) fail(ErrorCode::InvalidAttribute, "factor must be >= 1");
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidAttribute, "dropout p must be in [0, 1)");
  if (!(eps > 0.0)) fail(ErrorCode::InvalidAttribute, "eps must be positive");
}

template <typename T>
Tensor<T> forward(const PrimitiveOp& op, std::span<const Tensor<T>> in) {
  op.validate();
  const auto need = [&](std::size_t k) {
    if (in.size() < k)
      fail(ErrorCode::ShapeMismatch, std::string(to_string(op.kind)) + " needs " +
                                         std::to_string(k) + " inputs");
  };
  const Tensor<T> none;
  switch (op.kind) {
    case OpKind::Add: need(2); return add(in[0], in[1]);
    case OpKind::Sub: need(2); return sub(in[0], in[1]);
    case OpKind::Mul: need(2); return mul(in[0], in[1]);
    case OpKind::Div: need(2); return div(in[0], in[1]);
    case OpKind::ScalarMul: need(1); return scalar_mul(in[0], op.scalar);
    case OpKind::AddScalar: need(1); return add_scalar(in[0], op.scalar);
    case OpKind::MatMul: need(2); return matmul(in[0], in[1]);
    case OpKind::Conv2d:
      need(2);
      return conv2d(in[0], in[1], in.size() > 2 ? in[2] : none, op.stride, op.padding);
    case OpKind::Conv3d:
      need(2);
      return conv3d(in[0], in[1], in.size() > 2 ? in[2] : none, {op.stride, op.stride, op.stride},
                    {op.padding, op.padding, op.padding});
    case OpKind::Relu: need(1); return relu(in[0]);
    case OpKind::MaxPool2d: need(1); return max_pool2d(in[0], op.kernel);
    case OpKind::MaxPool3d: need(1); return max_pool3d(in[0], op.kernel);
    case OpKind::NearestUpsample3d: need(1); return nearest_upsample3d(in[0], op.factor);
    case OpKind::InstanceNorm3d:
      need(1);
      if (in.size() >= 3) return instance_norm3d(in[0], in[1], in[2], op.eps);
      return instance_norm3d(in[0], none, none, op.eps);
    case OpKind::Dropout: need(1); return dropout(in[0], op.p, op.seed, op.training);
    case OpKind::Mean: need(1); return mean(in[0]);
    case OpKind::Sum: need(1); return sum(in[0]);
    case OpKind::Square: need(1); return square(in[0]);
    case OpKind::Tanh: need(1); return tanh(in[0]);
    case OpKind::Concat: need(1); return concat(in, op.axis);
    case OpKind::SliceView: need(1); return slice_view(in[0], op.axis, op.index);
    case OpKind::Reshape: need(1); return reshape(in[0], op.shape);
    case OpKind::Permute: need(1); return permute(in[0], op.perm);
    case OpKind::MinMaxNormalize:
      need(1);
      return minmax_normalize(in[0], op.eps, op.group_dims, op.detach_stats);
    case OpKind::StopGradient: need(1); return stop_gradient(in[0]);
    case OpKind::Leaf: break;
  }
  fail(ErrorCode::InvalidAttribute, "forward: leaf is not an operation");
}

#define CYCPL_INSTANTIATE(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scalar_mul(const Tensor<T>&, double);                                    \
  template Tensor<T> add_scalar(const Tensor<T>&, double);                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> relu(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                  \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> max_pool3d(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> nearest_upsample3d(const Tensor<T>&, std::size_t);                       \
  template Tensor<T> instance_norm3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    double);                                                  \
  template Tensor<T> dropout(const Tensor<T>&, double, std::uint64_t, bool);                  \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                         \
  template Tensor<T> slice_view(const Tensor<T>&, std::size_t, std::size_t);                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> permute(const Tensor<T>&, std::vector<std::size_t>);                     \
  template Tensor<T> minmax_normalize(const Tensor<T>&, double, std::size_t, bool);           \
  template Tensor<T> stop_gradient(const Tensor<T>&);                                         \
  template Tensor<T> forward(const PrimitiveOp&, std::span<const Tensor<T>>);

CYCPL_INSTANTIATE(float)
CYCPL_INSTANTIATE(double)

}  // namespace cycpl::ad
