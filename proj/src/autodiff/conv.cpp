// Convolution via im2col + GEMM. conv2d reuses the 3D path with a unit depth.

#include <algorithm>
#include <span>

#include "blas.hpp"
#include "cycpl/autodiff/ops.hpp"
#include "cycpl/error.hpp"

namespace cycpl::ad {

namespace {

struct ConvGeom {
  std::size_t n = 0, cin = 0, cout = 0;
  Triple in{}, k{}, out{}, stride{}, pad{};

  std::size_t in_spatial() const { return in[0] * in[1] * in[2]; }
  std::size_t out_spatial() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return cin * k[0] * k[1] * k[2]; }
  bool pointwise() const {
    return k == Triple{1, 1, 1} && stride == Triple{1, 1, 1} && pad == Triple{0, 0, 0};
  }
};

// Valid output range [lo, hi) along one axis for kernel offset `off`.
inline void valid_range(std::size_t out, std::size_t in, std::size_t stride, std::size_t off,
                        std::size_t pad, std::size_t& lo, std::size_t& hi) {
  lo = off >= pad ? 0 : (pad - off + stride - 1) / stride;
  const long long last = static_cast<long long>(in) - 1 + static_cast<long long>(pad) -
                         static_cast<long long>(off);
  hi = last < 0 ? 0 : std::min(out, static_cast<std::size_t>(last) / stride + 1);
  if (hi < lo) hi = lo;
}

template <typename T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  const std::size_t os = g.out_spatial();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.in_spatial();
    for (std::size_t a = 0; a < g.k[0]; ++a) {
      std::size_t d0, d1;
      valid_range(g.out[0], g.in[0], g.stride[0], a, g.pad[0], d0, d1);
      for (std::size_t b = 0; b < g.k[1]; ++b) {
        std::size_t h0, h1;
        valid_range(g.out[1], g.in[1], g.stride[1], b, g.pad[1], h0, h1);
        for (std::size_t e = 0; e < g.k[2]; ++e, ++row) {
          std::size_t w0, w1;
          valid_range(g.out[2], g.in[2], g.stride[2], e, g.pad[2], w0, w1);
          T* dst = cols + row * os;
          std::fill_n(dst, os, T(0));
          for (std::size_t od = d0; od < d1; ++od) {
            const std::size_t id = od * g.stride[0] + a - g.pad[0];
            for (std::size_t oh = h0; oh < h1; ++oh) {
              const std::size_t ih = oh * g.stride[1] + b - g.pad[1];
              T* drow = dst + (od * g.out[1] + oh) * g.out[2];
              const T* srow = xc + (id * g.in[1] + ih) * g.in[2] + e - g.pad[2];
              if (g.stride[2] == 1) {
                std::copy(srow + w0, srow + w1, drow + w0);
              } else {
                for (std::size_t ow = w0; ow < w1; ++ow) drow[ow] = srow[ow * g.stride[2]];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* dx) {
  const std::size_t os = g.out_spatial();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* xc = dx + c * g.in_spatial();
    for (std::size_t a = 0; a < g.k[0]; ++a) {
      std::size_t d0, d1;
      valid_range(g.out[0], g.in[0], g.stride[0], a, g.pad[0], d0, d1);
      for (std::size_t b = 0; b < g.k[1]; ++b) {
        std::size_t h0, h1;
        valid_range(g.out[1], g.in[1], g.stride[1], b, g.pad[1], h0, h1);
        for (std::size_t e = 0; e < g.k[2]; ++e, ++row) {
          std::size_t w0, w1;
          valid_range(g.out[2], g.in[2], g.stride[2], e, g.pad[2], w0, w1);
          const T* src = cols + row * os;
          for (std::size_t od = d0; od < d1; ++od) {
            const std::size_t id = od * g.stride[0] + a - g.pad[0];
            for (std::size_t oh = h0; oh < h1; ++oh) {
              const std::size_t ih = oh * g.stride[1] + b - g.pad[1];
              const T* srow = src + (od * g.out[1] + oh) * g.out[2];
              T* drow = xc + (id * g.in[1] + ih) * g.in[2] + e - g.pad[2];
              if (g.stride[2] == 1) {
                for (std::size_t ow = w0; ow < w1; ++ow) drow[ow] += srow[ow];
              } else {
                for (std::size_t ow = w0; ow < w1; ++ow) drow[ow * g.stride[2]] += srow[ow];
              }
            }
          }
        }
      }
    }
  }
}

// Stride-1 path: the input is zero-padded once and every kernel offset becomes
// a GEMM against a shifted view of the padded volume. Outputs are produced in
// the padded row pitch; columns past the true width/height are discarded.
struct ShiftGeom {
  std::size_t hp = 0, wp = 0, pvol = 0, span = 0;

  explicit ShiftGeom(const ConvGeom& g) {
    hp = g.in[1] + 2 * g.pad[1];
    wp = g.in[2] + 2 * g.pad[2];
    pvol = (g.in[0] + 2 * g.pad[0]) * hp * wp;
    span = (g.out[0] - 1) * hp * wp + (g.out[1] - 1) * wp + g.out[2];
  }
  std::size_t shift(std::size_t a, std::size_t b, std::size_t e) const {
    return (a * hp + b) * wp + e;
  }
  std::size_t out_at(std::size_t od, std::size_t oh) const { return (od * hp + oh) * wp; }
};

template <typename T>
void pad_sample(const ConvGeom& g, const ShiftGeom& sg, const T* x, T* xp) {
  std::fill_n(xp, g.cin * sg.pvol, T(0));
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t d = 0; d < g.in[0]; ++d)
      for (std::size_t h = 0; h < g.in[1]; ++h) {
        const T* src = x + ((c * g.in[0] + d) * g.in[1] + h) * g.in[2];
        T* dst = xp + c * sg.pvol + ((d + g.pad[0]) * sg.hp + h + g.pad[1]) * sg.wp + g.pad[2];
        std::copy(src, src + g.in[2], dst);
      }
}

/// Kernel (Co,Ci,k...) regrouped as one (Co,Ci) matrix per offset.
template <typename T>
std::vector<T> regroup_kernel(const ConvGeom& g, std::span<const T> w) {
  const std::size_t kv = g.k[0] * g.k[1] * g.k[2];
  std::vector<T> out(kv * g.cout * g.cin);
  for (std::size_t o = 0; o < g.cout; ++o)
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t t = 0; t < kv; ++t)
        out[(t * g.cout + o) * g.cin + c] = w[(o * g.cin + c) * kv + t];
  return out;
}

template <typename T>
Tensor<T> shift_conv_impl(OpKind kind, const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& bias, const ConvGeom& g, Shape out_shape) {
  const ShiftGeom sg(g);
  const std::size_t os = g.out_spatial();
  const int m = static_cast<int>(g.cout), kc = static_cast<int>(g.cin);
  const int span = static_cast<int>(sg.span), ldp = static_cast<int>(sg.pvol);
  const auto wk = regroup_kernel(g, w.values());
  std::vector<T> xp(g.cin * sg.pvol);
  std::vector<T> yp(g.cout * sg.span);
  std::vector<T> out(g.n * g.cout * os);
  const auto xv = x.values();
  for (std::size_t s = 0; s < g.n; ++s) {
    pad_sample(g, sg, xv.data() + s * g.cin * g.in_spatial(), xp.data());
    std::size_t t = 0;
    for (std::size_t a = 0; a < g.k[0]; ++a)
      for (std::size_t b = 0; b < g.k[1]; ++b)
        for (std::size_t e = 0; e < g.k[2]; ++e, ++t)
          detail::gemm(false, false, m, span, kc, T(1), wk.data() + t * g.cout * g.cin, kc,
                       xp.data() + sg.shift(a, b, e), ldp, T(t == 0 ? 0 : 1), yp.data(), span);
    T* ys = out.data() + s * g.cout * os;
    for (std::size_t c = 0; c < g.cout; ++c) {
      const T bv = bias.defined() ? bias.values()[c] : T(0);
      for (std::size_t od = 0; od < g.out[0]; ++od)
        for (std::size_t oh = 0; oh < g.out[1]; ++oh) {
          const T* src = yp.data() + c * sg.span + sg.out_at(od, oh);
          T* dst = ys + ((c * g.out[0] + od) * g.out[1] + oh) * g.out[2];
          for (std::size_t ow = 0; ow < g.out[2]; ++ow) dst[ow] = src[ow] + bv;
        }
    }
  }

  std::vector<Tensor<T>> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result<T>(kind, std::move(out_shape), std::move(out), std::move(inputs),
                        [g, has_bias](Node<T>& n) {
    const ShiftGeom sg(g);
    const std::size_t os = g.out_spatial();
    const std::size_t kv = g.k[0] * g.k[1] * g.k[2];
    const int m = static_cast<int>(g.cout), kc = static_cast<int>(g.cin);
    const int span = static_cast<int>(sg.span), ldp = static_cast<int>(sg.pvol);
    Node<T>& px = *n.parents[0];
    Node<T>& pw = *n.parents[1];
    const bool need_w = pw.requires_grad, need_x = px.requires_grad;
    std::vector<T> wk = need_x ? regroup_kernel<T>(g, pw.value) : std::vector<T>();
    std::vector<T> dwk(need_w ? kv * g.cout * g.cin : 0, T(0));
    std::vector<T> xp(need_w ? g.cin * sg.pvol : 0);
    std::vector<T> dxp(need_x ? g.cin * sg.pvol : 0);
    std::vector<T> gp(g.cout * sg.span, T(0));
    for (std::size_t s = 0; s < g.n; ++s) {
      const T* gy = n.grad.data() + s * g.cout * os;
      for (std::size_t c = 0; c < g.cout; ++c)
        for (std::size_t od = 0; od < g.out[0]; ++od)
          for (std::size_t oh = 0; oh < g.out[1]; ++oh)
            std::copy_n(gy + ((c * g.out[0] + od) * g.out[1] + oh) * g.out[2], g.out[2],
                        gp.data() + c * sg.span + sg.out_at(od, oh));
      if (need_w) pad_sample(g, sg, px.value.data() + s * g.cin * g.in_spatial(), xp.data());
      if (need_x) std::fill(dxp.begin(), dxp.end(), T(0));
      std::size_t t = 0;
      for (std::size_t a = 0; a < g.k[0]; ++a)
        for (std::size_t b = 0; b < g.k[1]; ++b)
          for (std::size_t e = 0; e < g.k[2]; ++e, ++t) {
            const std::size_t sh = sg.shift(a, b, e);
            if (need_w)
              detail::gemm(false, true, m, kc, span, T(1), gp.data(), span, xp.data() + sh, ldp,
                           T(1), dwk.data() + t * g.cout * g.cin, kc);
            if (need_x)
              detail::gemm(true, false, kc, span, m, T(1), wk.data() + t * g.cout * g.cin, kc,
                           gp.data(), span, T(1), dxp.data() + sh, ldp);
          }
      if (need_x) {
        T* dx = px.ensure_grad().data() + s * g.cin * g.in_spatial();
        for (std::size_t c = 0; c < g.cin; ++c)
          for (std::size_t d = 0; d < g.in[0]; ++d)
            for (std::size_t h = 0; h < g.in[1]; ++h) {
              const T* src = dxp.data() + c * sg.pvol +
                             ((d + g.pad[0]) * sg.hp + h + g.pad[1]) * sg.wp + g.pad[2];
              T* dst = dx + ((c * g.in[0] + d) * g.in[1] + h) * g.in[2];
              for (std::size_t i = 0; i < g.in[2]; ++i) dst[i] += src[i];
            }
      }
    }
    if (need_w) {
      auto& dw = pw.ensure_grad();
      for (std::size_t o = 0; o < g.cout; ++o)
        for (std::size_t c = 0; c < g.cin; ++c)
          for (std::size_t t = 0; t < kv; ++t)
            dw[(o * g.cin + c) * kv + t] += dwk[(t * g.cout + o) * g.cin + c];
    }
    if (has_bias && n.parents[2]->requires_grad) {
      auto& db = n.parents[2]->ensure_grad();
      for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t c = 0; c < g.cout; ++c) {
          const T* row = n.grad.data() + (s * g.cout + c) * os;
          double acc = 0.0;
          for (std::size_t i = 0; i < os; ++i) acc += row[i];
          db[c] += static_cast<T>(acc);
        }
    }
  });
}

template <typename T>
Tensor<T> conv_impl(OpKind kind, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                    const ConvGeom& g, Shape out_shape) {
  if (g.stride == Triple{1, 1, 1} && !g.pointwise())
    return shift_conv_impl(kind, x, w, bias, g, std::move(out_shape));
  const std::size_t os = g.out_spatial(), kk = g.patch();
  const int m = static_cast<int>(g.cout), nn = static_cast<int>(os), k = static_cast<int>(kk);
  std::vector<T> out(g.n * g.cout * os);
  std::vector<T> cols(g.pointwise() ? 0 : kk * os);
  const auto xv = x.values();
  const auto wv = w.values();
  for (std::size_t s = 0; s < g.n; ++s) {
    const T* xs = xv.data() + s * g.cin * g.in_spatial();
    const T* cp = xs;
    if (!g.pointwise()) {
      im2col(g, xs, cols.data());
      cp = cols.data();
    }
    T* os_ptr = out.data() + s * g.cout * os;
    detail::gemm(false, false, m, nn, k, T(1), wv.data(), k, cp, nn, T(0), os_ptr, nn);
    if (bias.defined()) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        const T b = bias.values()[c];
        T* row = os_ptr + c * os;
        for (std::size_t i = 0; i < os; ++i) row[i] += b;
      }
    }
  }

  std::vector<Tensor<T>> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result<T>(kind, std::move(out_shape), std::move(out), std::move(inputs),
                        [g, has_bias, m, nn, k](Node<T>& n) {
                          Node<T>& px = *n.parents[0];
                          Node<T>& pw = *n.parents[1];
                          const std::size_t os2 = g.out_spatial();
                          std::vector<T> cols2(g.pointwise() ? 0 : g.patch() * os2);
                          std::vector<T> dcols(g.pointwise() ? 0 : g.patch() * os2);
                          T* dw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                          T* dx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                          for (std::size_t s = 0; s < g.n; ++s) {
                            const T* gy = n.grad.data() + s * g.cout * os2;
                            const T* xs = px.value.data() + s * g.cin * g.in_spatial();
                            if (dw) {
                              const T* cp = xs;
                              if (!g.pointwise()) {
                                im2col(g, xs, cols2.data());
                                cp = cols2.data();
                              }
                              detail::gemm(false, true, m, k, nn, T(1), gy, nn, cp, nn, T(1), dw, k);
                            }
                            if (dx) {
                              T* dxs = dx + s * g.cin * g.in_spatial();
                              if (g.pointwise()) {
                                detail::gemm(true, false, k, nn, m, T(1), pw.value.data(), k, gy, nn,
                                             T(1), dxs, nn);
                              } else {
                                detail::gemm(true, false, k, nn, m, T(1), pw.value.data(), k, gy, nn,
                                             T(0), dcols.data(), nn);
                                col2im_add(g, dcols.data(), dxs);
                              }
                            }
                          }
                          if (has_bias && n.parents[2]->requires_grad) {
                            auto& db = n.parents[2]->ensure_grad();
                            for (std::size_t s = 0; s < g.n; ++s)
                              for (std::size_t c = 0; c < g.cout; ++c) {
                                const T* row = n.grad.data() + (s * g.cout + c) * os2;
                                double acc = 0.0;
                                for (std::size_t i = 0; i < os2; ++i) acc += row[i];
                                db[c] += static_cast<T>(acc);
                              }
                          }
                        });
}

ConvGeom make_geom(std::size_t n, std::size_t cin, Triple in, std::size_t cout,
                   std::size_t wcin, Triple k, Triple stride, Triple pad, const char* op) {
  for (std::size_t i = 0; i < 3; ++i)
    if (stride[i] < 1) fail(ErrorCode::InvalidAttribute, std::string(op) + ": stride must be >= 1");
  if (wcin != cin)
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": kernel expects " + std::to_string(wcin) +
                                       " input channels, got " + std::to_string(cin));
  ConvGeom g;
  g.n = n, g.cin = cin, g.cout = cout, g.in = in, g.k = k, g.stride = stride, g.pad = pad;
  for (std::size_t i = 0; i < 3; ++i) {
    if (in[i] + 2 * pad[i] < k[i])
      fail(ErrorCode::ShapeMismatch, std::string(op) + ": kernel larger than padded input");
    g.out[i] = (in[i] + 2 * pad[i] - k[i]) / stride[i] + 1;
  }
  return g;
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t cout, const char* op) {
  if (bias.defined() && bias.numel() != cout)
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": bias must have Cout elements");
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Triple stride,
                 Triple padding) {
  if (x.rank() != 5 || w.rank() != 5)
    fail(ErrorCode::ShapeMismatch, "conv3d expects x (N,C,D,H,W) and w (Co,Ci,kD,kH,kW), got " +
                                       shape_str(x.shape()) + ", " + shape_str(w.shape()));
  check_bias(bias, w.dim(0), "conv3d");
  const ConvGeom g = make_geom(x.dim(0), x.dim(1), {x.dim(2), x.dim(3), x.dim(4)}, w.dim(0),
                               w.dim(1), {w.dim(2), w.dim(3), w.dim(4)}, stride, padding, "conv3d");
  return conv_impl(OpKind::Conv3d, x, w, bias, g, {g.n, g.cout, g.out[0], g.out[1], g.out[2]});
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  if (x.rank() != 4 || w.rank() != 4)
    fail(ErrorCode::ShapeMismatch, "conv2d expects x (N,C,H,W) and w (Co,Ci,kH,kW), got " +
                                       shape_str(x.shape()) + ", " + shape_str(w.shape()));
  check_bias(bias, w.dim(0), "conv2d");
  const ConvGeom g = make_geom(x.dim(0), x.dim(1), {1, x.dim(2), x.dim(3)}, w.dim(0), w.dim(1),
                               {1, w.dim(2), w.dim(3)}, {1, stride, stride}, {0, padding, padding},
                               "conv2d");
  return conv_impl(OpKind::Conv2d, x, w, bias, g, {g.n, g.cout, g.out[1], g.out[2]});
}

template Tensor<float> conv3d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              Triple, Triple);
template Tensor<double> conv3d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, Triple, Triple);
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              std::size_t, std::size_t);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, std::size_t, std::size_t);

}  // namespace cycpl::ad
