#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cosim/tensor.hpp"

// Differentiable building blocks of the siamese encoder. Each op validates
// shapes, computes the forward value, and registers a closure that scatters
// the output adjoint into its inputs. All loops are sequential with a fixed
// order, so results are bit-reproducible.

namespace cosim::ops {

namespace detail {
using cosim::detail::TensorNode;
using cosim::detail::make_op_output;
using cosim::detail::parent_grad;

// Zero-padded copy of a CxHxW volume.
inline std::vector<double> pad_chw(const std::vector<double>& src, int c, int h, int w, int pad) {
  if (pad == 0) return src;
  const int hp = h + 2 * pad, wp = w + 2 * pad;
  std::vector<double> out(static_cast<std::size_t>(c) * hp * wp, 0.0);
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y) {
      const double* s = src.data() + (static_cast<std::size_t>(ci) * h + y) * w;
      double* d = out.data() + (static_cast<std::size_t>(ci) * hp + y + pad) * wp + pad;
      std::copy(s, s + w, d);
    }
  return out;
}
}  // namespace detail

// Cross-correlation with per-channel bias.
//   input  [C_in x H x W], kernel [C_out x C_in x k x k], bias [C_out]
//   out[co,y,x] = bias[co] + sum_{ci,ky,kx} kernel[co,ci,ky,kx] * in[ci, y*s+ky-p, x*s+kx-p]
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                     int pad) {
  COSIM_CHECK_ARG(input.ndim() == 3, "conv2d: input must be CxHxW, shape is ",
                  shape_str(input.shape()));
  COSIM_CHECK_ARG(kernel.ndim() == 4, "conv2d: kernel must be C_out x C_in x k x k, shape is ",
                  shape_str(kernel.shape()));
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = kernel.dim(0), k = kernel.dim(2);
  COSIM_CHECK_ARG(kernel.dim(1) == cin, "conv2d: kernel input-channel dimension ", kernel.dim(1),
                  " does not match input channels ", cin);
  COSIM_CHECK_ARG(kernel.dim(3) == k, "conv2d: kernel window must be square, got ", k, "x",
                  kernel.dim(3));
  COSIM_CHECK_ARG(bias.ndim() == 1 && bias.dim(0) == cout, "conv2d: bias dimension ",
                  shape_str(bias.shape()), " does not match output channels ", cout);
  COSIM_CHECK_ARG(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
  COSIM_CHECK_ARG(pad >= 0, "conv2d: pad must be >= 0, got ", pad);
  COSIM_CHECK_ARG(k <= h + 2 * pad, "conv2d: kernel height ", k, " exceeds padded input height ",
                  h + 2 * pad);
  COSIM_CHECK_ARG(k <= w + 2 * pad, "conv2d: kernel width ", k, " exceeds padded input width ",
                  w + 2 * pad);

  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  const int hp = h + 2 * pad, wp = w + 2 * pad;

  const std::vector<double> padded = detail::pad_chw(input.values(), cin, h, w, pad);
  std::vector<double> out(static_cast<std::size_t>(cout) * ho * wo);

  const double* kern = kernel.data();
  const double* bvec = bias.data();
  for (int co = 0; co < cout; ++co) {
    double* oplane = out.data() + static_cast<std::size_t>(co) * ho * wo;
    std::fill(oplane, oplane + static_cast<std::size_t>(ho) * wo, bvec[co]);
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double kv = kern[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
          for (int y = 0; y < ho; ++y) {
            const double* srow =
                padded.data() + (static_cast<std::size_t>(ci) * hp + y * stride + ky) * wp + kx;
            double* orow = oplane + static_cast<std::size_t>(y) * wo;
            if (stride == 1) {
              for (int x = 0; x < wo; ++x) orow[x] += kv * srow[x];
            } else {
              for (int x = 0; x < wo; ++x) orow[x] += kv * srow[x * stride];
            }
          }
        }
  }

  auto backprop = [cin, cout, h, w, k, stride, pad, ho, wo, hp, wp](detail::TensorNode& node) {
    const auto& g = node.grad;
    detail::TensorNode& in_node = *node.parents[0];
    detail::TensorNode& k_node = *node.parents[1];
    detail::TensorNode& b_node = *node.parents[2];

    if (b_node.requires_grad) {
      b_node.ensure_grad();
      for (int co = 0; co < cout; ++co) {
        const double* gp = g.data() + static_cast<std::size_t>(co) * ho * wo;
        double acc = 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(ho) * wo; ++i) acc += gp[i];
        b_node.grad[static_cast<std::size_t>(co)] += acc;
      }
    }

    std::vector<double> padded;
    if (k_node.requires_grad)
      padded = detail::pad_chw(in_node.value, cin, h, w, pad);

    if (k_node.requires_grad) {
      k_node.ensure_grad();
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              double acc = 0.0;
              for (int y = 0; y < ho; ++y) {
                const double* gr = g.data() + (static_cast<std::size_t>(co) * ho + y) * wo;
                const double* sr = padded.data() +
                                   (static_cast<std::size_t>(ci) * hp + y * stride + ky) * wp + kx;
                if (stride == 1) {
                  for (int x = 0; x < wo; ++x) acc += gr[x] * sr[x];
                } else {
                  for (int x = 0; x < wo; ++x) acc += gr[x] * sr[x * stride];
                }
              }
              k_node.grad[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx] += acc;
            }
    }

    if (in_node.requires_grad) {
      in_node.ensure_grad();
      std::vector<double> dpad(static_cast<std::size_t>(cin) * hp * wp, 0.0);
      const double* kern = k_node.value.data();
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const double kv = kern[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
              for (int y = 0; y < ho; ++y) {
                const double* gr = g.data() + (static_cast<std::size_t>(co) * ho + y) * wo;
                double* dr =
                    dpad.data() + (static_cast<std::size_t>(ci) * hp + y * stride + ky) * wp + kx;
                if (stride == 1) {
                  for (int x = 0; x < wo; ++x) dr[x] += kv * gr[x];
                } else {
                  for (int x = 0; x < wo; ++x) dr[x * stride] += kv * gr[x];
                }
              }
            }
      for (int ci = 0; ci < cin; ++ci)
        for (int y = 0; y < h; ++y) {
          const double* s = dpad.data() + (static_cast<std::size_t>(ci) * hp + y + pad) * wp + pad;
          double* d = in_node.grad.data() + (static_cast<std::size_t>(ci) * h + y) * w;
          for (int x = 0; x < w; ++x) d[x] += s[x];
        }
    }
  };

  return detail::make_op_output({cout, ho, wo}, std::move(out), {input, kernel, bias},
                                std::move(backprop));
}

// Elementwise max(0, x); subgradient 0 at the kink.
inline Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().size());
  const double* xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  auto backprop = [](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += node.grad[i];
  };
  return detail::make_op_output(x.shape(), std::move(out), {x}, std::move(backprop));
}

// Window maximum; the gradient routes to the first maximal element in scan
// order, which keeps tie handling deterministic.
inline Tensor maxpool2d(const Tensor& x, int k, int stride) {
  COSIM_CHECK_ARG(x.ndim() == 3, "maxpool2d: input must be CxHxW, shape is ",
                  shape_str(x.shape()));
  COSIM_CHECK_ARG(k >= 1 && stride >= 1, "maxpool2d: window and stride must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  COSIM_CHECK_ARG(k <= h, "maxpool2d: window ", k, " larger than input height ", h);
  COSIM_CHECK_ARG(k <= w, "maxpool2d: window ", k, " larger than input width ", w);
  const int ho = (h - k) / stride + 1;
  const int wo = (w - k) / stride + 1;

  std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
  std::vector<std::int32_t> argmax(out.size());
  const double* xd = x.data();
  std::size_t o = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < ho; ++y)
      for (int xo = 0; xo < wo; ++xo, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::int32_t best_idx = 0;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const std::int32_t idx = static_cast<std::int32_t>(
                (static_cast<std::size_t>(ci) * h + y * stride + ky) * w + xo * stride + kx);
            if (xd[idx] > best) {
              best = xd[idx];
              best_idx = idx;
            }
          }
        out[o] = best;
        argmax[o] = best_idx;
      }

  auto backprop = [argmax = std::move(argmax)](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      p.grad[static_cast<std::size_t>(argmax[i])] += node.grad[i];
  };
  return detail::make_op_output({c, ho, wo}, std::move(out), {x}, std::move(backprop));
}

namespace detail {
// Align-corners source coordinate table: dst index -> (i0, i1, frac).
struct LerpIndex {
  int i0, i1;
  double f;
};
inline std::vector<LerpIndex> lerp_table(int n_src, int n_dst) {
  std::vector<LerpIndex> t(static_cast<std::size_t>(n_dst));
  for (int i = 0; i < n_dst; ++i) {
    double s = (n_dst == 1 || n_src == 1)
                   ? 0.0
                   : static_cast<double>(i) * (n_src - 1) / static_cast<double>(n_dst - 1);
    int i0 = static_cast<int>(std::floor(s));
    double f = s - i0;
    if (i0 >= n_src - 1) {
      i0 = n_src - 1;
      f = 0.0;
    }
    t[static_cast<std::size_t>(i)] = {i0, std::min(i0 + 1, n_src - 1), f};
  }
  return t;
}
}  // namespace detail

// Bilinear interpolation with the align-corners mapping
// src = dst * (n_src - 1) / (n_dst - 1). Upsampling only.
inline Tensor bilinear_upsample(const Tensor& x, int h_out, int w_out) {
  COSIM_CHECK_ARG(x.ndim() == 3, "bilinear_upsample: input must be CxHxW, shape is ",
                  shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  COSIM_CHECK_ARG(h_out >= h, "bilinear_upsample: target height ", h_out,
                  " smaller than source height ", h);
  COSIM_CHECK_ARG(w_out >= w, "bilinear_upsample: target width ", w_out,
                  " smaller than source width ", w);

  const auto ty = detail::lerp_table(h, h_out);
  const auto tx = detail::lerp_table(w, w_out);
  std::vector<double> out(static_cast<std::size_t>(c) * h_out * w_out);
  const double* xd = x.data();
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = xd + static_cast<std::size_t>(ci) * h * w;
    double* oplane = out.data() + static_cast<std::size_t>(ci) * h_out * w_out;
    for (int y = 0; y < h_out; ++y) {
      const auto [y0, y1, fy] = ty[static_cast<std::size_t>(y)];
      const double* r0 = plane + static_cast<std::size_t>(y0) * w;
      const double* r1 = plane + static_cast<std::size_t>(y1) * w;
      double* orow = oplane + static_cast<std::size_t>(y) * w_out;
      for (int xo = 0; xo < w_out; ++xo) {
        const auto [x0, x1, fx] = tx[static_cast<std::size_t>(xo)];
        const double top = r0[x0] + fx * (r0[x1] - r0[x0]);
        const double bot = r1[x0] + fx * (r1[x1] - r1[x0]);
        orow[xo] = top + fy * (bot - top);
      }
    }
  }

  auto backprop = [c, h, w, h_out, w_out, ty, tx](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      double* dplane = p.grad.data() + static_cast<std::size_t>(ci) * h * w;
      const double* gplane = node.grad.data() + static_cast<std::size_t>(ci) * h_out * w_out;
      for (int y = 0; y < h_out; ++y) {
        const auto [y0, y1, fy] = ty[static_cast<std::size_t>(y)];
        const double* grow = gplane + static_cast<std::size_t>(y) * w_out;
        for (int xo = 0; xo < w_out; ++xo) {
          const auto [x0, x1, fx] = tx[static_cast<std::size_t>(xo)];
          const double g = grow[xo];
          dplane[y0 * w + x0] += (1.0 - fy) * (1.0 - fx) * g;
          dplane[y0 * w + x1] += (1.0 - fy) * fx * g;
          dplane[y1 * w + x0] += fy * (1.0 - fx) * g;
          dplane[y1 * w + x1] += fy * fx * g;
        }
      }
    }
  };
  return detail::make_op_output({c, h_out, w_out}, std::move(out), {x}, std::move(backprop));
}

// Projects every spatial location's channel vector onto the unit sphere:
// y = x / max(||x||, eps). Zero vectors stay zero.
inline Tensor l2_normalize_channels(const Tensor& x, double eps = 1e-12) {
  COSIM_CHECK_ARG(x.ndim() == 3, "l2_normalize_channels: input must be CxHxW, shape is ",
                  shape_str(x.shape()));
  COSIM_CHECK_ARG(eps > 0.0, "l2_normalize_channels: eps must be positive, got ", eps);
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);

  std::vector<double> norms(hw, 0.0);
  const double* xd = x.data();
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = xd + static_cast<std::size_t>(ci) * hw;
    for (std::size_t j = 0; j < hw; ++j) norms[j] += plane[j] * plane[j];
  }
  for (std::size_t j = 0; j < hw; ++j) norms[j] = std::sqrt(norms[j]);

  std::vector<double> out(x.values().size());
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = xd + static_cast<std::size_t>(ci) * hw;
    double* oplane = out.data() + static_cast<std::size_t>(ci) * hw;
    for (std::size_t j = 0; j < hw; ++j) oplane[j] = plane[j] / std::max(norms[j], eps);
  }

  auto backprop = [c, hw, eps, norms = std::move(norms)](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    // For n > eps:  dx = (g - y (g.y)) / n  with y = x/n.
    // For n <= eps: the denominator is the constant eps, so dx = g / eps.
    std::vector<double> gdoty(hw, 0.0);
    for (int ci = 0; ci < c; ++ci) {
      const double* yv = node.value.data() + static_cast<std::size_t>(ci) * hw;
      const double* gv = node.grad.data() + static_cast<std::size_t>(ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) gdoty[j] += gv[j] * yv[j];
    }
    for (int ci = 0; ci < c; ++ci) {
      const double* yv = node.value.data() + static_cast<std::size_t>(ci) * hw;
      const double* gv = node.grad.data() + static_cast<std::size_t>(ci) * hw;
      double* dv = p.grad.data() + static_cast<std::size_t>(ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (norms[j] > eps)
          dv[j] += (gv[j] - yv[j] * gdoty[j]) / norms[j];
        else
          dv[j] += gv[j] / eps;
      }
    }
  };
  return detail::make_op_output(x.shape(), std::move(out), {x}, std::move(backprop));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  COSIM_CHECK_ARG(a.shape() == b.shape(), "add: shape mismatch ", shape_str(a.shape()), " vs ",
                  shape_str(b.shape()));
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto backprop = [](detail::TensorNode& node) {
    for (std::size_t pi = 0; pi < 2; ++pi) {
      detail::TensorNode& p = *node.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
    }
  };
  return detail::make_op_output(a.shape(), std::move(out), {a, b}, std::move(backprop));
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  COSIM_CHECK_ARG(a.shape() == b.shape(), "sub: shape mismatch ", shape_str(a.shape()), " vs ",
                  shape_str(b.shape()));
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto backprop = [](detail::TensorNode& node) {
    detail::TensorNode& pa = *node.parents[0];
    detail::TensorNode& pb = *node.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) pa.grad[i] += node.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) pb.grad[i] -= node.grad[i];
    }
  };
  return detail::make_op_output(a.shape(), std::move(out), {a, b}, std::move(backprop));
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  COSIM_CHECK_ARG(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()), " vs ",
                  shape_str(b.shape()));
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto backprop = [](detail::TensorNode& node) {
    detail::TensorNode& pa = *node.parents[0];
    detail::TensorNode& pb = *node.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) pa.grad[i] += node.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) pb.grad[i] += node.grad[i] * pa.value[i];
    }
  };
  return detail::make_op_output(a.shape(), std::move(out), {a, b}, std::move(backprop));
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  auto backprop = [c](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i] * c;
  };
  return detail::make_op_output(a.shape(), std::move(out), {a}, std::move(backprop));
}

inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) acc += a.data()[i];
  auto backprop = [](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += node.grad[0];
  };
  return detail::make_op_output({1}, {acc}, {a}, std::move(backprop));
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

// Same data, different extents.
inline Tensor reshape(const Tensor& a, Shape shape) {
  COSIM_CHECK_ARG(shape_numel(shape) == a.numel(), "reshape: ", shape_str(shape),
                  " has wrong element count for ", shape_str(a.shape()));
  auto backprop = [](detail::TensorNode& node) {
    detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
  };
  return detail::make_op_output(std::move(shape), a.values(), {a}, std::move(backprop));
}

// Channel concatenation of two feature volumes at the same resolution.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  COSIM_CHECK_ARG(a.ndim() == 3 && b.ndim() == 3, "concat_channels: inputs must be CxHxW");
  COSIM_CHECK_ARG(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
                  "concat_channels: spatial mismatch ", shape_str(a.shape()), " vs ",
                  shape_str(b.shape()));
  const std::size_t na = a.values().size(), nb = b.values().size();
  std::vector<double> out(na + nb);
  std::copy(a.values().begin(), a.values().end(), out.begin());
  std::copy(b.values().begin(), b.values().end(), out.begin() + static_cast<std::ptrdiff_t>(na));
  auto backprop = [na, nb](detail::TensorNode& node) {
    detail::TensorNode& pa = *node.parents[0];
    detail::TensorNode& pb = *node.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < na; ++i) pa.grad[i] += node.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < nb; ++i) pb.grad[i] += node.grad[na + i];
    }
  };
  return detail::make_op_output({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a, b},
                                std::move(backprop));
}

}  // namespace cosim::ops
