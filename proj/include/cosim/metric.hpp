#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cosim/ops.hpp"
#include "cosim/tensor.hpp"

namespace cosim {

// Binary per-pixel labels. values[k] == 1 marks a changed pixel, 0 an
// unchanged one; the losses derive the unchanged indicator y = 1 - v from
// this. Matches the on-disk mask convention (white = changed).
struct ChangeMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  ChangeMask() = default;
  ChangeMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return values.size(); }
  std::uint8_t at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::int64_t changed_count() const {
    std::int64_t n = 0;
    for (auto v : values) n += v;
    return n;
  }
};

// Nearest-neighbor resample with the same align-corners mapping the bilinear
// path uses; keeps labels binary at every resolution.
inline ChangeMask resize_mask_nearest(const ChangeMask& m, int h_out, int w_out) {
  COSIM_CHECK_ARG(h_out > 0 && w_out > 0, "resize_mask_nearest: target must be positive");
  ChangeMask out(h_out, w_out);
  for (int y = 0; y < h_out; ++y) {
    const int sy = (h_out == 1 || m.height == 1)
                       ? 0
                       : static_cast<int>(std::lround(static_cast<double>(y) * (m.height - 1) /
                                                      static_cast<double>(h_out - 1)));
    for (int x = 0; x < w_out; ++x) {
      const int sx = (w_out == 1 || m.width == 1)
                         ? 0
                         : static_cast<int>(std::lround(static_cast<double>(x) * (m.width - 1) /
                                                        static_cast<double>(w_out - 1)));
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

enum class DistanceKind { euclidean, cosine };

// Per-pixel distance (or similarity) between two feature volumes. The
// values tensor stays on the autodiff tape so losses can flow gradients
// back into the features.
struct DistanceMap {
  Tensor values;  // shape [h, w]
  DistanceKind kind = DistanceKind::euclidean;
};

// Real-valued change confidence in [0, 1].
struct ChangeMap {
  Tensor values;           // shape [h, w]
  int source_level = -1;   // producing pyramid level, or -1 for fused maps

  int height() const { return values.dim(0); }
  int width() const { return values.dim(1); }
};

namespace detail {
inline void check_feature_pair(const Tensor& f0, const Tensor& f1, const char* who) {
  COSIM_CHECK_ARG(f0.ndim() == 3 && f1.ndim() == 3, who, ": features must be CxHxW");
  COSIM_CHECK_ARG(f0.shape() == f1.shape(), who, ": feature shapes differ, ",
                  shape_str(f0.shape()), " vs ", shape_str(f1.shape()));
}
}  // namespace detail

// d_k = || f0_k - f1_k ||_2 over channels, per spatial location.
inline DistanceMap l2_distance_map(const Tensor& f0, const Tensor& f1) {
  detail::check_feature_pair(f0, f1, "l2_distance_map");
  const int c = f0.dim(0), h = f0.dim(1), w = f0.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  std::vector<double> d(hw, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* a = f0.data() + static_cast<std::size_t>(ci) * hw;
    const double* b = f1.data() + static_cast<std::size_t>(ci) * hw;
    for (std::size_t j = 0; j < hw; ++j) {
      const double diff = a[j] - b[j];
      d[j] += diff * diff;
    }
  }
  for (std::size_t j = 0; j < hw; ++j) d[j] = std::sqrt(d[j]);

  auto backprop = [c, hw](cosim::detail::TensorNode& node) {
    // dd/df0 = (f0 - f1) / d, guarded at d = 0 where the subgradient is 0.
    cosim::detail::TensorNode& p0 = *node.parents[0];
    cosim::detail::TensorNode& p1 = *node.parents[1];
    if (!p0.requires_grad && !p1.requires_grad) return;
    if (p0.requires_grad) p0.ensure_grad();
    if (p1.requires_grad) p1.ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      const double* a = p0.value.data() + static_cast<std::size_t>(ci) * hw;
      const double* b = p1.value.data() + static_cast<std::size_t>(ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double dj = node.value[j];
        if (dj <= 1e-12) continue;
        const double coef = node.grad[j] * (a[j] - b[j]) / dj;
        if (p0.requires_grad) p0.grad[static_cast<std::size_t>(ci) * hw + j] += coef;
        if (p1.requires_grad) p1.grad[static_cast<std::size_t>(ci) * hw + j] -= coef;
      }
    }
  };
  Tensor values = cosim::detail::make_op_output({h, w}, std::move(d), {f0, f1}, std::move(backprop));
  return DistanceMap{values, DistanceKind::euclidean};
}

// s_k = <f0_k, f1_k> / (max(||f0_k||, eps) * max(||f1_k||, eps)).
inline DistanceMap cosine_similarity_map(const Tensor& f0, const Tensor& f1, double eps = 1e-12) {
  detail::check_feature_pair(f0, f1, "cosine_similarity_map");
  const int c = f0.dim(0), h = f0.dim(1), w = f0.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  std::vector<double> dot(hw, 0.0), n0(hw, 0.0), n1(hw, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* a = f0.data() + static_cast<std::size_t>(ci) * hw;
    const double* b = f1.data() + static_cast<std::size_t>(ci) * hw;
    for (std::size_t j = 0; j < hw; ++j) {
      dot[j] += a[j] * b[j];
      n0[j] += a[j] * a[j];
      n1[j] += b[j] * b[j];
    }
  }
  std::vector<double> s(hw);
  for (std::size_t j = 0; j < hw; ++j) {
    n0[j] = std::max(std::sqrt(n0[j]), eps);
    n1[j] = std::max(std::sqrt(n1[j]), eps);
    s[j] = dot[j] / (n0[j] * n1[j]);
  }

  auto backprop = [c, hw, eps, n0 = std::move(n0), n1 = std::move(n1)](
                      cosim::detail::TensorNode& node) {
    cosim::detail::TensorNode& p0 = *node.parents[0];
    cosim::detail::TensorNode& p1 = *node.parents[1];
    if (!p0.requires_grad && !p1.requires_grad) return;
    if (p0.requires_grad) p0.ensure_grad();
    if (p1.requires_grad) p1.ensure_grad();
    // ds/df0 = f1/(n0 n1) - s f0/n0^2, with the n0 term dropped when the
    // norm sits on the eps clamp (the denominator is locally constant).
    for (int ci = 0; ci < c; ++ci) {
      const double* a = p0.value.data() + static_cast<std::size_t>(ci) * hw;
      const double* b = p1.value.data() + static_cast<std::size_t>(ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double g = node.grad[j];
        if (g == 0.0) continue;
        const double s_j = node.value[j];
        const double inv = 1.0 / (n0[j] * n1[j]);
        if (p0.requires_grad) {
          double d = b[j] * inv;
          if (n0[j] > eps) d -= s_j * a[j] / (n0[j] * n0[j]);
          p0.grad[static_cast<std::size_t>(ci) * hw + j] += g * d;
        }
        if (p1.requires_grad) {
          double d = a[j] * inv;
          if (n1[j] > eps) d -= s_j * b[j] / (n1[j] * n1[j]);
          p1.grad[static_cast<std::size_t>(ci) * hw + j] += g * d;
        }
      }
    }
  };
  Tensor values = cosim::detail::make_op_output({h, w}, std::move(s), {f0, f1}, std::move(backprop));
  return DistanceMap{values, DistanceKind::cosine};
}

// On unit-normalized features the l2 distance spans [0, 2], so halving it
// gives a change confidence in [0, 1].
inline ChangeMap change_map_from_l2(const DistanceMap& d, int source_level = -1) {
  COSIM_CHECK_ARG(d.kind == DistanceKind::euclidean,
                  "change_map_from_l2: distance map is not euclidean");
  for (double v : d.values.values())
    if (v > 2.0 + 1e-6)
      throw invalid_argument(detail::cat(
          "change_map_from_l2: distance ", v, " exceeds the unit-sphere diameter 2; "
          "features were not unit-normalized"));
  return ChangeMap{ops::scale(d.values, 0.5), source_level};
}

// Change confidence from the cosine branch: the regression target for an
// unchanged pixel is exp(-|w s + b|), so change confidence is its
// complement 1 - exp(-|w s + b|).
inline ChangeMap change_map_from_cos(const DistanceMap& s, const Tensor& w, const Tensor& b,
                                     int source_level = -1) {
  COSIM_CHECK_ARG(s.kind == DistanceKind::cosine,
                  "change_map_from_cos: distance map is not cosine");
  COSIM_CHECK_ARG(w.numel() == 1 && b.numel() == 1,
                  "change_map_from_cos: w and b must be scalars");
  const std::size_t n = s.values.values().size();
  const double wv = w.item(), bv = b.item();
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = wv * s.values.data()[j] + bv;
    out[j] = 1.0 - std::exp(-std::abs(t));
  }
  auto backprop = [n](cosim::detail::TensorNode& node) {
    cosim::detail::TensorNode& ps = *node.parents[0];
    cosim::detail::TensorNode& pw = *node.parents[1];
    cosim::detail::TensorNode& pb = *node.parents[2];
    const double wv = pw.value[0], bv = pb.value[0];
    if (ps.requires_grad) ps.ensure_grad();
    if (pw.requires_grad) pw.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::size_t j = 0; j < n; ++j) {
      const double g = node.grad[j];
      if (g == 0.0) continue;
      const double t = wv * ps.value[j] + bv;
      const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
      const double dv_dt = sign * std::exp(-std::abs(t));  // d(1 - e^{-|t|})/dt
      if (ps.requires_grad) ps.grad[j] += g * dv_dt * wv;
      if (pw.requires_grad) pw.grad[0] += g * dv_dt * ps.value[j];
      if (pb.requires_grad) pb.grad[0] += g * dv_dt;
    }
  };
  Tensor values = cosim::detail::make_op_output(s.values.shape(), std::move(out), {s.values, w, b},
                                                std::move(backprop));
  return ChangeMap{values, source_level};
}

inline ChangeMap upsample_change_map(const ChangeMap& cm, int h, int w) {
  // Route through the CxHxW op with a single channel.
  Tensor as3d = ops::reshape(cm.values, {1, cm.height(), cm.width()});
  Tensor up = ops::bilinear_upsample(as3d, h, w);
  return ChangeMap{ops::reshape(up, {h, w}), cm.source_level};
}

// Elementwise arithmetic mean of full-resolution change maps.
inline ChangeMap fuse_predictions(const std::vector<ChangeMap>& maps) {
  COSIM_CHECK_ARG(!maps.empty(), "fuse_predictions: no maps to fuse");
  const Shape& shape = maps[0].values.shape();
  for (const auto& m : maps)
    COSIM_CHECK_ARG(m.values.shape() == shape, "fuse_predictions: resolution mismatch, ",
                    shape_str(m.values.shape()), " vs ", shape_str(shape));
  Tensor acc = maps[0].values;
  for (std::size_t i = 1; i < maps.size(); ++i) acc = ops::add(acc, maps[i].values);
  return ChangeMap{ops::scale(acc, 1.0 / static_cast<double>(maps.size())), -1};
}

}  // namespace cosim
