#pragma once

#include <cmath>
#include <vector>

#include "cosim/metric.hpp"
#include "cosim/ops.hpp"
#include "cosim/tensor.hpp"

namespace cosim {

enum class LossKind { l2_contrastive, cosine, tcl };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::l2_contrastive: return "l2";
    case LossKind::cosine: return "cos";
    case LossKind::tcl: return "tcl";
  }
  return "?";
}

struct LossConfig {
  double margin = 1.0;                    // target separation for changed pairs
  double tau = 0.0;                       // tolerance for unchanged pairs (TCL)
  std::vector<double> betas = {1.0, 1.0, 1.0};  // layer-balancing weights
  double lambda = 3.0;                    // multi-task feature-loss weight
  LossKind kind = LossKind::l2_contrastive;
  double cos_w_init = 1.0;                // initial cosine scale
  double cos_b_init = -1.0;               // initial cosine shift
  bool inverse_frequency_weights = false; // optional class rebalancing, off by default

  void validate() const {
    COSIM_CHECK_ARG(margin > 0.0, "loss config: margin must be positive, got ", margin);
    COSIM_CHECK_ARG(tau >= 0.0 && tau < margin, "loss config: tau must satisfy 0 <= tau < margin, got tau=",
                    tau, " margin=", margin);
    COSIM_CHECK_ARG(!betas.empty(), "loss config: betas must not be empty");
    double total = 0.0;
    for (double b : betas) {
      COSIM_CHECK_ARG(b >= 0.0, "loss config: betas must be non-negative, got ", b);
      total += b;
    }
    COSIM_CHECK_ARG(total > 0.0, "loss config: at least one beta must be positive");
    COSIM_CHECK_ARG(lambda >= 0.0, "loss config: lambda must be non-negative, got ", lambda);
  }
};

namespace detail {

inline void check_mask(const ChangeMask& mask, int h, int w, const char* who) {
  COSIM_CHECK_ARG(mask.height == h && mask.width == w, who, ": mask resolution ", mask.height,
                  "x", mask.width, " does not match features ", h, "x", w);
  for (auto v : mask.values)
    COSIM_CHECK_ARG(v == 0 || v == 1, who, ": mask is not binary, contains value ",
                    static_cast<int>(v));
}

// Shared core of the contrastive-family losses. Per pixel, with y = 1 for an
// unchanged pair and D the channel-space l2 distance:
//   unchanged:  y * max(0, D - tau)        (tau = 0 gives the plain y * D)
//   changed:    (1 - y) * max(0, m - D)
// reduced by a (optionally weighted) mean over pixels.
inline Tensor contrastive_family(const Tensor& f0, const Tensor& f1, const ChangeMask& mask,
                                 double margin, double tau, bool clamp_unchanged,
                                 const std::vector<double>* pixel_weights, const char* who) {
  cosim::detail::check_feature_pair(f0, f1, who);
  const int c = f0.dim(0), h = f0.dim(1), w = f0.dim(2);
  check_mask(mask, h, w, who);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  if (pixel_weights)
    COSIM_CHECK_ARG(pixel_weights->size() == hw, who, ": pixel weight count mismatch");

  std::vector<double> dist(hw, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* a = f0.data() + static_cast<std::size_t>(ci) * hw;
    const double* b = f1.data() + static_cast<std::size_t>(ci) * hw;
    for (std::size_t j = 0; j < hw; ++j) {
      const double diff = a[j] - b[j];
      dist[j] += diff * diff;
    }
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < hw; ++j) {
    dist[j] = std::sqrt(dist[j]);
    const bool unchanged = mask.values[j] == 0;
    const double wj = pixel_weights ? (*pixel_weights)[j] : 1.0;
    double term;
    if (unchanged) {
      term = clamp_unchanged ? std::max(0.0, dist[j] - tau) : dist[j];
    } else {
      term = std::max(0.0, margin - dist[j]);
    }
    loss += wj * term;
  }
  loss /= static_cast<double>(hw);

  std::vector<std::uint8_t> mask_copy = mask.values;
  std::vector<double> weights_copy = pixel_weights ? *pixel_weights : std::vector<double>{};
  auto backprop = [c, hw, margin, tau, clamp_unchanged, dist = std::move(dist),
                   mask_copy = std::move(mask_copy),
                   weights_copy = std::move(weights_copy)](cosim::detail::TensorNode& node) {
    cosim::detail::TensorNode& p0 = *node.parents[0];
    cosim::detail::TensorNode& p1 = *node.parents[1];
    if (!p0.requires_grad && !p1.requires_grad) return;
    if (p0.requires_grad) p0.ensure_grad();
    if (p1.requires_grad) p1.ensure_grad();
    const double g = node.grad[0] / static_cast<double>(hw);
    // dterm/dD, then dD/df = (f0 - f1)/D.
    std::vector<double> coef(hw, 0.0);
    for (std::size_t j = 0; j < hw; ++j) {
      const bool unchanged = mask_copy[j] == 0;
      const double wj = weights_copy.empty() ? 1.0 : weights_copy[j];
      double dterm;
      if (unchanged) {
        dterm = (!clamp_unchanged || dist[j] > tau) ? 1.0 : 0.0;
      } else {
        dterm = dist[j] < margin ? -1.0 : 0.0;
      }
      if (dist[j] > 1e-12) coef[j] = g * wj * dterm / dist[j];
    }
    for (int ci = 0; ci < c; ++ci) {
      const double* a = p0.value.data() + static_cast<std::size_t>(ci) * hw;
      const double* b = p1.value.data() + static_cast<std::size_t>(ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (coef[j] == 0.0) continue;
        const double d = coef[j] * (a[j] - b[j]);
        if (p0.requires_grad) p0.grad[static_cast<std::size_t>(ci) * hw + j] += d;
        if (p1.requires_grad) p1.grad[static_cast<std::size_t>(ci) * hw + j] -= d;
      }
    }
  };
  return cosim::detail::make_op_output({1}, {loss}, {f0, f1}, std::move(backprop));
}

}  // namespace detail

// Optional inverse-frequency pixel weights: each class is scaled so both
// contribute equally to the mean regardless of how rare changed pixels are.
inline std::vector<double> inverse_frequency_weights(const ChangeMask& mask) {
  const double n = static_cast<double>(mask.size());
  const double changed = static_cast<double>(mask.changed_count());
  const double unchanged = n - changed;
  std::vector<double> w(mask.size(), 1.0);
  if (changed == 0.0 || unchanged == 0.0) return w;  // single class, no rebalancing
  const double wc = n / (2.0 * changed);
  const double wu = n / (2.0 * unchanged);
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = mask.values[j] ? wc : wu;
  return w;
}

// Contrastive loss: mean over pixels of y*D + (1-y)*max(0, m - D),
// with y = 1 for an unchanged pair.
inline Tensor contrastive_loss(const Tensor& f0, const Tensor& f1, const ChangeMask& mask,
                               double margin,
                               const std::vector<double>* pixel_weights = nullptr) {
  COSIM_CHECK_ARG(margin > 0.0, "contrastive_loss: margin must be positive, got ", margin);
  return detail::contrastive_family(f0, f1, mask, margin, 0.0, /*clamp_unchanged=*/false,
                                    pixel_weights, "contrastive_loss");
}

// Thresholded contrastive loss: the unchanged branch only penalizes distance
// above the tolerance tau, so heavily unregistered but unchanged pairs are
// not forced all the way to zero. Reduces exactly to contrastive_loss at
// tau = 0 (max(0, D) == D since D >= 0).
inline Tensor thresholded_contrastive_loss(const Tensor& f0, const Tensor& f1,
                                           const ChangeMask& mask, double margin, double tau,
                                           const std::vector<double>* pixel_weights = nullptr) {
  COSIM_CHECK_ARG(margin > 0.0, "thresholded_contrastive_loss: margin must be positive");
  COSIM_CHECK_ARG(tau >= 0.0 && tau < margin,
                  "thresholded_contrastive_loss: tau must satisfy 0 <= tau < margin, got tau=",
                  tau, " margin=", margin);
  return detail::contrastive_family(f0, f1, mask, margin, tau, /*clamp_unchanged=*/true,
                                    pixel_weights, "thresholded_contrastive_loss");
}

// Regression tail of the cosine loss: sum_k (y_k - exp(-|w s_k + b|))^2.
// Kept as a sum, not a mean.
inline Tensor cosine_regression_loss(const DistanceMap& sim, const ChangeMask& mask,
                                     const Tensor& w, const Tensor& b) {
  COSIM_CHECK_ARG(sim.kind == DistanceKind::cosine,
                  "cosine_regression_loss: similarity map is not cosine");
  const int h = sim.values.dim(0), wd = sim.values.dim(1);
  detail::check_mask(mask, h, wd, "cosine_regression_loss");
  COSIM_CHECK_ARG(w.numel() == 1 && b.numel() == 1,
                  "cosine_regression_loss: w and b must be scalars");
  const std::size_t n = sim.values.values().size();
  const double wv = w.item(), bv = b.item();
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double y = mask.values[j] ? 0.0 : 1.0;
    const double t = wv * sim.values.data()[j] + bv;
    const double e = std::exp(-std::abs(t));
    const double r = y - e;
    loss += r * r;
  }
  std::vector<std::uint8_t> mask_copy = mask.values;
  auto backprop = [n, mask_copy = std::move(mask_copy)](cosim::detail::TensorNode& node) {
    cosim::detail::TensorNode& ps = *node.parents[0];
    cosim::detail::TensorNode& pw = *node.parents[1];
    cosim::detail::TensorNode& pb = *node.parents[2];
    if (!ps.requires_grad && !pw.requires_grad && !pb.requires_grad) return;
    if (ps.requires_grad) ps.ensure_grad();
    if (pw.requires_grad) pw.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    const double g = node.grad[0];
    const double wv = pw.value[0], bv = pb.value[0];
    for (std::size_t j = 0; j < n; ++j) {
      const double y = mask_copy[j] ? 0.0 : 1.0;
      const double t = wv * ps.value[j] + bv;
      const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
      const double e = std::exp(-std::abs(t));
      // d(y-e)^2/dt = -2 (y-e) de/dt, de/dt = -sign(t) e
      const double dt = g * 2.0 * (y - e) * sign * e;
      if (ps.requires_grad) ps.grad[j] += dt * wv;
      if (pw.requires_grad) pw.grad[0] += dt * ps.value[j];
      if (pb.requires_grad) pb.grad[0] += dt;
    }
  };
  Tensor out = cosim::detail::make_op_output({1}, {loss}, {sim.values, w, b}, std::move(backprop));
  return out;
}

// Cosine loss over raw feature pairs (cosine similarity plus the learned
// scale/shift regression above).
inline Tensor cosine_loss(const Tensor& f0, const Tensor& f1, const ChangeMask& mask,
                          const Tensor& w, const Tensor& b) {
  return cosine_regression_loss(cosine_similarity_map(f0, f1), mask, w, b);
}

// Two-class pixel cross-entropy; class 1 is "changed". Mean over pixels of
// -log softmax at the true class.
inline Tensor pixel_cross_entropy(const Tensor& logits, const ChangeMask& mask) {
  COSIM_CHECK_ARG(logits.ndim() == 3, "pixel_cross_entropy: logits must be 2xHxW, shape is ",
                  shape_str(logits.shape()));
  COSIM_CHECK_ARG(logits.dim(0) == 2, "pixel_cross_entropy: class count must be 2, got ",
                  logits.dim(0));
  const int h = logits.dim(1), w = logits.dim(2);
  detail::check_mask(mask, h, w, "pixel_cross_entropy");
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const double* z0 = logits.data();
  const double* z1 = logits.data() + hw;
  double loss = 0.0;
  for (std::size_t j = 0; j < hw; ++j) {
    const double m = std::max(z0[j], z1[j]);
    const double lse = m + std::log(std::exp(z0[j] - m) + std::exp(z1[j] - m));
    const double zt = mask.values[j] ? z1[j] : z0[j];
    loss += lse - zt;
  }
  loss /= static_cast<double>(hw);
  std::vector<std::uint8_t> mask_copy = mask.values;
  auto backprop = [hw, mask_copy = std::move(mask_copy)](cosim::detail::TensorNode& node) {
    cosim::detail::TensorNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = node.grad[0] / static_cast<double>(hw);
    const double* z0 = p.value.data();
    const double* z1 = p.value.data() + hw;
    for (std::size_t j = 0; j < hw; ++j) {
      const double m = std::max(z0[j], z1[j]);
      const double e0 = std::exp(z0[j] - m), e1 = std::exp(z1[j] - m);
      const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
      const double t1 = mask_copy[j] ? 1.0 : 0.0;
      p.grad[j] += g * (p0 - (1.0 - t1));
      p.grad[hw + j] += g * (p1 - t1);
    }
  };
  return cosim::detail::make_op_output({1}, {loss}, {logits}, std::move(backprop));
}

// One side-output layer's inputs for the multilayer loss.
struct LayerLossInput {
  Tensor f0;
  Tensor f1;
  ChangeMask mask;  // already at this layer's resolution
};

struct LayerLossBreakdown {
  std::vector<Tensor> layer_losses;
  Tensor total;
};

// Multilayer side-output supervision: loss_h per layer, combined as
// total = sum_h beta_h * loss_h.
inline LayerLossBreakdown mlso_loss(const std::vector<LayerLossInput>& layers,
                                    const LossConfig& cfg,
                                    const std::vector<Tensor>* cos_w = nullptr,
                                    const std::vector<Tensor>* cos_b = nullptr) {
  cfg.validate();
  COSIM_CHECK_ARG(cfg.betas.size() == layers.size(), "mlso_loss: ", cfg.betas.size(),
                  " betas for ", layers.size(), " layers");
  if (cfg.kind == LossKind::cosine)
    COSIM_CHECK_ARG(cos_w && cos_b && cos_w->size() == layers.size() &&
                        cos_b->size() == layers.size(),
                    "mlso_loss: cosine loss needs per-layer w and b parameters");

  LayerLossBreakdown out;
  out.layer_losses.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& L = layers[i];
    std::vector<double> weights;
    const std::vector<double>* wp = nullptr;
    if (cfg.inverse_frequency_weights && cfg.kind != LossKind::cosine) {
      weights = inverse_frequency_weights(L.mask);
      wp = &weights;
    }
    Tensor loss_h;
    switch (cfg.kind) {
      case LossKind::l2_contrastive:
        loss_h = contrastive_loss(L.f0, L.f1, L.mask, cfg.margin, wp);
        break;
      case LossKind::tcl:
        loss_h = thresholded_contrastive_loss(L.f0, L.f1, L.mask, cfg.margin, cfg.tau, wp);
        break;
      case LossKind::cosine:
        loss_h = cosine_loss(L.f0, L.f1, L.mask, (*cos_w)[i], (*cos_b)[i]);
        break;
    }
    out.layer_losses.push_back(loss_h);
  }
  Tensor total = ops::scale(out.layer_losses[0], cfg.betas[0]);
  for (std::size_t i = 1; i < layers.size(); ++i)
    total = ops::add(total, ops::scale(out.layer_losses[i], cfg.betas[i]));
  out.total = total;
  return out;
}

// Eq-7-style multi-task combination: class_loss + lambda * feat_loss.
inline Tensor multitask_loss(const Tensor& class_loss, const Tensor& feat_loss, double lambda) {
  COSIM_CHECK_ARG(class_loss.numel() == 1 && feat_loss.numel() == 1,
                  "multitask_loss: inputs must be scalars");
  COSIM_CHECK_ARG(std::isfinite(class_loss.item()) && std::isfinite(feat_loss.item()),
                  "multitask_loss: inputs must be finite");
  COSIM_CHECK_ARG(lambda >= 0.0, "multitask_loss: lambda must be non-negative, got ", lambda);
  return ops::add(class_loss, ops::scale(feat_loss, lambda));
}

}  // namespace cosim
