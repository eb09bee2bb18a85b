#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cosim/checkpoint.hpp"
#include "cosim/data.hpp"
#include "cosim/encoder.hpp"
#include "cosim/eval.hpp"
#include "cosim/losses.hpp"
#include "cosim/metric.hpp"
#include "cosim/optim.hpp"

// Training with multilayer side-output supervision, multi-layer inference
// with average fusion, per-epoch contrast tracking, the multi-task
// (classification + metric) mode, and feature export.

namespace cosim {

enum class TrainMode { metric, fcn_metrics };

inline const char* train_mode_name(TrainMode m) {
  return m == TrainMode::metric ? "metric" : "fcn";
}

// Encoder plus the auxiliary learnable pieces: per-layer cosine scale/shift
// and, in fcn mode, a two-class 1x1-convolution head over concatenated pair
// features at the deepest level.
struct Model {
  Encoder encoder;
  std::vector<Parameter> cos_w;  // one scalar per level
  std::vector<Parameter> cos_b;
  std::vector<Parameter> head;   // [kernel, bias] in fcn mode, else empty
  LossKind loss_kind = LossKind::l2_contrastive;
  TrainMode mode = TrainMode::metric;

  static Model init(const EncoderConfig& enc_cfg, const LossConfig& loss_cfg, TrainMode mode,
                    std::uint64_t seed) {
    loss_cfg.validate();
    Model m;
    EncoderConfig ec = enc_cfg;
    ec.seed = seed;
    m.encoder = Encoder::init(ec);
    m.loss_kind = loss_cfg.kind;
    m.mode = mode;
    for (int l = 0; l < 3; ++l) {
      m.cos_w.emplace_back("cos.w." + std::to_string(l + 1),
                           Tensor::scalar(loss_cfg.cos_w_init), Parameter::Group::head);
      m.cos_b.emplace_back("cos.b." + std::to_string(l + 1),
                           Tensor::scalar(loss_cfg.cos_b_init), Parameter::Group::head);
    }
    if (mode == TrainMode::fcn_metrics) {
      const int c3 = ec.stage_channels[2];
      Rng rng(derive_seed(seed, 0x4eadULL));
      const double bound = std::sqrt(3.0 / static_cast<double>(2 * c3));
      Tensor kernel = Tensor::zeros({2, 2 * c3, 1, 1});
      for (auto& v : kernel.values()) v = rng.uniform(-bound, bound);
      m.head.emplace_back("head.kernel", kernel, Parameter::Group::head);
      m.head.emplace_back("head.bias", Tensor::zeros({2}), Parameter::Group::head);
    }
    return m;
  }

  // Parameters the optimizer updates; the cosine scale/shift only train when
  // the cosine loss actually uses them.
  std::vector<Parameter*> trainable() {
    std::vector<Parameter*> out;
    for (auto& p : encoder.parameters()) out.push_back(&p);
    if (loss_kind == LossKind::cosine) {
      for (auto& p : cos_w) out.push_back(&p);
      for (auto& p : cos_b) out.push_back(&p);
    }
    for (auto& p : head) out.push_back(&p);
    return out;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    const EncoderConfig& ec = encoder.config();
    ckpt.meta["mode"] = train_mode_name(mode);
    ckpt.meta["loss"] = loss_kind_name(loss_kind);
    ckpt.meta["kernel_size"] = std::to_string(ec.kernel_size);
    ckpt.meta["pool_stride"] = std::to_string(ec.pool_stride);
    ckpt.meta["in_channels"] = std::to_string(ec.in_channels);
    for (const auto& p : encoder.parameters()) ckpt.tensors.emplace(p.name, p.value);
    for (const auto& p : cos_w) ckpt.tensors.emplace(p.name, p.value);
    for (const auto& p : cos_b) ckpt.tensors.emplace(p.name, p.value);
    for (const auto& p : head) ckpt.tensors.emplace(p.name, p.value);
    return ckpt;
  }

  static Model from_checkpoint(const Checkpoint& ckpt) {
    Model m;
    const std::string loss = ckpt.meta_or("loss", "l2");
    m.loss_kind = loss == "cos" ? LossKind::cosine
                                : (loss == "tcl" ? LossKind::tcl : LossKind::l2_contrastive);
    m.mode = ckpt.meta_or("mode", "metric") == "fcn" ? TrainMode::fcn_metrics : TrainMode::metric;

    EncoderConfig ec;
    ec.kernel_size = std::stoi(ckpt.meta_or("kernel_size", "3"));
    ec.pool_stride = std::stoi(ckpt.meta_or("pool_stride", "2"));
    ec.in_channels = std::stoi(ckpt.meta_or("in_channels", "3"));
    for (int l = 0; l < 3; ++l) {
      const Tensor& k = ckpt.require("stage" + std::to_string(l + 1) + ".kernel");
      ec.stage_channels[static_cast<std::size_t>(l)] = k.dim(0);
    }
    m.encoder = Encoder::init(ec);
    for (auto& p : m.encoder.parameters()) {
      const Tensor& stored = ckpt.require(p.name);
      COSIM_CHECK_DATA(stored.shape() == p.value.shape(), "checkpoint: tensor '", p.name,
                       "' has shape ", shape_str(stored.shape()), ", expected ",
                       shape_str(p.value.shape()));
      p.value.values() = stored.values();
    }
    for (int l = 0; l < 3; ++l) {
      const std::string wi = "cos.w." + std::to_string(l + 1);
      const std::string bi = "cos.b." + std::to_string(l + 1);
      m.cos_w.emplace_back(wi, ckpt.has(wi) ? ckpt.require(wi).clone_detached() : Tensor::scalar(1.0),
                           Parameter::Group::head);
      m.cos_b.emplace_back(bi, ckpt.has(bi) ? ckpt.require(bi).clone_detached() : Tensor::scalar(-1.0),
                           Parameter::Group::head);
    }
    if (m.mode == TrainMode::fcn_metrics) {
      m.head.emplace_back("head.kernel", ckpt.require("head.kernel").clone_detached(),
                          Parameter::Group::head);
      m.head.emplace_back("head.bias", ckpt.require("head.bias").clone_detached(),
                          Parameter::Group::head);
    }
    return m;
  }
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  double lr_backbone = 1e-2;  // desk-scale default; the published fine-tuning
  double lr_head = 1e-2;      // rates 1e-7 / 1e-8 are available as a preset
  double momentum = 0.90;
  double weight_decay = 5e-5;
  LossConfig loss;
  TrainMode mode = TrainMode::metric;
  bool pure_cross_entropy = false;  // fcn mode without the metric term (reference trainer)
  std::uint64_t seed = 0;
  int eval_thresholds = 21;

  void validate() const {
    COSIM_CHECK_ARG(epochs >= 1, "train config: epochs must be >= 1, got ", epochs);
    COSIM_CHECK_ARG(batch_size >= 1, "train config: batch size must be >= 1");
    COSIM_CHECK_ARG(lr_backbone >= 0.0 && lr_head >= 0.0,
                    "train config: learning rates must be non-negative");
    COSIM_CHECK_ARG(momentum >= 0.0 && momentum < 1.0, "train config: momentum must be in [0,1)");
    COSIM_CHECK_ARG(weight_decay >= 0.0, "train config: weight decay must be non-negative");
    COSIM_CHECK_ARG(eval_thresholds >= 2, "train config: eval thresholds must be >= 2");
    loss.validate();
  }

  static constexpr double kPaperLrBackbone = 1e-7;
  static constexpr double kPaperLrHead = 1e-8;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double total_loss = 0.0;
  std::array<double, 3> layer_losses = {0.0, 0.0, 0.0};
  double holdout_f = 0.0;
  // Mean per-item contrast of the training-set change maps at each level,
  // for both predefined metrics.
  std::array<double, 3> rms_l2 = {0.0, 0.0, 0.0};
  std::array<double, 3> rms_cos = {0.0, 0.0, 0.0};
  std::array<double, 3> michelson_l2 = {0.0, 0.0, 0.0};
  std::array<double, 3> michelson_cos = {0.0, 0.0, 0.0};
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
};

struct InferenceConfig {
  std::array<double, 3> thresholds = {0.5, 0.5, 0.5};  // per-layer binarization thresholds
  int output_height = 0;  // 0 = input resolution
  int output_width = 0;

  void validate() const {
    for (double t : thresholds)
      COSIM_CHECK_ARG(t >= 0.0 && t <= 1.0, "inference config: thresholds must be in [0,1], got ",
                      t);
    COSIM_CHECK_ARG((output_height == 0) == (output_width == 0),
                    "inference config: set both output dimensions or neither");
    if (output_height != 0)
      COSIM_CHECK_ARG(output_height % 8 == 0 && output_width % 8 == 0,
                      "inference config: output resolution ", output_height, "x", output_width,
                      " must be a multiple of 8");
  }
};

struct InferenceResult {
  std::vector<ChangeMap> layer_maps;      // upsampled to output resolution
  ChangeMap fused;                        // average of the layer maps
  std::optional<ChangeMap> head_map;      // classifier probability map (fcn mode)
  ChangeMask prediction;
};

namespace detail {

// Change map for one level under the model's metric; graph-free when called
// under NoGradGuard.
inline ChangeMap level_change_map(const Model& m, const Tensor& f0, const Tensor& f1, int level,
                                  DistanceKind kind) {
  if (kind == DistanceKind::euclidean)
    return change_map_from_l2(l2_distance_map(f0, f1), level);
  return change_map_from_cos(cosine_similarity_map(f0, f1),
                             m.cos_w[static_cast<std::size_t>(level)].value,
                             m.cos_b[static_cast<std::size_t>(level)].value, level);
}

inline Tensor head_logits(const Model& m, const Tensor& f0, const Tensor& f1) {
  const Tensor both = ops::concat_channels(f0, f1);
  return ops::conv2d(both, m.head[0].value, m.head[1].value, /*stride=*/1, /*pad=*/0);
}

// P(class = changed) per pixel from two-class logits.
inline ChangeMap head_probability_map(const Tensor& logits) {
  const int h = logits.dim(1), w = logits.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> prob(hw);
  const double* z0 = logits.data();
  const double* z1 = logits.data() + hw;
  for (std::size_t j = 0; j < hw; ++j) {
    const double mx = std::max(z0[j], z1[j]);
    const double e0 = std::exp(z0[j] - mx), e1 = std::exp(z1[j] - mx);
    prob[j] = e1 / (e0 + e1);
  }
  return ChangeMap{Tensor::from_data({h, w}, std::move(prob)), -1};
}

}  // namespace detail

inline InferenceResult infer(const Model& model, const ImagePair& pair,
                             const InferenceConfig& icfg) {
  icfg.validate();
  NoGradGuard frozen;
  const int out_h = icfg.output_height > 0 ? icfg.output_height : pair.t0.dim(1);
  const int out_w = icfg.output_width > 0 ? icfg.output_width : pair.t0.dim(2);

  const auto [pyr0, pyr1] = model.encoder.encode_pair(pair.t0, pair.t1);
  const DistanceKind kind =
      model.loss_kind == LossKind::cosine ? DistanceKind::cosine : DistanceKind::euclidean;

  InferenceResult result;
  for (int l = 0; l < 3; ++l) {
    ChangeMap cm = detail::level_change_map(model, pyr0.levels[static_cast<std::size_t>(l)],
                                            pyr1.levels[static_cast<std::size_t>(l)], l, kind);
    result.layer_maps.push_back(upsample_change_map(cm, out_h, out_w));
  }
  result.fused = fuse_predictions(result.layer_maps);

  if (model.mode == TrainMode::fcn_metrics && !model.head.empty()) {
    const Tensor logits = detail::head_logits(model, pyr0.levels[2], pyr1.levels[2]);
    result.head_map = upsample_change_map(detail::head_probability_map(logits), out_h, out_w);
  }

  const double theta =
      (icfg.thresholds[0] + icfg.thresholds[1] + icfg.thresholds[2]) / 3.0;
  result.prediction = binarize(result.head_map ? *result.head_map : result.fused, theta);
  return result;
}

// Pooled evaluation of a model over the given dataset items. The change map
// fed to the sweep is the classifier map in fcn mode, the fused metric map
// otherwise.
inline EvalReport evaluate_model(const Model& model, const Dataset& ds,
                                 const std::vector<int>& indices, int n_thresholds) {
  COSIM_CHECK_ARG(!indices.empty(), "evaluate_model: no items to evaluate");
  std::vector<ChangeMap> maps;
  std::vector<ChangeMask> gts;
  maps.reserve(indices.size());
  gts.reserve(indices.size());
  InferenceConfig icfg;
  for (int idx : indices) {
    const ScenePair& item = ds.items[static_cast<std::size_t>(idx)];
    InferenceResult r = infer(model, item.pair, icfg);
    maps.push_back(r.head_map ? *r.head_map : r.fused);
    gts.push_back(item.mask);
  }
  return make_eval_report(maps, gts, n_thresholds);
}

// Trains in place and reports the per-epoch history. Deterministic given the
// seed: item order comes from a seeded per-epoch shuffle and every reduction
// runs in a fixed order.
inline RunHistory train(Model& model, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  COSIM_CHECK_ARG(!dataset.train_indices.empty(), "train: dataset has no training items");
  COSIM_CHECK_ARG(cfg.mode == model.mode, "train: config mode does not match the model");
  COSIM_CHECK_ARG(!cfg.pure_cross_entropy || cfg.mode == TrainMode::fcn_metrics,
                  "train: pure_cross_entropy requires fcn mode");
  COSIM_CHECK_ARG(cfg.loss.kind == model.loss_kind, "train: loss kind does not match the model");
  COSIM_CHECK_ARG(cfg.loss.betas.size() == 3, "train: expected one beta per pyramid level");

  const LearningRates lr{cfg.lr_backbone, cfg.lr_head};
  std::vector<Parameter*> params = model.trainable();

  // Per-item masks at each level resolution, computed once.
  std::vector<std::array<ChangeMask, 3>> level_masks(dataset.items.size());
  auto level_mask = [&](int item_idx, int level) -> const ChangeMask& {
    auto& slot = level_masks[static_cast<std::size_t>(item_idx)][static_cast<std::size_t>(level)];
    if (slot.size() == 0) {
      const ScenePair& item = dataset.items[static_cast<std::size_t>(item_idx)];
      const int f = model.encoder.config().pool_stride;
      int h = item.mask.height, w = item.mask.width;
      for (int l = 0; l <= level; ++l) {
        h /= f;
        w /= f;
      }
      slot = resize_mask_nearest(item.mask, h, w);
    }
    return slot;
  };

  RunHistory history;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = dataset.train_indices;
    Rng shuffle_rng(derive_seed(cfg.seed, 0xe90cULL + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::array<double, 3> layer_sum = {0.0, 0.0, 0.0};
    std::array<double, 3> rms_l2_sum = {}, rms_cos_sum = {}, mich_l2_sum = {}, mich_cos_sum = {};
    std::size_t n_items = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tensor batch_loss;
      for (std::size_t bi = start; bi < stop; ++bi) {
        const int idx = order[bi];
        const ScenePair& item = dataset.items[static_cast<std::size_t>(idx)];
        const auto [pyr0, pyr1] = model.encoder.encode_pair(item.pair.t0, item.pair.t1);

        std::vector<LayerLossInput> layers;
        layers.reserve(3);
        for (int l = 0; l < 3; ++l)
          layers.push_back(LayerLossInput{pyr0.levels[static_cast<std::size_t>(l)],
                                          pyr1.levels[static_cast<std::size_t>(l)],
                                          level_mask(idx, l)});

        Tensor item_loss;
        LayerLossBreakdown breakdown;
        if (!cfg.pure_cross_entropy) {
          std::vector<Tensor> ws, bs;
          for (int l = 0; l < 3; ++l) {
            ws.push_back(model.cos_w[static_cast<std::size_t>(l)].value);
            bs.push_back(model.cos_b[static_cast<std::size_t>(l)].value);
          }
          breakdown = mlso_loss(layers, cfg.loss, &ws, &bs);
          item_loss = breakdown.total;
        }
        if (cfg.mode == TrainMode::fcn_metrics) {
          const Tensor logits = detail::head_logits(model, pyr0.levels[2], pyr1.levels[2]);
          const Tensor ce = pixel_cross_entropy(logits, level_mask(idx, 2));
          item_loss = cfg.pure_cross_entropy ? ce : multitask_loss(ce, breakdown.total, cfg.loss.lambda);
        }
        if (!std::isfinite(item_loss.item()))
          throw numeric_error(detail::cat(
              "train: loss diverged (non-finite) at epoch ", epoch, ", batch ",
              start / static_cast<std::size_t>(cfg.batch_size), ", item '",
              item.pair.identifier, "'"));

        // Contrast bookkeeping on the current maps, outside the tape.
        {
          NoGradGuard frozen;
          for (int l = 0; l < 3; ++l) {
            const Tensor& f0 = pyr0.levels[static_cast<std::size_t>(l)];
            const Tensor& f1 = pyr1.levels[static_cast<std::size_t>(l)];
            const ChangeMap m_l2 = change_map_from_l2(l2_distance_map(f0, f1), l);
            const ChangeMap m_cos = change_map_from_cos(
                cosine_similarity_map(f0, f1), model.cos_w[static_cast<std::size_t>(l)].value,
                model.cos_b[static_cast<std::size_t>(l)].value, l);
            rms_l2_sum[static_cast<std::size_t>(l)] += rms_contrast(m_l2.values);
            rms_cos_sum[static_cast<std::size_t>(l)] += rms_contrast(m_cos.values);
            mich_l2_sum[static_cast<std::size_t>(l)] += michelson_contrast(m_l2.values);
            mich_cos_sum[static_cast<std::size_t>(l)] += michelson_contrast(m_cos.values);
          }
        }

        loss_sum += item_loss.item();
        if (!cfg.pure_cross_entropy)
          for (int l = 0; l < 3; ++l)
            layer_sum[static_cast<std::size_t>(l)] +=
                breakdown.layer_losses[static_cast<std::size_t>(l)].item();
        ++n_items;

        batch_loss = batch_loss.defined() ? ops::add(batch_loss, item_loss) : item_loss;
      }
      batch_loss = ops::scale(batch_loss, 1.0 / static_cast<double>(stop - start));
      if (!std::isfinite(batch_loss.item()))
        throw numeric_error(detail::cat("train: loss diverged (non-finite) at epoch ", epoch,
                                        ", batch ", start / static_cast<std::size_t>(cfg.batch_size)));
      backward(batch_loss);
      sgd_step(params, lr, cfg.momentum, cfg.weight_decay);
      zero_grads(params);
    }

    rec.total_loss = loss_sum / static_cast<double>(n_items);
    for (int l = 0; l < 3; ++l) {
      rec.layer_losses[static_cast<std::size_t>(l)] =
          layer_sum[static_cast<std::size_t>(l)] / static_cast<double>(n_items);
      rec.rms_l2[static_cast<std::size_t>(l)] =
          rms_l2_sum[static_cast<std::size_t>(l)] / static_cast<double>(n_items);
      rec.rms_cos[static_cast<std::size_t>(l)] =
          rms_cos_sum[static_cast<std::size_t>(l)] / static_cast<double>(n_items);
      rec.michelson_l2[static_cast<std::size_t>(l)] =
          mich_l2_sum[static_cast<std::size_t>(l)] / static_cast<double>(n_items);
      rec.michelson_cos[static_cast<std::size_t>(l)] =
          mich_cos_sum[static_cast<std::size_t>(l)] / static_cast<double>(n_items);
    }
    if (!dataset.test_indices.empty())
      rec.holdout_f =
          evaluate_model(model, dataset, dataset.test_indices, cfg.eval_thresholds).f_score;
    history.epochs.push_back(rec);
  }
  return history;
}

// ----- history / report serialization ---------------------------------------

namespace detail {
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string history_to_csv(const RunHistory& h) {
  std::string out =
      "epoch,total_loss,loss_layer1,loss_layer2,loss_layer3,holdout_f,"
      "rms_l2_1,rms_l2_2,rms_l2_3,rms_cos_1,rms_cos_2,rms_cos_3,"
      "michelson_l2_1,michelson_l2_2,michelson_l2_3,"
      "michelson_cos_1,michelson_cos_2,michelson_cos_3\n";
  for (const EpochRecord& r : h.epochs) {
    out += std::to_string(r.epoch);
    out += "," + detail::g17(r.total_loss);
    for (double v : r.layer_losses) out += "," + detail::g17(v);
    out += "," + detail::g17(r.holdout_f);
    for (double v : r.rms_l2) out += "," + detail::g17(v);
    for (double v : r.rms_cos) out += "," + detail::g17(v);
    for (double v : r.michelson_l2) out += "," + detail::g17(v);
    for (double v : r.michelson_cos) out += "," + detail::g17(v);
    out += "\n";
  }
  return out;
}

inline RunHistory history_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  COSIM_CHECK_DATA(std::getline(in, line), "history: empty file");
  COSIM_CHECK_DATA(line.rfind("epoch,total_loss", 0) == 0, "history: unrecognized header '",
                   line, "'");
  RunHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(fields, cell, ',')) row.push_back(std::stod(cell));
    COSIM_CHECK_DATA(row.size() == 18, "history: expected 18 columns, got ", row.size());
    EpochRecord r;
    r.epoch = static_cast<int>(row[0]);
    r.total_loss = row[1];
    for (int l = 0; l < 3; ++l) r.layer_losses[static_cast<std::size_t>(l)] = row[2 + static_cast<std::size_t>(l)];
    r.holdout_f = row[5];
    for (int l = 0; l < 3; ++l) r.rms_l2[static_cast<std::size_t>(l)] = row[6 + static_cast<std::size_t>(l)];
    for (int l = 0; l < 3; ++l) r.rms_cos[static_cast<std::size_t>(l)] = row[9 + static_cast<std::size_t>(l)];
    for (int l = 0; l < 3; ++l) r.michelson_l2[static_cast<std::size_t>(l)] = row[12 + static_cast<std::size_t>(l)];
    for (int l = 0; l < 3; ++l) r.michelson_cos[static_cast<std::size_t>(l)] = row[15 + static_cast<std::size_t>(l)];
    h.epochs.push_back(r);
  }
  return h;
}

// One row per (epoch, layer, metric-kind) pair of contrast measurements.
struct ContrastRow {
  int epoch = 0;
  int layer = 0;  // 1-based
  std::string metric;  // l2_rms, cos_rms, l2_michelson, cos_michelson
  double value = 0.0;
};

struct ContrastReport {
  std::vector<ContrastRow> rows;
};

inline ContrastReport contrast_analysis(const RunHistory& history) {
  COSIM_CHECK_ARG(!history.epochs.empty(), "contrast_analysis: history is empty");
  ContrastReport report;
  for (const EpochRecord& r : history.epochs)
    for (int l = 0; l < 3; ++l) {
      const auto li = static_cast<std::size_t>(l);
      report.rows.push_back({r.epoch, l + 1, "l2_rms", r.rms_l2[li]});
      report.rows.push_back({r.epoch, l + 1, "cos_rms", r.rms_cos[li]});
      report.rows.push_back({r.epoch, l + 1, "l2_michelson", r.michelson_l2[li]});
      report.rows.push_back({r.epoch, l + 1, "cos_michelson", r.michelson_cos[li]});
    }
  return report;
}

inline std::string contrast_report_csv(const ContrastReport& report) {
  std::string out = "epoch,layer,metric,value\n";
  for (const ContrastRow& r : report.rows)
    out += std::to_string(r.epoch) + "," + std::to_string(r.layer) + "," + r.metric + "," +
           detail::g17(r.value) + "\n";
  return out;
}

inline std::string eval_report_json(const EvalReport& r) {
  std::string out = "{\n";
  out += "  \"best_threshold\": " + detail::g17(r.best_threshold) + ",\n";
  out += "  \"degenerate_rates\": " + std::string(r.degenerate_rates ? "true" : "false") + ",\n";
  out += "  \"f_score\": " + detail::g17(r.f_score) + ",\n";
  out += "  \"fnr\": " + detail::g17(r.fnr) + ",\n";
  out += "  \"fpr\": " + detail::g17(r.fpr) + ",\n";
  out += "  \"precision\": " + detail::g17(r.precision) + ",\n";
  out += "  \"recall\": " + detail::g17(r.recall) + "\n";
  out += "}\n";
  return out;
}

// ----- feature export --------------------------------------------------------

// Samples per-location feature vectors at one pyramid level from both
// branches, labeled by the ground-truth mask. Rows per pair:
// sample_per_image * 2 (the t0-branch row, then the t1-branch row).
inline std::string export_features(const Model& model, const std::vector<ScenePair>& items,
                                   int level, int sample_per_image, std::uint64_t seed) {
  COSIM_CHECK_ARG(level >= 0 && level < 3, "export_features: level must be 0..2, got ", level);
  COSIM_CHECK_ARG(sample_per_image >= 0, "export_features: negative sample count");

  NoGradGuard frozen;
  std::string csv;
  bool header_written = false;
  for (std::size_t idx = 0; idx < items.size(); ++idx) {
    const ScenePair& item = items[idx];
    COSIM_CHECK_ARG(item.mask.size() > 0, "export_features: item '", item.pair.identifier,
                    "' has no ground-truth mask");
    const auto [pyr0, pyr1] = model.encoder.encode_pair(item.pair.t0, item.pair.t1);
    const Tensor& f0 = pyr0.levels[static_cast<std::size_t>(level)];
    const Tensor& f1 = pyr1.levels[static_cast<std::size_t>(level)];
    const int c = f0.dim(0), h = f0.dim(1), w = f0.dim(2);
    if (!header_written) {
      csv = "pair_id,x,y,changed";
      for (int ci = 0; ci < c; ++ci) csv += ",f" + std::to_string(ci);
      csv += "\n";
      header_written = true;
    }
    const ChangeMask mask_l = resize_mask_nearest(item.mask, h, w);
    Rng rng(derive_seed(seed, idx));
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < sample_per_image; ++s) {
      const int y = rng.uniform_int(0, h - 1);
      const int x = rng.uniform_int(0, w - 1);
      const int changed = mask_l.at(y, x);
      for (const Tensor* feat : {&f0, &f1}) {
        csv += item.pair.identifier + "," + std::to_string(x) + "," + std::to_string(y) + "," +
               std::to_string(changed);
        for (int ci = 0; ci < c; ++ci)
          csv += "," + detail::g17(feat->data()[static_cast<std::size_t>(ci) * hw +
                                                static_cast<std::size_t>(y) * w + x]);
        csv += "\n";
      }
    }
  }
  if (!header_written) csv = "pair_id,x,y,changed\n";
  return csv;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  COSIM_CHECK_DATA(out.good(), "cannot open '", path, "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  COSIM_CHECK_DATA(out.good(), "write failed for '", path, "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  COSIM_CHECK_DATA(in.good(), "cannot open '", path, "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace cosim
