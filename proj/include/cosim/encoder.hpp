#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "cosim/ops.hpp"
#include "cosim/rng.hpp"
#include "cosim/tensor.hpp"

namespace cosim {

struct EncoderConfig {
  std::array<int, 3> stage_channels = {16, 32, 64};
  int kernel_size = 3;
  int pool_stride = 2;
  int in_channels = 3;
  std::uint64_t seed = 0;

  void validate() const {
    for (int c : stage_channels)
      COSIM_CHECK_ARG(c > 0, "encoder config: stage channels must be positive, got ", c);
    COSIM_CHECK_ARG(in_channels > 0, "encoder config: input channels must be positive");
    COSIM_CHECK_ARG(kernel_size >= 1 && kernel_size % 2 == 1,
                    "encoder config: kernel size must be odd so padding preserves size, got ",
                    kernel_size);
    COSIM_CHECK_ARG(pool_stride >= 2, "encoder config: pool stride must be >= 2, got ",
                    pool_stride);
  }

  // Input spatial sizes must be divisible by this so pooling never leaves a
  // remainder.
  int size_multiple() const { return pool_stride * pool_stride * pool_stride; }
};

// Three unit-normalized feature maps per image, coarse levels last.
struct FeaturePyramid {
  std::array<Tensor, 3> levels;
  bool normalized = true;
};

// The siamese feature extractor: one set of convolutional weights applied to
// both images of a pair. Each stage is conv(k, pad k/2) -> relu ->
// maxpool(pool_stride) -> per-location l2 normalization, so every level's
// feature vectors live on the unit sphere (or are exactly zero).
class Encoder {
 public:
  Encoder() = default;

  static Encoder init(const EncoderConfig& cfg) {
    cfg.validate();
    Encoder e;
    e.cfg_ = cfg;
    Rng rng(derive_seed(cfg.seed, 0xc05137ULL));
    int cin = cfg.in_channels;
    const int k = cfg.kernel_size;
    for (int stage = 0; stage < 3; ++stage) {
      const int cout = cfg.stage_channels[static_cast<std::size_t>(stage)];
      const double bound = std::sqrt(3.0 / static_cast<double>(cin * k * k));
      Tensor kernel = Tensor::zeros({cout, cin, k, k});
      for (auto& v : kernel.values()) v = rng.uniform(-bound, bound);
      Tensor bias = Tensor::zeros({cout});
      const std::string prefix = "stage" + std::to_string(stage + 1);
      e.params_.emplace_back(prefix + ".kernel", kernel);
      e.params_.emplace_back(prefix + ".bias", bias);
      cin = cout;
    }
    return e;
  }

  const EncoderConfig& config() const { return cfg_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  FeaturePyramid encode(const Tensor& image) const {
    COSIM_CHECK_ARG(image.ndim() == 3 && image.dim(0) == cfg_.in_channels,
                    "encode: image must be ", cfg_.in_channels, "xHxW, shape is ",
                    shape_str(image.shape()));
    const int mult = cfg_.size_multiple();
    COSIM_CHECK_ARG(image.dim(1) % mult == 0 && image.dim(2) % mult == 0,
                    "encode: spatial size ", image.dim(1), "x", image.dim(2),
                    " must be a multiple of ", mult, "; resize the input first");
    FeaturePyramid pyr;
    Tensor x = image;
    for (int stage = 0; stage < 3; ++stage) {
      const Tensor& kernel = params_[static_cast<std::size_t>(2 * stage)].value;
      const Tensor& bias = params_[static_cast<std::size_t>(2 * stage + 1)].value;
      x = ops::conv2d(x, kernel, bias, /*stride=*/1, /*pad=*/cfg_.kernel_size / 2);
      x = ops::relu(x);
      x = ops::maxpool2d(x, cfg_.pool_stride, cfg_.pool_stride);
      x = ops::l2_normalize_channels(x);
      pyr.levels[static_cast<std::size_t>(stage)] = x;
    }
    pyr.normalized = true;
    return pyr;
  }

  // Both pyramids come from the identical weight set, so swapping the inputs
  // swaps the outputs bit-exactly.
  std::pair<FeaturePyramid, FeaturePyramid> encode_pair(const Tensor& a, const Tensor& b) const {
    COSIM_CHECK_ARG(a.shape() == b.shape(), "encode_pair: image shapes differ, ",
                    shape_str(a.shape()), " vs ", shape_str(b.shape()));
    return {encode(a), encode(b)};
  }

 private:
  EncoderConfig cfg_;
  std::vector<Parameter> params_;
};

}  // namespace cosim
