#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cosim/checkpoint.hpp"
#include "cosim/encoder.hpp"
#include "cosim/losses.hpp"
#include "cosim/rng.hpp"

using namespace cosim;

namespace {
Tensor random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros({3, h, w});
  for (auto& v : t.values()) v = rng.uniform(0.0, 1.0);
  return t;
}
}  // namespace

TEST(Encoder, ParameterCountClosedForm) {
  // 3*16*9+16 + 16*32*9+32 + 32*64*9+64
  Encoder enc = Encoder::init(EncoderConfig{});
  EXPECT_EQ(enc.parameter_count(), 3 * 16 * 9 + 16 + 16 * 32 * 9 + 32 + 32 * 64 * 9 + 64);
  EXPECT_EQ(enc.parameter_count(), 23584);
}

TEST(Encoder, SeededInitIsDeterministic) {
  EncoderConfig cfg;
  cfg.seed = 42;
  Encoder a = Encoder::init(cfg);
  Encoder b = Encoder::init(cfg);
  for (std::size_t p = 0; p < a.parameters().size(); ++p)
    for (std::size_t i = 0; i < a.parameters()[p].value.values().size(); ++i)
      EXPECT_EQ(a.parameters()[p].value.values()[i], b.parameters()[p].value.values()[i]);

  cfg.seed = 43;
  Encoder c = Encoder::init(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters()[0].value.values().size(); ++i)
    any_diff = any_diff ||
               a.parameters()[0].value.values()[i] != c.parameters()[0].value.values()[i];
  EXPECT_TRUE(any_diff);
}

TEST(Encoder, BiasesStartAtZeroAndWeightsWithinBound) {
  Encoder enc = Encoder::init(EncoderConfig{});
  const double bound1 = std::sqrt(3.0 / (3.0 * 9.0));
  for (double v : enc.parameters()[0].value.values()) {
    EXPECT_GE(v, -bound1);
    EXPECT_LE(v, bound1);
  }
  for (double v : enc.parameters()[1].value.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, RejectsZeroChannels) {
  EncoderConfig cfg;
  cfg.stage_channels = {16, 0, 64};
  EXPECT_THROW(Encoder::init(cfg), invalid_argument);
}

TEST(Encode, PyramidGeometry) {
  Encoder enc = Encoder::init(EncoderConfig{});
  FeaturePyramid pyr = enc.encode(random_image(64, 64, 7));
  EXPECT_EQ(pyr.levels[0].shape(), (Shape{16, 32, 32}));
  EXPECT_EQ(pyr.levels[1].shape(), (Shape{32, 16, 16}));
  EXPECT_EQ(pyr.levels[2].shape(), (Shape{64, 8, 8}));
}

TEST(Encode, IndivisibleSizeMentionsResize) {
  Encoder enc = Encoder::init(EncoderConfig{});
  try {
    enc.encode(random_image(60, 64, 7));
    FAIL() << "expected invalid_argument";
  } catch (const invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("resize"), std::string::npos);
  }
}

TEST(Encode, EveryLocationIsUnitOrZero) {
  Encoder enc = Encoder::init(EncoderConfig{});
  FeaturePyramid pyr = enc.encode(random_image(64, 64, 8));
  for (const Tensor& level : pyr.levels) {
    const int c = level.dim(0);
    const std::size_t hw = static_cast<std::size_t>(level.dim(1)) * level.dim(2);
    for (std::size_t j = 0; j < hw; ++j) {
      double n = 0.0;
      for (int ci = 0; ci < c; ++ci) {
        const double v = level.values()[static_cast<std::size_t>(ci) * hw + j];
        n += v * v;
      }
      n = std::sqrt(n);
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-6) << "norm " << n;
    }
  }
}

TEST(Encode, ZeroImageGivesZeroFeatures) {
  Encoder enc = Encoder::init(EncoderConfig{});
  FeaturePyramid pyr = enc.encode(Tensor::zeros({3, 64, 64}));
  for (const Tensor& level : pyr.levels)
    for (double v : level.values()) EXPECT_EQ(v, 0.0);
}

TEST(EncodePair, SameInputSamePyramids) {
  Encoder enc = Encoder::init(EncoderConfig{});
  Tensor x = random_image(64, 64, 9);
  auto [p0, p1] = enc.encode_pair(x, x);
  for (int l = 0; l < 3; ++l) {
    const auto& a = p0.levels[static_cast<std::size_t>(l)].values();
    const auto& b = p1.levels[static_cast<std::size_t>(l)].values();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  }
}

TEST(EncodePair, SwapCommutes) {
  Encoder enc = Encoder::init(EncoderConfig{});
  Tensor a = random_image(64, 64, 10);
  Tensor b = random_image(64, 64, 11);
  auto [pa, pb] = enc.encode_pair(a, b);
  auto [qb, qa] = enc.encode_pair(b, a);
  for (int l = 0; l < 3; ++l) {
    const auto li = static_cast<std::size_t>(l);
    for (std::size_t i = 0; i < pa.levels[li].values().size(); ++i) {
      EXPECT_EQ(pa.levels[li].values()[i], qa.levels[li].values()[i]);
      EXPECT_EQ(pb.levels[li].values()[i], qb.levels[li].values()[i]);
    }
  }
}

TEST(EncodePair, PerturbingOneBranchOnlyChangesIt) {
  Encoder enc = Encoder::init(EncoderConfig{});
  Tensor a = random_image(64, 64, 12);
  Tensor b = random_image(64, 64, 13);
  auto [pa, pb] = enc.encode_pair(a, b);
  Tensor b2 = b.clone_detached();
  b2.data()[100] += 0.25;
  auto [qa, qb] = enc.encode_pair(a, b2);
  for (std::size_t i = 0; i < pa.levels[0].values().size(); ++i)
    EXPECT_EQ(pa.levels[0].values()[i], qa.levels[0].values()[i]);
  bool any_diff = false;
  for (std::size_t i = 0; i < pb.levels[0].values().size(); ++i)
    any_diff = any_diff || pb.levels[0].values()[i] != qb.levels[0].values()[i];
  EXPECT_TRUE(any_diff);
}

TEST(EncodePair, SharedWeightGradIsSumOfBranchGrads) {
  EncoderConfig cfg;
  cfg.stage_channels = {4, 8, 8};
  Encoder enc = Encoder::init(cfg);
  Tensor a = random_image(16, 16, 14);
  Tensor b = random_image(16, 16, 15);

  auto branch_grads = [&](bool use_a, bool use_b) {
    zero_grads(enc.parameters());
    auto [pa, pb] = enc.encode_pair(a, b);
    Tensor loss;
    if (use_a) loss = ops::sum(pa.levels[2]);
    if (use_b) {
      Tensor lb = ops::sum(pb.levels[2]);
      loss = use_a ? ops::add(loss, lb) : lb;
    }
    backward(loss);
    return enc.parameters()[0].value.grad();
  };

  const auto both = branch_grads(true, true);
  const auto only_a = branch_grads(true, false);
  const auto only_b = branch_grads(false, true);
  for (std::size_t i = 0; i < both.size(); ++i)
    EXPECT_NEAR(both[i], only_a[i] + only_b[i], 1e-12);
  zero_grads(enc.parameters());
}

TEST(Checkpoint, RoundTripsBitExactly) {
  EncoderConfig cfg;
  cfg.seed = 77;
  Encoder enc = Encoder::init(cfg);
  Checkpoint ckpt;
  ckpt.meta["kernel_size"] = "3";
  ckpt.meta["pool_stride"] = "2";
  ckpt.meta["in_channels"] = "3";
  for (const auto& p : enc.parameters()) ckpt.tensors.emplace(p.name, p.value);

  const std::string path = (std::filesystem::temp_directory_path() / "cosim_ckpt_test.bin").string();
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.meta_or("kernel_size", ""), "3");
  for (const auto& p : enc.parameters()) {
    const Tensor& t = loaded.require(p.name);
    ASSERT_EQ(t.shape(), p.value.shape());
    for (std::size_t i = 0; i < t.values().size(); ++i)
      EXPECT_EQ(t.values()[i], p.value.values()[i]);
  }
  // byte-for-byte stable serialization
  EXPECT_EQ(serialize_checkpoint(ckpt), serialize_checkpoint(loaded));
  std::filesystem::remove(path);
}

TEST(Checkpoint, BadMagicRejected) {
  EXPECT_THROW(parse_checkpoint("NOTCOSIM\n"), data_error);
  EXPECT_THROW(parse_checkpoint("COSIM1\ntensor t 1 4 0\n"), data_error);  // no end/blob
}
