#include <gtest/gtest.h>

#include <cmath>

#include "cosim/gradcheck.hpp"
#include "cosim/metric.hpp"
#include "cosim/rng.hpp"

using namespace cosim;

namespace {

// Random unit vectors at every location.
Tensor random_unit_features(int c, int h, int w, Rng& rng) {
  Tensor t = Tensor::zeros({c, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t j = 0; j < hw; ++j) {
    double norm = 0.0;
    std::vector<double> v(static_cast<std::size_t>(c));
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (int ci = 0; ci < c; ++ci)
      t.data()[static_cast<std::size_t>(ci) * hw + j] = v[static_cast<std::size_t>(ci)] / norm;
  }
  return t;
}

}  // namespace

TEST(L2Distance, IdenticalFeaturesGiveZero) {
  Rng rng(1);
  Tensor f = random_unit_features(4, 3, 3, rng);
  DistanceMap d = l2_distance_map(f, f);
  for (double v : d.values.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(L2Distance, OrthogonalAndAntipodal) {
  Tensor f0 = Tensor::from_data({2, 1, 2}, {1.0, 1.0, 0.0, 0.0});
  Tensor f1 = Tensor::from_data({2, 1, 2}, {0.0, -1.0, 1.0, 0.0});
  DistanceMap d = l2_distance_map(f0, f1);
  EXPECT_NEAR(d.values.values()[0], std::sqrt(2.0), 1e-12);  // orthogonal
  EXPECT_NEAR(d.values.values()[1], 2.0, 1e-12);             // antipodal: the diameter
}

TEST(L2Distance, ShapeMismatchRejected) {
  EXPECT_THROW(l2_distance_map(Tensor::zeros({2, 2, 2}), Tensor::zeros({2, 2, 3})),
               invalid_argument);
}

TEST(L2Distance, SymmetricAndBounded) {
  Rng rng(2);
  Tensor f0 = random_unit_features(5, 4, 4, rng);
  Tensor f1 = random_unit_features(5, 4, 4, rng);
  DistanceMap d01 = l2_distance_map(f0, f1);
  DistanceMap d10 = l2_distance_map(f1, f0);
  for (std::size_t j = 0; j < d01.values.values().size(); ++j) {
    EXPECT_EQ(d01.values.values()[j], d10.values.values()[j]);
    EXPECT_GE(d01.values.values()[j], 0.0);
    EXPECT_LE(d01.values.values()[j], 2.0 + 1e-12);
  }
}

TEST(L2Distance, TriangleInequalitySpotCheck) {
  Rng rng(3);
  Tensor f0 = random_unit_features(3, 5, 5, rng);
  Tensor f1 = random_unit_features(3, 5, 5, rng);
  Tensor f2 = random_unit_features(3, 5, 5, rng);
  const auto d02 = l2_distance_map(f0, f2).values;
  const auto d01 = l2_distance_map(f0, f1).values;
  const auto d12 = l2_distance_map(f1, f2).values;
  for (std::size_t j = 0; j < d02.values().size(); ++j)
    EXPECT_LE(d02.values()[j], d01.values()[j] + d12.values()[j] + 1e-12);
}

TEST(CosineSimilarity, WorkedValues) {
  Tensor f0 = Tensor::from_data({2, 1, 3}, {1.0, 1.0, 0.6, 0.0, 0.0, 0.8});
  Tensor f1 = Tensor::from_data({2, 1, 3}, {1.0, 0.0, 0.8, 0.0, 1.0, 0.6});
  DistanceMap s = cosine_similarity_map(f0, f1);
  EXPECT_NEAR(s.values.values()[0], 1.0, 1e-12);   // identical unit vectors
  EXPECT_NEAR(s.values.values()[1], 0.0, 1e-12);   // orthogonal
  EXPECT_NEAR(s.values.values()[2], 0.96, 1e-12);  // (0.6,0.8).(0.8,0.6)
}

TEST(ChangeMapL2, HalvesTheDistance) {
  Tensor f0 = Tensor::from_data({2, 1, 3}, {1.0, 1.0, 1.0, 0.0, 0.0, 0.0});
  Tensor f1 = Tensor::from_data({2, 1, 3}, {1.0, -1.0, 0.0, 0.0, 0.0, 1.0});
  ChangeMap cm = change_map_from_l2(l2_distance_map(f0, f1));
  EXPECT_NEAR(cm.values.values()[0], 0.0, 1e-12);
  EXPECT_NEAR(cm.values.values()[1], 1.0, 1e-12);
  EXPECT_NEAR(cm.values.values()[2], 0.70711, 5e-6);
}

TEST(ChangeMapL2, RejectsOutOfRangeDistances) {
  DistanceMap d{Tensor::from_data({1, 1}, {2.5}), DistanceKind::euclidean};
  EXPECT_THROW(change_map_from_l2(d), invalid_argument);
  DistanceMap cos_map{Tensor::from_data({1, 1}, {0.5}), DistanceKind::cosine};
  EXPECT_THROW(change_map_from_l2(cos_map), invalid_argument);
}

TEST(ChangeMapL2, MonotoneInDistance) {
  DistanceMap d{Tensor::from_data({1, 4}, {0.0, 0.5, 1.0, 2.0}), DistanceKind::euclidean};
  ChangeMap cm = change_map_from_l2(d);
  for (std::size_t j = 1; j < 4; ++j)
    EXPECT_GT(cm.values.values()[j], cm.values.values()[j - 1]);
}

TEST(ChangeMapCos, WorkedValues) {
  DistanceMap s{Tensor::from_data({1, 2}, {1.0, 1.0}), DistanceKind::cosine};
  ChangeMap a = change_map_from_cos(s, Tensor::scalar(1.0), Tensor::scalar(-1.0));
  EXPECT_NEAR(a.values.values()[0], 0.0, 1e-12);  // 1 - exp(0)
  ChangeMap b = change_map_from_cos(s, Tensor::scalar(1.0), Tensor::scalar(0.0));
  EXPECT_NEAR(b.values.values()[0], 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(b.values.values()[0], 0.63212, 5e-6);
}

TEST(ChangeMapCos, RangeIsUnitInterval) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    DistanceMap s{Tensor::from_data({1, 1}, {rng.uniform(-1.0, 1.0)}), DistanceKind::cosine};
    ChangeMap cm = change_map_from_cos(s, Tensor::scalar(rng.uniform(-3.0, 3.0)),
                                       Tensor::scalar(rng.uniform(-3.0, 3.0)));
    EXPECT_GE(cm.values.values()[0], 0.0);
    EXPECT_LT(cm.values.values()[0], 1.0);
  }
}

TEST(UpsampleChangeMap, AlignCornersAndRange) {
  ChangeMap cm{Tensor::from_data({1, 2}, {0.0, 1.0}), 0};
  ChangeMap up = upsample_change_map(cm, 1, 3);
  EXPECT_DOUBLE_EQ(up.values.values()[0], 0.0);
  EXPECT_DOUBLE_EQ(up.values.values()[1], 0.5);
  EXPECT_DOUBLE_EQ(up.values.values()[2], 1.0);

  ChangeMap flat{Tensor::filled({3, 3}, 0.25), 1};
  ChangeMap up2 = upsample_change_map(flat, 9, 9);
  for (double v : up2.values.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Fuse, MeanOfMaps) {
  ChangeMap a{Tensor::filled({2, 2}, 0.2), 0};
  ChangeMap b{Tensor::filled({2, 2}, 0.6), 1};
  ChangeMap f = fuse_predictions({a, b});
  for (double v : f.values.values()) EXPECT_DOUBLE_EQ(v, 0.4);

  ChangeMap single = fuse_predictions({a});
  for (double v : single.values.values()) EXPECT_DOUBLE_EQ(v, 0.2);

  ChangeMap same = fuse_predictions({b, b, b});
  for (double v : same.values.values()) EXPECT_DOUBLE_EQ(v, 0.6);

  EXPECT_THROW(fuse_predictions({}), invalid_argument);
  ChangeMap odd{Tensor::filled({3, 2}, 0.1), 0};
  EXPECT_THROW(fuse_predictions({a, odd}), invalid_argument);
}

TEST(Metric, GradCheckThroughL2ChangeMap) {
  Rng rng(5);
  Tensor f0 = random_unit_features(3, 3, 3, rng);
  Tensor f1 = random_unit_features(3, 3, 3, rng);  // distances far from 0 w.h.p.
  const double err = grad_check(
      [](const std::vector<Tensor>& in) {
        ChangeMap cm = change_map_from_l2(l2_distance_map(in[0], in[1]));
        return ops::mean(cm.values);
      },
      {f0, f1});
  EXPECT_LT(err, 1e-4);
}

TEST(Metric, GradCheckThroughCosChangeMap) {
  // controlled cosine values so |w s + b| stays well away from the |.| kink
  const double sims[4] = {0.9, 0.5, 0.0, -0.8};
  Tensor f0 = Tensor::zeros({2, 2, 2});
  Tensor f1 = Tensor::zeros({2, 2, 2});
  for (std::size_t j = 0; j < 4; ++j) {
    f0.data()[0 * 4 + j] = 1.0;
    f1.data()[0 * 4 + j] = sims[j];
    f1.data()[1 * 4 + j] = std::sqrt(1.0 - sims[j] * sims[j]);
  }
  Tensor w = Tensor::scalar(1.3);
  Tensor b = Tensor::scalar(0.4);  // |1.3 s + 0.4| >= 0.4 on the values above
  const double err = grad_check(
      [](const std::vector<Tensor>& in) {
        ChangeMap cm = change_map_from_cos(cosine_similarity_map(in[0], in[1]), in[2], in[3]);
        return ops::mean(cm.values);
      },
      {f0, f1, w, b});
  EXPECT_LT(err, 1e-4);
}

TEST(ResizeMaskNearest, KeepsBinaryValues) {
  ChangeMask m(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) m.at(y, x) = static_cast<std::uint8_t>((x + y) % 2);
  ChangeMask half = resize_mask_nearest(m, 2, 2);
  for (auto v : half.values) EXPECT_TRUE(v == 0 || v == 1);
  ChangeMask twice = resize_mask_nearest(m, 8, 8);
  for (auto v : twice.values) EXPECT_TRUE(v == 0 || v == 1);
}
