#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cosim/pipeline.hpp"

using namespace cosim;

namespace {

// Tiny fixtures so the whole suite stays fast.
EncoderConfig small_encoder() {
  EncoderConfig cfg;
  cfg.stage_channels = {4, 8, 8};
  return cfg;
}

Dataset small_dataset(int count = 8, std::uint64_t seed = 5) {
  SynthConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.count = count;
  cfg.seed = seed;
  return split_dataset(generate_synthetic(cfg), 0.75, seed);
}

TrainConfig small_train(int epochs = 2) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.eval_thresholds = 11;
  return cfg;
}

bool params_equal(const Model& a, const Model& b, double tol) {
  const auto& pa = a.encoder.parameters();
  const auto& pb = b.encoder.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i].value.values().size(); ++j)
      if (std::abs(pa[i].value.values()[j] - pb[i].value.values()[j]) > tol) return false;
  return true;
}

}  // namespace

TEST(Model, CheckpointRoundTrip) {
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::fcn_metrics, 3);
  const std::string bytes = serialize_checkpoint(m.to_checkpoint());
  Model back = Model::from_checkpoint(parse_checkpoint(bytes));
  EXPECT_EQ(back.mode, TrainMode::fcn_metrics);
  EXPECT_EQ(back.loss_kind, LossKind::l2_contrastive);
  EXPECT_TRUE(params_equal(m, back, 0.0));
  ASSERT_EQ(back.head.size(), 2u);
  for (std::size_t i = 0; i < m.head[0].value.values().size(); ++i)
    EXPECT_EQ(back.head[0].value.values()[i], m.head[0].value.values()[i]);
  // serialized form is stable
  EXPECT_EQ(serialize_checkpoint(back.to_checkpoint()), bytes);
}

TEST(Train, ZeroLearningRateIsANoOp) {
  Dataset ds = small_dataset();
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 1);
  Model reference = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 1);
  TrainConfig cfg = small_train(1);
  cfg.lr_backbone = 0.0;
  cfg.lr_head = 0.0;
  cfg.weight_decay = 0.0;
  RunHistory h = train(m, ds, cfg);
  EXPECT_TRUE(params_equal(m, reference, 0.0));
  ASSERT_EQ(h.epochs.size(), 1u);
  EXPECT_GT(h.epochs[0].total_loss, 0.0);
}

TEST(Train, TclAtZeroTauMatchesContrastiveTrajectory) {
  Dataset ds = small_dataset();
  TrainConfig cl_cfg = small_train(2);
  Model cl_model = Model::init(small_encoder(), cl_cfg.loss, TrainMode::metric, 4);
  RunHistory cl_hist = train(cl_model, ds, cl_cfg);

  TrainConfig tcl_cfg = small_train(2);
  tcl_cfg.loss.kind = LossKind::tcl;
  tcl_cfg.loss.tau = 0.0;
  Model tcl_model = Model::init(small_encoder(), tcl_cfg.loss, TrainMode::metric, 4);
  tcl_model.loss_kind = LossKind::tcl;
  RunHistory tcl_hist = train(tcl_model, ds, tcl_cfg);

  ASSERT_EQ(cl_hist.epochs.size(), tcl_hist.epochs.size());
  for (std::size_t e = 0; e < cl_hist.epochs.size(); ++e)
    EXPECT_NEAR(cl_hist.epochs[e].total_loss, tcl_hist.epochs[e].total_loss, 1e-12);
  EXPECT_TRUE(params_equal(cl_model, tcl_model, 1e-12));
}

TEST(Train, SeedDeterminismBitExact) {
  Dataset ds = small_dataset();
  TrainConfig cfg = small_train(2);
  cfg.seed = 77;
  Model a = Model::init(small_encoder(), cfg.loss, TrainMode::metric, 9);
  Model b = Model::init(small_encoder(), cfg.loss, TrainMode::metric, 9);
  RunHistory ha = train(a, ds, cfg);
  RunHistory hb = train(b, ds, cfg);
  EXPECT_EQ(serialize_checkpoint(a.to_checkpoint()), serialize_checkpoint(b.to_checkpoint()));
  EXPECT_EQ(history_to_csv(ha), history_to_csv(hb));
}

TEST(Train, GuardsOnConfig) {
  Dataset ds = small_dataset();
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 1);
  TrainConfig cfg = small_train();
  cfg.epochs = 0;
  EXPECT_THROW(train(m, ds, cfg), invalid_argument);
  cfg = small_train();
  Dataset empty;
  EXPECT_THROW(train(m, empty, cfg), invalid_argument);
  cfg.mode = TrainMode::fcn_metrics;  // model is metric
  EXPECT_THROW(train(m, ds, cfg), invalid_argument);
}

TEST(Train, DivergenceRaisesNumericError) {
  Dataset ds = small_dataset();
  TrainConfig cfg = small_train(3);
  cfg.lr_backbone = 1e200;
  cfg.lr_head = 1e200;
  Model m = Model::init(small_encoder(), cfg.loss, TrainMode::metric, 2);
  try {
    train(m, ds, cfg);
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Infer, IdenticalInputsGiveZeroL2Map) {
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 6);
  SynthConfig scfg;
  scfg.height = 16;
  scfg.width = 16;
  scfg.count = 1;
  Dataset ds = generate_synthetic(scfg);
  ImagePair same{ds.items[0].pair.t0, ds.items[0].pair.t0, "same"};
  InferenceResult r = infer(m, same, InferenceConfig{});
  for (double v : r.fused.values.values()) EXPECT_DOUBLE_EQ(v, 0.0);
  for (auto v : r.prediction.values) EXPECT_EQ(v, 0);  // 0 < 0.5 threshold
}

TEST(Infer, MapsStayInUnitIntervalAtOutputResolution) {
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 7);
  Dataset ds = small_dataset(2);
  InferenceConfig icfg;
  icfg.output_height = 32;
  icfg.output_width = 32;
  InferenceResult r = infer(m, ds.items[0].pair, icfg);
  EXPECT_EQ(r.fused.height(), 32);
  EXPECT_EQ(r.fused.width(), 32);
  ASSERT_EQ(r.layer_maps.size(), 3u);
  for (const auto& lm : r.layer_maps) {
    EXPECT_EQ(lm.height(), 32);
    for (double v : lm.values.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  icfg.output_height = 20;
  icfg.output_width = 20;
  EXPECT_THROW(infer(m, ds.items[0].pair, icfg), invalid_argument);
}

TEST(Infer, CosineModelUsesLearnedScaleShift) {
  LossConfig lc;
  lc.kind = LossKind::cosine;
  Model m = Model::init(small_encoder(), lc, TrainMode::metric, 8);
  Dataset ds = small_dataset(2);
  InferenceResult r = infer(m, ds.items[0].pair, InferenceConfig{});
  for (double v : r.fused.values.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Train, FcnWithZeroLambdaMatchesPureCrossEntropy) {
  Dataset ds = small_dataset();
  TrainConfig fcn_cfg = small_train(2);
  fcn_cfg.mode = TrainMode::fcn_metrics;
  fcn_cfg.loss.lambda = 0.0;
  Model fcn_model = Model::init(small_encoder(), fcn_cfg.loss, TrainMode::fcn_metrics, 11);
  RunHistory fcn_hist = train(fcn_model, ds, fcn_cfg);

  TrainConfig ce_cfg = fcn_cfg;
  ce_cfg.pure_cross_entropy = true;
  Model ce_model = Model::init(small_encoder(), ce_cfg.loss, TrainMode::fcn_metrics, 11);
  RunHistory ce_hist = train(ce_model, ds, ce_cfg);

  EXPECT_TRUE(params_equal(fcn_model, ce_model, 1e-12));
  for (std::size_t i = 0; i < fcn_model.head[0].value.values().size(); ++i)
    EXPECT_NEAR(fcn_model.head[0].value.values()[i], ce_model.head[0].value.values()[i], 1e-12);
  ASSERT_EQ(fcn_hist.epochs.size(), ce_hist.epochs.size());
  for (std::size_t e = 0; e < fcn_hist.epochs.size(); ++e)
    EXPECT_NEAR(fcn_hist.epochs[e].total_loss, ce_hist.epochs[e].total_loss, 1e-12);
}

TEST(Infer, FcnModeExposesHeadMap) {
  LossConfig lc;
  Model m = Model::init(small_encoder(), lc, TrainMode::fcn_metrics, 12);
  Dataset ds = small_dataset(2);
  InferenceResult r = infer(m, ds.items[0].pair, InferenceConfig{});
  ASSERT_TRUE(r.head_map.has_value());
  for (double v : r.head_map->values.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(History, CsvRoundTrip) {
  Dataset ds = small_dataset();
  TrainConfig cfg = small_train(2);
  Model m = Model::init(small_encoder(), cfg.loss, TrainMode::metric, 13);
  RunHistory h = train(m, ds, cfg);
  RunHistory back = history_from_csv(history_to_csv(h));
  ASSERT_EQ(back.epochs.size(), h.epochs.size());
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    EXPECT_EQ(back.epochs[e].epoch, h.epochs[e].epoch);
    EXPECT_EQ(back.epochs[e].total_loss, h.epochs[e].total_loss);  // %.17g round trips
    for (int l = 0; l < 3; ++l) {
      const auto li = static_cast<std::size_t>(l);
      EXPECT_EQ(back.epochs[e].rms_l2[li], h.epochs[e].rms_l2[li]);
      EXPECT_EQ(back.epochs[e].michelson_cos[li], h.epochs[e].michelson_cos[li]);
    }
  }
}

TEST(ContrastAnalysis, MatchesRecomputedContrast) {
  // lr = 0 keeps weights frozen, so the history's training-time contrast can
  // be recomputed exactly from a fresh forward pass.
  Dataset ds = small_dataset(4, 21);
  TrainConfig cfg = small_train(1);
  cfg.lr_backbone = 0.0;
  cfg.lr_head = 0.0;
  cfg.weight_decay = 0.0;
  Model m = Model::init(small_encoder(), cfg.loss, TrainMode::metric, 14);
  RunHistory h = train(m, ds, cfg);

  NoGradGuard frozen;
  std::array<double, 3> rms_sum = {0.0, 0.0, 0.0};
  for (int idx : ds.train_indices) {
    const auto& item = ds.items[static_cast<std::size_t>(idx)];
    auto [p0, p1] = m.encoder.encode_pair(item.pair.t0, item.pair.t1);
    for (int l = 0; l < 3; ++l) {
      const auto li = static_cast<std::size_t>(l);
      ChangeMap cm = change_map_from_l2(l2_distance_map(p0.levels[li], p1.levels[li]), l);
      rms_sum[li] += rms_contrast(cm.values);
    }
  }
  for (int l = 0; l < 3; ++l) {
    const auto li = static_cast<std::size_t>(l);
    EXPECT_NEAR(h.epochs[0].rms_l2[li],
                rms_sum[li] / static_cast<double>(ds.train_indices.size()), 1e-12);
  }

  ContrastReport report = contrast_analysis(h);
  EXPECT_EQ(report.rows.size(), h.epochs.size() * 3 * 4);
  const std::string csv = contrast_report_csv(report);
  EXPECT_EQ(csv.rfind("epoch,layer,metric,value\n", 0), 0u);
}

TEST(ExportFeatures, DeterministicWithCountedRows) {
  Dataset ds = small_dataset(3, 31);
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 15);
  const std::string a = export_features(m, ds.items, 1, 4, 99);
  const std::string b = export_features(m, ds.items, 1, 4, 99);
  EXPECT_EQ(a, b);

  std::size_t rows = 0;
  for (char c : a) rows += c == '\n';
  EXPECT_EQ(rows, 1 + ds.items.size() * 4 * 2);  // header + pairs * samples * 2

  const std::string empty = export_features(m, ds.items, 1, 0, 99);
  std::size_t empty_rows = 0;
  for (char c : empty) empty_rows += c == '\n';
  EXPECT_EQ(empty_rows, 1u);  // header only
  EXPECT_EQ(empty.rfind("pair_id,x,y,changed", 0), 0u);

  EXPECT_THROW(export_features(m, ds.items, 5, 1, 0), invalid_argument);
}

TEST(EvaluateModel, ReportRatesAreSane) {
  Dataset ds = small_dataset(8, 41);
  Model m = Model::init(small_encoder(), LossConfig{}, TrainMode::metric, 16);
  EvalReport report = evaluate_model(m, ds, ds.test_indices, 11);
  for (double v : {report.precision, report.recall, report.f_score, report.fpr, report.fnr,
                   report.best_threshold}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(report.pr_points.size(), 11u);
  const std::string json = eval_report_json(report);
  EXPECT_NE(json.find("\"f_score\""), std::string::npos);
}
