// Command-line front end: synthetic data generation, training, inference,
// evaluation, contrast analysis, and feature export.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cosim/cosim.hpp"

namespace {

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  int count = 64;
  std::vector<int> size = {64, 64};
  double p_change = 0.5;
  double rotation = 0.0;
  double zoom = 1.0;
  double zoom_min = 1.0;
  double translation = 0.0;
  double brightness = 0.1;
  double noise = 0.02;
  double shadow = 0.3;
  int objects_min = 2;
  int objects_max = 5;
};

int run_synth(const SynthArgs& a) {
  cosim::SynthConfig cfg;
  cfg.height = a.size[0];
  cfg.width = a.size[1];
  cfg.count = a.count;
  cfg.seed = a.seed;
  cfg.p_change = a.p_change;
  cfg.rotation_deg = a.rotation;
  cfg.zoom_min = a.zoom_min;
  cfg.zoom_max = a.zoom;
  cfg.translation_px = a.translation;
  cfg.brightness = a.brightness;
  cfg.noise_sigma = a.noise;
  cfg.shadow_opacity = a.shadow;
  cfg.min_objects = a.objects_min;
  cfg.max_objects = a.objects_max;
  cosim::Dataset ds = cosim::generate_synthetic(cfg);
  cosim::save_dataset(a.out, ds);
  std::printf("wrote %d scene pairs to %s\n", cfg.count, a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string loss = "l2";
  double margin = 1.0;
  double tau = 0.0;
  std::vector<double> betas = {1.0, 1.0, 1.0};
  int epochs = 30;
  int batch = 4;
  double lr = 1e-2;
  double lr_head = 1e-2;
  double momentum = 0.90;
  double wd = 5e-5;
  std::string mode = "metric";
  double lambda = 3.0;
  std::uint64_t seed = 0;
  std::string history;
  double train_fraction = 0.8;
  std::vector<int> channels = {16, 32, 64};
  bool paper_lr = false;
};

cosim::LossKind parse_loss(const std::string& name) {
  if (name == "l2") return cosim::LossKind::l2_contrastive;
  if (name == "cos") return cosim::LossKind::cosine;
  if (name == "tcl") return cosim::LossKind::tcl;
  throw cosim::invalid_argument("unknown loss '" + name + "', expected l2|cos|tcl");
}

int run_train(const TrainArgs& a) {
  cosim::Dataset ds = cosim::load_dataset(a.data);
  if (ds.items.empty()) throw cosim::data_error("no items found under '" + a.data + "'");
  ds = cosim::split_dataset(std::move(ds), a.train_fraction, a.seed);

  cosim::LossConfig loss;
  loss.kind = parse_loss(a.loss);
  loss.margin = a.margin;
  loss.tau = a.tau;
  loss.betas = a.betas;
  loss.lambda = a.lambda;

  cosim::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr_backbone = a.paper_lr ? cosim::TrainConfig::kPaperLrBackbone : a.lr;
  cfg.lr_head = a.paper_lr ? cosim::TrainConfig::kPaperLrHead : a.lr_head;
  cfg.momentum = a.momentum;
  cfg.weight_decay = a.wd;
  cfg.loss = loss;
  cfg.mode = a.mode == "fcn" ? cosim::TrainMode::fcn_metrics : cosim::TrainMode::metric;
  cfg.seed = a.seed;

  cosim::EncoderConfig enc;
  if (a.channels.size() != 3)
    throw cosim::invalid_argument("--channels expects three values");
  enc.stage_channels = {a.channels[0], a.channels[1], a.channels[2]};

  cosim::Model model = cosim::Model::init(enc, loss, cfg.mode, a.seed);
  cosim::RunHistory history = cosim::train(model, ds, cfg);
  for (const auto& e : history.epochs)
    std::printf("epoch %d/%d  loss %.6f  holdout-F %.4f\n", e.epoch, cfg.epochs, e.total_loss,
                e.holdout_f);

  cosim::save_checkpoint(a.out, model.to_checkpoint());
  std::printf("checkpoint written to %s\n", a.out.c_str());
  if (!a.history.empty()) {
    cosim::write_text_file(a.history, cosim::history_to_csv(history));
    std::printf("history written to %s\n", a.history.c_str());
  }
  return 0;
}

struct InferArgs {
  std::string ckpt;
  std::string t0;
  std::string t1;
  std::string out_map;
  std::string out_mask;
  std::vector<double> thresholds = {0.5, 0.5, 0.5};
};

int run_infer(const InferArgs& a) {
  cosim::Model model = cosim::Model::from_checkpoint(cosim::load_checkpoint(a.ckpt));
  cosim::ImagePair pair;
  pair.t0 = cosim::image_to_tensor(cosim::load_image(a.t0));
  pair.t1 = cosim::image_to_tensor(cosim::load_image(a.t1));
  pair.identifier = a.t0;
  if (pair.t0.dim(0) == 1 || pair.t1.dim(0) == 1)
    throw cosim::data_error("infer expects RGB inputs");

  cosim::InferenceConfig icfg;
  if (a.thresholds.size() != 3)
    throw cosim::invalid_argument("--thresholds expects three values");
  icfg.thresholds = {a.thresholds[0], a.thresholds[1], a.thresholds[2]};

  cosim::InferenceResult r = cosim::infer(model, pair, icfg);
  const cosim::ChangeMap& out_map = r.head_map ? *r.head_map : r.fused;
  if (!a.out_map.empty()) {
    cosim::Tensor as_chw =
        cosim::ops::reshape(out_map.values, {1, out_map.height(), out_map.width()});
    cosim::save_image(a.out_map, cosim::tensor_to_image(as_chw));
    std::printf("change map written to %s\n", a.out_map.c_str());
  }
  if (!a.out_mask.empty()) {
    cosim::save_image(a.out_mask, cosim::mask_to_image(r.prediction));
    std::printf("binary prediction written to %s\n", a.out_mask.c_str());
  }
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string report;
  std::string pr_csv;
  int n_thresholds = 51;
};

int run_eval(const EvalArgs& a) {
  cosim::Model model = cosim::Model::from_checkpoint(cosim::load_checkpoint(a.ckpt));
  cosim::Dataset ds = cosim::load_dataset(a.data);
  if (ds.items.empty()) throw cosim::data_error("no items found under '" + a.data + "'");
  std::vector<int> all(ds.items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  cosim::EvalReport report = cosim::evaluate_model(model, ds, all, a.n_thresholds);
  std::printf("precision %.4f  recall %.4f  F %.4f  FPR %.6f  FNR %.6f  (theta* = %.3f)\n",
              report.precision, report.recall, report.f_score, report.fpr, report.fnr,
              report.best_threshold);
  if (!a.report.empty()) {
    cosim::write_text_file(a.report, cosim::eval_report_json(report));
    std::printf("report written to %s\n", a.report.c_str());
  }
  if (!a.pr_csv.empty()) {
    cosim::write_text_file(a.pr_csv, cosim::pr_curve_csv(report.pr_points));
    std::printf("PR curve written to %s\n", a.pr_csv.c_str());
  }
  return 0;
}

int run_contrast(const std::string& history_path, const std::string& out) {
  cosim::RunHistory history = cosim::history_from_csv(cosim::read_text_file(history_path));
  cosim::ContrastReport report = cosim::contrast_analysis(history);
  cosim::write_text_file(out, cosim::contrast_report_csv(report));
  std::printf("contrast trajectories written to %s\n", out.c_str());
  return 0;
}

struct ExportArgs {
  std::string ckpt;
  std::string data;
  int level = 2;
  int samples = 16;
  std::uint64_t seed = 0;
  std::string out;
};

int run_export(const ExportArgs& a) {
  cosim::Model model = cosim::Model::from_checkpoint(cosim::load_checkpoint(a.ckpt));
  cosim::Dataset ds = cosim::load_dataset(a.data);
  if (ds.items.empty()) throw cosim::data_error("no items found under '" + a.data + "'");
  const std::string csv = cosim::export_features(model, ds.items, a.level, a.samples, a.seed);
  cosim::write_text_file(a.out, csv);
  std::printf("feature table written to %s\n", a.out.c_str());
  return 0;
}


// The spec's config files are plain UTF-8 "key=value" lines. Values fill in
// options the user did not pass explicitly, so command-line flags always win.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in.good()) throw cosim::data_error("cannot open config file '" + config_path + "'");
  auto has_flag = [&args](const std::string& name) {
    for (const std::string& a : args)
      if (a == name || a.rfind(name + "=", 0) == 0) return true;
    return false;
  };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw cosim::data_error("config '" + config_path + "' line " + std::to_string(line_no) +
                              ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    const std::string flag = "--" + key;
    if (has_flag(flag)) continue;  // explicit flag overrides the file
    if (value == "true") {
      args.push_back(flag);
    } else if (value == "false") {
      continue;
    } else {
      args.push_back(flag);
      std::istringstream vs(value);  // multi-token values like "size=64 64"
      std::string tok;
      while (vs >> tok) args.push_back(tok);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CosimNet: siamese metric scene change detection"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene-pair dataset");
  synth_cmd->add_option("--out", synth.out, "Output dataset directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Master seed");
  synth_cmd->add_option("--count", synth.count, "Number of scene pairs");
  synth_cmd->add_option("--size", synth.size, "Canvas size H W")->expected(2);
  synth_cmd->add_option("--p-change", synth.p_change, "Probability of a semantic change");
  synth_cmd->add_option("--rotation", synth.rotation, "Max |rotation| in degrees");
  synth_cmd->add_option("--zoom", synth.zoom, "Max zoom factor (>= 1)");
  synth_cmd->add_option("--zoom-min", synth.zoom_min, "Min zoom factor (>= 1)");
  synth_cmd->add_option("--translation", synth.translation, "Max |translation| in px");
  synth_cmd->add_option("--brightness", synth.brightness, "Max |brightness delta|");
  synth_cmd->add_option("--noise", synth.noise, "Max gaussian noise sigma");
  synth_cmd->add_option("--shadow", synth.shadow, "Max shadow opacity");
  synth_cmd->add_option("--objects-min", synth.objects_min, "Min object count");
  synth_cmd->add_option("--objects-max", synth.objects_max, "Max object count");
  synth_cmd->add_option("--config", "key=value config file; explicit flags win");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a pair dataset");
  train_cmd->add_option("--data", train.data, "Dataset directory (t0/ t1/ mask/)")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint output path")->required();
  train_cmd->add_option("--loss", train.loss, "Loss: l2 | cos | tcl");
  train_cmd->add_option("--margin", train.margin, "Contrastive margin m");
  train_cmd->add_option("--tau", train.tau, "TCL tolerance");
  train_cmd->add_option("--betas", train.betas, "Layer-balancing weights")
      ->delimiter(',')
      ->expected(3);
  train_cmd->add_option("--epochs", train.epochs, "Training epochs");
  train_cmd->add_option("--batch", train.batch, "Batch size");
  train_cmd->add_option("--lr", train.lr, "Backbone learning rate");
  train_cmd->add_option("--lr-head", train.lr_head, "Head learning rate");
  train_cmd->add_option("--momentum", train.momentum, "SGD momentum");
  train_cmd->add_option("--wd", train.wd, "Weight decay");
  train_cmd->add_option("--mode", train.mode, "metric | fcn");
  train_cmd->add_option("--lambda", train.lambda, "Multi-task feature-loss weight");
  train_cmd->add_option("--seed", train.seed, "Training seed");
  train_cmd->add_option("--history", train.history, "Per-epoch history CSV output");
  train_cmd->add_option("--train-fraction", train.train_fraction, "Train split fraction");
  train_cmd->add_option("--channels", train.channels, "Encoder stage channels")
      ->delimiter(',')
      ->expected(3);
  train_cmd->add_flag("--paper-lr", train.paper_lr,
                      "Use the published fine-tuning rates 1e-7/1e-8");
  train_cmd->add_option("--config", "key=value config file; explicit flags win");

  InferArgs infer;
  CLI::App* infer_cmd = app.add_subcommand("infer", "Predict the change map for one pair");
  infer_cmd->add_option("--ckpt", infer.ckpt, "Checkpoint path")->required();
  infer_cmd->add_option("--t0", infer.t0, "Reference image")->required();
  infer_cmd->add_option("--t1", infer.t1, "Query image")->required();
  infer_cmd->add_option("--out-map", infer.out_map, "Change-map PNG output");
  infer_cmd->add_option("--out-mask", infer.out_mask, "Binary prediction PNG output");
  infer_cmd->add_option("--thresholds", infer.thresholds, "Per-layer thresholds")
      ->delimiter(',')
      ->expected(3);
  infer_cmd->add_option("--config", "key=value config file; explicit flags win");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--report", eval.report, "JSON report output");
  eval_cmd->add_option("--pr-csv", eval.pr_csv, "PR-curve CSV output");
  eval_cmd->add_option("--n-thresholds", eval.n_thresholds, "Threshold sweep resolution");
  eval_cmd->add_option("--config", "key=value config file; explicit flags win");

  std::string contrast_history, contrast_out;
  CLI::App* contrast_cmd =
      app.add_subcommand("contrast", "Contrast trajectories from a history CSV");
  contrast_cmd->add_option("--history", contrast_history, "History CSV from train")->required();
  contrast_cmd->add_option("--out", contrast_out, "Contrast CSV output")->required();
  contrast_cmd->add_option("--config", "key=value config file; explicit flags win");

  ExportArgs exp;
  CLI::App* export_cmd =
      app.add_subcommand("export-features", "Sample per-location feature vectors to CSV");
  export_cmd->add_option("--ckpt", exp.ckpt, "Checkpoint path")->required();
  export_cmd->add_option("--data", exp.data, "Dataset directory")->required();
  export_cmd->add_option("--level", exp.level, "Pyramid level index (0-2)");
  export_cmd->add_option("--samples", exp.samples, "Samples per image");
  export_cmd->add_option("--seed", exp.seed, "Sampling seed");
  export_cmd->add_option("--out", exp.out, "CSV output path")->required();
  export_cmd->add_option("--config", "key=value config file; explicit flags win");

  std::vector<std::string> args;
  try {
    args = expand_config_args(argc, argv);
  } catch (const cosim::data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  std::reverse(args.begin(), args.end());  // CLI11 vector parse is back-to-front

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (train_cmd->parsed()) return run_train(train);
    if (infer_cmd->parsed()) return run_infer(infer);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (contrast_cmd->parsed()) return run_contrast(contrast_history, contrast_out);
    if (export_cmd->parsed()) return run_export(exp);
  } catch (const cosim::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const cosim::numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const cosim::data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
