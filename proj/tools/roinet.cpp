// Command-line front end: dataset generation, staged training, evaluation,
// baselines, and report rendering. Exit codes: 0 success, 1 usage,
// 2 data/format, 3 training.
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "roinet/baselines.hpp"
#include "roinet/checkpoint.hpp"
#include "roinet/csvreport.hpp"
#include "roinet/errors.hpp"
#include "roinet/imageio.hpp"
#include "roinet/metrics.hpp"
#include "roinet/network.hpp"
#include "roinet/rng.hpp"
#include "roinet/runconfig.hpp"
#include "roinet/synth.hpp"
#include "roinet/train.hpp"

namespace {

using namespace roinet;

const std::vector<int> kBlocks{16, 32, 64, 64};
constexpr int kNumClasses = 3;

struct Cli {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string data_dir = "data";
  std::string out_dir = "out";

  // subcommand-local state
  bool plain = false;
  std::string checkpoint;
  std::string roi_checkpoint;
  std::string net_checkpoint;
  std::string method;
  std::string split_name = "test";
  int render_count = 8;
};

RunConfig load_run_config(const Cli& cli) {
  RunConfig rc = cli.config_path.empty() ? RunConfig{} : load_config(cli.config_path);
  if (cli.seed_set) rc.seed = cli.seed;
  rc.validate();
  return rc;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string ckpt_path(const Cli& cli, const char* name) {
  return cli.out_dir + "/" + name;
}

void print_losses(const std::vector<double>& losses) {
  for (std::size_t i = 0; i < losses.size(); ++i)
    std::printf("epoch %zu/%zu mean loss %.6f\n", i + 1, losses.size(), losses[i]);
}

void emit_report(const Cli& cli, MetricsReport rep) {
  ensure_out_dir(cli.out_dir);
  append_metrics_csv(cli.out_dir + "/metrics.csv", rep);
  std::fputs(render_metrics_table({rep}).c_str(), stdout);
}

StageConfig stage_config(const RunConfig& rc, int epochs, double lr) {
  StageConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.batch_size = rc.batch_size;
  c.momentum = rc.momentum;
  c.seed = rc.seed;
  return c;
}

std::vector<Sample> load_data(const Cli& cli) { return read_dataset(cli.data_dir); }

const std::vector<int>& pick_split(const Cli& cli, const SplitIndices& split) {
  if (cli.split_name == "train") return split.train;
  if (cli.split_name == "test") return split.test;
  throw ConfigError("unknown split '" + cli.split_name + "' (train|test)");
}

int image_extent(const std::vector<Sample>& ds) { return ds[0].image.shape()[1]; }

void cmd_gen_data(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = gen_dataset(rc.gen_config());
  write_dataset(cli.data_dir, ds);
  std::printf("wrote %zu samples to %s\n", ds.size(), cli.data_dir.c_str());
}

void cmd_train_roi(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);

  Rng rng(seed_from(rc.seed, "roi-init"));
  Network roi(build_roi_spec(kNumClasses, image_extent(ds), kBlocks), rng);
  const std::vector<double> weights =
      pixel_class_weights(ds, split.train, kNumClasses, rc.class_weight_mode);
  print_losses(train_roi_stage(roi, ds, split.train,
                               stage_config(rc, rc.epochs_roi, rc.lr_roi), weights));

  ensure_out_dir(cli.out_dir);
  save_checkpoint(roi, ckpt_path(cli, "roi.ckpt"));
  MetricsReport rep = evaluate_roi(roi, ds, split.test);
  rep.method = "roi";
  rep.seed = rc.seed;
  emit_report(cli, rep);
}

void cmd_train_cls(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);
  const int hw = image_extent(ds);

  Rng rng(seed_from(rc.seed, "cls-init"));
  if (cli.plain) {
    // The fused path fine-tunes its classifier for another epochs_e2e after
    // stage B; the ablation control gets the same total step count.
    Network cls(build_classifier_spec(3, kNumClasses, hw, kBlocks), rng);
    print_losses(train_plain(cls, ds, split.train,
                             stage_config(rc, rc.epochs_cls + rc.epochs_e2e, rc.lr_cls)));
    ensure_out_dir(cli.out_dir);
    save_checkpoint(cls, ckpt_path(cli, "cls_plain.ckpt"));
    MetricsReport rep = evaluate_classifier(cls, ds, split.test);
    rep.method = "plain";
    rep.seed = rc.seed;
    emit_report(cli, rep);
    return;
  }

  const Network roi = load_checkpoint(ckpt_path(cli, "roi.ckpt"));
  Network cls(build_classifier_spec(3 + kNumClasses, kNumClasses, hw, kBlocks), rng);
  print_losses(train_cls_stage(cls, roi, ds, split.train,
                               stage_config(rc, rc.epochs_cls, rc.lr_cls),
                               rc.stage_b_ground_truth));
  ensure_out_dir(cli.out_dir);
  save_checkpoint(cls, ckpt_path(cli, "cls.ckpt"));
  MetricsReport rep = evaluate_classifier(fuse_networks(roi, cls), ds, split.test);
  rep.method = "cls";
  rep.seed = rc.seed;
  emit_report(cli, rep);
}

void cmd_train_e2e(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);

  const Network roi = load_checkpoint(ckpt_path(cli, "roi.ckpt"));
  const Network cls = load_checkpoint(ckpt_path(cli, "cls.ckpt"));
  Network fused = fuse_networks(roi, cls);
  print_losses(train_end_to_end(fused, ds, split.train,
                                stage_config(rc, rc.epochs_e2e, rc.lr_e2e)));

  ensure_out_dir(cli.out_dir);
  save_checkpoint(fused, ckpt_path(cli, "fused.ckpt"));
  MetricsReport rep = evaluate_classifier(fused, ds, split.test);
  rep.method = "fused";
  rep.seed = rc.seed;
  emit_report(cli, rep);
}

std::string path_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

void cmd_eval(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);
  const std::vector<int>& idx = pick_split(cli, split);
  const int hw = image_extent(ds);

  const Network net = load_checkpoint(cli.checkpoint);
  MetricsReport rep;
  if (net.spec().in_channels == 3 + kNumClasses) {
    // Fuse with its segmentation front end so the classifier sees the same
    // inputs it was trained on.
    const Network roi = load_checkpoint(cli.roi_checkpoint.empty()
                                            ? ckpt_path(cli, "roi.ckpt")
                                            : cli.roi_checkpoint);
    rep = evaluate_classifier(fuse_networks(roi, net), ds, idx);
  } else {
    const Shape out =
        infer_shapes(net.spec(), {1, net.spec().in_channels, hw, hw}).back();
    rep = out.size() == 4 ? evaluate_roi(net, ds, idx)
                          : evaluate_classifier(net, ds, idx);
  }
  rep.method = path_stem(cli.checkpoint);
  rep.seed = rc.seed;
  emit_report(cli, rep);
}

void cmd_baseline(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);

  BaselineConfig bc;
  bc.gmm_components = rc.gmm_components;
  bc.gmm_iterations = rc.gmm_iterations;
  bc.svm_lambda = rc.svm_lambda;
  bc.svm_epochs = rc.svm_epochs;
  bc.cluster_thresholds = rc.cluster_thresholds;
  bc.seed = rc.seed;

  MetricsReport rep;
  if (cli.method == "clustering") {
    rep = run_baseline(cli.method, ds, split, bc, nullptr);
  } else {
    const std::string path = cli.net_checkpoint.empty()
                                 ? ckpt_path(cli, "cls_plain.ckpt")
                                 : cli.net_checkpoint;
    const Network net = load_checkpoint(path);
    rep = run_baseline(cli.method, ds, split, bc, &net);
  }
  emit_report(cli, rep);
}

void cmd_report(const Cli& cli) {
  std::fputs(render_metrics_table(read_metrics_csv(cli.out_dir + "/metrics.csv")).c_str(),
             stdout);
}

void cmd_render_roi(const Cli& cli) {
  const RunConfig rc = load_run_config(cli);
  const std::vector<Sample> ds = load_data(cli);
  const SplitIndices split = split_dataset(ds, rc.split_ratio, rc.seed);
  const std::vector<int>& idx = pick_split(cli, split);

  const std::string path =
      cli.checkpoint.empty() ? ckpt_path(cli, "roi.ckpt") : cli.checkpoint;
  const Network roi = load_checkpoint(path);

  const std::string dir = cli.out_dir + "/render";
  ensure_out_dir(dir);
  const int n = std::min<int>(cli.render_count, static_cast<int>(idx.size()));
  for (int i = 0; i < n; ++i) {
    const Sample& s = ds[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    const LabelMask pred = roi_predict_mask(roi, s.image);
    char name[64];
    std::snprintf(name, sizeof name, "%s/%s_%02d", dir.c_str(), cli.split_name.c_str(), i);
    write_pgm_mask(std::string(name) + "_pred.pgm", pred);
    write_roi_montage(std::string(name) + ".ppm", s.image, s.mask, pred);
  }
  std::printf("wrote %d renders to %s\n", n, dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  CLI::App app{"ROI-aware leaf disease pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  auto* seed_opt = app.add_option("--seed", cli.seed, "master seed override");
  app.add_option("--config", cli.config_path, "key = value configuration file");
  app.add_option("--data-dir", cli.data_dir, "dataset directory");
  app.add_option("--out", cli.out_dir, "output directory");

  app.add_subcommand("gen-data", "generate the synthetic dataset + manifest");
  app.add_subcommand("train-roi", "train the segmentation subnet (stage A)");
  auto* cls = app.add_subcommand("train-cls", "train the classifier (stage B)");
  cls->add_flag("--plain", cli.plain, "3-channel classifier on raw images");
  app.add_subcommand("train-e2e", "fine-tune the fused network (stage C)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", cli.checkpoint, "checkpoint to evaluate")
      ->required();
  eval->add_option("--roi", cli.roi_checkpoint,
                   "segmentation checkpoint for 6-channel classifiers");
  eval->add_option("--split", cli.split_name, "train|test (default test)");

  auto* base = app.add_subcommand("baseline", "run a comparison method");
  base->add_option("method", cli.method, "clustering|mdfep|bilinear")->required();
  base->add_option("--net", cli.net_checkpoint,
                   "classifier checkpoint for mdfep/bilinear taps");

  app.add_subcommand("report", "render the metrics CSV as a table");

  auto* render = app.add_subcommand("render-roi", "write predicted-mask montages");
  render->add_option("--checkpoint", cli.checkpoint, "segmentation checkpoint");
  render->add_option("--count", cli.render_count, "samples to render");
  render->add_option("--split", cli.split_name, "train|test (default test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  cli.seed_set = seed_opt->count() > 0;

  try {
    if (app.got_subcommand("gen-data")) cmd_gen_data(cli);
    else if (app.got_subcommand("train-roi")) cmd_train_roi(cli);
    else if (app.got_subcommand("train-cls")) cmd_train_cls(cli);
    else if (app.got_subcommand("train-e2e")) cmd_train_e2e(cli);
    else if (app.got_subcommand("eval")) cmd_eval(cli);
    else if (app.got_subcommand("baseline")) cmd_baseline(cli);
    else if (app.got_subcommand("report")) cmd_report(cli);
    else if (app.got_subcommand("render-roi")) cmd_render_roi(cli);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
