#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "canet/checkpoint.hpp"
#include "canet/config.hpp"
#include "canet/errors.hpp"
#include "canet/image_io.hpp"
#include "canet/trainer.hpp"
#include "verify/suites.hpp"

namespace fs = std::filesystem;
using namespace canet;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

std::vector<double> parse_scales(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--scales: cannot parse '" + item + "'");
    }
    if (!(out.back() > 0.0)) throw ConfigError("--scales entries must be > 0");
  }
  if (out.empty()) throw ConfigError("--scales must list at least one value");
  return out;
}

void print_params(const CanetModel& model) {
  const ModelGraph& g = model.graph();
  std::printf("topology=%s params_total=%zu backbone=%zu cam=%zu fsm=%zu "
              "decoder=%zu aux=%zu\n",
              to_string(model.config().cam.topology).c_str(), g.count_params(),
              g.count_params({"backbone"}), g.count_params({"cam"}),
              g.count_params({"fsm"}), g.count_params({"decoder"}),
              g.count_params({"aux"}));
}

CanetModel load_model(const fs::path& checkpoint) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig cfg = parse_run_config(ckpt.config_text);
  cfg.validate();
  CanetModel model(cfg.model, cfg.train.seed);
  restore_checkpoint(ckpt, model);
  return model;
}

int gen_data(const std::string& spec_path, const std::string& out, int count,
             int first) {
  RunConfig cfg;
  if (!spec_path.empty()) cfg = load_run_config(spec_path);
  cfg.scene.validate();
  if (count < 0) throw ConfigError("--count must be >= 0");
  if (first < 0) throw ConfigError("--first must be >= 0");
  write_dataset(out, generate_dataset(cfg.scene, count, first));
  std::printf("wrote %d samples to %s\n", count, out.c_str());
  return kOk;
}

int train_cmd(const std::string& config_path) {
  const RunConfig cfg = load_run_config(config_path);
  cfg.validate();
  if (cfg.train_data.empty()) throw ConfigError("paths.train_data is not set");
  const Dataset train_set = read_dataset(cfg.train_data);
  std::optional<Dataset> eval_set;
  if (!cfg.eval_data.empty()) eval_set = read_dataset(cfg.eval_data);

  CanetModel model(cfg.model, cfg.train.seed);
  print_params(model);
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train.log");
  if (!log) throw IoError("cannot write '" + (out_dir / "train.log").string() + "'");
  const std::string text = serialize_run_config(cfg);
  const TrainResult result = train(
      model, train_set, cfg.train, text,
      [&](const std::string& line) {
        std::puts(line.c_str());
        std::fflush(stdout);
        log << line << '\n';
      },
      eval_set ? &*eval_set : nullptr);
  save_checkpoint(out_dir / "checkpoint.cant", result.checkpoint);
  std::printf("checkpoint=%s final_loss=%.6f\n",
              (out_dir / "checkpoint.cant").string().c_str(), result.final_loss);
  return kOk;
}

int count_params_cmd(const std::string& config_path) {
  const RunConfig cfg = load_run_config(config_path);
  cfg.validate();
  print_params(CanetModel(cfg.model, cfg.train.seed));
  return kOk;
}

int eval_cmd(const std::string& checkpoint, const std::string& data,
             const std::string& scales, bool flip) {
  const std::vector<double> s = parse_scales(scales);
  const CanetModel model = load_model(checkpoint);
  const Dataset set = read_dataset(data);
  const EvalResult r = evaluate(model, set, s, flip);
  std::printf("pa=%.6f miou=%.6f\n", r.pixel_accuracy, r.iou.mean);
  for (std::size_t k = 0; k < r.iou.per_class.size(); ++k) {
    std::printf("class=%zu iou=%.6f\n", k, r.iou.per_class[k]);
  }
  return kOk;
}

int predict_cmd(const std::string& checkpoint, const std::string& image,
                const std::string& out, const std::string& scales, bool flip) {
  const std::vector<double> s = parse_scales(scales);
  const CanetModel model = load_model(checkpoint);
  const Tensor input = read_image(image);
  const LabelMap mask = argmax_channels(tta_probabilities(model, input, s, flip));
  write_label(out, mask);
  std::printf("wrote %dx%d mask to %s\n", mask.w, mask.h, out.c_str());
  return kOk;
}

int verify_cmd(const std::string& suite) {
  std::vector<verify::SuiteResult> results;
  if (suite == "gradcheck" || suite == "all") results.push_back(verify::gradcheck_suite());
  if (suite == "shapes" || suite == "all") results.push_back(verify::shapes_suite());
  if (suite == "metrics" || suite == "all") results.push_back(verify::metrics_suite());
  if (suite == "params" || suite == "all") results.push_back(verify::params_suite());
  bool ok = true;
  for (const auto& r : results) {
    std::printf("[%s] %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL");
    for (const auto& line : r.lines) std::printf("  %s\n", line.c_str());
    ok = ok && r.passed;
  }
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CANet semantic segmentation: data, training, evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string spec_path, out_dir = "data";
  int count = 100;
  int first = 0;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen->add_option("--spec", spec_path, "Config file whose [scene] section is used")
      ->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output directory")->capture_default_str();
  gen->add_option("--count", count, "Number of samples")->capture_default_str();
  gen->add_option("--first", first, "Index of the first scene (disjoint splits)")
      ->capture_default_str();

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", config_path, "Run config file")->required();

  auto* count_params = app.add_subcommand("count-params",
                                          "Print trainable parameter counts");
  count_params->add_option("--config", config_path, "Run config file")->required();

  std::string checkpoint, data, scales = "1.0";
  bool flip = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--scales", scales, "Comma-separated inference scales")
      ->capture_default_str();
  eval->add_option("--flip", flip, "Also average mirrored inputs (true/false)")
      ->capture_default_str();

  std::string image, mask_out = "mask.pgm";
  auto* predict = app.add_subcommand("predict", "Segment a single PPM image");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--image", image, "Input image (P6)")->required();
  predict->add_option("--out", mask_out, "Output mask (P5)")->capture_default_str();
  predict->add_option("--scales", scales, "Comma-separated inference scales")
      ->capture_default_str();
  predict->add_option("--flip", flip, "Also average mirrored inputs (true/false)")
      ->capture_default_str();

  std::string suite = "all";
  auto* verify = app.add_subcommand("verify", "Run built-in oracle suites");
  verify->add_option("--suite", suite, "gradcheck, shapes, metrics, params or all")
      ->check(CLI::IsMember({"gradcheck", "shapes", "metrics", "params", "all"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return gen_data(spec_path, out_dir, count, first);
    if (*train) return train_cmd(config_path);
    if (*count_params) return count_params_cmd(config_path);
    if (*eval) return eval_cmd(checkpoint, data, scales, flip);
    if (*predict) return predict_cmd(checkpoint, image, mask_out, scales, flip);
    if (*verify) return verify_cmd(suite);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kDivergence;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kFailed;
}
