#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "adrd/errors.hpp"
#include "adrd/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : raw) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw adrd::UsageError("--set expects key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& csv) {
  std::vector<std::int64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoll(item));
  if (out.empty()) throw adrd::UsageError("expected a comma-separated integer list, got '" + csv + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adrd: single-image super-resolution with weighted dense blocks,\n"
               "spatial attention and residual deconvolution upsampling"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a network on a directory of 8-bit RGB PNGs");
  std::string train_data, train_out, train_config, train_resume;
  std::vector<std::string> train_sets;
  train->add_option("--data", train_data, "Directory of training PNGs")->required();
  train->add_option("--out", train_out, "Output directory (log + checkpoints)")->required();
  train->add_option("--config", train_config, "key=value config file");
  train->add_option("--set", train_sets, "Override a config key (key=value, repeatable)");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");

  // sr
  auto* sr = app.add_subcommand("sr", "Upscale PNGs with a trained checkpoint");
  std::string sr_ckpt, sr_input, sr_out;
  std::int64_t sr_tile = 0, sr_overlap = 8;
  sr->add_option("--checkpoint", sr_ckpt, "Trained checkpoint")->required();
  sr->add_option("--input", sr_input, "LR PNG file or directory")->required();
  sr->add_option("--out", sr_out, "Output directory")->required();
  sr->add_option("--tile", sr_tile, "Tile size in LR pixels (0 = whole image)");
  sr->add_option("--tile-overlap", sr_overlap, "Tile overlap in LR pixels");

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/RCIR over a directory of HR PNGs");
  std::string eval_hr, eval_ckpt, eval_csv, eval_extractor = "random";
  int eval_crop = -1, eval_scale = 4, eval_depth = 3;
  std::uint64_t eval_seed = 1001;
  eval->add_option("--hr", eval_hr, "Directory of HR PNGs")->required();
  eval->add_option("--out", eval_csv, "Output CSV path")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint; omit to score the bicubic baseline");
  eval->add_option("--scale", eval_scale, "Scale factor when no checkpoint is given");
  eval->add_option("--border-crop", eval_crop, "Metric border crop (-1 = scale factor)");
  eval->add_option("--extractor", eval_extractor, "RCIR feature extractor: random|identity");
  eval->add_option("--extractor-seed", eval_seed, "Random extractor seed");
  eval->add_option("--extractor-depth", eval_depth, "Random extractor depth");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train tiny architecture variants and tabulate scores");
  std::string ablate_data, ablate_csv, ablate_growth = "4,8";
  std::int64_t ablate_steps = 200, ablate_patch = 40;
  std::uint64_t ablate_seed = 0;
  ablate->add_option("--data", ablate_data, "Directory of PNGs (train and score)")->required();
  ablate->add_option("--out", ablate_csv, "Output CSV path")->required();
  ablate->add_option("--growth-rates", ablate_growth, "Comma-separated growth rates");
  ablate->add_option("--steps", ablate_steps, "Optimization steps per variant");
  ablate->add_option("--patch", ablate_patch, "HR patch size");
  ablate->add_option("--seed", ablate_seed, "Seed");

  // noise-eval
  auto* noise = app.add_subcommand("noise-eval", "Bicubic/model PSNR under the four noise variances");
  std::string noise_hr, noise_ckpt, noise_csv;
  std::uint64_t noise_seed = 0;
  int noise_scale = 4;
  bool noise_on_hr = false;
  noise->add_option("--hr", noise_hr, "Directory of HR PNGs")->required();
  noise->add_option("--out", noise_csv, "Output CSV path")->required();
  noise->add_option("--checkpoint", noise_ckpt, "Checkpoint; omit for the bicubic baseline");
  noise->add_option("--scale", noise_scale, "Scale factor when no checkpoint is given");
  noise->add_option("--seed", noise_seed, "Noise seed");
  noise->add_flag("--noise-on-hr", noise_on_hr, "Corrupt HR before degradation instead of the LR input");

  // export-weights
  auto* exportw = app.add_subcommand("export-weights", "Dump the edge-weight matrices of a checkpoint");
  std::string export_ckpt, export_out;
  exportw->add_option("--checkpoint", export_ckpt, "Checkpoint to inspect")->required();
  exportw->add_option("--out", export_out, "Output text file (console only if omitted)");

  try {
    app.parse(argc, argv);

    if (train->parsed()) {
      adrd::TrainRunOptions options;
      options.data_dir = train_data;
      options.out_dir = train_out;
      options.config_file = train_config;
      options.overrides = parse_overrides(train_sets);
      options.resume_checkpoint = train_resume;
      options.console = &std::cout;
      adrd::run_train(options);
    } else if (sr->parsed()) {
      adrd::SrRunOptions options;
      options.checkpoint = sr_ckpt;
      options.input = sr_input;
      options.out_dir = sr_out;
      options.tile_size = sr_tile;
      options.tile_overlap = sr_overlap;
      options.console = &std::cout;
      adrd::run_sr(options);
    } else if (eval->parsed()) {
      adrd::EvalRunOptions options;
      options.hr_dir = eval_hr;
      options.checkpoint = eval_ckpt;
      options.out_csv = eval_csv;
      options.border_crop = eval_crop;
      options.scale = eval_scale;
      options.extractor = eval_extractor;
      options.extractor_seed = eval_seed;
      options.extractor_depth = eval_depth;
      options.console = &std::cout;
      adrd::run_eval(options);
    } else if (ablate->parsed()) {
      adrd::AblateRunOptions options;
      options.data_dir = ablate_data;
      options.out_csv = ablate_csv;
      options.growth_rates = parse_int_list(ablate_growth);
      options.steps = ablate_steps;
      options.hr_patch_size = ablate_patch;
      options.seed = ablate_seed;
      options.console = &std::cout;
      adrd::run_ablate(options);
    } else if (noise->parsed()) {
      adrd::NoiseEvalRunOptions options;
      options.hr_dir = noise_hr;
      options.checkpoint = noise_ckpt;
      options.out_csv = noise_csv;
      options.seed = noise_seed;
      options.noise_on_hr = noise_on_hr;
      options.scale = noise_scale;
      options.console = &std::cout;
      adrd::run_noise_eval(options);
    } else if (exportw->parsed()) {
      adrd::ExportWeightsRunOptions options;
      options.checkpoint = export_ckpt;
      options.out_path = export_out;
      options.console = &std::cout;
      adrd::run_export_weights(options);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  } catch (const adrd::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const adrd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const adrd::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
