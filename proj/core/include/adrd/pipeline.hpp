#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "adrd/image.hpp"
#include "adrd/network.hpp"
#include "adrd/trainer.hpp"

namespace adrd {

// Parses flat key=value text holding both training and topology keys.
// Unknown keys raise UsageError.
void parse_run_config(const std::string& text, TrainConfig& train, NetworkConfig& network);

// Single-image upscaling; tile_size > 0 enables overlap-and-crop tiling in LR
// pixel units (tile cores are stitched after cropping `overlap` on each side).
RgbImage upscale_image(const AdrdNetwork<float>& net, const RgbImage& lr, std::int64_t tile_size = 0,
                       std::int64_t overlap = 8);

struct TrainRunOptions {
  std::string data_dir;
  std::string out_dir;
  std::string config_file;  // optional key=value file
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string resume_checkpoint;  // optional; topology then comes from the file
  std::ostream* console = nullptr;
};
TrainReport run_train(const TrainRunOptions& options);

struct SrRunOptions {
  std::string checkpoint;
  std::string input;  // one PNG or a directory of PNGs
  std::string out_dir;
  std::int64_t tile_size = 0;  // 0 = whole image
  std::int64_t tile_overlap = 8;
  std::ostream* console = nullptr;
};
std::vector<std::string> run_sr(const SrRunOptions& options);  // returns written paths

struct EvalRunOptions {
  std::string hr_dir;
  std::string checkpoint;  // empty: the bicubic baseline stands in for SR
  std::string out_csv;
  int border_crop = -1;  // -1: use the scale factor
  int scale = 4;         // used when no checkpoint dictates one
  std::string extractor = "random";  // or "identity"
  std::uint64_t extractor_seed = 1001;
  int extractor_depth = 3;
  std::ostream* console = nullptr;
};
struct EvalRow {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double rcir = 0.0;
};
std::vector<EvalRow> run_eval(const EvalRunOptions& options);

struct AblateRunOptions {
  std::string data_dir;
  std::string out_csv;
  std::vector<std::int64_t> growth_rates = {4, 8};
  std::int64_t steps = 200;
  std::int64_t hr_patch_size = 40;
  std::uint64_t seed = 0;
  std::ostream* console = nullptr;
};
struct AblateRow {
  std::string variant;
  double psnr_db = 0.0;
  double ssim = 0.0;
};
std::vector<AblateRow> run_ablate(const AblateRunOptions& options);

struct NoiseEvalRunOptions {
  std::string hr_dir;
  std::string checkpoint;  // empty: bicubic baseline
  std::string out_csv;
  std::uint64_t seed = 0;
  bool noise_on_hr = false;  // default corrupts the LR input
  int scale = 4;
  std::ostream* console = nullptr;
};
struct NoiseEvalRow {
  std::string image;
  double variance = 0.0;
  double psnr_db = 0.0;
};
std::vector<NoiseEvalRow> run_noise_eval(const NoiseEvalRunOptions& options);

struct ExportWeightsRunOptions {
  std::string checkpoint;
  std::string out_path;  // empty: console only
  std::ostream* console = nullptr;
};
std::string run_export_weights(const ExportWeightsRunOptions& options);

}  // namespace adrd
