#include "adrd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "adrd/checkpoint.hpp"
#include "adrd/errors.hpp"
#include "adrd/metrics.hpp"
#include "adrd/rng.hpp"

namespace fs = std::filesystem;

namespace adrd {

namespace {

bool network_apply_kv(NetworkConfig& cfg, const std::string& key, const std::string& value) {
  // Reuse the strict parser one key at a time.
  try {
    cfg = NetworkConfig::from_kv(cfg.to_kv() + key + "=" + value + "\n");
  } catch (const DataError&) {
    return false;
  }
  return true;
}

void apply_setting(TrainConfig& train, NetworkConfig& network, const std::string& key,
                   const std::string& value) {
  if (train.apply_kv(key, value)) return;
  if (network_apply_kv(network, key, value)) return;
  throw UsageError("unknown config key '" + key + "'");
}

void print_config(std::ostream* console, const TrainConfig* train, const NetworkConfig* network,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
  if (!console) return;
  *console << "resolved configuration:\n";
  if (network) {
    std::istringstream is(network->to_kv());
    std::string line;
    while (std::getline(is, line)) *console << "  " << line << '\n';
  }
  if (train) {
    std::istringstream is(train->to_kv());
    std::string line;
    while (std::getline(is, line)) *console << "  " << line << '\n';
  }
  for (const auto& [k, v] : extra) *console << "  " << k << "=" << v << '\n';
  *console << std::flush;
}

std::vector<RgbImage> load_dataset(const std::string& dir) {
  std::vector<RgbImage> images;
  for (const auto& path : list_png_files(dir)) images.push_back(read_png(path));
  return images;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("output directory must not be empty");
  fs::create_directories(dir);
}

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string psnr_str(double v) {
  if (std::isinf(v)) return "inf";
  return format_double(v, "%.6f");
}

}  // namespace

void parse_run_config(const std::string& text, TrainConfig& train, NetworkConfig& network) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config: malformed line '" + line + "'");
    apply_setting(train, network, line.substr(0, eq), line.substr(eq + 1));
  }
}

RgbImage upscale_image(const AdrdNetwork<float>& net, const RgbImage& lr, std::int64_t tile_size,
                       std::int64_t overlap) {
  NoGradGuard ng;
  const int scale = net.config().scale_factor;
  if (tile_size <= 0 || (lr.height <= tile_size && lr.width <= tile_size))
    return tensor_to_image(net.forward(image_to_tensor(lr)));

  if (overlap < 0) throw UsageError("tile overlap must be >= 0");
  const std::int64_t core = tile_size - 2 * overlap;
  if (core < 1) throw UsageError("tile size must exceed twice the overlap");

  RgbImage out(lr.height * scale, lr.width * scale);
  for (std::int64_t cy = 0; cy < lr.height; cy += core) {
    const std::int64_t cy1 = std::min(cy + core, lr.height);
    const std::int64_t ty0 = std::max<std::int64_t>(0, cy - overlap);
    const std::int64_t ty1 = std::min(lr.height, cy1 + overlap);
    for (std::int64_t cx = 0; cx < lr.width; cx += core) {
      const std::int64_t cx1 = std::min(cx + core, lr.width);
      const std::int64_t tx0 = std::max<std::int64_t>(0, cx - overlap);
      const std::int64_t tx1 = std::min(lr.width, cx1 + overlap);

      const RgbImage tile = crop(lr, ty0, tx0, ty1 - ty0, tx1 - tx0);
      const RgbImage sr_tile = tensor_to_image(net.forward(image_to_tensor(tile)));
      for (int c = 0; c < 3; ++c)
        for (std::int64_t y = cy * scale; y < cy1 * scale; ++y)
          for (std::int64_t x = cx * scale; x < cx1 * scale; ++x)
            out.at(c, y, x) = sr_tile.at(c, y - ty0 * scale, x - tx0 * scale);
    }
  }
  return out;
}

TrainReport run_train(const TrainRunOptions& options) {
  TrainConfig train;
  NetworkConfig network;
  if (!options.config_file.empty()) {
    std::ifstream is(options.config_file);
    if (!is) throw DataError("cannot open config file '" + options.config_file + "'");
    std::ostringstream text;
    text << is.rdbuf();
    parse_run_config(text.str(), train, network);
  }
  for (const auto& [k, v] : options.overrides) apply_setting(train, network, k, v);
  train.validate();

  std::unique_ptr<AdrdNetwork<float>> net;
  TrainState state;
  if (!options.resume_checkpoint.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(options.resume_checkpoint);
    net = std::make_unique<AdrdNetwork<float>>(std::move(loaded.net));
    if (loaded.adam) state.adam.restore(*loaded.adam);
    state.global_step = loaded.global_step;
  } else {
    network.validate();
    net = std::make_unique<AdrdNetwork<float>>(network, train.seed);
  }

  print_config(options.console, &train, &net->config(),
               {{"data_dir", options.data_dir},
                {"out_dir", options.out_dir},
                {"resume", options.resume_checkpoint.empty() ? "no" : options.resume_checkpoint}});

  ensure_dir(options.out_dir);
  const std::vector<RgbImage> dataset = load_dataset(options.data_dir);
  TrainIo io{options.out_dir + "/train_log.csv", options.out_dir, options.console};
  return run_training(*net, state, dataset, train, io);
}

std::vector<std::string> run_sr(const SrRunOptions& options) {
  LoadedCheckpoint loaded = load_checkpoint(options.checkpoint);
  const int scale = loaded.net.config().scale_factor;

  print_config(options.console, nullptr, &loaded.net.config(),
               {{"checkpoint", options.checkpoint},
                {"input", options.input},
                {"out_dir", options.out_dir},
                {"tile_size", std::to_string(options.tile_size)},
                {"tile_overlap", std::to_string(options.tile_overlap)}});

  std::vector<std::string> inputs;
  if (fs::is_directory(options.input))
    inputs = list_png_files(options.input);
  else
    inputs.push_back(options.input);
  ensure_dir(options.out_dir);

  std::vector<std::string> written;
  for (const auto& path : inputs) {
    const RgbImage lr = read_png(path);
    const RgbImage sr = upscale_image(loaded.net, lr, options.tile_size, options.tile_overlap);
    const std::string out_path = options.out_dir + "/" + stem_of(path) + "_x" + std::to_string(scale) + ".png";
    write_png(sr, out_path);
    if (options.console) *options.console << out_path << '\n';
    written.push_back(out_path);
  }
  return written;
}

std::vector<EvalRow> run_eval(const EvalRunOptions& options) {
  std::unique_ptr<AdrdNetwork<float>> net;
  int scale = options.scale;
  if (!options.checkpoint.empty()) {
    net = std::make_unique<AdrdNetwork<float>>(load_checkpoint(options.checkpoint).net);
    scale = net->config().scale_factor;
  }
  const int crop_px = options.border_crop >= 0 ? options.border_crop : scale;

  std::unique_ptr<FeatureExtractor> phi;
  if (options.extractor == "identity")
    phi = std::make_unique<IdentityFeatureExtractor>();
  else if (options.extractor == "random")
    phi = std::make_unique<RandomConvFeatureExtractor>(options.extractor_seed, options.extractor_depth);
  else
    throw UsageError("unknown extractor '" + options.extractor + "' (expected random|identity)");

  print_config(options.console, nullptr, nullptr,
               {{"hr_dir", options.hr_dir},
                {"sr_source", options.checkpoint.empty() ? "bicubic" : options.checkpoint},
                {"out_csv", options.out_csv},
                {"scale", std::to_string(scale)},
                {"border_crop", std::to_string(crop_px)},
                {"extractor", phi->describe()}});

  std::vector<EvalRow> rows;
  double acc_psnr = 0.0, acc_ssim = 0.0, acc_rcir = 0.0;
  const auto files = list_png_files(options.hr_dir);
  for (const auto& path : files) {
    const RgbImage hr = modcrop(read_png(path), scale);
    const RgbImage lr = bicubic_resample(hr, hr.height / scale, hr.width / scale);
    const RgbImage bicubic = bicubic_resample(lr, hr.height, hr.width);
    const RgbImage sr = net ? upscale_image(*net, lr) : bicubic;

    EvalRow row;
    row.image = stem_of(path);
    row.psnr_db = psnr_rgb(hr, sr, crop_px);
    row.ssim = ssim_rgb(hr, sr, crop_px);
    row.rcir = rcir(hr, sr, bicubic, *phi);
    acc_psnr += row.psnr_db;
    acc_ssim += row.ssim;
    acc_rcir += row.rcir;
    rows.push_back(row);
  }

  if (!options.out_csv.empty()) {
    std::ofstream csv(options.out_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot open '" + options.out_csv + "' for writing");
    csv << "image,psnr_db,ssim,rcir\n";
    for (const auto& r : rows)
      csv << r.image << ',' << psnr_str(r.psnr_db) << ',' << format_double(r.ssim, "%.6f") << ','
          << format_double(r.rcir, "%.9g") << '\n';
    const auto n = static_cast<double>(rows.size());
    csv << "mean," << psnr_str(acc_psnr / n) << ',' << format_double(acc_ssim / n, "%.6f") << ','
        << format_double(acc_rcir / n, "%.9g") << '\n';
  }
  if (options.console)
    *options.console << "evaluated " << rows.size() << " images; mean psnr "
                     << psnr_str(acc_psnr / static_cast<double>(rows.size())) << " dB\n";
  return rows;
}

namespace {

struct AblateVariant {
  std::string name;
  NetworkConfig config;
};

}  // namespace

std::vector<AblateRow> run_ablate(const AblateRunOptions& options) {
  if (options.growth_rates.empty()) throw UsageError("ablate: need at least one growth rate");

  NetworkConfig base;
  base.dense_layers_per_group = {2, 3};
  base.attention_blend = 0.5;
  base.scale_factor = 4;

  std::vector<AblateVariant> variants;
  for (const auto g : options.growth_rates) {
    NetworkConfig cfg = base;
    cfg.growth_rate = g;
    cfg.primary_channels = g;
    cfg.bottleneck_channels = 2 * g;
    cfg.weighted_dense = false;
    variants.push_back({"DB-" + std::to_string(g), cfg});
    cfg.weighted_dense = true;
    variants.push_back({"WDB-" + std::to_string(g), cfg});
  }
  {
    NetworkConfig cfg = base;
    const auto g = options.growth_rates.back();
    cfg.growth_rate = g;
    cfg.primary_channels = g;
    cfg.bottleneck_channels = 2 * g;
    cfg.use_attention = false;
    variants.push_back({"noSA-" + std::to_string(g), cfg});
    cfg.use_attention = true;
    cfg.residual_upsampling = false;
    variants.push_back({"D-" + std::to_string(g), cfg});
  }

  print_config(options.console, nullptr, nullptr,
               {{"data_dir", options.data_dir},
                {"out_csv", options.out_csv},
                {"steps", std::to_string(options.steps)},
                {"hr_patch_size", std::to_string(options.hr_patch_size)},
                {"seed", std::to_string(options.seed)},
                {"variants", std::to_string(variants.size())}});

  const std::vector<RgbImage> dataset = load_dataset(options.data_dir);

  std::vector<AblateRow> rows;
  for (const auto& variant : variants) {
    TrainConfig train;
    train.hr_patch_size = options.hr_patch_size;
    train.scale = variant.config.scale_factor;
    train.batch_size = 4;
    train.initial_lr = 1e-3;
    train.lr_decay_every = 1000000;
    train.epochs = 1;
    train.seed = options.seed;
    train.val_images = 0;
    // One epoch sized to the requested step budget.
    train.patches_per_image = std::max<std::int64_t>(
        1, (options.steps * train.batch_size + static_cast<std::int64_t>(dataset.size()) - 1) /
               static_cast<std::int64_t>(dataset.size()));

    AdrdNetwork<float> net(variant.config, options.seed);
    TrainState state;
    run_training(net, state, dataset, train, {});

    double acc_psnr = 0.0, acc_ssim = 0.0;
    for (const auto& img : dataset) {
      const RgbImage hr = modcrop(img, train.scale);
      const RgbImage lr = bicubic_resample(hr, hr.height / train.scale, hr.width / train.scale);
      const RgbImage sr = upscale_image(net, lr);
      acc_psnr += psnr_rgb(hr, sr, train.scale);
      acc_ssim += ssim_rgb(hr, sr, train.scale);
    }
    AblateRow row{variant.name, acc_psnr / static_cast<double>(dataset.size()),
                  acc_ssim / static_cast<double>(dataset.size())};
    rows.push_back(row);
    if (options.console)
      *options.console << row.variant << "  psnr " << psnr_str(row.psnr_db) << "  ssim "
                       << format_double(row.ssim, "%.4f") << '\n';
  }

  if (!options.out_csv.empty()) {
    std::ofstream csv(options.out_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot open '" + options.out_csv + "' for writing");
    csv << "variant,psnr_db,ssim\n";
    for (const auto& r : rows)
      csv << r.variant << ',' << psnr_str(r.psnr_db) << ',' << format_double(r.ssim, "%.6f") << '\n';
  }
  return rows;
}

std::vector<NoiseEvalRow> run_noise_eval(const NoiseEvalRunOptions& options) {
  std::unique_ptr<AdrdNetwork<float>> net;
  int scale = options.scale;
  if (!options.checkpoint.empty()) {
    net = std::make_unique<AdrdNetwork<float>>(load_checkpoint(options.checkpoint).net);
    scale = net->config().scale_factor;
  }

  print_config(options.console, nullptr, nullptr,
               {{"hr_dir", options.hr_dir},
                {"sr_source", options.checkpoint.empty() ? "bicubic" : options.checkpoint},
                {"out_csv", options.out_csv},
                {"scale", std::to_string(scale)},
                {"seed", std::to_string(options.seed)},
                {"noise_on", options.noise_on_hr ? "hr" : "lr"}});

  std::vector<NoiseEvalRow> rows;
  const auto files = list_png_files(options.hr_dir);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const RgbImage hr = modcrop(read_png(files[i]), scale);
    for (std::size_t vi = 0; vi < 4; ++vi) {
      const double variance = kNoiseVariances[vi];
      const std::uint64_t noise_seed = Rng::mix(options.seed, i * 16 + vi);
      RgbImage lr;
      if (options.noise_on_hr) {
        const RgbImage noisy_hr = add_gaussian_noise(hr, variance, noise_seed);
        lr = bicubic_resample(noisy_hr, hr.height / scale, hr.width / scale);
      } else {
        lr = add_gaussian_noise(bicubic_resample(hr, hr.height / scale, hr.width / scale), variance,
                                noise_seed);
      }
      const RgbImage sr = net ? upscale_image(*net, lr) : bicubic_resample(lr, hr.height, hr.width);
      rows.push_back({stem_of(files[i]), variance, psnr_rgb(hr, sr, scale)});
    }
  }

  if (!options.out_csv.empty()) {
    std::ofstream csv(options.out_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot open '" + options.out_csv + "' for writing");
    csv << "image,variance,psnr_db\n";
    for (const auto& r : rows)
      csv << r.image << ',' << format_double(r.variance, "%.9g") << ',' << psnr_str(r.psnr_db) << '\n';
  }
  if (options.console) *options.console << "noise sweep wrote " << rows.size() << " rows\n";
  return rows;
}

std::string run_export_weights(const ExportWeightsRunOptions& options) {
  LoadedCheckpoint loaded = load_checkpoint(options.checkpoint);
  print_config(options.console, nullptr, &loaded.net.config(),
               {{"checkpoint", options.checkpoint},
                {"out_path", options.out_path.empty() ? "(console)" : options.out_path}});
  const std::string text = format_edge_weight_matrices(loaded.net);
  if (!options.out_path.empty()) {
    std::ofstream os(options.out_path, std::ios::trunc);
    if (!os) throw DataError("cannot open '" + options.out_path + "' for writing");
    os << text;
  }
  if (options.console) *options.console << text;
  return text;
}

}  // namespace adrd
