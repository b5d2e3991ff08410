#include "adrd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "adrd/checkpoint.hpp"
#include "adrd/errors.hpp"
#include "adrd/metrics.hpp"

namespace adrd {

void TrainConfig::validate() const {
  if (scale < 1 || (scale & (scale - 1)) != 0)
    throw std::invalid_argument("train config: scale must be a power of 2");
  if (hr_patch_size <= 0 || hr_patch_size % scale != 0)
    throw std::invalid_argument("train config: hr_patch_size must be a positive multiple of scale");
  if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be positive");
  if (initial_lr <= 0.0) throw std::invalid_argument("train config: initial_lr must be positive");
  if (lr_decay_every <= 0) throw std::invalid_argument("train config: lr_decay_every must be positive");
  if (lr_decay_factor <= 0.0) throw std::invalid_argument("train config: lr_decay_factor must be positive");
  if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
  if (patches_per_image <= 0) throw std::invalid_argument("train config: patches_per_image must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("train config: checkpoint_every must be >= 0");
  if (val_images < 0) throw std::invalid_argument("train config: val_images must be >= 0");
}

std::int64_t TrainConfig::steps_per_epoch(std::size_t dataset_size) const {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(dataset_size) * patches_per_image / batch_size);
}

double lr_at_epoch(const TrainConfig& cfg, std::int64_t epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at_epoch: negative epoch");
  return cfg.initial_lr * std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

namespace {

std::string double_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::to_kv() const {
  std::ostringstream os;
  os << "hr_patch_size=" << hr_patch_size << '\n';
  os << "scale=" << scale << '\n';
  os << "batch_size=" << batch_size << '\n';
  os << "initial_lr=" << double_str(initial_lr) << '\n';
  os << "lr_decay_every=" << lr_decay_every << '\n';
  os << "lr_decay_factor=" << double_str(lr_decay_factor) << '\n';
  os << "epochs=" << epochs << '\n';
  os << "seed=" << seed << '\n';
  os << "augment_hflip=" << (augment.hflip ? 1 : 0) << '\n';
  os << "augment_vflip=" << (augment.vflip ? 1 : 0) << '\n';
  os << "augment_rot90=" << (augment.rot90 ? 1 : 0) << '\n';
  os << "augment_rot180=" << (augment.rot180 ? 1 : 0) << '\n';
  os << "augment_rot270=" << (augment.rot270 ? 1 : 0) << '\n';
  os << "patches_per_image=" << patches_per_image << '\n';
  os << "checkpoint_every=" << checkpoint_every << '\n';
  os << "val_images=" << val_images << '\n';
  return os.str();
}

bool TrainConfig::apply_kv(const std::string& key, const std::string& value) {
  try {
    if (key == "hr_patch_size") hr_patch_size = std::stoll(value);
    else if (key == "scale") scale = std::stoi(value);
    else if (key == "batch_size") batch_size = std::stoll(value);
    else if (key == "initial_lr") initial_lr = std::stod(value);
    else if (key == "lr_decay_every") lr_decay_every = std::stoll(value);
    else if (key == "lr_decay_factor") lr_decay_factor = std::stod(value);
    else if (key == "epochs") epochs = std::stoll(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "augment_hflip") augment.hflip = value != "0";
    else if (key == "augment_vflip") augment.vflip = value != "0";
    else if (key == "augment_rot90") augment.rot90 = value != "0";
    else if (key == "augment_rot180") augment.rot180 = value != "0";
    else if (key == "augment_rot270") augment.rot270 = value != "0";
    else if (key == "patches_per_image") patches_per_image = std::stoll(value);
    else if (key == "checkpoint_every") checkpoint_every = std::stoll(value);
    else if (key == "val_images") val_images = std::stoll(value);
    else return false;
  } catch (const std::invalid_argument&) {
    throw UsageError("train config: bad value '" + value + "' for key '" + key + "'");
  } catch (const std::out_of_range&) {
    throw UsageError("train config: bad value '" + value + "' for key '" + key + "'");
  }
  return true;
}

double validation_psnr(const AdrdNetwork<float>& net, const std::vector<RgbImage>& dataset,
                       std::int64_t count, int scale) {
  NoGradGuard ng;
  const std::int64_t n = std::min<std::int64_t>(count, static_cast<std::int64_t>(dataset.size()));
  if (n <= 0) return 0.0;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const RgbImage hr = modcrop(dataset[static_cast<std::size_t>(i)], scale);
    const RgbImage lr = bicubic_resample(hr, hr.height / scale, hr.width / scale);
    const Tensor<float> sr = net.forward(image_to_tensor(lr));
    acc += psnr_rgb(hr, tensor_to_image(sr), scale);
  }
  return acc / static_cast<double>(n);
}

namespace {

struct Stats {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  double mean = 0.0;
};

Stats batch_stats(std::span<const float> v) {
  Stats s;
  double acc = 0.0;
  for (float x : v) {
    s.lo = std::min(s.lo, x);
    s.hi = std::max(s.hi, x);
    acc += x;
  }
  s.mean = acc / static_cast<double>(v.size());
  return s;
}

std::string stats_str(const char* what, std::span<const float> v) {
  const Stats s = batch_stats(v);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s[min=%g max=%g mean=%g]", what, s.lo, s.hi, s.mean);
  return buf;
}

}  // namespace

TrainReport run_training(AdrdNetwork<float>& net, TrainState& state,
                         const std::vector<RgbImage>& dataset, const TrainConfig& cfg,
                         const TrainIo& io) {
  cfg.validate();
  if (dataset.empty()) throw DataError("training: empty dataset");
  if (cfg.scale != net.config().scale_factor)
    throw UsageError("training: config scale " + std::to_string(cfg.scale) +
                     " does not match network scale " + std::to_string(net.config().scale_factor));

  PatchSampler sampler(&dataset, cfg.hr_patch_size, cfg.scale, cfg.batch_size, cfg.augment);
  const std::int64_t steps_per_epoch = cfg.steps_per_epoch(dataset.size());
  const std::int64_t total_steps = cfg.epochs * steps_per_epoch;

  std::ofstream log;
  if (!io.log_csv.empty()) {
    const bool resuming = state.global_step > 0;
    log.open(io.log_csv, resuming ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot open training log '" + io.log_csv + "'");
    if (!resuming) log << "epoch,step,lr,loss,val_psnr\n";
  }

  auto params = net.parameters();
  TrainReport report;
  double epoch_loss_acc = 0.0;
  std::int64_t epoch_loss_count = 0;

  while (state.global_step < total_steps) {
    const std::int64_t epoch = state.global_step / steps_per_epoch;
    const std::int64_t step = state.global_step % steps_per_epoch;
    const double lr = lr_at_epoch(cfg, epoch);

    PatchSampler::Batch batch = sampler.sample(cfg.seed, state.global_step);
    net.zero_grad();
    Tensor<float> pred = net.forward(batch.lr);
    Tensor<float> loss = mse_loss(pred, batch.hr);
    const double loss_value = static_cast<double>(loss.item());
    if (!std::isfinite(loss_value)) {
      throw NumericError("training: non-finite loss at step " + std::to_string(state.global_step) + "; " +
                         stats_str("lr_input", batch.lr.data()) + " " +
                         stats_str("hr_target", batch.hr.data()) + " " +
                         stats_str("prediction", pred.data()));
    }
    loss.backward();
    state.adam.step(params, lr);
    ++state.global_step;

    report.steps.push_back({epoch, step, state.global_step, lr, loss_value});
    epoch_loss_acc += loss_value;
    ++epoch_loss_count;

    const bool epoch_done = (step + 1 == steps_per_epoch);
    double val = 0.0;
    if (epoch_done && cfg.val_images > 0) val = validation_psnr(net, dataset, cfg.val_images, cfg.scale);

    if (log) {
      char row[160];
      if (epoch_done && cfg.val_images > 0)
        std::snprintf(row, sizeof(row), "%lld,%lld,%.9g,%.9g,%.6f\n", static_cast<long long>(epoch),
                      static_cast<long long>(step), lr, loss_value, val);
      else
        std::snprintf(row, sizeof(row), "%lld,%lld,%.9g,%.9g,\n", static_cast<long long>(epoch),
                      static_cast<long long>(step), lr, loss_value);
      log << row;
    }

    if (epoch_done) {
      report.epochs.push_back({epoch, epoch_loss_acc / static_cast<double>(epoch_loss_count), val});
      epoch_loss_acc = 0.0;
      epoch_loss_count = 0;
      if (io.console) {
        char line[160];
        std::snprintf(line, sizeof(line), "epoch %lld/%lld  lr %.3g  loss %.6g  val_psnr %.3f\n",
                      static_cast<long long>(epoch + 1), static_cast<long long>(cfg.epochs), lr,
                      report.epochs.back().mean_loss, val);
        *io.console << line << std::flush;
      }
      if (!io.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
          epoch + 1 < cfg.epochs) {
        char name[64];
        std::snprintf(name, sizeof(name), "/ckpt_epoch%05lld.adrd", static_cast<long long>(epoch + 1));
        save_checkpoint(io.checkpoint_dir + name, net, &state.adam);
      }
    }
  }

  if (!io.checkpoint_dir.empty()) {
    report.final_checkpoint = io.checkpoint_dir + "/ckpt_final.adrd";
    save_checkpoint(report.final_checkpoint, net, &state.adam);
  }
  return report;
}

}  // namespace adrd
