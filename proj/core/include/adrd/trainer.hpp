#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adrd/image.hpp"
#include "adrd/network.hpp"
#include "adrd/optimizer.hpp"
#include "adrd/sampler.hpp"

namespace adrd {

struct TrainConfig {
  std::int64_t hr_patch_size = 200;
  int scale = 4;
  std::int64_t batch_size = 16;
  double initial_lr = 1e-4;
  std::int64_t lr_decay_every = 200;  // epochs
  double lr_decay_factor = 0.5;
  std::int64_t epochs = 10;
  std::uint64_t seed = 0;
  AugmentationFlags augment;
  std::int64_t patches_per_image = 32;
  std::int64_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  std::int64_t val_images = 1;        // leading dataset images used for validation PSNR

  void validate() const;  // throws std::invalid_argument
  std::int64_t steps_per_epoch(std::size_t dataset_size) const;
  std::string to_kv() const;
  // Applies one key=value setting; returns false for unknown keys.
  bool apply_kv(const std::string& key, const std::string& value);
};

double lr_at_epoch(const TrainConfig& cfg, std::int64_t epoch);

struct StepRecord {
  std::int64_t epoch = 0;
  std::int64_t step = 0;  // within epoch
  std::int64_t global_step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double mean_loss = 0.0;
  double val_psnr = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::string final_checkpoint;
};

// Mutable optimization state; preload from a checkpoint to resume.
struct TrainState {
  AdamOptimizer<float> adam;
  std::int64_t global_step = 0;
};

struct TrainIo {
  std::string log_csv;         // per-step CSV (epoch,step,lr,loss,val_psnr); empty = none
  std::string checkpoint_dir;  // empty = no checkpoints written
  std::ostream* console = nullptr;
};

// Runs epochs of patch sampling -> augmentation -> bicubic degradation ->
// forward -> MSE -> backward -> Adam. Fully deterministic from (seed, config,
// dataset); a resumed run continues the exact uninterrupted trajectory.
// Throws NumericError with batch statistics if the loss goes non-finite.
TrainReport run_training(AdrdNetwork<float>& net, TrainState& state,
                         const std::vector<RgbImage>& dataset, const TrainConfig& cfg,
                         const TrainIo& io = {});

// Mean Y-channel validation PSNR over the leading `count` dataset images.
double validation_psnr(const AdrdNetwork<float>& net, const std::vector<RgbImage>& dataset,
                       std::int64_t count, int scale);

}  // namespace adrd
