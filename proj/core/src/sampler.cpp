#include "adrd/sampler.hpp"

#include <stdexcept>

#include "adrd/errors.hpp"
#include "adrd/rng.hpp"

namespace adrd {

PatchSampler::PatchSampler(const std::vector<RgbImage>* dataset, std::int64_t hr_patch, int scale,
                           std::int64_t batch_size, AugmentationFlags augment)
    : dataset_(dataset), hr_patch_(hr_patch), scale_(scale), batch_size_(batch_size), augment_(augment) {
  if (!dataset_ || dataset_->empty()) throw DataError("patch sampler: empty dataset");
  if (hr_patch_ <= 0 || hr_patch_ % scale_ != 0)
    throw std::invalid_argument("patch sampler: hr_patch must be a positive multiple of the scale");
  for (std::size_t i = 0; i < dataset_->size(); ++i) {
    const auto& img = (*dataset_)[i];
    if (img.height < hr_patch_ || img.width < hr_patch_)
      throw DataError("patch sampler: image " + std::to_string(i) + " (" + std::to_string(img.height) + "x" +
                      std::to_string(img.width) + ") is smaller than the " + std::to_string(hr_patch_) +
                      " patch");
  }
}

PatchSampler::Batch PatchSampler::sample(std::uint64_t seed, std::int64_t step) const {
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(step)));
  const std::int64_t lr_patch = hr_patch_ / scale_;

  Tensor<float> hr = Tensor<float>::zeros({batch_size_, 3, hr_patch_, hr_patch_});
  Tensor<float> lr = Tensor<float>::zeros({batch_size_, 3, lr_patch, lr_patch});
  auto hr_data = hr.mutable_data();
  auto lr_data = lr.mutable_data();

  std::vector<int> rotations{0};
  if (augment_.rot90) rotations.push_back(90);
  if (augment_.rot180) rotations.push_back(180);
  if (augment_.rot270) rotations.push_back(270);

  for (std::int64_t b = 0; b < batch_size_; ++b) {
    const auto& img = (*dataset_)[static_cast<std::size_t>(rng.uniform_int(dataset_->size()))];
    const std::int64_t y0 = rng.uniform_int(img.height - hr_patch_ + 1);
    const std::int64_t x0 = rng.uniform_int(img.width - hr_patch_ + 1);
    RgbImage patch = crop(img, y0, x0, hr_patch_, hr_patch_);

    switch (rotations[static_cast<std::size_t>(rng.uniform_int(rotations.size()))]) {
      case 90: patch = rotate90(patch); break;
      case 180: patch = rotate180(patch); break;
      case 270: patch = rotate270(patch); break;
      default: break;
    }
    if (augment_.hflip && rng.uniform() < 0.5) patch = flip_horizontal(patch);
    if (augment_.vflip && rng.uniform() < 0.5) patch = flip_vertical(patch);

    const RgbImage low = bicubic_resample(patch, lr_patch, lr_patch);
    std::copy(patch.data.begin(), patch.data.end(), hr_data.begin() + b * 3 * hr_patch_ * hr_patch_);
    std::copy(low.data.begin(), low.data.end(), lr_data.begin() + b * 3 * lr_patch * lr_patch);
  }
  return Batch{std::move(lr), std::move(hr)};
}

}  // namespace adrd
