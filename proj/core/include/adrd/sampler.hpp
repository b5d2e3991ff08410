#pragma once

#include <cstdint>
#include <vector>

#include "adrd/image.hpp"
#include "adrd/tensor.hpp"

namespace adrd {

struct AugmentationFlags {
  bool hflip = true;
  bool vflip = true;
  bool rot90 = true;
  bool rot180 = true;
  bool rot270 = true;
};

// Draws batches of HR patches with dihedral augmentation and synthesizes the
// LR side by bicubic downsampling. Each (seed, step) pair gets its own
// substream, so any step is reproducible without replaying the ones before
// it and training resumes exactly after a checkpoint reload.
class PatchSampler {
 public:
  PatchSampler(const std::vector<RgbImage>* dataset, std::int64_t hr_patch, int scale,
               std::int64_t batch_size, AugmentationFlags augment);

  struct Batch {
    Tensor<float> lr;  // [B,3,p/s,p/s]
    Tensor<float> hr;  // [B,3,p,p]
  };

  Batch sample(std::uint64_t seed, std::int64_t step) const;

 private:
  const std::vector<RgbImage>* dataset_;
  std::int64_t hr_patch_;
  int scale_;
  std::int64_t batch_size_;
  AugmentationFlags augment_;
};

}  // namespace adrd
