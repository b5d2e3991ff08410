#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrd/tensor.hpp"

namespace adrd {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Serializable optimizer state for exact training resumption.
template <typename T>
struct AdamSnapshot {
  std::int64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// Adam with bias-corrected moments. Moments are keyed by parameter name and
// created on first use; a step either applies to every parameter or, when any
// gradient is missing or non-finite, aborts before touching anything.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamSettings settings = {}) : settings_(settings) {}

  void step(const std::vector<Parameter<T>*>& params, double lr);

  std::int64_t step_count() const { return step_; }
  const AdamSettings& settings() const { return settings_; }

  AdamSnapshot<T> snapshot(const std::vector<Parameter<T>*>& params) const;
  void restore(const AdamSnapshot<T>& snap);  // throws DataError on mismatch

 private:
  struct Moments {
    std::vector<T> m, v;
  };
  Moments& moments_for(const std::string& name, std::size_t size);

  AdamSettings settings_;
  std::int64_t step_ = 0;
  std::vector<std::pair<std::string, Moments>> state_;  // insertion order
};

}  // namespace adrd
