#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adrd/tensor.hpp"

namespace adrd {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = true;
  std::int64_t coordinates_checked = 0;
  std::string worst;  // "input 2, coord 17" style location of the max error
};

// Compares reverse-mode gradients of a scalar-valued function against central
// finite differences, coordinate by coordinate, over every input that has
// requires_grad set. Relative error uses max(|analytic|, |numeric|, 1e-2) as
// the denominator so near-zero gradients are judged on an absolute scale.
// Throws NumericError if the function produces a non-finite value.
template <typename T>
GradCheckReport gradcheck(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& fn,
                          std::vector<Tensor<T>> inputs, double epsilon, double tolerance);

}  // namespace adrd
