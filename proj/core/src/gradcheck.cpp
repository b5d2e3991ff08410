#include "adrd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "adrd/errors.hpp"

namespace adrd {

namespace {

template <typename T>
double eval_scalar(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& fn,
                   const std::vector<Tensor<T>>& inputs) {
  NoGradGuard ng;
  Tensor<T> out = fn(inputs);
  if (out.numel() != 1)
    throw std::invalid_argument("gradcheck: function must return a scalar, got " + shape_str(out.shape()));
  const double v = static_cast<double>(out.item());
  if (!std::isfinite(v)) throw NumericError("gradcheck: function value is not finite");
  return v;
}

}  // namespace

template <typename T>
GradCheckReport gradcheck(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& fn,
                          std::vector<Tensor<T>> inputs, double epsilon, double tolerance) {
  // Analytic pass.
  Tensor<T> loss = fn(inputs);
  if (loss.numel() != 1)
    throw std::invalid_argument("gradcheck: function must return a scalar, got " + shape_str(loss.shape()));
  if (!std::isfinite(static_cast<double>(loss.item())))
    throw NumericError("gradcheck: function value is not finite");
  for (auto& in : inputs)
    if (in.requires_grad()) in.zero_grad();
  loss.backward();

  std::vector<std::vector<double>> analytic(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto g = inputs[i].grad();
    analytic[i].assign(g.begin(), g.end());
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto values = inputs[i].mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const T original = values[j];
      values[j] = original + static_cast<T>(epsilon);
      const double f_plus = eval_scalar(fn, inputs);
      values[j] = original - static_cast<T>(epsilon);
      const double f_minus = eval_scalar(fn, inputs);
      values[j] = original;

      const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-2});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = "input " + std::to_string(i) + ", coord " + std::to_string(j);
      }
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

template GradCheckReport gradcheck<float>(
    const std::function<Tensor<float>(const std::vector<Tensor<float>>&)>&, std::vector<Tensor<float>>,
    double, double);
template GradCheckReport gradcheck<double>(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>&, std::vector<Tensor<double>>,
    double, double);

}  // namespace adrd
