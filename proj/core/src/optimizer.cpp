#include "adrd/optimizer.hpp"

#include <cmath>

#include "adrd/errors.hpp"

namespace adrd {

template <typename T>
typename AdamOptimizer<T>::Moments& AdamOptimizer<T>::moments_for(const std::string& name,
                                                                  std::size_t size) {
  for (auto& [n, m] : state_)
    if (n == name) return m;
  state_.emplace_back(name, Moments{std::vector<T>(size, T(0)), std::vector<T>(size, T(0))});
  return state_.back().second;
}

template <typename T>
void AdamOptimizer<T>::step(const std::vector<Parameter<T>*>& params, double lr) {
  // Validate every gradient first so an aborted step leaves parameters as
  // they were.
  for (auto* p : params) {
    if (!p->has_grad()) throw NumericError("adam: missing gradient for parameter '" + p->name() + "'");
    for (const T g : p->grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("adam: non-finite gradient in parameter '" + p->name() + "'");
  }

  ++step_;
  const T b1 = static_cast<T>(settings_.beta1);
  const T b2 = static_cast<T>(settings_.beta2);
  const T eps = static_cast<T>(settings_.epsilon);
  const T c1 = static_cast<T>(1.0 - std::pow(settings_.beta1, static_cast<double>(step_)));
  const T c2 = static_cast<T>(1.0 - std::pow(settings_.beta2, static_cast<double>(step_)));
  const T rate = static_cast<T>(lr);

  for (auto* p : params) {
    auto values = p->values();
    auto grads = p->grad();
    Moments& mom = moments_for(p->name(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T g = grads[i];
      mom.m[i] = b1 * mom.m[i] + (T(1) - b1) * g;
      mom.v[i] = b2 * mom.v[i] + (T(1) - b2) * g * g;
      const T m_hat = mom.m[i] / c1;
      const T v_hat = mom.v[i] / c2;
      values[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
AdamSnapshot<T> AdamOptimizer<T>::snapshot(const std::vector<Parameter<T>*>& params) const {
  AdamSnapshot<T> snap;
  snap.step = step_;
  for (const auto* p : params) {
    snap.names.push_back(p->name());
    const Moments* found = nullptr;
    for (const auto& [n, m] : state_)
      if (n == p->name()) found = &m;
    if (found) {
      snap.m.push_back(found->m);
      snap.v.push_back(found->v);
    } else {
      snap.m.emplace_back(p->numel(), T(0));
      snap.v.emplace_back(p->numel(), T(0));
    }
  }
  return snap;
}

template <typename T>
void AdamOptimizer<T>::restore(const AdamSnapshot<T>& snap) {
  state_.clear();
  step_ = snap.step;
  for (std::size_t i = 0; i < snap.names.size(); ++i) {
    if (snap.m[i].size() != snap.v[i].size())
      throw DataError("adam restore: moment size mismatch for '" + snap.names[i] + "'");
    state_.emplace_back(snap.names[i], Moments{snap.m[i], snap.v[i]});
  }
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace adrd
