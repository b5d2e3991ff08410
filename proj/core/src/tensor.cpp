#include "adrd/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace adrd {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

namespace {
bool g_autograd_enabled = true;
}

bool autograd_enabled() { return g_autograd_enabled; }
void set_autograd_enabled(bool on) { g_autograd_enabled = on; }

}  // namespace detail

namespace {

template <typename T>
std::shared_ptr<detail::Node<T>> make_leaf(Shape shape, std::vector<T> values, bool requires_grad) {
  const auto n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("data length does not match shape " + shape_str(shape));
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

namespace detail {

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> values,
                  std::vector<std::shared_ptr<detail::Node<T>>> parents,
                  std::function<void(detail::Node<T>&)> backprop) {
  auto node = make_leaf<T>(std::move(shape), std::move(values), false);
  if (detail::autograd_enabled()) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backprop = std::move(backprop);
    }
  }
  return Tensor<T>(std::move(node));
}

template Tensor<float> make_op<float>(Shape, std::vector<float>,
                                      std::vector<std::shared_ptr<Node<float>>>,
                                      std::function<void(Node<float>&)>);
template Tensor<double> make_op<double>(Shape, std::vector<double>,
                                        std::vector<std::shared_ptr<Node<double>>>,
                                        std::function<void(Node<double>&)>);

}  // namespace detail

using detail::make_op;

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

template <typename T>
void accumulate(std::span<T> dst, const T* src, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf<T>(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf<T>(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> values, bool requires_grad) {
  return Tensor(make_leaf<T>(std::move(shape), std::move(values), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw std::invalid_argument("item() requires a one-element tensor, got " + shape_str(shape()));
  return node_->values[0];
}

template <typename T>
T Tensor<T>::at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
  const Shape& s = shape();
  if (s.size() != 4) throw std::invalid_argument("at4 requires a 4-d tensor, got " + shape_str(s));
  return node_->values[static_cast<std::size_t>(((n * s[1] + c) * s[2] + y) * s[3] + x)];
}

template <typename T>
void Tensor<T>::set4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x, T v) {
  const Shape& s = shape();
  if (s.size() != 4) throw std::invalid_argument("set4 requires a 4-d tensor, got " + shape_str(s));
  node_->values[static_cast<std::size_t>(((n * s[1] + c) * s[2] + y) * s[3] + x)] = v;
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->values.size(), T(0));
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_) throw std::invalid_argument("backward() on an undefined tensor");
  if (numel() != 1)
    throw std::invalid_argument("backward() requires a scalar loss, got " + shape_str(shape()));

  // Iterative postorder walk; `order` ends up parents-before-consumers.
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> visited;
  struct Frame {
    detail::Node<T>* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      detail::Node<T>* p = f.node->parents[f.next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Intermediate grads are per-sweep scratch; leaves keep accumulating.
  for (auto* n : order)
    if (n->backprop) n->grad.assign(n->values.size(), T(0));
  auto seed = node_->ensure_grad();
  seed[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

// ---- elementwise ops -------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
  auto na = a.node(), nb = b.node();
  return make_op<T>(a.shape(), std::move(out), {na, nb}, [na, nb, n](detail::Node<T>& o) {
    if (na->requires_grad) accumulate(na->ensure_grad(), o.grad.data(), n);
    if (nb->requires_grad) accumulate(nb->ensure_grad(), o.grad.data(), n);
  });
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "hadamard");
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
  auto na = a.node(), nb = b.node();
  return make_op<T>(a.shape(), std::move(out), {na, nb}, [na, nb, n](detail::Node<T>& o) {
    if (na->requires_grad) {
      auto g = na->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += nb->values[i] * o.grad[i];
    }
    if (nb->requires_grad) {
      auto g = nb->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += na->values[i] * o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "abs_diff");
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::abs(pa[i] - pb[i]);
  auto na = a.node(), nb = b.node();
  // Subgradient at a == b fixed to 0.
  return make_op<T>(a.shape(), std::move(out), {na, nb}, [na, nb, n](detail::Node<T>& o) {
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = na->values[i] - nb->values[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      const T g = s * o.grad[i];
      if (na->requires_grad) na->ensure_grad()[i] += g;
      if (nb->requires_grad) nb->ensure_grad()[i] -= g;
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = factor * pa[i];
  auto na = a.node();
  return make_op<T>(a.shape(), std::move(out), {na}, [na, n, factor](detail::Node<T>& o) {
    if (!na->requires_grad) return;
    auto g = na->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) g[i] += factor * o.grad[i];
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& factor) {
  if (factor.numel() != 1)
    throw std::invalid_argument("mul_scalar: factor must have one element, got " + shape_str(factor.shape()));
  const auto n = a.numel();
  const T f = factor.data()[0];
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* pa = a.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = f * pa[i];
  auto na = a.node(), nf = factor.node();
  return make_op<T>(a.shape(), std::move(out), {na, nf}, [na, nf, n](detail::Node<T>& o) {
    const T fv = nf->values[0];
    if (na->requires_grad) {
      auto g = na->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += fv * o.grad[i];
    }
    if (nf->requires_grad) {
      T acc = T(0);
      for (std::int64_t i = 0; i < n; ++i) acc += na->values[i] * o.grad[i];
      nf->ensure_grad()[0] += acc;
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto n = x.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* px = x.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = px[i] > T(0) ? px[i] : T(0);
  auto nx = x.node();
  return make_op<T>(x.shape(), std::move(out), {nx}, [nx, n](detail::Node<T>& o) {
    if (!nx->requires_grad) return;
    auto g = nx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      if (nx->values[i] > T(0)) g[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  const auto n = x.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* px = x.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(px[i]);
  auto nx = x.node();
  return make_op<T>(x.shape(), std::move(out), {nx}, [nx, n](detail::Node<T>& o) {
    if (!nx->requires_grad) return;
    auto g = nx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) g[i] += (T(1) - o.values[i] * o.values[i]) * o.grad[i];
  });
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  if (slope.numel() != 1)
    throw std::invalid_argument("prelu: slope must have one element, got " + shape_str(slope.shape()));
  const auto n = x.numel();
  const T s = slope.data()[0];
  std::vector<T> out(static_cast<std::size_t>(n));
  const T* px = x.data().data();
  for (std::int64_t i = 0; i < n; ++i) out[i] = px[i] > T(0) ? px[i] : s * px[i];
  auto nx = x.node(), ns = slope.node();
  return make_op<T>(x.shape(), std::move(out), {nx, ns}, [nx, ns, n](detail::Node<T>& o) {
    const T sv = ns->values[0];
    if (nx->requires_grad) {
      auto g = nx->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) g[i] += (nx->values[i] >= T(0) ? T(1) : sv) * o.grad[i];
    }
    if (ns->requires_grad) {
      T acc = T(0);
      for (std::int64_t i = 0; i < n; ++i)
        if (nx->values[i] < T(0)) acc += nx->values[i] * o.grad[i];
      ns->ensure_grad()[0] += acc;
    }
  });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Shape& s0 = parts[0].shape();
  if (s0.size() != 4) throw std::invalid_argument("concat_channels requires 4-d tensors, got " + shape_str(s0));
  std::int64_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw std::invalid_argument("concat_channels: incompatible shape " + shape_str(s) + " vs " + shape_str(s0));
    channels += s[1];
  }
  const std::int64_t batch = s0[0], hw = s0[2] * s0[3];
  Shape out_shape{batch, channels, s0[2], s0[3]};
  std::vector<T> out(static_cast<std::size_t>(batch * channels * hw));
  std::vector<std::shared_ptr<detail::Node<T>>> parents;
  parents.reserve(parts.size());
  std::vector<std::int64_t> offsets;  // starting channel per part
  std::int64_t c_off = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.shape()[1];
    const T* src = p.data().data();
    for (std::int64_t b = 0; b < batch; ++b) {
      T* dst = out.data() + (b * channels + c_off) * hw;
      const T* s_b = src + b * pc * hw;
      std::copy(s_b, s_b + pc * hw, dst);
    }
    parents.push_back(p.node());
    offsets.push_back(c_off);
    c_off += pc;
  }
  return make_op<T>(std::move(out_shape), std::move(out), std::move(parents),
                    [offsets, batch, channels, hw](detail::Node<T>& o) {
                      for (std::size_t k = 0; k < o.parents.size(); ++k) {
                        auto& p = o.parents[k];
                        if (!p->requires_grad) continue;
                        const std::int64_t pc = p->shape[1];
                        auto g = p->ensure_grad();
                        for (std::int64_t b = 0; b < batch; ++b) {
                          const T* src = o.grad.data() + (b * channels + offsets[k]) * hw;
                          T* dst = g.data() + b * pc * hw;
                          for (std::int64_t i = 0; i < pc * hw; ++i) dst[i] += src[i];
                        }
                      }
                    });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t first, std::int64_t count) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("slice_channels requires a 4-d tensor, got " + shape_str(s));
  if (first < 0 || count <= 0 || first + count > s[1])
    throw std::invalid_argument("slice_channels: range [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") outside " + shape_str(s));
  const std::int64_t batch = s[0], channels = s[1], hw = s[2] * s[3];
  std::vector<T> out(static_cast<std::size_t>(batch * count * hw));
  const T* src = x.data().data();
  for (std::int64_t b = 0; b < batch; ++b) {
    const T* s_b = src + (b * channels + first) * hw;
    std::copy(s_b, s_b + count * hw, out.data() + b * count * hw);
  }
  auto nx = x.node();
  return make_op<T>({batch, count, s[2], s[3]}, std::move(out), {nx},
                    [nx, first, count, batch, channels, hw](detail::Node<T>& o) {
                      if (!nx->requires_grad) return;
                      auto g = nx->ensure_grad();
                      for (std::int64_t b = 0; b < batch; ++b) {
                        T* dst = g.data() + (b * channels + first) * hw;
                        const T* src_b = o.grad.data() + b * count * hw;
                        for (std::int64_t i = 0; i < count * hw; ++i) dst[i] += src_b[i];
                      }
                    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto n = x.numel();
  const T* px = x.data().data();
  T acc = T(0);
  for (std::int64_t i = 0; i < n; ++i) acc += px[i];
  auto nx = x.node();
  return make_op<T>({1}, {acc}, {nx}, [nx, n](detail::Node<T>& o) {
    if (!nx->requires_grad) return;
    auto g = nx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) g[i] += o.grad[0];
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same_shape(pred, target, "mse_loss");
  const auto n = pred.numel();
  const T* pp = pred.data().data();
  const T* pt = target.data().data();
  T acc = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const T d = pp[i] - pt[i];
    acc += d * d;
  }
  acc /= static_cast<T>(n);
  auto np = pred.node(), nt = target.node();
  return make_op<T>({1}, {acc}, {np, nt}, [np, nt, n](detail::Node<T>& o) {
    const T c = T(2) / static_cast<T>(n) * o.grad[0];
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = c * (np->values[i] - nt->values[i]);
      if (np->requires_grad) np->ensure_grad()[i] += d;
      if (nt->requires_grad) nt->ensure_grad()[i] -= d;
    }
  });
}

template class Tensor<float>;
template class Tensor<double>;
template class Parameter<float>;
template class Parameter<double>;

#define ADRD_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> hadamard<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> abs_diff<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                    \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> relu<T>(const Tensor<T>&);                                        \
  template Tensor<T> tanh<T>(const Tensor<T>&);                                        \
  template Tensor<T> prelu<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                   \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::int64_t, std::int64_t); \
  template Tensor<T> sum<T>(const Tensor<T>&);                                         \
  template Tensor<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);

ADRD_INSTANTIATE_OPS(float)
ADRD_INSTANTIATE_OPS(double)
#undef ADRD_INSTANTIATE_OPS

}  // namespace adrd
