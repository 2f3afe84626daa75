#include "gemr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gemr {
namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(s));
  }
}

// y[0:n] += a * x[0:n]
template <typename T>
inline void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
inline T dot_n(std::size_t n, const T* a, const T* b) {
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T>& matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto& out = tape.output({m, n}, {&a, &b});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(n, pa[i * k + p], pb + p * n, po + i * n);
  }
  tape.record(out, [&a, &b, &out, m, k, n] {
    const T* g = out.grad().data();
    if (a.requires_grad()) {
      T* ga = a.grad().data();
      const T* pb = b.data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += dot_n(n, g + i * n, pb + p * n);
    }
    if (b.requires_grad()) {
      T* gb = b.grad().data();
      const T* pa = a.data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) axpy(n, pa[i * k + p], g + i * n, gb + p * n);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    mismatch("linear", x.shape(), weight.shape());
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) mismatch("linear", weight.shape(), bias.shape());
  const std::size_t m = x.dim(0), in = x.dim(1), outw = weight.dim(0);
  auto& out = tape.output({m, outw}, {&x, &weight, &bias});

  std::vector<T> wt(in * outw);
  const T* pw = weight.data().data();
  for (std::size_t o = 0; o < outw; ++o)
    for (std::size_t k = 0; k < in; ++k) wt[k * outw + o] = pw[o * in + k];

  const T* px = x.data().data();
  const T* pbias = bias.data().data();
  T* py = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* yi = py + i * outw;
    std::copy(pbias, pbias + outw, yi);
    for (std::size_t k = 0; k < in; ++k) axpy(outw, px[i * in + k], wt.data() + k * outw, yi);
  }

  tape.record(out, [&x, &weight, &bias, &out, m, in, outw] {
    const T* g = out.grad().data();
    if (x.requires_grad()) {
      T* gx = x.grad().data();
      const T* pw = weight.data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t o = 0; o < outw; ++o) axpy(in, g[i * outw + o], pw + o * in, gx + i * in);
    }
    if (weight.requires_grad()) {
      T* gw = weight.grad().data();
      const T* px = x.data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t o = 0; o < outw; ++o) axpy(in, g[i * outw + o], px + i * in, gw + o * in);
    }
    if (bias.requires_grad()) {
      T* gb = bias.grad().data();
      for (std::size_t i = 0; i < m; ++i) axpy(outw, T(1), g + i * outw, gb);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("add", a.shape(), b.shape());
  auto& out = tape.output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  tape.record(out, [&a, &b, &out] {
    auto g = out.grad();
    if (a.requires_grad()) axpy(g.size(), T(1), g.data(), a.grad().data());
    if (b.requires_grad()) axpy(g.size(), T(1), g.data(), b.grad().data());
  });
  return out;
}

template <typename T>
Tensor<T>& scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  auto& out = tape.output(x.shape(), {&x});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * factor;
  tape.record(out, [&x, &out, factor] {
    auto g = out.grad();
    axpy(g.size(), factor, g.data(), x.grad().data());
  });
  return out;
}

template <typename T>
Tensor<T>& relu(Tape<T>& tape, const Tensor<T>& x) {
  auto& out = tape.output(x.shape(), {&x});
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const bool on = x[i] > T(0);
    out[i] = on ? x[i] : T(0);
    mask = (mask << 1 | (mask >> 63)) ^ (on ? 0x9e3779b97f4a7c15ull >> (i % 64) : 0);
  }
  tape.mix_branch(mask);
  tape.record(out, [&x, &out] {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > T(0)) gx[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T>& dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || a.shape() != b.shape()) mismatch("dot", a.shape(), b.shape());
  auto& out = tape.output({1}, {&a, &b});
  out[0] = dot_n(a.numel(), a.data().data(), b.data().data());
  tape.record(out, [&a, &b, &out] {
    const T g = out.grad()[0];
    if (a.requires_grad()) axpy(a.numel(), g, b.data().data(), a.grad().data());
    if (b.requires_grad()) axpy(b.numel(), g, a.data().data(), b.grad().data());
  });
  return out;
}

template <typename T>
Tensor<T>& matvec(Tape<T>& tape, const Tensor<T>& m, const Tensor<T>& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) mismatch("matvec", m.shape(), v.shape());
  const std::size_t n = m.dim(0), d = m.dim(1);
  auto& out = tape.output({n}, {&m, &v});
  for (std::size_t i = 0; i < n; ++i) out[i] = dot_n(d, m.data().data() + i * d, v.data().data());
  tape.record(out, [&m, &v, &out, n, d] {
    auto g = out.grad();
    if (m.requires_grad()) {
      T* gm = m.grad().data();
      for (std::size_t i = 0; i < n; ++i) axpy(d, g[i], v.data().data(), gm + i * d);
    }
    if (v.requires_grad()) {
      T* gv = v.grad().data();
      for (std::size_t i = 0; i < n; ++i) axpy(d, g[i], m.data().data() + i * d, gv);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() == 1 && b.rank() == 1) {
    const std::size_t p = a.numel(), q = b.numel();
    auto& out = tape.output({p + q}, {&a, &b});
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(p));
    tape.record(out, [&a, &b, &out, p, q] {
      const T* g = out.grad().data();
      if (a.requires_grad()) axpy(p, T(1), g, a.grad().data());
      if (b.requires_grad()) axpy(q, T(1), g + p, b.grad().data());
    });
    return out;
  }
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) mismatch("concat", a.shape(), b.shape());
  const std::size_t r = a.dim(0), p = a.dim(1), q = b.dim(1), w = p + q;
  auto& out = tape.output({r, w}, {&a, &b});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.data().data() + i * p, p, out.data().data() + i * w);
    std::copy_n(b.data().data() + i * q, q, out.data().data() + i * w + p);
  }
  tape.record(out, [&a, &b, &out, r, p, q, w] {
    const T* g = out.grad().data();
    if (a.requires_grad()) {
      T* ga = a.grad().data();
      for (std::size_t i = 0; i < r; ++i) axpy(p, T(1), g + i * w, ga + i * p);
    }
    if (b.requires_grad()) {
      T* gb = b.grad().data();
      for (std::size_t i = 0; i < r; ++i) axpy(q, T(1), g + i * w + p, gb + i * q);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& weighted_row_sum(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& rows) {
  if (weights.rank() != 1 || rows.rank() != 2 || weights.dim(0) != rows.dim(0)) {
    mismatch("weighted_row_sum", weights.shape(), rows.shape());
  }
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  auto& out = tape.output({d}, {&weights, &rows});
  for (std::size_t i = 0; i < n; ++i) axpy(d, weights[i], rows.data().data() + i * d, out.data().data());
  tape.record(out, [&weights, &rows, &out, n, d] {
    const T* g = out.grad().data();
    if (weights.requires_grad()) {
      auto gw = weights.grad();
      for (std::size_t i = 0; i < n; ++i) gw[i] += dot_n(d, g, rows.data().data() + i * d);
    }
    if (rows.requires_grad()) {
      T* gr = rows.grad().data();
      for (std::size_t i = 0; i < n; ++i) axpy(d, weights[i], g, gr + i * d);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& mean_rows(Tape<T>& tape, const Tensor<T>& rows) {
  require_rank("mean_rows", rows.shape(), 2);
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  auto& out = tape.output({d}, {&rows});
  for (std::size_t i = 0; i < n; ++i) axpy(d, T(1), rows.data().data() + i * d, out.data().data());
  const T inv = T(1) / static_cast<T>(n);
  for (auto& v : out.data()) v *= inv;
  tape.record(out, [&rows, &out, n, d, inv] {
    const T* g = out.grad().data();
    T* gr = rows.grad().data();
    for (std::size_t i = 0; i < n; ++i) axpy(d, inv, g, gr + i * d);
  });
  return out;
}

template <typename T>
Tensor<T>& slice_rows(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_rank("slice_rows", x.shape(), 2);
  if (count == 0 || begin + count > x.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + to_string(x.shape()));
  }
  const std::size_t d = x.dim(1);
  auto& out = tape.output({count, d}, {&x});
  std::copy_n(x.data().data() + begin * d, count * d, out.data().data());
  tape.record(out, [&x, &out, begin, count, d] {
    axpy(count * d, T(1), out.grad().data(), x.grad().data() + begin * d);
  });
  return out;
}

template <typename T>
Tensor<T>& row(Tape<T>& tape, const Tensor<T>& x, std::size_t i) {
  require_rank("row", x.shape(), 2);
  if (i >= x.dim(0)) throw ShapeError("row: index " + std::to_string(i) + " out of range for " + to_string(x.shape()));
  const std::size_t d = x.dim(1);
  auto& out = tape.output({d}, {&x});
  std::copy_n(x.data().data() + i * d, d, out.data().data());
  tape.record(out, [&x, &out, i, d] { axpy(d, T(1), out.grad().data(), x.grad().data() + i * d); });
  return out;
}

template <typename T>
Tensor<T>& stack_rows(Tape<T>& tape, std::span<const Tensor<T>* const> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const Shape& first = rows.front()->shape();
  require_rank("stack_rows", first, 1);
  for (const auto* r : rows) {
    if (r->shape() != first) mismatch("stack_rows", first, r->shape());
  }
  const std::size_t n = rows.size(), d = first[0];
  auto& out = tape.output({n, d}, rows);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(rows[i]->data().data(), d, out.data().data() + i * d);
  std::vector<const Tensor<T>*> saved(rows.begin(), rows.end());
  tape.record(out, [saved = std::move(saved), &out, d] {
    const T* g = out.grad().data();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      if (saved[i]->requires_grad()) axpy(d, T(1), g + i * d, saved[i]->grad().data());
    }
  });
  return out;
}

template <typename T>
Tensor<T>& reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) mismatch("reshape", x.shape(), shape);
  auto& out = tape.output(std::move(shape), {&x});
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  tape.record(out, [&x, &out] { axpy(x.numel(), T(1), out.grad().data(), x.grad().data()); });
  return out;
}

template <typename T>
Tensor<T>& sum(Tape<T>& tape, const Tensor<T>& x) {
  auto& out = tape.output({1}, {&x});
  T s = T(0);
  for (auto v : x.data()) s += v;
  out[0] = s;
  tape.record(out, [&x, &out] {
    const T g = out.grad()[0];
    for (auto& gx : x.grad()) gx += g;
  });
  return out;
}

namespace {

template <typename T>
void softmax_into(const T* z, std::size_t n, T* y) {
  T mx = z[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, z[i]);
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(z[i] - mx);
    total += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= total;
}

template <typename T>
void softmax_backward(const T* y, const T* g, std::size_t n, T* gz) {
  const T s = dot_n(n, g, y);
  for (std::size_t i = 0; i < n; ++i) gz[i] += y[i] * (g[i] - s);
}

}  // namespace

template <typename T>
Tensor<T>& softmax(Tape<T>& tape, const Tensor<T>& logits) {
  require_rank("softmax", logits.shape(), 1);
  const std::size_t n = logits.numel();
  auto& out = tape.output({n}, {&logits});
  softmax_into(logits.data().data(), n, out.data().data());
  tape.record(out, [&logits, &out, n] {
    softmax_backward(out.data().data(), out.grad().data(), n, logits.grad().data());
  });
  return out;
}

template <typename T>
Tensor<T>& softmax_rows(Tape<T>& tape, const Tensor<T>& logits) {
  require_rank("softmax_rows", logits.shape(), 2);
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  auto& out = tape.output({b, c}, {&logits});
  for (std::size_t i = 0; i < b; ++i) softmax_into(logits.data().data() + i * c, c, out.data().data() + i * c);
  tape.record(out, [&logits, &out, b, c] {
    for (std::size_t i = 0; i < b; ++i) {
      softmax_backward(out.data().data() + i * c, out.grad().data() + i * c, c,
                       logits.grad().data() + i * c);
    }
  });
  return out;
}

template <typename T>
Tensor<T>& cross_entropy(Tape<T>& tape, const Tensor<T>& probs, std::size_t label) {
  require_rank("cross_entropy", probs.shape(), 1);
  if (label >= probs.numel()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(probs.numel()) + " classes");
  }
  auto& out = tape.output({1}, {&probs});
  const T p = probs[label];
  const bool clamped = !(p > T(kProbabilityFloor));
  out[0] = -std::log(clamped ? T(kProbabilityFloor) : p);
  tape.record(out, [&probs, &out, label, clamped] {
    if (clamped) return;
    probs.grad()[label] -= out.grad()[0] / probs[label];
  });
  return out;
}

template <typename T>
Tensor<T>& softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                 std::span<const std::size_t> labels) {
  require_rank("softmax_cross_entropy", logits.shape(), 2);
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + to_string(logits.shape()));
  }
  for (auto l : labels) {
    if (l >= c) throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(l) + " out of range");
  }
  auto& out = tape.output({1}, {&logits});
  std::vector<T> probs(b * c);
  T total = T(0);
  for (std::size_t i = 0; i < b; ++i) {
    const T* z = logits.data().data() + i * c;
    softmax_into(z, c, probs.data() + i * c);
    T mx = *std::max_element(z, z + c);
    T se = T(0);
    for (std::size_t j = 0; j < c; ++j) se += std::exp(z[j] - mx);
    total += mx + std::log(se) - z[labels[i]];
  }
  out[0] = total / static_cast<T>(b);
  std::vector<std::size_t> saved(labels.begin(), labels.end());
  tape.record(out, [&logits, &out, probs = std::move(probs), saved = std::move(saved), b, c] {
    const T g = out.grad()[0] / static_cast<T>(b);
    T* gz = logits.grad().data();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const T target = j == saved[i] ? T(1) : T(0);
        gz[i * c + j] += g * (probs[i * c + j] - target);
      }
    }
  });
  return out;
}

template <typename T>
BatchNormParams<T>::BatchNormParams(std::size_t features)
    : gamma(Shape{features}, std::vector<T>(features, T(1)), true),
      beta(Shape{features}, true),
      running_mean(Shape{features}),
      running_var(Shape{features}, std::vector<T>(features, T(1))) {}

template <typename T>
Tensor<T>& batch_norm(Tape<T>& tape, const Tensor<T>& x, BatchNormParams<T>& params, Mode mode) {
  if (mode == Mode::Eval) return batch_norm_eval(tape, x, params);
  if (x.rank() != 2 || x.dim(1) != params.features()) mismatch("batch_norm", x.shape(), params.gamma.shape());
  const std::size_t b = x.dim(0), d = x.dim(1);
  if (b < 2) throw std::invalid_argument("batch_norm: train mode needs a batch of at least 2, got " + std::to_string(b));

  auto& out = tape.output({b, d}, {&x, &params.gamma, &params.beta});
  std::vector<T> xhat(b * d);
  std::vector<T> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < b; ++i) mean += static_cast<double>(x.at(i, j));
    mean /= static_cast<double>(b);
    double var = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double c = static_cast<double>(x.at(i, j)) - mean;
      var += c * c;
    }
    var /= static_cast<double>(b);
    const double istd = 1.0 / std::sqrt(var + BatchNormParams<T>::kEpsilon);
    inv_std[j] = static_cast<T>(istd);
    for (std::size_t i = 0; i < b; ++i) {
      const T h = static_cast<T>((static_cast<double>(x.at(i, j)) - mean) * istd);
      xhat[i * d + j] = h;
      out.at(i, j) = params.gamma[j] * h + params.beta[j];
    }
    const double m = BatchNormParams<T>::kMomentum;
    params.running_mean[j] = static_cast<T>((1.0 - m) * params.running_mean[j] + m * mean);
    params.running_var[j] = static_cast<T>((1.0 - m) * params.running_var[j] + m * var);
  }

  const Tensor<T>& gamma = params.gamma;
  const Tensor<T>& beta = params.beta;
  tape.record(out, [&x, &gamma, &beta, &out, xhat = std::move(xhat), inv_std = std::move(inv_std), b, d] {
    auto g = out.grad();
    if (gamma.requires_grad() || beta.requires_grad()) {
      auto gg = gamma.grad();
      auto gb = beta.grad();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          gg[j] += g[i * d + j] * xhat[i * d + j];
          gb[j] += g[i * d + j];
        }
    }
    if (!x.requires_grad()) return;
    auto gx = x.grad();
    const T inv_b = T(1) / static_cast<T>(b);
    for (std::size_t j = 0; j < d; ++j) {
      T s1 = T(0), s2 = T(0);
      for (std::size_t i = 0; i < b; ++i) {
        const T dh = g[i * d + j] * gamma[j];
        s1 += dh;
        s2 += dh * xhat[i * d + j];
      }
      for (std::size_t i = 0; i < b; ++i) {
        const T dh = g[i * d + j] * gamma[j];
        gx[i * d + j] += inv_std[j] * inv_b * (static_cast<T>(b) * dh - s1 - xhat[i * d + j] * s2);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T>& batch_norm_eval(Tape<T>& tape, const Tensor<T>& x, const BatchNormParams<T>& params) {
  if (x.rank() != 2 || x.dim(1) != params.features()) mismatch("batch_norm", x.shape(), params.gamma.shape());
  const std::size_t b = x.dim(0), d = x.dim(1);
  auto& out = tape.output({b, d}, {&x, &params.gamma, &params.beta});
  std::vector<T> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) {
    inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(params.running_var[j]) +
                                                BatchNormParams<T>::kEpsilon));
  }
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = params.gamma[j] * ((x.at(i, j) - params.running_mean[j]) * inv_std[j]) + params.beta[j];

  const Tensor<T>& gamma = params.gamma;
  const Tensor<T>& beta = params.beta;
  const Tensor<T>& mean = params.running_mean;
  tape.record(out, [&x, &gamma, &beta, &mean, &out, inv_std = std::move(inv_std), b, d] {
    auto g = out.grad();
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const T gij = g[i * d + j];
        if (gamma.requires_grad()) gamma.grad()[j] += gij * (x.at(i, j) - mean[j]) * inv_std[j];
        if (beta.requires_grad()) beta.grad()[j] += gij;
        if (x.requires_grad()) x.grad()[i * d + j] += gij * gamma[j] * inv_std[j];
      }
  });
  return out;
}

template <typename T>
Tensor<T>& dropout(Tape<T>& tape, const Tensor<T>& x, double p, Mode mode, Philox& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: probability must be in [0, 1), got " + std::to_string(p));
  auto& out = tape.output(x.shape(), {&x});
  if (mode == Mode::Eval || p == 0.0) {
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    tape.record(out, [&x, &out] { axpy(x.numel(), T(1), out.grad().data(), x.grad().data()); });
    return out;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keep_scale : T(0);
    out[i] = x[i] * mask[i];
  }
  tape.record(out, [&x, &out, mask = std::move(mask)] {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
  return out;
}

#define GEMR_INSTANTIATE_OPS(T)                                                                     \
  template Tensor<T>& matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T>& linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T>& add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T>& scale(Tape<T>&, const Tensor<T>&, T);                                         \
  template Tensor<T>& relu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T>& dot(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T>& matvec(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T>& concat(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T>& weighted_row_sum(Tape<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T>& mean_rows(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T>& slice_rows(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T>& row(Tape<T>&, const Tensor<T>&, std::size_t);                                 \
  template Tensor<T>& stack_rows(Tape<T>&, std::span<const Tensor<T>* const>);                      \
  template Tensor<T>& reshape(Tape<T>&, const Tensor<T>&, Shape);                                   \
  template Tensor<T>& sum(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T>& softmax(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T>& softmax_rows(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T>& cross_entropy(Tape<T>&, const Tensor<T>&, std::size_t);                       \
  template Tensor<T>& softmax_cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>); \
  template struct BatchNormParams<T>;                                                               \
  template Tensor<T>& batch_norm(Tape<T>&, const Tensor<T>&, BatchNormParams<T>&, Mode);            \
  template Tensor<T>& batch_norm_eval(Tape<T>&, const Tensor<T>&, const BatchNormParams<T>&);       \
  template Tensor<T>& dropout(Tape<T>&, const Tensor<T>&, double, Mode, Philox&);

GEMR_INSTANTIATE_OPS(float)
GEMR_INSTANTIATE_OPS(double)

}  // namespace gemr
