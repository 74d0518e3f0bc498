#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wmg/parameter_store.hpp"
#include "wmg/rng.hpp"
#include "wmg/tensor.hpp"

namespace wmg::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kCompositeTolerance = 1e-3;
// Denominator floor so near-zero gradients compare absolutely.
inline constexpr double kGradFloor = 1e-4;

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  ///< "input#k[i]"
  std::size_t checked = 0;
};

/// Central differences of `loss` against the reverse-mode gradient of
/// `differentiated`, for every entry of every tensor in `inputs` (all must be
/// leaves that require grad). The two differ only when `differentiated` holds
/// some quantity constant that `loss` spells out explicitly.
inline GradCheck check_gradients(const std::function<Tensor()>& differentiated,
                                 const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                 double step = kFiniteDifferenceStep) {
  for (auto& t : inputs) t.zero_grad();
  backward(differentiated());
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      double plus, minus;
      {
        NoGradGuard g;
        plus = loss().item();
      }
      values[i] = saved - step;
      {
        NoGradGuard g;
        minus = loss().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2 * step);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradFloor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = "input#" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

inline GradCheck check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                 double step = kFiniteDifferenceStep) {
  return check_gradients(loss, loss, std::move(inputs), step);
}

/// Leaf with values uniform in [lo, hi).
inline Tensor random_parameter(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform_range(lo, hi);
  return Tensor::parameter(rows, cols, std::move(v));
}

/// Values bounded away from zero, for ops with a kink there.
inline Tensor away_from_zero(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) {
    const double m = rng.uniform_range(0.1, 1.0);
    x = rng.coin() ? m : -m;
  }
  return Tensor::parameter(rows, cols, std::move(v));
}

/// Loss that weights every output entry differently so no gradient cancels.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> w(x.size());
  for (double& v : w) v = rng.uniform_range(-1.0, 1.0);
  return sum(mul(x, Tensor(x.rows(), x.cols(), std::move(w))));
}

/// Every trainable tensor of a parameter store.
template <typename Store>
std::vector<Tensor> all_parameters(Store& store) {
  std::vector<Tensor> out;
  for (auto& e : store.entries()) out.push_back(e.value);
  return out;
}

}  // namespace wmg::testing
