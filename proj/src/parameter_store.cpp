#include "wmg/parameter_store.hpp"

#include <cmath>
#include <stdexcept>

namespace wmg {

Tensor ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                           std::vector<double> values) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t = Tensor::parameter(rows, cols, std::move(values));
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, t, std::vector<double>(rows * cols, 0.0),
                           std::vector<double>(rows * cols, 0.0)});
  return t;
}

Tensor ParameterStore::add_weight(const std::string& name, std::size_t fan_in,
                                  std::size_t fan_out, Rng& rng) {
  Tensor init = kaiming_uniform_init(fan_in, fan_out, rng);
  return add(name, fan_in, fan_out, std::vector<double>(init.values().begin(), init.values().end()));
}

Tensor ParameterStore::add_bias(const std::string& name, std::size_t width) {
  return add(name, 1, width, std::vector<double>(width, 0.0));
}

Tensor ParameterStore::add_constant(const std::string& name, std::size_t rows, std::size_t cols,
                                    double fill) {
  return add(name, rows, cols, std::vector<double>(rows * cols, fill));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].value;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    for (double g : e.value.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double adam_step(ParameterStore& store, const AdamOptions& options) {
  const double norm = store.grad_norm();
  const double factor = (options.clip > 0.0 && norm > options.clip) ? options.clip / norm : 1.0;

  const std::uint64_t t = store.adam_steps() + 1;
  store.set_adam_steps(t);
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));

  for (auto& e : store.entries()) {
    std::span<double> p = e.value.mutable_values();
    std::span<double> g = e.value.mutable_grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double grad = g[i] * factor;
      double& m = e.first_moment[i];
      double& v = e.second_moment[i];
      m = options.beta1 * m + (1.0 - options.beta1) * grad;
      v = options.beta2 * v + (1.0 - options.beta2) * grad * grad;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      p[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.eps);
      g[i] = 0.0;
    }
  }
  return norm;
}

Tensor kaiming_uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("kaiming_uniform_init: fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform_range(-bound, bound);
  return Tensor(fan_in, fan_out, std::move(values));
}

}  // namespace wmg
