#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmg/rng.hpp"
#include "wmg/tensor.hpp"

namespace wmg {

/// Named trainable tensors in registration order, with their Adam moments.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };

  /// Registers a parameter; names must be unique.
  Tensor add(const std::string& name, std::size_t rows, std::size_t cols,
             std::vector<double> values);
  /// Weight drawn with kaiming_uniform_init.
  Tensor add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
  /// Zero-initialized 1×width bias.
  Tensor add_bias(const std::string& name, std::size_t width);
  Tensor add_constant(const std::string& name, std::size_t rows, std::size_t cols, double fill);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  std::uint64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::uint64_t steps) { adam_steps_ = steps; }

  void zero_grad();
  /// L2 norm over the concatenation of every parameter gradient.
  double grad_norm() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t adam_steps_ = 0;
};

struct AdamOptions {
  double learning_rate = 1e-4;
  double eps = 1e-8;
  double clip = 0.0;  ///< global-norm threshold; non-positive disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
};

/// Global-norm clipping, one bias-corrected Adam update, then zeroed gradients.
/// Returns the gradient norm measured before clipping.
double adam_step(ParameterStore& store, const AdamOptions& options);

/// Uniform in ±sqrt(6 / fan_in), laid out fan_in × fan_out for right-multiplication.
Tensor kaiming_uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace wmg
