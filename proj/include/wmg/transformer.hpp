#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wmg/parameter_store.hpp"
#include "wmg/rng.hpp"
#include "wmg/tensor.hpp"

namespace wmg {

struct TransformerConfig {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t head_size = 8;
  std::size_t ff_hidden = 8;  ///< width of the position-wise feed-forward layer

  /// Row width d_T of the encoder input and output.
  std::size_t model_size() const { return heads * head_size; }
  void validate() const;
};

struct EncoderLayerParams {
  // Per-head projections packed side by side; head h owns columns
  // [h * head_size, (h + 1) * head_size).
  Tensor query_weight, query_bias;
  Tensor key_weight, key_bias;
  Tensor value_weight, value_bias;
  Tensor output_weight, output_bias;
  Tensor ff_in_weight, ff_in_bias;
  Tensor ff_out_weight, ff_out_bias;
  Tensor attention_norm_gain, attention_norm_bias;
  Tensor ff_norm_gain, ff_norm_bias;
};

/// Attention weights of one forward pass, indexed [layer][head]; each is n_T×n_T.
using AttentionMaps = std::vector<std::vector<Tensor>>;

/// Post-norm multi-head self-attention encoder without masking or positional
/// encoding: every row attends to every row.
class TransformerEncoder {
 public:
  TransformerEncoder(const TransformerConfig& config, ParameterStore& store, Rng& rng,
                     const std::string& prefix);

  /// n_T×d_T → n_T×d_T.
  Tensor encode(const Tensor& input) const;
  /// Row 0 of encode(input), skipping work for the other rows in the last layer.
  Tensor encode_first_row(const Tensor& input) const;
  /// Attention weights used by encode(input); records no gradient history.
  AttentionMaps attention_probe(const Tensor& input) const;

  const TransformerConfig& config() const { return config_; }
  const std::vector<EncoderLayerParams>& layers() const { return layers_; }

 private:
  Tensor run(const Tensor& input, bool first_row_only, AttentionMaps* probe) const;
  Tensor layer_forward(const EncoderLayerParams& p, const Tensor& x, bool first_row_only,
                       std::vector<Tensor>* probe) const;

  TransformerConfig config_;
  std::vector<EncoderLayerParams> layers_;
};

}  // namespace wmg
