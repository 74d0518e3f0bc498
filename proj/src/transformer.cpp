#include "wmg/transformer.hpp"

#include <cmath>

namespace wmg {

void TransformerConfig::validate() const {
  if (layers == 0 || heads == 0 || head_size == 0 || ff_hidden == 0) {
    throw std::invalid_argument("TransformerConfig: layers, heads, head size and feed-forward "
                                "width must all be positive");
  }
}

TransformerEncoder::TransformerEncoder(const TransformerConfig& config, ParameterStore& store,
                                       Rng& rng, const std::string& prefix)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.model_size();
  const std::size_t ff = config_.ff_hidden;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l) + ".";
    EncoderLayerParams lp;
    lp.query_weight = store.add_weight(p + "attn.query.w", d, d, rng);
    lp.query_bias = store.add_bias(p + "attn.query.b", d);
    lp.key_weight = store.add_weight(p + "attn.key.w", d, d, rng);
    lp.key_bias = store.add_bias(p + "attn.key.b", d);
    lp.value_weight = store.add_weight(p + "attn.value.w", d, d, rng);
    lp.value_bias = store.add_bias(p + "attn.value.b", d);
    lp.output_weight = store.add_weight(p + "attn.out.w", d, d, rng);
    lp.output_bias = store.add_bias(p + "attn.out.b", d);
    lp.attention_norm_gain = store.add_constant(p + "attn.norm.gain", 1, d, 1.0);
    lp.attention_norm_bias = store.add_bias(p + "attn.norm.bias", d);
    lp.ff_in_weight = store.add_weight(p + "ff.in.w", d, ff, rng);
    lp.ff_in_bias = store.add_bias(p + "ff.in.b", ff);
    lp.ff_out_weight = store.add_weight(p + "ff.out.w", ff, d, rng);
    lp.ff_out_bias = store.add_bias(p + "ff.out.b", d);
    lp.ff_norm_gain = store.add_constant(p + "ff.norm.gain", 1, d, 1.0);
    lp.ff_norm_bias = store.add_bias(p + "ff.norm.bias", d);
    layers_.push_back(std::move(lp));
  }
}

Tensor TransformerEncoder::layer_forward(const EncoderLayerParams& p, const Tensor& x,
                                         bool first_row_only, std::vector<Tensor>* probe) const {
  const std::size_t hs = config_.head_size;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hs));

  // Only the queries (and everything downstream of them) shrink to row 0.
  const Tensor query_rows = first_row_only ? slice_row(x, 0) : x;
  const Tensor q = add(matmul(query_rows, p.query_weight), p.query_bias);
  const Tensor k = add(matmul(x, p.key_weight), p.key_bias);
  const Tensor v = add(matmul(x, p.value_weight), p.value_bias);

  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const std::size_t lo = h * hs;
    const std::size_t hi = lo + hs;
    const Tensor qh = slice_cols(q, lo, hi);
    const Tensor kh = slice_cols(k, lo, hi);
    const Tensor vh = slice_cols(v, lo, hi);
    const Tensor weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    if (probe) probe->push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  const Tensor attended =
      add(matmul(heads.size() == 1 ? heads[0] : concat_cols(heads), p.output_weight), p.output_bias);
  const Tensor mid = layer_norm_rows(add(query_rows, attended), p.attention_norm_gain,
                                     p.attention_norm_bias);
  const Tensor ff = add(matmul(relu(add(matmul(mid, p.ff_in_weight), p.ff_in_bias)), p.ff_out_weight),
                        p.ff_out_bias);
  return layer_norm_rows(add(mid, ff), p.ff_norm_gain, p.ff_norm_bias);
}

Tensor TransformerEncoder::run(const Tensor& input, bool first_row_only,
                               AttentionMaps* probe) const {
  if (input.cols() != config_.model_size()) {
    throw DimensionError("encode: input " + input.shape_string() + " does not have d_T = " +
                         std::to_string(config_.model_size()) + " columns");
  }
  if (input.rows() == 0) throw DimensionError("encode: input has no rows");
  Tensor x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::vector<Tensor>* layer_probe = nullptr;
    if (probe) layer_probe = &probe->emplace_back();
    const bool last = l + 1 == layers_.size();
    x = layer_forward(layers_[l], x, first_row_only && last, layer_probe);
  }
  return x;
}

Tensor TransformerEncoder::encode(const Tensor& input) const { return run(input, false, nullptr); }

Tensor TransformerEncoder::encode_first_row(const Tensor& input) const {
  return run(input, true, nullptr);
}

AttentionMaps TransformerEncoder::attention_probe(const Tensor& input) const {
  NoGradGuard no_grad;
  AttentionMaps maps;
  run(input, false, &maps);
  return maps;
}

}  // namespace wmg
