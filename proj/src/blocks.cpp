#include "ptd/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace ptd::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "identity") return Activation::identity;
  if (text == "tanh") return Activation::tanh;
  if (text == "relu") return Activation::relu;
  if (text == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

ad::Var activate(Activation a, const ad::Var& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
    case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

ad::ParamId init_uniform(ad::ParameterStore& store, std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return store.add(std::move(name), std::move(t));
}

Linear make_linear(ad::ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t out_dim,
                   Rng& rng) {
  Linear l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight = init_uniform(store, name + ".weight", {in_dim, out_dim}, in_dim, rng);
  l.bias = init_uniform(store, name + ".bias", {1, out_dim}, in_dim, rng);
  return l;
}

ad::Var linear(ad::Tape& tape, const Linear& p, const ad::Var& x) {
  return ad::add(ad::matmul(x, tape.param(p.weight)), tape.param(p.bias));
}

GruParams make_gru(ad::ParameterStore& store, const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
                   Rng& rng) {
  GruParams g;
  g.input_dim = input_dim;
  g.hidden_dim = hidden_dim;
  g.w_input = init_uniform(store, name + ".w_input", {input_dim, 3 * hidden_dim}, input_dim, rng);
  g.w_hidden = init_uniform(store, name + ".w_hidden", {hidden_dim, 3 * hidden_dim}, hidden_dim, rng);
  g.b_input = init_uniform(store, name + ".b_input", {1, 3 * hidden_dim}, hidden_dim, rng);
  g.b_hidden = init_uniform(store, name + ".b_hidden", {1, 3 * hidden_dim}, hidden_dim, rng);
  return g;
}

ad::Var gru_step(ad::Tape& tape, const GruParams& p, const ad::Var& input, const ad::Var& h_prev) {
  const std::size_t hd = p.hidden_dim;
  if (input.value().cols() != p.input_dim || h_prev.value().cols() != hd ||
      input.value().rows() != h_prev.value().rows()) {
    throw std::invalid_argument("gru_step: input " + shape_string(input.shape()) + " / hidden " +
                                shape_string(h_prev.shape()) + " do not match cell " + std::to_string(p.input_dim) +
                                "->" + std::to_string(hd));
  }
  auto gi = ad::add(ad::matmul(input, tape.param(p.w_input)), tape.param(p.b_input));
  auto gh = ad::add(ad::matmul(h_prev, tape.param(p.w_hidden)), tape.param(p.b_hidden));
  auto reset = ad::sigmoid(ad::add(ad::slice(gi, 1, 0, hd), ad::slice(gh, 1, 0, hd)));
  auto update = ad::sigmoid(ad::add(ad::slice(gi, 1, hd, 2 * hd), ad::slice(gh, 1, hd, 2 * hd)));
  auto candidate =
      ad::tanh(ad::add(ad::slice(gi, 1, 2 * hd, 3 * hd), ad::mul(reset, ad::slice(gh, 1, 2 * hd, 3 * hd))));
  // h = (1 - z) * n + z * h_prev
  return ad::add(candidate, ad::mul(update, ad::sub(h_prev, candidate)));
}

MlpParams make_mlp(ad::ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                   Rng& rng, Activation hidden) {
  if (widths.size() < 2) throw std::invalid_argument("mlp '" + name + "' needs at least one layer");
  MlpParams m;
  m.hidden = hidden;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(make_linear(store, name + ".layer" + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

ad::Var mlp_apply(ad::Tape& tape, const MlpParams& p, const ad::Var& x) {
  if (x.value().cols() != p.layers.front().in_dim) {
    throw std::invalid_argument("mlp_apply: input " + shape_string(x.shape()) + " for layer width " +
                                std::to_string(p.layers.front().in_dim));
  }
  ad::Var h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = linear(tape, p.layers[i], h);
    if (i + 1 < p.layers.size()) h = activate(p.hidden, h);
  }
  return h;
}

std::size_t output_dim(const MlpParams& p) { return p.layers.back().out_dim; }

AttnParams make_attn(ad::ParameterStore& store, const std::string& name, std::size_t query_dim,
                     std::size_t value_dim, std::size_t attn_dim, Rng& rng, Activation output) {
  AttnParams a;
  a.query_dim = query_dim;
  a.value_dim = value_dim;
  a.attn_dim = attn_dim;
  a.output = output;
  a.w_query = init_uniform(store, name + ".w_query", {query_dim, attn_dim}, query_dim, rng);
  a.w_value = init_uniform(store, name + ".w_value", {value_dim, attn_dim}, value_dim, rng);
  a.w_alpha = init_uniform(store, name + ".w_alpha", {2 * attn_dim, 1}, 2 * attn_dim, rng);
  return a;
}

AttnOutput attn(ad::Tape& tape, const AttnParams& p, const ad::Var& queries, const ad::Var& values,
                const std::vector<std::uint8_t>* mask) {
  if (values.value().cols() != p.value_dim || queries.value().cols() != p.query_dim) {
    throw std::invalid_argument("attn: queries " + shape_string(queries.shape()) + " / values " +
                                shape_string(values.shape()) + " do not match " + std::to_string(p.query_dim) +
                                "/" + std::to_string(p.value_dim));
  }
  const std::size_t rows = queries.value().rows();
  const std::size_t count = values.value().rows();
  if (mask && mask->size() != rows * count) throw std::invalid_argument("attn: mask size mismatch");

  auto projected_q = ad::matmul(queries, tape.param(p.w_query));
  auto projected_v = ad::matmul(values, tape.param(p.w_value));
  auto alpha = tape.param(p.w_alpha);
  auto score_q = ad::matmul(projected_q, ad::slice(alpha, 0, 0, p.attn_dim));                       // R x 1
  auto score_v = ad::matmul(projected_v, ad::slice(alpha, 0, p.attn_dim, 2 * p.attn_dim));          // K x 1
  auto logits = ad::add(score_q, ad::transpose(score_v));                                            // R x K
  auto weights = ad::softmax(logits, 1, mask);
  auto out = activate(p.output, ad::matmul(weights, projected_v));

  if (mask) {
    Tensor has_any({rows, 1}, 0.0);
    bool any_empty = false;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < count; ++k) has_any[r] = std::max(has_any[r], (*mask)[r * count + k] ? 1.0 : 0.0);
      any_empty = any_empty || has_any[r] == 0.0;
    }
    if (any_empty) out = ad::mul(out, tape.constant(std::move(has_any)));
  }
  return {out, weights};
}

}  // namespace ptd::nn
