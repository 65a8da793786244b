#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ptd/autodiff.hpp"

// Learned building blocks shared by every channel: a gated recurrent cell,
// a feed-forward MLP and the customized neighbour attention.
namespace ptd::nn {

using Rng = std::mt19937_64;

enum class Activation { identity, tanh, relu, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);
ad::Var activate(Activation a, const ad::Var& x);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ad::ParamId init_uniform(ad::ParameterStore& store, std::string name, Shape shape, std::size_t fan_in, Rng& rng);

struct Linear {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  ad::ParamId weight;  // in x out
  ad::ParamId bias;    // 1 x out
};

Linear make_linear(ad::ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t out_dim,
                   Rng& rng);
ad::Var linear(ad::Tape& tape, const Linear& p, const ad::Var& x);

// Gate blocks are laid out [reset | update | candidate] along the columns.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  ad::ParamId w_input;   // input x 3H
  ad::ParamId w_hidden;  // H x 3H
  ad::ParamId b_input;   // 1 x 3H
  ad::ParamId b_hidden;  // 1 x 3H
};

GruParams make_gru(ad::ParameterStore& store, const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
                   Rng& rng);
// Rows of `input` and `h_prev` are independent sequences.
ad::Var gru_step(ad::Tape& tape, const GruParams& p, const ad::Var& input, const ad::Var& h_prev);

struct MlpParams {
  std::vector<Linear> layers;
  Activation hidden = Activation::relu;
};

// widths = {in, hidden..., out}; the last layer is linear.
MlpParams make_mlp(ad::ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                   Rng& rng, Activation hidden = Activation::relu);
ad::Var mlp_apply(ad::Tape& tape, const MlpParams& p, const ad::Var& x);
std::size_t output_dim(const MlpParams& p);

// Attn(q, V) = sigma( sum_j softmax_j( w_alpha^T [Wq q ; Wv v_j] ) Wv v_j )
struct AttnParams {
  std::size_t query_dim = 0;
  std::size_t value_dim = 0;
  std::size_t attn_dim = 0;
  ad::ParamId w_query;  // query_dim x attn_dim
  ad::ParamId w_value;  // value_dim x attn_dim
  ad::ParamId w_alpha;  // 2*attn_dim x 1, query half first
  Activation output = Activation::tanh;
};

AttnParams make_attn(ad::ParameterStore& store, const std::string& name, std::size_t query_dim,
                     std::size_t value_dim, std::size_t attn_dim, Rng& rng, Activation output = Activation::tanh);

struct AttnOutput {
  ad::Var output;   // R x attn_dim
  ad::Var weights;  // R x K softmax weights
};

// queries: R x query_dim, values: K x value_dim (K >= 1). mask is R x K
// row-major with 1 where query r may attend to value k; a query with no
// admissible value receives the zero vector.
AttnOutput attn(ad::Tape& tape, const AttnParams& p, const ad::Var& queries, const ad::Var& values,
                const std::vector<std::uint8_t>* mask = nullptr);

}  // namespace ptd::nn
