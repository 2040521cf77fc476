#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "docrex/corpus.hpp"
#include "docrex/ops.hpp"
#include "docrex/rng.hpp"
#include "docrex/tape.hpp"

namespace docrex::encoder {

using diffmath::ParameterStore;
using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

struct EncoderConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 0;
  std::size_t max_len = 256;
  std::uint64_t seed = 0;
  // Learned positional embeddings; disabled only for permutation tests.
  bool use_positions = true;

  void validate() const;
};

// Adds encoder.* parameters: token/position embeddings, pre-norm blocks and a
// final layer norm.
void init_params(ParameterStore& params, const EncoderConfig& cfg, Rng& rng);

struct EncoderOutput {
  Var H;  // L x d_model
  Var A;  // L x L, mean over heads of the last layer's attention
};

EncoderOutput encode(Tape& tape, ParameterStore& params, const EncoderConfig& cfg,
                     const corpus::MarkedSequence& seq);

// E x d: logsumexp over each entity's mention start-marker rows of H.
Var entity_embeddings(Var H, const corpus::MarkedSequence& seq);

// E x L: mean of the A rows at each entity's mention start markers.
Var entity_attention(Var A, const corpus::MarkedSequence& seq);

// P x L context weights (Ah o At) / (Ah . At) per row; a row whose product
// sums to zero falls back to uniform weights.
Var context_weights(Var Ah, Var At);

// P x d context embeddings H^T w for each pair row.
Var context_embeddings(Var Ah, Var At, Var H);

}  // namespace docrex::encoder
