#include "docrex/encoder.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "docrex/errors.hpp"

namespace docrex::encoder {

using diffmath::glorot_uniform;
using diffmath::Parameter;

void EncoderConfig::validate() const {
  if (n_layers == 0) throw ConfigError("encoder: n_layers must be positive");
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) {
    throw ConfigError("encoder: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (d_ff == 0) throw ConfigError("encoder: d_ff must be positive");
  if (vocab_size < 3) throw ConfigError("encoder: vocab_size must cover the reserved tokens");
  if (max_len == 0) throw ConfigError("encoder: max_len must be positive");
}

namespace {

std::string layer_key(std::size_t l, const char* leaf) {
  return "encoder.layer" + std::to_string(l) + "." + leaf;
}

void add_linear(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  params.add(prefix + ".weight", glorot_uniform({in, out}, in, out, rng));
  params.add(prefix + ".bias", Tensor({1, out}));
}

void add_norm(ParameterStore& params, const std::string& prefix, std::size_t d) {
  params.add(prefix + ".gamma", Tensor({1, d}, 1.0));
  params.add(prefix + ".beta", Tensor({1, d}));
}

Var linear(Tape& tape, ParameterStore& params, const std::string& prefix, Var x) {
  Var w = tape.param(params.get(prefix + ".weight"));
  Var b = tape.param(params.get(prefix + ".bias"));
  return diffmath::add(diffmath::matmul(x, w), b);
}

Var norm(Tape& tape, ParameterStore& params, const std::string& prefix, Var x) {
  return diffmath::layer_norm(x, tape.param(params.get(prefix + ".gamma")), tape.param(params.get(prefix + ".beta")));
}

// Sinusoidal table scaled by 0.3 as the starting point for the learned
// positional embeddings.
Tensor sinusoid_table(std::size_t rows, std::size_t d) {
  Tensor t({rows, d});
  for (std::size_t p = 0; p < rows; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i / 2 * 2) / static_cast<double>(d));
      const double angle = static_cast<double>(p) * freq;
      t(p, i) = 0.3 * (i % 2 ? std::cos(angle) : std::sin(angle));
    }
  }
  return t;
}

}  // namespace

void init_params(ParameterStore& params, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  params.add("encoder.tok_emb", glorot_uniform({cfg.vocab_size, d}, cfg.vocab_size, d, rng));
  params.add("encoder.pos_emb", sinusoid_table(cfg.max_len, d));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    add_norm(params, layer_key(l, "ln1"), d);
    add_linear(params, layer_key(l, "qkv"), d, 3 * d, rng);
    add_linear(params, layer_key(l, "out"), d, d, rng);
    add_norm(params, layer_key(l, "ln2"), d);
    add_linear(params, layer_key(l, "ff1"), d, cfg.d_ff, rng);
    add_linear(params, layer_key(l, "ff2"), cfg.d_ff, d, rng);
  }
  add_norm(params, "encoder.final_ln", d);
}

EncoderOutput encode(Tape& tape, ParameterStore& params, const EncoderConfig& cfg,
                     const corpus::MarkedSequence& seq) {
  using namespace diffmath;
  const std::size_t L = seq.size();
  if (L == 0) throw ShapeError("encode: empty sequence");
  if (L > cfg.max_len) {
    throw ConfigError("encode: sequence length " + std::to_string(L) + " exceeds max_len " +
                      std::to_string(cfg.max_len));
  }
  for (std::size_t t : seq.tokens) {
    if (t >= cfg.vocab_size) {
      throw ConfigError("encode: unknown token id " + std::to_string(t) + " (vocab size " +
                        std::to_string(cfg.vocab_size) + ")");
    }
  }
  const std::size_t d = cfg.d_model;
  const std::size_t dk = d / cfg.n_heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Var x = embedding_gather(tape.param(params.get("encoder.tok_emb")), seq.tokens);
  if (cfg.use_positions) {
    std::vector<std::size_t> positions(L);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    x = add(x, embedding_gather(tape.param(params.get("encoder.pos_emb")), positions));
  }

  Var attention;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const bool last = l + 1 == cfg.n_layers;
    Var h = norm(tape, params, layer_key(l, "ln1"), x);
    Var qkv = linear(tape, params, layer_key(l, "qkv"), h);
    std::vector<Var> heads;
    Var head_sum;
    for (std::size_t k = 0; k < cfg.n_heads; ++k) {
      Var q = slice(qkv, 1, k * dk, (k + 1) * dk);
      Var kk = slice(qkv, 1, d + k * dk, d + (k + 1) * dk);
      Var v = slice(qkv, 1, 2 * d + k * dk, 2 * d + (k + 1) * dk);
      Var probs = softmax(scale(matmul(q, transpose(kk)), inv_sqrt_dk), 1);
      heads.push_back(matmul(probs, v));
      if (last) head_sum = head_sum.valid() ? add(head_sum, probs) : probs;
    }
    Var mixed = heads.size() == 1 ? heads[0] : concat(heads, 1);
    x = add(x, linear(tape, params, layer_key(l, "out"), mixed));
    Var h2 = norm(tape, params, layer_key(l, "ln2"), x);
    Var ff = linear(tape, params, layer_key(l, "ff2"), relu(linear(tape, params, layer_key(l, "ff1"), h2)));
    x = add(x, ff);
    if (last) attention = scale(head_sum, 1.0 / static_cast<double>(cfg.n_heads));
  }
  return {norm(tape, params, "encoder.final_ln", x), attention};
}

Var entity_embeddings(Var H, const corpus::MarkedSequence& seq) {
  return diffmath::segment_logsumexp(H, seq.mention_start_pos);
}

Var entity_attention(Var A, const corpus::MarkedSequence& seq) {
  const std::size_t L = A.rows();
  Tensor avg({seq.mention_start_pos.size(), L});
  for (std::size_t e = 0; e < seq.mention_start_pos.size(); ++e) {
    const auto& starts = seq.mention_start_pos[e];
    if (starts.empty()) throw ShapeError("entity_attention: entity " + std::to_string(e) + " has no mentions");
    const double w = 1.0 / static_cast<double>(starts.size());
    for (std::size_t p : starts) avg(e, p) += w;
  }
  return diffmath::matmul(A.tape()->constant(std::move(avg)), A);
}

Var context_weights(Var Ah, Var At) {
  Var prod = diffmath::mul(Ah, At);
  const Tensor& pv = prod.value();
  const std::size_t P = pv.rows(), L = pv.cols();
  Tensor w({P, L});
  std::vector<double> denom(P);
  for (std::size_t p = 0; p < P; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < L; ++j) s += pv(p, j);
    denom[p] = s;
    if (s > 0.0) {
      for (std::size_t j = 0; j < L; ++j) w(p, j) = pv(p, j) / s;
    } else {
      spdlog::warn("context_weights: zero attention overlap in row {}, using uniform weights", p);
      for (std::size_t j = 0; j < L; ++j) w(p, j) = 1.0 / static_cast<double>(L);
    }
  }
  return prod.tape()->record("context_weights", std::move(w), {prod},
                             [denom = std::move(denom)](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& w = tape.value(self);
    const std::size_t in = tape.input(self, 0);
    if (!tape.needs_grad(in)) return;
    Tensor& gx = tape.grad_ref(in);
    for (std::size_t p = 0; p < w.rows(); ++p) {
      if (!(denom[p] > 0.0)) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) dot += g(p, j) * w(p, j);
      for (std::size_t j = 0; j < w.cols(); ++j) gx(p, j) += (g(p, j) - dot) / denom[p];
    }
  });
}

Var context_embeddings(Var Ah, Var At, Var H) { return diffmath::matmul(context_weights(Ah, At), H); }

}  // namespace docrex::encoder
