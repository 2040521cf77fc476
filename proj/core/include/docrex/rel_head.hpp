#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "docrex/ops.hpp"
#include "docrex/tape.hpp"

namespace docrex::rel_head {

using diffmath::Parameter;
using diffmath::ParameterStore;
using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

// Views into a ParameterStore under the rel_head.* namespace. W_r holds
// |R| + 1 stacked d x d bilinear forms; the last one is the TH class.
struct RelHeadParams {
  Parameter* W_h = nullptr;
  Parameter* W_t = nullptr;
  Parameter* W_ch = nullptr;
  Parameter* W_ct = nullptr;
  Parameter* W_r = nullptr;  // (|R|+1) x d x d
  Parameter* b_r = nullptr;  // 1 x (|R|+1)

  static void init(ParameterStore& params, std::size_t d_model, std::size_t n_relations, Rng& rng);
  static RelHeadParams bind(ParameterStore& params);

  std::size_t n_relations() const { return b_r->value.size() - 1; }
  std::size_t th_index() const { return n_relations(); }
};

// Row-batched z_h = tanh(W_h e_h + W_ch c), z_t = tanh(W_t e_t + W_ct c).
// All inputs are P x d; weights act on column vectors (row form x W^T).
std::pair<Var, Var> pair_repr(Tape& tape, const RelHeadParams& params, Var e_h, Var e_t, Var c);

// P x (|R|+1) logits y_c = z_h^T W_c z_t + b_c.
Var relation_logits(Tape& tape, const RelHeadParams& params, Var z_h, Var z_t);

// Generic row-wise bilinear form: out[p][c] = x_p^T W[c] y_p + b[c].
Var bilinear(Var x, Var W, Var y, Var b);

// Adaptive-thresholding loss summed over rows. positives is P x |R| with
// entries in {0, 1}; the last logit column is TH.
Var atl_loss(Var logits, const Tensor& positives);

// Plain evaluation for a single logit row (used by oracles and tests).
double atl_loss_value(std::span<const double> logits, const std::vector<bool>& positive);

// S_r = y_r - y_TH for every row; returns P x |R|.
Tensor threshold_scores(const Tensor& logits);

// {r : S_r > 0}; empty means NA.
std::vector<std::size_t> predict(std::span<const double> scores);

}  // namespace docrex::rel_head
