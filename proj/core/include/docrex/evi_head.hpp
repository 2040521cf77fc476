#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "docrex/ops.hpp"
#include "docrex/tape.hpp"

namespace docrex::evi_head {

using diffmath::Parameter;
using diffmath::ParameterStore;
using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

inline constexpr double kDefaultThreshold = 0.5;

struct EviHeadParams {
  Parameter* W_v = nullptr;  // d x d
  Parameter* b_v = nullptr;  // 1 x 1

  static void init(ParameterStore& params, std::size_t d_model, Rng& rng);
  static EviHeadParams bind(ParameterStore& params);
};

// N x d: logsumexp over the H rows of each half-open span.
Var sentence_embeddings(Var H, const std::vector<std::pair<std::size_t, std::size_t>>& spans);

// P x N logits s_n^T W_v c_p + b_v; apply sigmoid for probabilities.
Var evidence_logits(Tape& tape, const EviHeadParams& params, Var sentences, Var contexts);

struct EvidenceTarget {
  std::size_t row = 0;                  // row in the logits matrix
  std::vector<std::size_t> sentences;  // gold evidence; must be non-empty
};

// Binary cross-entropy summed over the given rows and all sentences. Callers
// pass only pairs with at least one relation and non-empty evidence.
Var evi_loss(Var logits, const std::vector<EvidenceTarget>& targets);

// {n : probs_n >= threshold}
std::vector<std::size_t> predict_evidence(std::span<const double> probs, double threshold = kDefaultThreshold);

}  // namespace docrex::evi_head
