#include "docrex/evi_head.hpp"

#include "docrex/errors.hpp"

namespace docrex::evi_head {

void EviHeadParams::init(ParameterStore& params, std::size_t d, Rng& rng) {
  params.add("evi_head.W_v", diffmath::glorot_uniform({d, d}, d, d, rng));
  params.add("evi_head.b_v", Tensor({1, 1}));
}

EviHeadParams EviHeadParams::bind(ParameterStore& params) {
  return {&params.get("evi_head.W_v"), &params.get("evi_head.b_v")};
}

Var sentence_embeddings(Var H, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
  std::vector<std::vector<std::size_t>> segments;
  segments.reserve(spans.size());
  for (const auto& [b, e] : spans) {
    if (b >= e) throw ShapeError("sentence_embeddings: empty sentence span");
    std::vector<std::size_t> rows;
    for (std::size_t i = b; i < e; ++i) rows.push_back(i);
    segments.push_back(std::move(rows));
  }
  return diffmath::segment_logsumexp(H, segments);
}

Var evidence_logits(Tape& tape, const EviHeadParams& params, Var sentences, Var contexts) {
  using namespace diffmath;
  // (C W_v^T) S^T gives [p][n] = s_n^T W_v c_p.
  Var projected = matmul(contexts, transpose(tape.param(*params.W_v)));
  return add(matmul(projected, transpose(sentences)), tape.param(*params.b_v));
}

Var evi_loss(Var logits, const std::vector<EvidenceTarget>& targets) {
  if (targets.empty()) return logits.tape()->constant(Tensor::scalar(0.0));
  const std::size_t N = logits.cols();
  std::vector<std::size_t> rows;
  Tensor labels({targets.size(), N});
  for (std::size_t k = 0; k < targets.size(); ++k) {
    rows.push_back(targets[k].row);
    for (std::size_t s : targets[k].sentences) {
      if (s >= N) throw ShapeError("evi_loss: evidence sentence out of range");
      labels(k, s) = 1.0;
    }
  }
  return diffmath::bce_with_logits(diffmath::gather_rows(logits, rows), labels);
}

std::vector<std::size_t> predict_evidence(std::span<const double> probs, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < probs.size(); ++n)
    if (probs[n] >= threshold) out.push_back(n);
  return out;
}

}  // namespace docrex::evi_head
