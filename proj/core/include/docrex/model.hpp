#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "docrex/corpus.hpp"
#include "docrex/encoder.hpp"
#include "docrex/evi_head.hpp"
#include "docrex/rel_head.hpp"

namespace docrex {

using EntityPair = std::pair<std::size_t, std::size_t>;

// Encoder plus both heads, the vocabularies they were built for, and the
// blending threshold once tuned.
struct Model {
  encoder::EncoderConfig encoder;
  corpus::TokenVocab tokens;
  corpus::RelationVocab relations;
  diffmath::ParameterStore params;
  std::optional<double> tau;
  bool joint = true;  // trained with the evidence loss

  // cfg.vocab_size is overwritten with tokens.size(); cfg.seed drives init.
  static Model create(encoder::EncoderConfig cfg, corpus::TokenVocab tokens, corpus::RelationVocab relations);
  static Model load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t n_relations() const { return relations.size(); }
};

// Marks the document and checks it fits the encoder.
corpus::MarkedSequence prepare_sequence(const Model& model, const corpus::Document& doc);

struct PairForward {
  diffmath::Var logits;           // P x (|R|+1)
  diffmath::Var contexts;         // P x d
  diffmath::Var evidence_logits;  // P x N; invalid unless requested
};

PairForward forward_pairs(diffmath::Tape& tape, Model& model, const corpus::MarkedSequence& seq,
                          const std::vector<EntityPair>& pairs, bool with_evidence);

// Unrecorded scoring of one document.
struct DocScores {
  std::vector<EntityPair> pairs;
  diffmath::Tensor scores;          // P x |R| threshold-relative scores
  diffmath::Tensor evidence_probs;  // P x N, empty unless requested
};

DocScores score_document(Model& model, const corpus::Document& doc, const std::vector<EntityPair>& pairs,
                         bool with_evidence);

}  // namespace docrex
