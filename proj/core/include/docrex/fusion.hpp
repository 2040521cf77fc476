#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "docrex/corpus.hpp"
#include "docrex/metrics.hpp"
#include "docrex/model.hpp"
#include "docrex/rules.hpp"

namespace docrex::fusion {

enum class Mode { kFull, kNoPseudo, kNoOrigDoc, kNoBlending, kNoJoint };
enum class EvidenceSource { kModel, kRules };

// Case-insensitive; ConfigError on unknown names.
Mode parse_mode(const std::string& name);
const char* mode_name(Mode mode);
EvidenceSource parse_evidence_source(const std::string& name);
const char* evidence_source_name(EvidenceSource source);

inline constexpr double kTauLow = -20.0;
inline constexpr double kTauHigh = 20.0;

struct PseudoDocument {
  std::size_t source_head = 0;
  std::size_t source_tail = 0;
  std::vector<std::size_t> kept;  // original sentence ordinals, ascending
  corpus::Document doc;
  std::size_t head = 0;  // indices inside `doc`
  std::size_t tail = 0;
};

// The document restricted to the evidence sentences, or nullopt when the
// evidence is empty or drops every mention of head or tail.
std::optional<PseudoDocument> build_pseudo(const corpus::Document& doc, std::size_t head, std::size_t tail,
                                           const std::vector<std::size_t>& evidence);

struct Fused {
  double probability = 0.0;
  bool predicted = false;
};

Fused fuse_scores(double s_o, double s_e, double tau);

struct TauInstance {
  double combined = 0.0;  // S_O + S_E
  bool label = false;
};

// Mean logistic loss of the instances at threshold tau.
double tau_objective(const std::vector<TauInstance>& instances, double tau);

// Golden-section minimisation of tau_objective on [lo, hi].
double tune_tau(const std::vector<TauInstance>& instances, double lo = kTauLow, double hi = kTauHigh);

struct InferenceConfig {
  Mode mode = Mode::kFull;
  EvidenceSource source = EvidenceSource::kModel;
  const rules::CorefProvider* provider = nullptr;  // required for kRules
  double evi_threshold = 0.5;
};

// Rejects NoJoint with model evidence and rules evidence without a provider.
void check_config(const Model& model, const InferenceConfig& cfg);

struct PairResult {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::vector<double> s_o;                 // |R|
  std::optional<std::vector<double>> s_e;  // absent when the pair fell back
  std::vector<std::size_t> evidence;
};

struct DocResult {
  std::string doc_id;
  std::vector<PairResult> pairs;  // every candidate pair, head-major
};

// Original-document scores for every pair, the evidence of each pair and,
// unless the mode is NoPseudo, pseudo-document scores.
std::vector<DocResult> score_documents(Model& model, const std::vector<corpus::Document>& docs,
                                       const InferenceConfig& cfg);

// Instances for every pair with a pseudo-document score and every relation.
std::vector<TauInstance> tau_instances(const std::vector<DocResult>& results,
                                       const std::vector<corpus::Document>& docs);

struct Prediction {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::size_t relation = 0;
  double score = 0.0;
  std::vector<std::size_t> evidence;
};

// Decision and score of one (pair, relation). Full and NoJoint need tau.
std::optional<double> decide(const PairResult& pair, std::size_t relation, Mode mode, std::optional<double> tau);

// Predicted facts per document.
std::vector<std::vector<Prediction>> predict(const std::vector<DocResult>& results, Mode mode,
                                             std::optional<double> tau);

std::vector<metrics::Fact> to_facts(const std::vector<DocResult>& results,
                                    const std::vector<std::vector<Prediction>>& predictions,
                                    const corpus::RelationVocab& relations);
metrics::EvidenceMap evidence_map(const std::vector<DocResult>& results);

// Leaderboard-style records {title, h_idx, t_idx, r, score, evidence}.
std::string records_json(const std::vector<DocResult>& results,
                         const std::vector<std::vector<Prediction>>& predictions,
                         const corpus::RelationVocab& relations);

}  // namespace docrex::fusion
