#include "docrex/model.hpp"

#include <json.hpp>

#include "docrex/checkpoint.hpp"
#include "docrex/errors.hpp"

namespace docrex {

using nlohmann::json;

Model Model::create(encoder::EncoderConfig cfg, corpus::TokenVocab tokens, corpus::RelationVocab relations) {
  Model m;
  cfg.vocab_size = tokens.size();
  cfg.validate();
  m.encoder = cfg;
  m.tokens = std::move(tokens);
  m.relations = std::move(relations);
  Rng rng(cfg.seed);
  encoder::init_params(m.params, cfg, rng);
  rel_head::RelHeadParams::init(m.params, cfg.d_model, m.relations.size(), rng);
  evi_head::EviHeadParams::init(m.params, cfg.d_model, rng);
  return m;
}

void Model::save(const std::string& path) const {
  json meta;
  meta["encoder"] = {{"n_layers", encoder.n_layers}, {"n_heads", encoder.n_heads},   {"d_model", encoder.d_model},
                     {"d_ff", encoder.d_ff},         {"vocab_size", encoder.vocab_size}, {"max_len", encoder.max_len},
                     {"seed", encoder.seed},         {"use_positions", encoder.use_positions}};
  meta["tokens"] = tokens.tokens();
  meta["relations"] = relations.names();
  meta["tau"] = tau ? json(*tau) : json(nullptr);
  meta["joint"] = joint;
  diffmath::save_checkpoint(path, params, meta.dump());
}

Model Model::load(const std::string& path) {
  diffmath::Checkpoint ck = diffmath::load_checkpoint(path);
  const json meta = json::parse(ck.metadata_json);
  Model m;
  try {
    const json& e = meta.at("encoder");
    m.encoder.n_layers = e.at("n_layers");
    m.encoder.n_heads = e.at("n_heads");
    m.encoder.d_model = e.at("d_model");
    m.encoder.d_ff = e.at("d_ff");
    m.encoder.vocab_size = e.at("vocab_size");
    m.encoder.max_len = e.at("max_len");
    m.encoder.seed = e.at("seed");
    m.encoder.use_positions = e.at("use_positions");
    m.tokens = corpus::TokenVocab::from_tokens(meta.at("tokens").get<std::vector<std::string>>());
    m.relations = corpus::RelationVocab(meta.at("relations").get<std::vector<std::string>>());
    if (!meta.at("tau").is_null()) m.tau = meta.at("tau").get<double>();
    m.joint = meta.value("joint", true);
  } catch (const json::exception& ex) {
    throw IoError(path + ": bad checkpoint metadata: " + ex.what());
  }
  m.encoder.validate();
  m.params = std::move(ck.params);
  rel_head::RelHeadParams::bind(m.params);
  evi_head::EviHeadParams::bind(m.params);
  return m;
}

corpus::MarkedSequence prepare_sequence(const Model& model, const corpus::Document& doc) {
  const std::size_t len = corpus::marked_length(doc);
  if (len > model.encoder.max_len) {
    throw ConfigError("document \"" + doc.doc_id + "\": marked length " + std::to_string(len) +
                      " exceeds encoder max_len " + std::to_string(model.encoder.max_len));
  }
  return corpus::insert_markers(doc, model.tokens);
}

PairForward forward_pairs(diffmath::Tape& tape, Model& model, const corpus::MarkedSequence& seq,
                          const std::vector<EntityPair>& pairs, bool with_evidence) {
  using namespace diffmath;
  const encoder::EncoderOutput enc = encoder::encode(tape, model.params, model.encoder, seq);
  Var entities = encoder::entity_embeddings(enc.H, seq);
  Var attention = encoder::entity_attention(enc.A, seq);
  std::vector<std::size_t> heads, tails;
  for (const auto& [h, t] : pairs) {
    heads.push_back(h);
    tails.push_back(t);
  }
  Var contexts = encoder::context_embeddings(gather_rows(attention, heads), gather_rows(attention, tails), enc.H);
  const auto rel = rel_head::RelHeadParams::bind(model.params);
  auto [z_h, z_t] = rel_head::pair_repr(tape, rel, gather_rows(entities, heads), gather_rows(entities, tails), contexts);
  PairForward out{rel_head::relation_logits(tape, rel, z_h, z_t), contexts, Var()};
  if (with_evidence) {
    const auto evi = evi_head::EviHeadParams::bind(model.params);
    out.evidence_logits = evi_head::evidence_logits(tape, evi, evi_head::sentence_embeddings(enc.H, seq.sent_spans),
                                                    contexts);
  }
  return out;
}

DocScores score_document(Model& model, const corpus::Document& doc, const std::vector<EntityPair>& pairs,
                         bool with_evidence) {
  DocScores out;
  out.pairs = pairs;
  if (pairs.empty()) {
    out.scores = diffmath::Tensor({0, model.n_relations()});
    if (with_evidence) out.evidence_probs = diffmath::Tensor({0, doc.sentences.size()});
    return out;
  }
  diffmath::Tape tape(false);
  const auto seq = prepare_sequence(model, doc);
  PairForward f = forward_pairs(tape, model, seq, pairs, with_evidence);
  out.scores = rel_head::threshold_scores(f.logits.value());
  if (with_evidence) {
    out.evidence_probs = f.evidence_logits.value();
    for (double& v : out.evidence_probs.values()) v = diffmath::sigmoid_value(v);
  }
  return out;
}

}  // namespace docrex
