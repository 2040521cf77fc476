#include "docrex/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "docrex/errors.hpp"
#include "docrex/evi_head.hpp"
#include "docrex/ops.hpp"

namespace docrex::fusion {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  const std::string n = lower(name);
  if (n == "full") return Mode::kFull;
  if (n == "nopseudo") return Mode::kNoPseudo;
  if (n == "noorigdoc") return Mode::kNoOrigDoc;
  if (n == "noblending") return Mode::kNoBlending;
  if (n == "nojoint") return Mode::kNoJoint;
  throw ConfigError("unknown mode \"" + name + "\" (expected full, nopseudo, noorigdoc, noblending, nojoint)");
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kFull: return "full";
    case Mode::kNoPseudo: return "nopseudo";
    case Mode::kNoOrigDoc: return "noorigdoc";
    case Mode::kNoBlending: return "noblending";
    case Mode::kNoJoint: return "nojoint";
  }
  return "?";
}

EvidenceSource parse_evidence_source(const std::string& name) {
  const std::string n = lower(name);
  if (n == "model") return EvidenceSource::kModel;
  if (n == "rules") return EvidenceSource::kRules;
  throw ConfigError("unknown evidence source \"" + name + "\" (expected model or rules)");
}

const char* evidence_source_name(EvidenceSource source) {
  return source == EvidenceSource::kModel ? "model" : "rules";
}

namespace {

// Restriction of `doc` to `kept`; entity_map[e] is the new index of entity e
// or npos when none of its mentions survive.
struct Restriction {
  corpus::Document doc;
  std::vector<std::size_t> entity_map;
};

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

Restriction restrict_document(const corpus::Document& doc, const std::vector<std::size_t>& kept) {
  Restriction out;
  out.doc.doc_id = doc.doc_id;
  std::vector<std::size_t> sent_map(doc.sentences.size(), npos);
  for (std::size_t s : kept) {
    sent_map[s] = out.doc.sentences.size();
    out.doc.sentences.push_back({out.doc.sentences.size(), doc.sentences[s].tokens});
  }
  out.entity_map.assign(doc.entities.size(), npos);
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    corpus::Entity ent;
    ent.id = out.doc.entities.size();
    for (const auto& m : doc.entities[e].mentions) {
      if (sent_map[m.sent_id] == npos) continue;
      corpus::Mention nm = m;
      nm.entity_id = ent.id;
      nm.sent_id = sent_map[m.sent_id];
      ent.mentions.push_back(std::move(nm));
    }
    if (ent.mentions.empty()) continue;
    out.entity_map[e] = ent.id;
    out.doc.entities.push_back(std::move(ent));
  }
  for (const auto& f : doc.facts) {
    if (out.entity_map[f.head] == npos || out.entity_map[f.tail] == npos) continue;
    corpus::RelationFact nf{out.entity_map[f.head], out.entity_map[f.tail], f.relation, {}};
    for (std::size_t s : f.evidence)
      if (s < sent_map.size() && sent_map[s] != npos) nf.evidence.push_back(sent_map[s]);
    out.doc.facts.push_back(std::move(nf));
  }
  return out;
}

std::vector<std::size_t> normalized_evidence(const corpus::Document& doc, std::vector<std::size_t> evidence) {
  std::sort(evidence.begin(), evidence.end());
  evidence.erase(std::unique(evidence.begin(), evidence.end()), evidence.end());
  if (!evidence.empty() && evidence.back() >= doc.sentences.size()) {
    throw ShapeError("document \"" + doc.doc_id + "\": evidence sentence " + std::to_string(evidence.back()) +
                     " out of range");
  }
  return evidence;
}

}  // namespace

std::optional<PseudoDocument> build_pseudo(const corpus::Document& doc, std::size_t head, std::size_t tail,
                                           const std::vector<std::size_t>& evidence) {
  std::vector<std::size_t> kept = normalized_evidence(doc, evidence);
  if (kept.empty()) return std::nullopt;
  Restriction r = restrict_document(doc, kept);
  if (r.entity_map.at(head) == npos || r.entity_map.at(tail) == npos) return std::nullopt;
  corpus::validate_document(r.doc, std::numeric_limits<std::size_t>::max());
  PseudoDocument p;
  p.source_head = head;
  p.source_tail = tail;
  p.kept = std::move(kept);
  p.doc = std::move(r.doc);
  p.head = r.entity_map[head];
  p.tail = r.entity_map[tail];
  return p;
}

Fused fuse_scores(double s_o, double s_e, double tau) {
  const double combined = s_o + s_e;
  const bool predicted = combined > tau;
  double p = diffmath::sigmoid_value(combined - tau);
  // Keep the rounded probability on the same side of 1/2 as its argument.
  if (predicted && p <= 0.5) p = std::nextafter(0.5, 1.0);
  if (!predicted && combined < tau && p >= 0.5) p = std::nextafter(0.5, 0.0);
  return {p, predicted};
}

double tau_objective(const std::vector<TauInstance>& instances, double tau) {
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (const auto& in : instances) {
    const double x = in.combined - tau;
    total += in.label ? diffmath::softplus_value(-x) : diffmath::softplus_value(x);
  }
  return total / static_cast<double>(instances.size());
}

double tune_tau(const std::vector<TauInstance>& instances, double lo, double hi) {
  if (instances.empty()) throw ConfigError("tune_tau: no development instances");
  if (!(lo < hi)) throw ConfigError("tune_tau: empty search interval");
  const auto positives = std::count_if(instances.begin(), instances.end(), [](const auto& i) { return i.label; });
  if (positives == 0 || static_cast<std::size_t>(positives) == instances.size()) {
    const double bound = positives == 0 ? hi : lo;
    spdlog::warn("tune_tau: all {} instances are {}; returning interval bound {}", instances.size(),
                 positives == 0 ? "negative" : "positive", bound);
    return bound;
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = tau_objective(instances, c), fd = tau_objective(instances, d);
  while (b - a > 1e-9) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = tau_objective(instances, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = tau_objective(instances, d);
    }
  }
  return 0.5 * (a + b);
}

void check_config(const Model& model, const InferenceConfig& cfg) {
  if (cfg.mode == Mode::kNoJoint && cfg.source != EvidenceSource::kRules)
    throw ConfigError("mode nojoint fuses with rule evidence; use --evidence-source rules");
  if (cfg.source == EvidenceSource::kRules && cfg.provider == nullptr)
    throw ConfigError("rule evidence needs a coreference provider");
  if (cfg.mode == Mode::kNoJoint && model.joint)
    spdlog::warn("mode nojoint used with a model trained with the evidence loss");
  if (cfg.source == EvidenceSource::kModel && !model.joint)
    spdlog::warn("model evidence requested from a model trained without the evidence loss");
}

std::vector<DocResult> score_documents(Model& model, const std::vector<corpus::Document>& docs,
                                       const InferenceConfig& cfg) {
  check_config(model, cfg);
  const std::size_t n_rel = model.n_relations();
  std::vector<DocResult> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    DocResult res;
    res.doc_id = doc.doc_id;
    const auto pairs = corpus::candidate_pairs(doc);
    const bool model_evidence = cfg.source == EvidenceSource::kModel;
    const DocScores scores = score_document(model, doc, pairs, model_evidence);
    std::vector<rules::SilverLabel> silver;
    if (!model_evidence) silver = rules::silver_labels(doc, *cfg.provider, rules::Scope::kAllPairs);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      PairResult pr;
      pr.head = pairs[p].first;
      pr.tail = pairs[p].second;
      const auto row = scores.scores.row_span(p);
      pr.s_o.assign(row.begin(), row.end());
      if (model_evidence) {
        pr.evidence = evi_head::predict_evidence(scores.evidence_probs.row_span(p), cfg.evi_threshold);
      } else {
        pr.evidence = silver[p].evidence;
      }
      res.pairs.push_back(std::move(pr));
    }

    if (cfg.mode != Mode::kNoPseudo) {
      // Pairs sharing an evidence set share one pseudo-document forward pass.
      std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
      for (std::size_t p = 0; p < res.pairs.size(); ++p)
        if (!res.pairs[p].evidence.empty()) groups[normalized_evidence(doc, res.pairs[p].evidence)].push_back(p);
      for (const auto& [kept, members] : groups) {
        const Restriction r = restrict_document(doc, kept);
        std::vector<EntityPair> local;
        std::vector<std::size_t> owners;
        for (std::size_t p : members) {
          const std::size_t h = r.entity_map[res.pairs[p].head], t = r.entity_map[res.pairs[p].tail];
          if (h == npos || t == npos) continue;
          local.emplace_back(h, t);
          owners.push_back(p);
        }
        if (local.empty()) continue;
        const DocScores ps = score_document(model, r.doc, local, false);
        for (std::size_t i = 0; i < owners.size(); ++i) {
          const auto row = ps.scores.row_span(i);
          res.pairs[owners[i]].s_e = std::vector<double>(row.begin(), row.end());
        }
      }
    }
    for (auto& pr : res.pairs)
      if (pr.s_o.size() != n_rel) throw ShapeError("score width does not match the relation vocabulary");
    out.push_back(std::move(res));
  }
  return out;
}

std::vector<TauInstance> tau_instances(const std::vector<DocResult>& results,
                                       const std::vector<corpus::Document>& docs) {
  if (results.size() != docs.size()) throw ShapeError("tau_instances: results and documents differ in length");
  std::vector<TauInstance> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<EntityPair, std::vector<bool>> gold;
    for (const auto& pr : results[d].pairs)
      if (pr.s_e) gold[{pr.head, pr.tail}].assign(pr.s_o.size(), false);
    for (const auto& f : docs[d].facts) {
      auto it = gold.find({f.head, f.tail});
      if (it != gold.end() && f.relation < it->second.size()) it->second[f.relation] = true;
    }
    for (const auto& pr : results[d].pairs) {
      if (!pr.s_e) continue;
      const auto& labels = gold[{pr.head, pr.tail}];
      for (std::size_t r = 0; r < pr.s_o.size(); ++r) out.push_back({pr.s_o[r] + (*pr.s_e)[r], labels[r]});
    }
  }
  return out;
}

std::optional<double> decide(const PairResult& pair, std::size_t r, Mode mode, std::optional<double> tau) {
  const double s_o = pair.s_o.at(r);
  if (!pair.s_e || mode == Mode::kNoPseudo) return s_o > 0.0 ? std::optional(s_o) : std::nullopt;
  const double s_e = pair.s_e->at(r);
  switch (mode) {
    case Mode::kNoOrigDoc: return s_e > 0.0 ? std::optional(s_e) : std::nullopt;
    case Mode::kNoBlending:
      return s_o > 0.0 || s_e > 0.0 ? std::optional(std::max(s_o, s_e)) : std::nullopt;
    case Mode::kFull:
    case Mode::kNoJoint: {
      if (!tau) throw ConfigError(std::string("mode ") + mode_name(mode) + " needs a tuned tau; run tune-tau first");
      return fuse_scores(s_o, s_e, *tau).predicted ? std::optional(s_o + s_e - *tau) : std::nullopt;
    }
    case Mode::kNoPseudo: break;
  }
  return std::nullopt;
}

std::vector<std::vector<Prediction>> predict(const std::vector<DocResult>& results, Mode mode,
                                             std::optional<double> tau) {
  if ((mode == Mode::kFull || mode == Mode::kNoJoint) && !tau)
    throw ConfigError(std::string("mode ") + mode_name(mode) + " needs a tuned tau; run tune-tau first");
  std::vector<std::vector<Prediction>> out(results.size());
  for (std::size_t d = 0; d < results.size(); ++d) {
    for (const auto& pr : results[d].pairs) {
      for (std::size_t r = 0; r < pr.s_o.size(); ++r) {
        if (auto score = decide(pr, r, mode, tau)) out[d].push_back({pr.head, pr.tail, r, *score, pr.evidence});
      }
    }
  }
  return out;
}

std::vector<metrics::Fact> to_facts(const std::vector<DocResult>& results,
                                    const std::vector<std::vector<Prediction>>& predictions,
                                    const corpus::RelationVocab& relations) {
  std::vector<metrics::Fact> out;
  for (std::size_t d = 0; d < results.size(); ++d)
    for (const auto& p : predictions.at(d))
      out.push_back({results[d].doc_id, p.head, p.tail, relations.name(p.relation)});
  return out;
}

metrics::EvidenceMap evidence_map(const std::vector<DocResult>& results) {
  metrics::EvidenceMap out;
  for (const auto& res : results)
    for (const auto& pr : res.pairs) out[{res.doc_id, pr.head, pr.tail}] = pr.evidence;
  return out;
}

std::string records_json(const std::vector<DocResult>& results,
                         const std::vector<std::vector<Prediction>>& predictions,
                         const corpus::RelationVocab& relations) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t d = 0; d < results.size(); ++d) {
    for (const auto& p : predictions.at(d)) {
      nlohmann::ordered_json rec;
      rec["title"] = results[d].doc_id;
      rec["h_idx"] = p.head;
      rec["t_idx"] = p.tail;
      rec["r"] = relations.name(p.relation);
      rec["score"] = p.score;
      rec["evidence"] = p.evidence;
      arr.push_back(std::move(rec));
    }
  }
  return arr.dump(2) + "\n";
}

}  // namespace docrex::fusion
