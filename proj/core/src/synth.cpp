#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "docrex/corpus.hpp"
#include "docrex/errors.hpp"
#include "docrex/rng.hpp"

namespace docrex::corpus {
namespace {

constexpr std::size_t kGivenNames = 10;
constexpr std::size_t kFillers = 20;

struct ProtoMention {
  std::size_t entity;  // doc-local proto entity
  std::size_t start, end;
};

struct ProtoSentence {
  std::vector<std::string> tokens;
  std::vector<ProtoMention> mentions;
};

struct ProtoEntity {
  std::string given, family;
  std::string name() const { return given + " " + family; }
};

struct Unit {
  std::vector<ProtoSentence> sentences;
  bool has_fact = false;
  std::size_t head = 0, tail = 0, relation = 0;
  std::vector<std::size_t> evidence;  // unit-local sentence indices
  PairCategory category = PairCategory::kNone;
};

enum class Template { kIntra, kCoref, kBridge, kDistractor };

class DocBuilder {
 public:
  DocBuilder(Rng& rng, const SynthConfig& cfg) : rng_(rng), cfg_(cfg) {
    families_.resize(cfg.vocab_size);
    std::iota(families_.begin(), families_.end(), std::size_t{0});
    rng_.shuffle(families_);
  }

  std::size_t new_entity() {
    ProtoEntity e;
    e.given = "g" + std::to_string(rng_.below(kGivenNames));
    e.family = "n" + std::to_string(families_[entities_.size()]);
    entities_.push_back(std::move(e));
    return entities_.size() - 1;
  }

  const std::vector<ProtoEntity>& entities() const { return entities_; }

  void fill(ProtoSentence& s, std::size_t lo, std::size_t hi) {
    const std::size_t k = lo + rng_.below(hi - lo + 1);
    for (std::size_t i = 0; i < k; ++i) s.tokens.push_back("f" + std::to_string(rng_.below(kFillers)));
  }
  void edge_fill(ProtoSentence& s) { fill(s, 0, cfg_.max_filler); }
  void inner_fill(ProtoSentence& s) { fill(s, 0, std::min<std::size_t>(1, cfg_.max_filler)); }

  void mention(ProtoSentence& s, std::size_t entity) {
    const std::size_t start = s.tokens.size();
    s.tokens.push_back(entities_[entity].given);
    s.tokens.push_back(entities_[entity].family);
    s.mentions.push_back({entity, start, start + 2});
  }

  // subject trigger object, with optional filler around each slot
  ProtoSentence triple(std::vector<std::string> subject_alias, std::size_t subject, const std::string& trigger,
                       std::size_t object) {
    ProtoSentence s;
    edge_fill(s);
    if (subject_alias.empty()) {
      mention(s, subject);
    } else {
      s.tokens.insert(s.tokens.end(), subject_alias.begin(), subject_alias.end());
    }
    inner_fill(s);
    s.tokens.push_back(trigger);
    inner_fill(s);
    mention(s, object);
    edge_fill(s);
    s.tokens.push_back(".");
    return s;
  }

  Unit make(Template kind) {
    Unit u;
    const std::size_t r = rng_.below(cfg_.n_relations);
    switch (kind) {
      case Template::kIntra: {
        const std::size_t h = new_entity(), t = new_entity();
        u.sentences.push_back(triple({}, h, "rel" + std::to_string(r), t));
        u.has_fact = true;
        u.head = h, u.tail = t, u.relation = r;
        u.evidence = {0};
        u.category = PairCategory::kCooccur;
        break;
      }
      case Template::kCoref: {
        const std::size_t h = new_entity(), t = new_entity();
        ProtoSentence intro;
        edge_fill(intro);
        mention(intro, h);
        fill(intro, 1, cfg_.max_filler + 1);
        intro.tokens.push_back(".");
        u.sentences.push_back(std::move(intro));
        u.sentences.push_back(triple({"the", entities_[h].family}, h, "rel" + std::to_string(r), t));
        u.has_fact = true;
        u.head = h, u.tail = t, u.relation = r;
        u.evidence = {1};
        u.category = PairCategory::kCoref;
        aliased_.push_back(h);
        break;
      }
      case Template::kBridge: {
        const std::size_t h = new_entity(), b = new_entity(), t = new_entity();
        u.sentences.push_back(triple({}, h, "hop" + std::to_string(r), b));
        u.sentences.push_back(triple({}, b, "via", t));
        u.has_fact = true;
        u.head = h, u.tail = t, u.relation = r;
        u.evidence = {0, 1};
        u.category = PairCategory::kBridge;
        break;
      }
      case Template::kDistractor: {
        ProtoSentence s;
        edge_fill(s);
        mention(s, new_entity());
        fill(s, 1, cfg_.max_filler + 1);
        if (rng_.below(2) == 1) {
          mention(s, new_entity());
          edge_fill(s);
        }
        s.tokens.push_back(".");
        u.sentences.push_back(std::move(s));
        break;
      }
    }
    return u;
  }

  const std::vector<std::size_t>& aliased() const { return aliased_; }

 private:
  Rng& rng_;
  const SynthConfig& cfg_;
  std::vector<std::size_t> families_;
  std::vector<ProtoEntity> entities_;
  std::vector<std::size_t> aliased_;
};

Template pick(Rng& rng, const CategoryMix& mix) {
  const double u = rng.uniform();
  double acc = mix.intra;
  if (u < acc) return Template::kIntra;
  acc += mix.coref;
  if (u < acc) return Template::kCoref;
  acc += mix.bridge;
  if (u < acc) return Template::kBridge;
  // Zero-weight distractors can still be reached through rounding at u ~ 1.
  if (mix.distractor > 0.0) return Template::kDistractor;
  if (mix.bridge > 0.0) return Template::kBridge;
  if (mix.coref > 0.0) return Template::kCoref;
  return Template::kIntra;
}

void check_config(const SynthConfig& cfg) {
  const CategoryMix& m = cfg.mix;
  for (double w : {m.intra, m.coref, m.bridge, m.distractor}) {
    if (!(w >= 0.0)) throw ConfigError("synth: category weights must be non-negative");
  }
  if (std::abs(m.intra + m.coref + m.bridge + m.distractor - 1.0) > 1e-9) {
    throw ConfigError("synth: category mix must sum to 1");
  }
  if (cfg.n_relations == 0) throw ConfigError("synth: n_relations must be positive");
  if (cfg.units_per_doc == 0) throw ConfigError("synth: units_per_doc must be positive");
  const std::size_t slots = 3 * cfg.units_per_doc;
  if (cfg.vocab_size < slots) {
    throw ConfigError("synth: vocab_size " + std::to_string(cfg.vocab_size) + " too small for " +
                      std::to_string(slots) + " entity name slots per document");
  }
}

std::string relation_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "R%02zu", r);
  return buf;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  check_config(cfg);
  SynthCorpus out;
  std::vector<std::string> names;
  for (std::size_t r = 0; r < cfg.n_relations; ++r) names.push_back(relation_name(r));
  out.corpus.relations = RelationVocab(std::move(names));

  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + d + 1);
    DocBuilder builder(rng, cfg);
    std::vector<Unit> units;
    for (std::size_t u = 0; u < cfg.units_per_doc; ++u) units.push_back(builder.make(pick(rng, cfg.mix)));

    // Either interleave units keeping each unit's sentences in order, or
    // shuffle whole units.
    std::vector<std::size_t> slots;
    if (cfg.interleave) {
      for (std::size_t u = 0; u < units.size(); ++u) slots.insert(slots.end(), units[u].sentences.size(), u);
      rng.shuffle(slots);
    } else {
      std::vector<std::size_t> unit_order(units.size());
      std::iota(unit_order.begin(), unit_order.end(), std::size_t{0});
      rng.shuffle(unit_order);
      for (std::size_t u : unit_order) slots.insert(slots.end(), units[u].sentences.size(), u);
    }
    std::vector<std::size_t> cursor(units.size(), 0);
    std::vector<std::vector<std::size_t>> placed(units.size());
    std::vector<const ProtoSentence*> order;
    for (std::size_t u : slots) {
      placed[u].push_back(order.size());
      order.push_back(&units[u].sentences[cursor[u]++]);
    }

    // Entities are numbered by first appearance.
    const auto& protos = builder.entities();
    std::vector<std::size_t> remap(protos.size(), SIZE_MAX);
    Document doc;
    doc.doc_id = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(d);
    for (std::size_t s = 0; s < order.size(); ++s) {
      doc.sentences.push_back({s, order[s]->tokens});
      for (const auto& pm : order[s]->mentions) {
        if (remap[pm.entity] == SIZE_MAX) {
          remap[pm.entity] = doc.entities.size();
          doc.entities.push_back({doc.entities.size(), {}});
        }
        Entity& ent = doc.entities[remap[pm.entity]];
        ent.mentions.push_back({ent.id, s, pm.start, pm.end, protos[pm.entity].name(), "ENT"});
      }
    }

    std::vector<std::pair<RelationFact, PairCategory>> facts;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (!units[u].has_fact) continue;
      RelationFact f{remap[units[u].head], remap[units[u].tail], units[u].relation, {}};
      for (std::size_t local : units[u].evidence) f.evidence.push_back(placed[u][local]);
      std::sort(f.evidence.begin(), f.evidence.end());
      facts.emplace_back(std::move(f), units[u].category);
    }
    std::sort(facts.begin(), facts.end(), [](const auto& a, const auto& b) {
      return std::tie(a.first.head, a.first.tail) < std::tie(b.first.head, b.first.tail);
    });
    std::vector<PairCategory> cats;
    for (auto& [f, c] : facts) {
      doc.facts.push_back(std::move(f));
      cats.push_back(c);
    }
    for (std::size_t e : builder.aliased()) out.lexicon[protos[e].name()] = {"the " + protos[e].family};

    validate_document(doc, out.corpus.relations.size());
    out.corpus.documents.push_back(std::move(doc));
    out.fact_categories.push_back(std::move(cats));
  }
  return out;
}

}  // namespace docrex::corpus
