#include "docrex/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace docrex::metrics {

Prf make_prf(std::size_t tp, std::size_t predicted, std::size_t gold) {
  Prf r;
  r.true_positive = tp;
  r.predicted = predicted;
  r.gold = gold;
  r.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

std::vector<Fact> gold_facts(const std::vector<corpus::Document>& docs, const corpus::RelationVocab& relations) {
  std::vector<Fact> out;
  for (const auto& d : docs)
    for (const auto& f : d.facts) out.push_back({d.doc_id, f.head, f.tail, relations.name(f.relation)});
  return out;
}

EvidenceMap gold_evidence(const std::vector<corpus::Document>& docs) {
  EvidenceMap out;
  for (const auto& d : docs) {
    for (const auto& f : d.facts) {
      auto& ev = out[{d.doc_id, f.head, f.tail}];
      ev.insert(ev.end(), f.evidence.begin(), f.evidence.end());
      std::sort(ev.begin(), ev.end());
      ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    }
  }
  return out;
}

namespace {

std::set<Fact> as_set(const std::vector<Fact>& v) { return {v.begin(), v.end()}; }

Prf score_sets(const std::set<Fact>& pred, const std::set<Fact>& gold) {
  std::size_t tp = 0;
  for (const auto& f : pred) tp += gold.count(f);
  return make_prf(tp, pred.size(), gold.size());
}

class DocLookup {
 public:
  explicit DocLookup(const std::vector<corpus::Document>& docs) {
    for (const auto& d : docs) by_title_.emplace(d.doc_id, &d);
  }
  const corpus::Document* find(const std::string& title) const {
    auto it = by_title_.find(title);
    return it == by_title_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<std::string, const corpus::Document*> by_title_;
};

std::set<std::string> names_of(const corpus::Document& d, std::size_t entity) {
  std::set<std::string> out;
  if (entity >= d.entities.size()) return out;
  for (const auto& m : d.entities[entity].mentions) out.insert(m.name);
  return out;
}

bool is_intra(const corpus::Document& d, std::size_t h, std::size_t t) {
  if (h >= d.entities.size() || t >= d.entities.size()) return false;
  for (const auto& mh : d.entities[h].mentions)
    for (const auto& mt : d.entities[t].mentions)
      if (mh.sent_id == mt.sent_id) return true;
  return false;
}

}  // namespace

Prf re_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold) {
  return score_sets(as_set(predicted), as_set(gold));
}

std::set<NameKey> train_keys(const std::vector<corpus::Document>& train, const corpus::RelationVocab& relations) {
  std::set<NameKey> out;
  for (const auto& d : train)
    for (const auto& f : d.facts) out.insert({names_of(d, f.head), names_of(d, f.tail), relations.name(f.relation)});
  return out;
}

Prf ign_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold, const std::set<NameKey>& train,
           const std::vector<corpus::Document>& docs, bool* gold_emptied) {
  const DocLookup lookup(docs);
  auto shared = [&](const Fact& f) {
    const corpus::Document* d = lookup.find(f.doc);
    if (d == nullptr) return false;
    return train.contains({names_of(*d, f.head), names_of(*d, f.tail), f.relation});
  };
  std::set<Fact> p, g;
  for (const auto& f : predicted)
    if (!shared(f)) p.insert(f);
  for (const auto& f : gold)
    if (!shared(f)) g.insert(f);
  const bool emptied = g.empty() && !gold.empty();
  if (emptied) spdlog::warn("ign_f1: every gold fact also appears in training; Ign F1 is 0");
  if (gold_emptied != nullptr) *gold_emptied = emptied;
  return score_sets(p, g);
}

IntraInter intra_inter_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold,
                          const std::vector<corpus::Document>& docs) {
  const DocLookup lookup(docs);
  std::set<Fact> pi, pe, gi, ge;
  auto split = [&](const std::vector<Fact>& facts, std::set<Fact>& intra, std::set<Fact>& inter) {
    for (const auto& f : facts) {
      const corpus::Document* d = lookup.find(f.doc);
      if (d != nullptr && is_intra(*d, f.head, f.tail)) intra.insert(f);
      else inter.insert(f);
    }
  };
  split(predicted, pi, pe);
  split(gold, gi, ge);
  return {score_sets(pi, gi), score_sets(pe, ge)};
}

Prf evi_f1(const EvidenceMap& predicted, const EvidenceMap& gold, const std::vector<Fact>& predicted_facts,
           EvidenceScope scope) {
  std::set<PairKey> pairs;
  if (scope == EvidenceScope::kPredictedPairs) {
    for (const auto& f : predicted_facts) pairs.insert({f.doc, f.head, f.tail});
  } else {
    for (const auto& [k, _] : gold) pairs.insert(k);
  }
  std::size_t n_pred = 0, n_gold = 0, tp = 0;
  for (const auto& k : pairs) {
    auto pit = predicted.find(k);
    if (pit == predicted.end()) continue;
    std::set<std::size_t> ps(pit->second.begin(), pit->second.end());
    n_pred += ps.size();
    auto git = gold.find(k);
    if (git == gold.end()) continue;
    for (std::size_t s : ps) tp += std::count(git->second.begin(), git->second.end(), s) > 0;
  }
  for (const auto& [k, ev] : gold) n_gold += std::set<std::size_t>(ev.begin(), ev.end()).size();
  return make_prf(tp, n_pred, n_gold);
}

std::map<corpus::PairCategory, Prf> breakdown(const std::vector<Fact>& predicted, const std::vector<Fact>& gold,
                                              const CategoryMap& categories) {
  auto category_of = [&](const Fact& f) {
    auto it = categories.find({f.doc, f.head, f.tail});
    return it == categories.end() ? corpus::PairCategory::kNone : it->second;
  };
  std::map<corpus::PairCategory, std::pair<std::set<Fact>, std::set<Fact>>> parts;
  for (const auto& f : gold) parts[category_of(f)].second.insert(f);
  for (const auto& f : predicted) {
    auto it = parts.find(category_of(f));
    if (it != parts.end()) it->second.first.insert(f);
  }
  std::map<corpus::PairCategory, Prf> out;
  for (const auto& [c, pg] : parts) out[c] = score_sets(pg.first, pg.second);
  return out;
}

namespace {

nlohmann::ordered_json prf_json(const Prf& p) {
  nlohmann::ordered_json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["f1"] = p.f1;
  j["true_positive"] = p.true_positive;
  j["predicted"] = p.predicted;
  j["gold"] = p.gold;
  return j;
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["f1"] = prf_json(r.f1);
  if (r.has_ign) j["ign_f1"] = prf_json(r.ign_f1);
  j["intra_f1"] = prf_json(r.intra_f1);
  j["inter_f1"] = prf_json(r.inter_f1);
  if (r.has_evidence) {
    j["evi_f1"] = prf_json(r.evi_f1);
    j["pos_evi_f1"] = prf_json(r.pos_evi_f1);
  }
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [c, p] : r.categories) cats[corpus::category_name(c)] = prf_json(p);
  j["categories"] = std::move(cats);
  return j.dump(2);
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %7s %7s %7s\n", "metric", "precision", "recall", "f1", "tp",
                "pred", "gold");
  out << buf;
  auto row = [&](const std::string& name, const Prf& p) {
    std::snprintf(buf, sizeof buf, "%-14s %9.4f %9.4f %9.4f %7zu %7zu %7zu\n", name.c_str(), p.precision, p.recall,
                  p.f1, p.true_positive, p.predicted, p.gold);
    out << buf;
  };
  row("F1", r.f1);
  if (r.has_ign) row("Ign F1", r.ign_f1);
  row("Intra F1", r.intra_f1);
  row("Inter F1", r.inter_f1);
  if (r.has_evidence) {
    row("Evi F1", r.evi_f1);
    row("PosEvi F1", r.pos_evi_f1);
  }
  for (const auto& [c, p] : r.categories) row(std::string("cat:") + corpus::category_name(c), p);
  return out.str();
}

}  // namespace docrex::metrics
