#include "docrex/rules.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iterator>
#include <map>
#include <sstream>

namespace docrex::rules {
namespace {

SentenceSet intersect(const SentenceSet& a, const SentenceSet& b) {
  SentenceSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

SentenceSet unite(const SentenceSet& a, const SentenceSet& b) {
  SentenceSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

SentenceSet proper_sentences(const Document& doc, std::size_t entity) {
  SentenceSet out;
  for (const auto& m : doc.entities.at(entity).mentions) out.push_back(m.sent_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_lower(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(lower(tok));
  return out;
}

bool contains_subsequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

}  // namespace

SentenceSet IdentityProvider::sentences(const Document& doc, std::size_t entity) const {
  return proper_sentences(doc, entity);
}

LexiconProvider::LexiconProvider(corpus::AliasLexicon lexicon) : lexicon_(std::move(lexicon)) {}

std::vector<std::vector<std::string>> LexiconProvider::aliases_for(const Document& doc, std::size_t entity) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& m : doc.entities.at(entity).mentions) {
    auto it = lexicon_.find(m.name);
    if (it == lexicon_.end()) continue;
    for (const auto& alias : it->second) {
      auto toks = split_lower(alias);
      if (!toks.empty() && std::find(out.begin(), out.end(), toks) == out.end()) out.push_back(std::move(toks));
    }
  }
  return out;
}

SentenceSet LexiconProvider::sentences(const Document& doc, std::size_t entity) const {
  SentenceSet out = proper_sentences(doc, entity);
  const auto aliases = aliases_for(doc, entity);
  if (aliases.empty()) return out;
  SentenceSet extra;
  for (const auto& s : doc.sentences) {
    std::vector<std::string> toks;
    toks.reserve(s.tokens.size());
    for (const auto& t : s.tokens) toks.push_back(lower(t));
    for (const auto& a : aliases) {
      if (contains_subsequence(toks, a)) {
        extra.push_back(s.index);
        break;
      }
    }
  }
  return unite(out, extra);
}

SentenceSet cooccur_rule(const Document& doc, std::size_t head, std::size_t tail) {
  return intersect(proper_sentences(doc, head), proper_sentences(doc, tail));
}

SentenceSet coref_rule(const Document& doc, std::size_t head, std::size_t tail, const CorefProvider& provider) {
  return intersect(provider.sentences(doc, head), provider.sentences(doc, tail));
}

namespace {

std::pair<std::optional<std::size_t>, SentenceSet> bridge_from(const Document& doc, std::size_t head,
                                                               std::size_t tail,
                                                               const std::vector<SentenceSet>& coref) {
  std::optional<std::size_t> best;
  std::size_t best_freq = 0;
  SentenceSet best_evidence;
  for (std::size_t b = 0; b < doc.entities.size(); ++b) {
    if (b == head || b == tail) continue;
    SentenceSet with_head = intersect(coref[b], coref[head]);
    if (with_head.empty()) continue;
    SentenceSet with_tail = intersect(coref[b], coref[tail]);
    if (with_tail.empty()) continue;
    const std::size_t freq = doc.entities[b].mentions.size();
    if (!best || freq > best_freq) {
      best = b;
      best_freq = freq;
      best_evidence = unite(with_head, with_tail);
    }
  }
  return {best, best_evidence};
}

SilverLabel label_from(const Document& doc, std::size_t head, std::size_t tail,
                       const std::vector<SentenceSet>& proper, const std::vector<SentenceSet>& coref) {
  SilverLabel label{head, tail, PairCategory::kNone, {}, std::nullopt};
  label.evidence = intersect(proper[head], proper[tail]);
  if (!label.evidence.empty()) {
    label.category = PairCategory::kCooccur;
    return label;
  }
  label.evidence = intersect(coref[head], coref[tail]);
  if (!label.evidence.empty()) {
    label.category = PairCategory::kCoref;
    return label;
  }
  auto [bridge, evidence] = bridge_from(doc, head, tail, coref);
  if (bridge) {
    label.category = PairCategory::kBridge;
    label.bridge_entity = bridge;
    label.evidence = std::move(evidence);
  }
  return label;
}

struct DocIndex {
  std::vector<SentenceSet> proper, coref;

  DocIndex(const Document& doc, const CorefProvider& provider) {
    for (std::size_t e = 0; e < doc.entities.size(); ++e) {
      proper.push_back(proper_sentences(doc, e));
      coref.push_back(provider.sentences(doc, e));
    }
  }
};

}  // namespace

std::pair<std::optional<std::size_t>, SentenceSet> bridge_rule(const Document& doc, std::size_t head,
                                                              std::size_t tail, const CorefProvider& provider) {
  return bridge_from(doc, head, tail, DocIndex(doc, provider).coref);
}

SilverLabel label_pair(const Document& doc, std::size_t head, std::size_t tail, const CorefProvider& provider) {
  const DocIndex index(doc, provider);
  return label_from(doc, head, tail, index.proper, index.coref);
}

std::vector<SilverLabel> silver_labels(const Document& doc, const CorefProvider& provider, Scope scope) {
  const DocIndex index(doc, provider);
  std::vector<SilverLabel> out;
  if (scope == Scope::kAllPairs) {
    for (const auto& [h, t] : corpus::candidate_pairs(doc)) out.push_back(label_from(doc, h, t, index.proper, index.coref));
    return out;
  }
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& f : doc.facts) {
    const std::pair<std::size_t, std::size_t> key{f.head, f.tail};
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    out.push_back(label_from(doc, f.head, f.tail, index.proper, index.coref));
  }
  return out;
}

Document with_silver_evidence(const Document& doc, const CorefProvider& provider) {
  Document out = doc;
  const auto labels = silver_labels(doc, provider, Scope::kPositivePairs);
  for (auto& f : out.facts) {
    for (const auto& l : labels) {
      if (l.head == f.head && l.tail == f.tail) {
        f.evidence = l.evidence;
        break;
      }
    }
  }
  return out;
}

CategoryHistogram categorize_facts(const std::vector<Document>& docs, const CorefProvider& provider) {
  CategoryHistogram h;
  for (const auto& doc : docs) {
    const auto labels = silver_labels(doc, provider, Scope::kPositivePairs);
    std::map<std::pair<std::size_t, std::size_t>, PairCategory> by_pair;
    for (const auto& l : labels) by_pair[{l.head, l.tail}] = l.category;
    for (const auto& f : doc.facts) {
      switch (by_pair.at({f.head, f.tail})) {
        case PairCategory::kCooccur: ++h.cooccur; break;
        case PairCategory::kCoref: ++h.coref; break;
        case PairCategory::kBridge: ++h.bridge; break;
        case PairCategory::kNone: ++h.none; break;
      }
    }
  }
  return h;
}

std::string format_histogram(const CategoryHistogram& h) {
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s %10s\n", "", "Co-occur", "Coref", "Bridge", "Total");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-8s %10zu %10zu %10zu %10zu\n", "Count", h.cooccur, h.coref, h.bridge,
                h.covered());
  out << buf;
  std::snprintf(buf, sizeof buf, "%-8s %9.2f%% %9.2f%% %9.2f%% %9.2f%%\n", "Percent", 100 * h.fraction(h.cooccur),
                100 * h.fraction(h.coref), 100 * h.fraction(h.bridge), 100 * h.fraction(h.covered()));
  out << buf;
  std::snprintf(buf, sizeof buf, "(%zu relation facts, %zu uncovered)\n", h.total(), h.none);
  out << buf;
  return out.str();
}

}  // namespace docrex::rules
