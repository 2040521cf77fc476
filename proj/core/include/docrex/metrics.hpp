#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "docrex/corpus.hpp"

namespace docrex::metrics {

// (doc, head, tail, relation) with the relation by name so facts from
// different vocabularies compare correctly.
struct Fact {
  std::string doc;
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string relation;

  auto operator<=>(const Fact&) const = default;
};

struct PairKey {
  std::string doc;
  std::size_t head = 0;
  std::size_t tail = 0;

  auto operator<=>(const PairKey&) const = default;
};

using EvidenceMap = std::map<PairKey, std::vector<std::size_t>>;
using CategoryMap = std::map<PairKey, corpus::PairCategory>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positive = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// 0/0 is scored as 0.
Prf make_prf(std::size_t true_positive, std::size_t predicted, std::size_t gold);

std::vector<Fact> gold_facts(const std::vector<corpus::Document>& docs, const corpus::RelationVocab& relations);
// Union of fact evidence per gold-positive pair.
EvidenceMap gold_evidence(const std::vector<corpus::Document>& docs);

Prf re_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold);

// (head mention names, tail mention names, relation) keys of training facts.
struct NameKey {
  std::set<std::string> head, tail;
  std::string relation;
  auto operator<=>(const NameKey&) const = default;
};
std::set<NameKey> train_keys(const std::vector<corpus::Document>& train, const corpus::RelationVocab& relations);

// Drops facts whose name key was seen in training from both sides. `docs`
// resolves entity names for the evaluated facts. Sets `gold_emptied` when
// every gold fact was excluded.
Prf ign_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold, const std::set<NameKey>& train,
           const std::vector<corpus::Document>& docs, bool* gold_emptied = nullptr);

// Intra pairs have a sentence holding proper-noun mentions of both entities.
struct IntraInter {
  Prf intra, inter;
};
IntraInter intra_inter_f1(const std::vector<Fact>& predicted, const std::vector<Fact>& gold,
                          const std::vector<corpus::Document>& docs);

enum class EvidenceScope {
  kPredictedPairs,  // pairs with at least one predicted relation (leaderboard style)
  kPositivePairs,   // gold-positive pairs
};

// Micro F1 over (doc, head, tail, sentence) tuples. For kPredictedPairs the
// gold side is every gold-positive pair's evidence.
Prf evi_f1(const EvidenceMap& predicted, const EvidenceMap& gold, const std::vector<Fact>& predicted_facts,
           EvidenceScope scope);

// re_f1 restricted to each category present among gold facts.
std::map<corpus::PairCategory, Prf> breakdown(const std::vector<Fact>& predicted, const std::vector<Fact>& gold,
                                              const CategoryMap& categories);

struct EvalReport {
  Prf f1, ign_f1, intra_f1, inter_f1, evi_f1, pos_evi_f1;
  std::map<corpus::PairCategory, Prf> categories;
  bool has_ign = false;
  bool has_evidence = false;
};

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace docrex::metrics
