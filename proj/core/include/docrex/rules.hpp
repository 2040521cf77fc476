#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "docrex/corpus.hpp"

namespace docrex::rules {

using corpus::Document;
using corpus::PairCategory;
using SentenceSet = std::vector<std::size_t>;  // sorted, unique

// Sentences in which an entity is referred to, proper-noun mentions included.
class CorefProvider {
 public:
  virtual ~CorefProvider() = default;
  virtual SentenceSet sentences(const Document& doc, std::size_t entity) const = 0;
};

// Annotated mentions only.
class IdentityProvider final : public CorefProvider {
 public:
  SentenceSet sentences(const Document& doc, std::size_t entity) const override;
};

// Annotated mentions plus every sentence containing one of the entity's
// aliases as a case-insensitive contiguous token subsequence. Aliases are
// looked up by each mention's surface name.
class LexiconProvider final : public CorefProvider {
 public:
  explicit LexiconProvider(corpus::AliasLexicon lexicon);
  SentenceSet sentences(const Document& doc, std::size_t entity) const override;

 private:
  std::vector<std::vector<std::string>> aliases_for(const Document& doc, std::size_t entity) const;
  corpus::AliasLexicon lexicon_;
};

struct SilverLabel {
  std::size_t head = 0;
  std::size_t tail = 0;
  PairCategory category = PairCategory::kNone;
  SentenceSet evidence;
  std::optional<std::size_t> bridge_entity;

  friend bool operator==(const SilverLabel&, const SilverLabel&) = default;
};

// Sentences that hold a proper-noun mention of both entities.
SentenceSet cooccur_rule(const Document& doc, std::size_t head, std::size_t tail);

// Sentences where the provider places both entities.
SentenceSet coref_rule(const Document& doc, std::size_t head, std::size_t tail, const CorefProvider& provider);

// Highest-frequency third entity whose sentences meet both head's and
// tail's; evidence is the union of the two meeting sets. Frequency ties go
// to the smaller ordinal.
std::pair<std::optional<std::size_t>, SentenceSet> bridge_rule(const Document& doc, std::size_t head,
                                                              std::size_t tail, const CorefProvider& provider);

// Applies the rules in precedence Cooccur -> Coref -> Bridge.
SilverLabel label_pair(const Document& doc, std::size_t head, std::size_t tail, const CorefProvider& provider);

enum class Scope { kPositivePairs, kAllPairs };

// One label per distinct pair: positive pairs in first-fact order, or every
// candidate pair in head-major order.
std::vector<SilverLabel> silver_labels(const Document& doc, const CorefProvider& provider, Scope scope);

// Copy of `doc` whose facts carry the silver evidence of their pair.
Document with_silver_evidence(const Document& doc, const CorefProvider& provider);

struct CategoryHistogram {
  std::size_t cooccur = 0;
  std::size_t coref = 0;
  std::size_t bridge = 0;
  std::size_t none = 0;

  std::size_t total() const { return cooccur + coref + bridge + none; }
  std::size_t covered() const { return cooccur + coref + bridge; }
  double fraction(std::size_t count) const { return total() ? static_cast<double>(count) / total() : 0.0; }
};

// Counts relation facts by the category of their pair.
CategoryHistogram categorize_facts(const std::vector<Document>& docs, const CorefProvider& provider);

// Aligned text rendering with count and percent rows.
std::string format_histogram(const CategoryHistogram& h);

}  // namespace docrex::rules
