#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace docrex::corpus {

struct Sentence {
  std::size_t index = 0;
  std::vector<std::string> tokens;
};

// Token offsets are half-open and relative to the mention's sentence.
struct Mention {
  std::size_t entity_id = 0;
  std::size_t sent_id = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string name;
  std::string etype;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Entity {
  std::size_t id = 0;
  std::vector<Mention> mentions;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct RelationFact {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::size_t relation = 0;
  std::vector<std::size_t> evidence;  // sentence ordinals, kept as given

  friend bool operator==(const RelationFact&, const RelationFact&) = default;
};

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
  std::vector<Entity> entities;
  std::vector<RelationFact> facts;
};

// Relation names; NA is implicit and never a member.
class RelationVocab {
 public:
  RelationVocab() = default;
  explicit RelationVocab(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t r) const { return names_.at(r); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> find(const std::string& name) const;
  // Returns the ordinal of `name`, appending it if absent.
  std::size_t intern(const std::string& name);

  friend bool operator==(const RelationVocab& a, const RelationVocab& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Corpus {
  std::vector<Document> documents;
  RelationVocab relations;
};

// Category of an entity pair by the rule that first explains it.
enum class PairCategory { kCooccur, kCoref, kBridge, kNone };
const char* category_name(PairCategory c);

// Parses DocRED-layout JSON (array of {title, sents, vertexSet, labels}).
// Relation names are collected in sorted order. When `base` is given its
// ordinals are kept and unseen names are appended (sorted). A missing
// "labels" field is read as an unlabeled document.
Corpus parse_corpus(std::string_view json_text, const RelationVocab* base = nullptr);
Corpus load_corpus(const std::string& path, const RelationVocab* base = nullptr);

// Throws ParseError naming the document and the offending field.
void validate_document(const Document& doc, std::size_t n_relations);

struct PairEvidence {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::vector<std::size_t> sentences;
};

struct ScoredFact {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string relation;
  double score = 0.0;
  std::vector<std::size_t> evidence;
};

// Optional per-document output arrays appended to the DocRED layout.
struct DocumentAnnotations {
  std::vector<ScoredFact> predictions;
  std::vector<PairEvidence> predicted_evidence;
};

// Serializes back to the DocRED layout; `annotations`, when given, must be
// parallel to corpus.documents.
std::string serialize_corpus(const Corpus& corpus, const std::vector<DocumentAnnotations>* annotations = nullptr);

// Entity name -> alias surface strings.
using AliasLexicon = std::map<std::string, std::vector<std::string>>;
AliasLexicon parse_lexicon(std::string_view json_text);
AliasLexicon load_lexicon(const std::string& path);
std::string serialize_lexicon(const AliasLexicon& lexicon);

// Token ids: reserved ids first, then the sorted training tokens.
class TokenVocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kMarker = 2;

  TokenVocab();
  static TokenVocab build(const std::vector<Document>& docs);
  // Rebuilds from a saved token list (reserved entries included).
  static TokenVocab from_tokens(std::vector<std::string> tokens);

  std::size_t id(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct MarkedSequence {
  std::vector<std::size_t> tokens;
  // mention_start_pos[e][j]: position of the leading marker of mention j of entity e.
  std::vector<std::vector<std::size_t>> mention_start_pos;
  // Half-open marked-coordinate range of each sentence.
  std::vector<std::pair<std::size_t, std::size_t>> sent_spans;

  std::size_t size() const { return tokens.size(); }
};

// Wraps every mention in marker tokens. At a shared boundary closing markers
// come before opening ones; among openings at one position the longer span
// (then the smaller entity id) opens first, and closings mirror that nesting.
MarkedSequence insert_markers(const Document& doc, const TokenVocab& vocab);

// Length of the marked sequence without building it.
std::size_t marked_length(const Document& doc);

// All ordered (head, tail) pairs with head != tail, head-major.
std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(const Document& doc);

struct CategoryMix {
  double intra = 0.4;
  double coref = 0.2;
  double bridge = 0.2;
  double distractor = 0.2;
};

struct SynthConfig {
  std::size_t n_docs = 300;
  std::size_t vocab_size = 30;  // size of the family-name pool
  std::size_t n_relations = 6;
  std::uint64_t seed = 0;
  CategoryMix mix;
  std::size_t units_per_doc = 5;
  std::size_t max_filler = 2;
  // Interleave the sentences of different units; otherwise units stay contiguous.
  bool interleave = false;
};

struct SynthCorpus {
  Corpus corpus;
  AliasLexicon lexicon;
  // Template category of every planted fact, parallel to documents[i].facts.
  std::vector<std::vector<PairCategory>> fact_categories;
};

// Deterministic synthetic corpus built from sentence templates:
//   intra      "G Nh rel_k G Nt ."                      evidence {s}
//   coref      "G Nh ..." then "the Nh rel_k G Nt ."    evidence {second}
//   bridge     "G Nh hop_k G Nb ." then "G Nb via G Nt ." evidence {both}
//   distractor sentences with uninvolved entities and filler words.
// Units stay contiguous unless interleave is set, in which case their
// sentences are shuffled together while keeping each unit's own order.
SynthCorpus synth_corpus(const SynthConfig& config);

}  // namespace docrex::corpus
