#include "docrex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "docrex/errors.hpp"

namespace docrex::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

RelationVocab::RelationVocab(std::vector<std::string> names) {
  for (auto& n : names) {
    if (index_.contains(n)) throw ParseError("duplicate relation name " + n);
    index_.emplace(n, names_.size());
    names_.push_back(std::move(n));
  }
}

std::optional<std::size_t> RelationVocab::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t RelationVocab::intern(const std::string& name) {
  if (auto r = find(name)) return *r;
  index_.emplace(name, names_.size());
  names_.push_back(name);
  return names_.size() - 1;
}

const char* category_name(PairCategory c) {
  switch (c) {
    case PairCategory::kCooccur: return "Cooccur";
    case PairCategory::kCoref: return "Coref";
    case PairCategory::kBridge: return "Bridge";
    case PairCategory::kNone: return "None";
  }
  return "None";
}

namespace {

std::string doc_ctx(const std::string& title, std::size_t index) {
  std::ostringstream s;
  s << "document " << index << " (\"" << title << "\")";
  return s.str();
}

const json& field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) throw ParseError(ctx + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(ctx + ": missing field \"" + key + "\"");
  return *it;
}

std::size_t as_index(const json& v, const std::string& ctx) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ParseError(ctx + ": expected a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ParseError(ctx + ": expected a string, got " + v.dump());
  return v.get<std::string>();
}

struct RawLabel {
  std::size_t head, tail;
  std::string relation;
  std::vector<std::size_t> evidence;
};

Document parse_document(const json& obj, std::size_t index, std::vector<RawLabel>& labels) {
  Document doc;
  doc.doc_id = as_string(field(obj, "title", "document " + std::to_string(index)), "title");
  const std::string ctx = doc_ctx(doc.doc_id, index);

  const json& sents = field(obj, "sents", ctx);
  if (!sents.is_array()) throw ParseError(ctx + ": field \"sents\" must be an array");
  for (std::size_t i = 0; i < sents.size(); ++i) {
    const std::string sctx = ctx + ": sents[" + std::to_string(i) + "]";
    if (!sents[i].is_array()) throw ParseError(sctx + " must be an array of tokens");
    Sentence s;
    s.index = i;
    for (const auto& tok : sents[i]) s.tokens.push_back(as_string(tok, sctx));
    doc.sentences.push_back(std::move(s));
  }

  const json& vertex_set = field(obj, "vertexSet", ctx);
  if (!vertex_set.is_array()) throw ParseError(ctx + ": field \"vertexSet\" must be an array");
  for (std::size_t e = 0; e < vertex_set.size(); ++e) {
    const std::string ectx = ctx + ": vertexSet[" + std::to_string(e) + "] (entity " + std::to_string(e) + ")";
    if (!vertex_set[e].is_array()) throw ParseError(ectx + " must be an array of mentions");
    Entity ent;
    ent.id = e;
    for (std::size_t j = 0; j < vertex_set[e].size(); ++j) {
      const json& m = vertex_set[e][j];
      const std::string mctx = ectx + " mention " + std::to_string(j);
      Mention mention;
      mention.entity_id = e;
      mention.name = as_string(field(m, "name", mctx), mctx + ".name");
      mention.sent_id = as_index(field(m, "sent_id", mctx), mctx + ".sent_id");
      const json& pos = field(m, "pos", mctx);
      if (!pos.is_array() || pos.size() != 2) throw ParseError(mctx + ".pos: expected [start, end]");
      mention.start = as_index(pos[0], mctx + ".pos[0]");
      mention.end = as_index(pos[1], mctx + ".pos[1]");
      if (auto t = m.find("type"); t != m.end()) mention.etype = as_string(*t, mctx + ".type");
      ent.mentions.push_back(std::move(mention));
    }
    doc.entities.push_back(std::move(ent));
  }

  if (auto it = obj.find("labels"); it != obj.end()) {
    if (!it->is_array()) throw ParseError(ctx + ": field \"labels\" must be an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& l = (*it)[k];
      const std::string lctx = ctx + ": labels[" + std::to_string(k) + "]";
      RawLabel raw;
      raw.head = as_index(field(l, "h", lctx), lctx + ".h");
      raw.tail = as_index(field(l, "t", lctx), lctx + ".t");
      raw.relation = as_string(field(l, "r", lctx), lctx + ".r");
      if (auto ev = l.find("evidence"); ev != l.end()) {
        if (!ev->is_array()) throw ParseError(lctx + ".evidence must be an array");
        for (const auto& s : *ev) raw.evidence.push_back(as_index(s, lctx + ".evidence"));
      }
      labels.push_back(std::move(raw));
    }
  }
  return doc;
}

}  // namespace

void validate_document(const Document& doc, std::size_t n_relations) {
  const std::string ctx = "document \"" + doc.doc_id + "\"";
  const std::size_t n = doc.sentences.size();
  if (n == 0) throw ParseError(ctx + ": has no sentences");
  for (std::size_t i = 0; i < n; ++i) {
    if (doc.sentences[i].index != i) throw ParseError(ctx + ": sentence indices are not contiguous");
    if (doc.sentences[i].tokens.empty()) throw ParseError(ctx + ": sents[" + std::to_string(i) + "] is empty");
  }
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    const Entity& ent = doc.entities[e];
    const std::string ectx = ctx + ": vertexSet[" + std::to_string(e) + "] (entity " + std::to_string(e) + ")";
    if (ent.id != e) throw ParseError(ectx + ": id mismatch");
    if (ent.mentions.empty()) throw ParseError(ectx + ": has no mentions");
    for (std::size_t j = 0; j < ent.mentions.size(); ++j) {
      const Mention& m = ent.mentions[j];
      const std::string mctx = ectx + " mention " + std::to_string(j);
      if (m.entity_id != e) throw ParseError(mctx + ": entity_id mismatch");
      if (m.sent_id >= n) {
        throw ParseError(mctx + ": unknown sentence id " + std::to_string(m.sent_id) + " (document has " +
                         std::to_string(n) + " sentences)");
      }
      const std::size_t len = doc.sentences[m.sent_id].tokens.size();
      if (m.start >= m.end || m.end > len) {
        throw ParseError(mctx + ": offset [" + std::to_string(m.start) + ", " + std::to_string(m.end) +
                         ") out of range for sentence " + std::to_string(m.sent_id) + " of length " +
                         std::to_string(len));
      }
    }
  }
  for (std::size_t k = 0; k < doc.facts.size(); ++k) {
    const RelationFact& f = doc.facts[k];
    const std::string fctx = ctx + ": labels[" + std::to_string(k) + "]";
    if (f.head >= doc.entities.size() || f.tail >= doc.entities.size()) {
      throw ParseError(fctx + ": entity index out of range (h=" + std::to_string(f.head) +
                       ", t=" + std::to_string(f.tail) + ", entities=" + std::to_string(doc.entities.size()) + ")");
    }
    if (f.head == f.tail) throw ParseError(fctx + ": head equals tail");
    if (f.relation >= n_relations) throw ParseError(fctx + ": relation ordinal out of range");
    for (std::size_t s : f.evidence) {
      if (s >= n) throw ParseError(fctx + ".evidence: unknown sentence id " + std::to_string(s));
    }
  }
}

Corpus parse_corpus(std::string_view json_text, const RelationVocab* base) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_array()) throw ParseError("corpus root must be a JSON array of documents");

  Corpus corpus;
  std::vector<std::vector<RawLabel>> labels(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    corpus.documents.push_back(parse_document(root[i], i, labels[i]));
  }

  if (base != nullptr) corpus.relations = *base;
  std::set<std::string> fresh;
  for (const auto& doc_labels : labels)
    for (const auto& l : doc_labels)
      if (!corpus.relations.find(l.relation)) fresh.insert(l.relation);
  for (const auto& name : fresh) corpus.relations.intern(name);

  for (std::size_t i = 0; i < root.size(); ++i) {
    Document& doc = corpus.documents[i];
    for (auto& l : labels[i]) {
      doc.facts.push_back({l.head, l.tail, *corpus.relations.find(l.relation), std::move(l.evidence)});
    }
    validate_document(doc, corpus.relations.size());
  }
  return corpus;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Corpus load_corpus(const std::string& path, const RelationVocab* base) { return parse_corpus(read_file(path), base); }

std::string serialize_corpus(const Corpus& corpus, const std::vector<DocumentAnnotations>* annotations) {
  if (annotations != nullptr && annotations->size() != corpus.documents.size()) {
    throw ConfigError("annotations are not parallel to the corpus documents");
  }
  ordered_json root = ordered_json::array();
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const Document& doc = corpus.documents[i];
    ordered_json d;
    d["title"] = doc.doc_id;
    ordered_json sents = ordered_json::array();
    for (const auto& s : doc.sentences) sents.push_back(s.tokens);
    d["sents"] = std::move(sents);
    ordered_json vs = ordered_json::array();
    for (const auto& e : doc.entities) {
      ordered_json ms = ordered_json::array();
      for (const auto& m : e.mentions) {
        ordered_json mj;
        mj["name"] = m.name;
        mj["pos"] = {m.start, m.end};
        mj["sent_id"] = m.sent_id;
        mj["type"] = m.etype;
        ms.push_back(std::move(mj));
      }
      vs.push_back(std::move(ms));
    }
    d["vertexSet"] = std::move(vs);
    ordered_json labels = ordered_json::array();
    for (const auto& f : doc.facts) {
      ordered_json l;
      l["h"] = f.head;
      l["t"] = f.tail;
      l["r"] = corpus.relations.name(f.relation);
      l["evidence"] = f.evidence;
      labels.push_back(std::move(l));
    }
    d["labels"] = std::move(labels);
    if (annotations != nullptr) {
      const DocumentAnnotations& a = (*annotations)[i];
      ordered_json preds = ordered_json::array();
      for (const auto& p : a.predictions) {
        ordered_json pj;
        pj["h"] = p.head;
        pj["t"] = p.tail;
        pj["r"] = p.relation;
        pj["score"] = p.score;
        pj["evidence"] = p.evidence;
        preds.push_back(std::move(pj));
      }
      d["predictions"] = std::move(preds);
      ordered_json pev = ordered_json::array();
      for (const auto& p : a.predicted_evidence) {
        ordered_json pj;
        pj["h"] = p.head;
        pj["t"] = p.tail;
        pj["evidence"] = p.sentences;
        pev.push_back(std::move(pj));
      }
      d["predicted_evidence"] = std::move(pev);
    }
    root.push_back(std::move(d));
  }
  return root.dump();
}

AliasLexicon parse_lexicon(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed lexicon JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("alias lexicon must be a JSON object of name -> [aliases]");
  AliasLexicon lex;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string ctx = "lexicon entry \"" + it.key() + "\"";
    if (!it.value().is_array()) throw ParseError(ctx + ": expected an array of strings");
    auto& aliases = lex[it.key()];
    for (const auto& a : it.value()) aliases.push_back(as_string(a, ctx));
  }
  return lex;
}

AliasLexicon load_lexicon(const std::string& path) { return parse_lexicon(read_file(path)); }

std::string serialize_lexicon(const AliasLexicon& lexicon) {
  ordered_json root = ordered_json::object();
  for (const auto& [name, aliases] : lexicon) root[name] = aliases;
  return root.dump();
}

TokenVocab::TokenVocab() : tokens_{"[PAD]", "[UNK]", "[MARKER]"} {}

TokenVocab TokenVocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3) throw ConfigError("token vocabulary must include the reserved entries");
  TokenVocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 3; i < v.tokens_.size(); ++i) v.index_.emplace(v.tokens_[i], i);
  return v;
}

TokenVocab TokenVocab::build(const std::vector<Document>& docs) {
  std::set<std::string> seen;
  for (const auto& d : docs)
    for (const auto& s : d.sentences)
      for (const auto& t : s.tokens) seen.insert(t);
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[MARKER]"};
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return from_tokens(std::move(tokens));
}

std::size_t TokenVocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::size_t marked_length(const Document& doc) {
  std::size_t n = 0;
  for (const auto& s : doc.sentences) n += s.tokens.size();
  for (const auto& e : doc.entities) n += 2 * e.mentions.size();
  return n;
}

MarkedSequence insert_markers(const Document& doc, const TokenVocab& vocab) {
  struct Ref {
    std::size_t entity, index;
    const Mention* m;
  };
  std::vector<std::vector<Ref>> by_sentence(doc.sentences.size());
  MarkedSequence seq;
  seq.mention_start_pos.resize(doc.entities.size());
  for (const auto& e : doc.entities) {
    seq.mention_start_pos[e.id].assign(e.mentions.size(), 0);
    for (std::size_t j = 0; j < e.mentions.size(); ++j) {
      by_sentence.at(e.mentions[j].sent_id).push_back({e.id, j, &e.mentions[j]});
    }
  }
  seq.tokens.reserve(marked_length(doc));

  // Opening order: longer span first, then entity id, then mention index.
  auto open_before = [](const Ref& a, const Ref& b) {
    const auto la = a.m->end - a.m->start, lb = b.m->end - b.m->start;
    return std::tie(lb, a.entity, a.index) < std::tie(la, b.entity, b.index);
  };

  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& tokens = doc.sentences[s].tokens;
    auto refs = by_sentence[s];
    std::sort(refs.begin(), refs.end(), [&](const Ref& a, const Ref& b) {
      if (a.m->start != b.m->start) return a.m->start < b.m->start;
      return open_before(a, b);
    });
    // Rank in global opening order; a mention closes before every mention
    // that opened earlier than it.
    std::vector<std::vector<std::size_t>> opens(tokens.size() + 1), closes(tokens.size() + 1);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      opens[refs[k].m->start].push_back(k);
      closes[refs[k].m->end].push_back(k);
    }
    const std::size_t begin = seq.tokens.size();
    for (std::size_t p = 0; p <= tokens.size(); ++p) {
      auto& c = closes[p];
      std::sort(c.begin(), c.end(), std::greater<>());
      for (std::size_t k : c) {
        (void)k;
        seq.tokens.push_back(TokenVocab::kMarker);
      }
      for (std::size_t k : opens[p]) {
        seq.mention_start_pos[refs[k].entity][refs[k].index] = seq.tokens.size();
        seq.tokens.push_back(TokenVocab::kMarker);
      }
      if (p < tokens.size()) seq.tokens.push_back(vocab.id(tokens[p]));
    }
    seq.sent_spans.emplace_back(begin, seq.tokens.size());
  }
  return seq;
}

std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(const Document& doc) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t e = doc.entities.size();
  if (e < 2) return pairs;
  pairs.reserve(e * (e - 1));
  for (std::size_t h = 0; h < e; ++h)
    for (std::size_t t = 0; t < e; ++t)
      if (h != t) pairs.emplace_back(h, t);
  return pairs;
}

}  // namespace docrex::corpus
