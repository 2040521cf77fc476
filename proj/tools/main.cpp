#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "docrex/corpus.hpp"
#include "docrex/errors.hpp"
#include "docrex/fusion.hpp"
#include "docrex/metrics.hpp"
#include "docrex/model.hpp"
#include "docrex/rules.hpp"
#include "docrex/trainer.hpp"
#include "json_config.hpp"

namespace {

using namespace docrex;

struct Options {
  std::string input, output, checkpoint, dev, predictions, train_ref, lexicon_output, log_path, annotated;
  std::uint64_t seed = 0;
  std::string mode = "full";
  std::string evidence_source = "model";
  std::string coref = "identity";
  double evi_threshold = evi_head::kDefaultThreshold;
  std::string scope = "positive";
  corpus::SynthConfig synth;
  trainer::TrainConfig train = trainer::TrainConfig::desk();
  encoder::EncoderConfig enc;
  bool paper_lr = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_file(path, text);
}

std::unique_ptr<rules::CorefProvider> make_provider(const std::string& spec) {
  if (spec == "identity") return std::make_unique<rules::IdentityProvider>();
  if (spec.starts_with("lexicon:") && spec.size() > 8)
    return std::make_unique<rules::LexiconProvider>(corpus::load_lexicon(spec.substr(8)));
  throw ConfigError("bad --coref value \"" + spec + "\" (expected identity or lexicon:PATH)");
}

void check_documents(const corpus::Corpus& c) {
  for (const auto& d : c.documents) corpus::validate_document(d, c.relations.size());
}

void run_validate(const Options& o) {
  const corpus::Corpus c = corpus::load_corpus(o.input);
  check_documents(c);
  std::cout << c.documents.size() << " documents OK\n";
}

void run_synth(const Options& o) {
  corpus::SynthConfig cfg = o.synth;
  cfg.seed = o.seed;
  const corpus::SynthCorpus s = corpus::synth_corpus(cfg);
  emit(o.output, corpus::serialize_corpus(s.corpus));
  if (!o.lexicon_output.empty()) write_file(o.lexicon_output, corpus::serialize_lexicon(s.lexicon));
}

void run_rules(const Options& o) {
  corpus::Corpus c = corpus::load_corpus(o.input);
  check_documents(c);
  const auto provider = make_provider(o.coref);
  const rules::CategoryHistogram hist = rules::categorize_facts(c.documents, *provider);
  if (o.scope != "positive" && o.scope != "all") throw ConfigError("--scope must be positive or all");
  std::vector<corpus::DocumentAnnotations> notes(c.documents.size());
  if (o.scope == "all") {
    for (std::size_t d = 0; d < c.documents.size(); ++d)
      for (const auto& l : rules::silver_labels(c.documents[d], *provider, rules::Scope::kAllPairs))
        if (!l.evidence.empty()) notes[d].predicted_evidence.push_back({l.head, l.tail, l.evidence});
  }
  for (auto& d : c.documents) d = rules::with_silver_evidence(d, *provider);
  emit(o.output, corpus::serialize_corpus(c, o.scope == "all" ? &notes : nullptr));
  std::cerr << rules::format_histogram(hist);
}

void run_train(const Options& o) {
  if (o.dev.empty()) throw ConfigError("train needs --dev");
  const corpus::Corpus train = corpus::load_corpus(o.input);
  check_documents(train);
  corpus::Corpus dev = corpus::load_corpus(o.dev, &train.relations);
  check_documents(dev);
  if (dev.relations.size() != train.relations.size())
    spdlog::warn("development split has relations absent from training; they cannot be predicted");

  trainer::TrainConfig tc = o.train;
  if (o.paper_lr) {
    const trainer::TrainConfig paper;
    tc.lr_encoder = paper.lr_encoder;
    tc.lr_heads = paper.lr_heads;
  }
  tc.seed = o.seed;
  encoder::EncoderConfig ec = o.enc;
  ec.seed = o.seed;

  std::vector<corpus::Document> train_docs = train.documents;
  if (!tc.no_joint) {
    const auto provider = make_provider(o.coref);
    train_docs = trainer::with_evidence_labels(train_docs, provider.get());
  }
  Model model = Model::create(ec, corpus::TokenVocab::build(train_docs), train.relations);
  std::ofstream log;
  if (!o.log_path.empty()) {
    log.open(o.log_path, std::ios::binary);
    if (!log) throw IoError("cannot write " + o.log_path);
  }
  trainer::TrainResult r = trainer::train(std::move(model), train_docs, dev.documents, tc,
                                          [&](const trainer::EpochRecord& rec) {
                                            if (log) log << trainer::record_json(rec) << '\n';
                                            spdlog::info("epoch {} dev_f1 {:.4f}", rec.epoch, rec.dev_f1);
                                          });
  r.model.save(o.checkpoint);
  std::cout << "best dev F1 " << r.best_dev_f1 << " at epoch " << r.best_epoch << "\n";
}

fusion::InferenceConfig inference_config(const Options& o, const rules::CorefProvider* provider) {
  fusion::InferenceConfig ic;
  ic.mode = fusion::parse_mode(o.mode);
  ic.source = fusion::parse_evidence_source(o.evidence_source);
  ic.provider = provider;
  ic.evi_threshold = o.evi_threshold;
  if (!(o.evi_threshold > 0.0 && o.evi_threshold < 1.0)) throw ConfigError("--evi-threshold must lie in (0, 1)");
  return ic;
}

void run_tune_tau(const Options& o) {
  Model model = Model::load(o.checkpoint);
  corpus::Corpus dev = corpus::load_corpus(o.input, &model.relations);
  check_documents(dev);
  const auto provider = make_provider(o.coref);
  fusion::InferenceConfig ic = inference_config(o, provider.get());
  if (ic.mode == fusion::Mode::kNoPseudo) throw ConfigError("tune-tau needs pseudo-document scores; mode nopseudo has none");
  const auto results = fusion::score_documents(model, dev.documents, ic);
  const auto instances = fusion::tau_instances(results, dev.documents);
  if (instances.empty()) throw ConfigError("no development pair has usable evidence; cannot tune tau");
  model.tau = fusion::tune_tau(instances);
  model.save(o.output.empty() ? o.checkpoint : o.output);
  nlohmann::ordered_json j;
  j["tau"] = *model.tau;
  j["instances"] = instances.size();
  j["objective"] = fusion::tau_objective(instances, *model.tau);
  std::cout << j.dump() << "\n";
}

void run_infer(const Options& o) {
  Model model = Model::load(o.checkpoint);
  corpus::Corpus c = corpus::load_corpus(o.input, &model.relations);
  check_documents(c);
  const auto provider = make_provider(o.coref);
  const fusion::InferenceConfig ic = inference_config(o, provider.get());
  const auto results = fusion::score_documents(model, c.documents, ic);
  const auto preds = fusion::predict(results, ic.mode, model.tau);
  emit(o.output, fusion::records_json(results, preds, model.relations));
  if (!o.annotated.empty()) {
    std::vector<corpus::DocumentAnnotations> notes(c.documents.size());
    for (std::size_t d = 0; d < results.size(); ++d) {
      for (const auto& p : preds[d])
        notes[d].predictions.push_back({p.head, p.tail, model.relations.name(p.relation), p.score, p.evidence});
      for (const auto& pr : results[d].pairs)
        if (!pr.evidence.empty()) notes[d].predicted_evidence.push_back({pr.head, pr.tail, pr.evidence});
    }
    write_file(o.annotated, corpus::serialize_corpus(c, &notes));
  }
}

// Predictions are either leaderboard records or a DocRED-layout corpus whose
// labels are taken as the predicted facts.
struct LoadedPredictions {
  std::vector<metrics::Fact> facts;
  metrics::EvidenceMap evidence;
};

LoadedPredictions load_predictions(const std::string& path, const std::vector<corpus::Document>& gold_docs) {
  const std::string text = read_file(path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": malformed JSON: " + e.what());
  }
  LoadedPredictions out;
  if (!root.is_array()) throw ParseError(path + ": predictions must be a JSON array");
  const bool records = root.empty() || (root[0].is_object() && root[0].contains("h_idx"));
  if (records) {
    std::set<std::string> titles;
    for (const auto& d : gold_docs) titles.insert(d.doc_id);
    for (std::size_t i = 0; i < root.size(); ++i) {
      const auto& r = root[i];
      try {
        metrics::Fact f{r.at("title").get<std::string>(), r.at("h_idx").get<std::size_t>(),
                        r.at("t_idx").get<std::size_t>(), r.at("r").get<std::string>()};
        if (!titles.contains(f.doc)) throw ParseError(path + ": record " + std::to_string(i) + " has unknown title \"" + f.doc + "\"");
        if (r.contains("evidence")) {
          auto& ev = out.evidence[{f.doc, f.head, f.tail}];
          for (const auto& s : r.at("evidence")) ev.push_back(s.get<std::size_t>());
          std::sort(ev.begin(), ev.end());
          ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
        }
        out.facts.push_back(std::move(f));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": record " + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }
  const corpus::Corpus c = corpus::parse_corpus(text);
  out.facts = metrics::gold_facts(c.documents, c.relations);
  out.evidence = metrics::gold_evidence(c.documents);
  return out;
}

void run_eval(const Options& o) {
  if (o.predictions.empty()) throw ConfigError("eval needs --predictions");
  const corpus::Corpus gold = corpus::load_corpus(o.input);
  check_documents(gold);
  const LoadedPredictions pred = load_predictions(o.predictions, gold.documents);
  const auto gold_facts = metrics::gold_facts(gold.documents, gold.relations);
  const auto gold_ev = metrics::gold_evidence(gold.documents);

  metrics::EvalReport rep;
  rep.f1 = metrics::re_f1(pred.facts, gold_facts);
  if (!o.train_ref.empty()) {
    const corpus::Corpus train = corpus::load_corpus(o.train_ref);
    rep.ign_f1 = metrics::ign_f1(pred.facts, gold_facts, metrics::train_keys(train.documents, train.relations),
                                 gold.documents);
    rep.has_ign = true;
  }
  const auto ii = metrics::intra_inter_f1(pred.facts, gold_facts, gold.documents);
  rep.intra_f1 = ii.intra;
  rep.inter_f1 = ii.inter;
  bool gold_has_evidence = false;
  for (const auto& [k, ev] : gold_ev) gold_has_evidence |= !ev.empty();
  if (gold_has_evidence) {
    rep.has_evidence = true;
    rep.evi_f1 = metrics::evi_f1(pred.evidence, gold_ev, pred.facts, metrics::EvidenceScope::kPredictedPairs);
    rep.pos_evi_f1 = metrics::evi_f1(pred.evidence, gold_ev, pred.facts, metrics::EvidenceScope::kPositivePairs);
  }
  const auto provider = make_provider(o.coref);
  metrics::CategoryMap cats;
  for (const auto& d : gold.documents)
    for (const auto& l : rules::silver_labels(d, *provider, rules::Scope::kPositivePairs))
      cats[{d.doc_id, l.head, l.tail}] = l.category;
  rep.categories = metrics::breakdown(pred.facts, gold_facts, cats);
  if (!o.output.empty()) write_file(o.output, metrics::report_json(rep) + "\n");
  std::cout << metrics::report_table(rep);
}

void run_report(const Options& o) {
  const corpus::Corpus c = corpus::load_corpus(o.input);
  check_documents(c);
  std::size_t sents = 0, ents = 0, mentions = 0, facts = 0, with_ev = 0, max_len = 0;
  for (const auto& d : c.documents) {
    sents += d.sentences.size();
    ents += d.entities.size();
    for (const auto& e : d.entities) mentions += e.mentions.size();
    facts += d.facts.size();
    for (const auto& f : d.facts) with_ev += !f.evidence.empty();
    max_len = std::max(max_len, corpus::marked_length(d));
  }
  const double n = c.documents.empty() ? 1.0 : static_cast<double>(c.documents.size());
  std::ostringstream out;
  char buf[128];
  auto line = [&](const char* k, double v, bool integral) {
    std::snprintf(buf, sizeof buf, integral ? "%-24s %10.0f\n" : "%-24s %10.2f\n", k, v);
    out << buf;
  };
  line("documents", static_cast<double>(c.documents.size()), true);
  line("relation types", static_cast<double>(c.relations.size()), true);
  line("sentences", static_cast<double>(sents), true);
  line("entities", static_cast<double>(ents), true);
  line("mentions", static_cast<double>(mentions), true);
  line("facts", static_cast<double>(facts), true);
  line("facts with evidence", static_cast<double>(with_ev), true);
  line("sentences per document", static_cast<double>(sents) / n, false);
  line("entities per document", static_cast<double>(ents) / n, false);
  line("max marked length", static_cast<double>(max_len), true);
  const auto provider = make_provider(o.coref);
  out << "\n" << rules::format_histogram(rules::categorize_facts(c.documents, *provider));
  emit(o.output, out.str());
}

int fail(const std::string& kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_logger_st("docrex"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);

  Options o;
  CLI::App app{"docrex: joint document-level relation and evidence extraction"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<docrex::cli::JsonConfig>());
  app.set_config("--config", "", "JSON configuration file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  std::string level = "warn";
  app.add_option("--log-level", level, "trace, debug, info, warn, error or off")->capture_default_str();

  auto add_io = [&](CLI::App* sub, bool needs_output) {
    sub->add_option("--input", o.input, "input corpus (DocRED layout)")->required()->check(CLI::ExistingFile);
    auto* out = sub->add_option("--output", o.output, needs_output ? "output path" : "output path (default stdout)");
    if (needs_output) out->required();
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "random seed")->capture_default_str(); };
  auto add_coref = [&](CLI::App* sub) {
    sub->add_option("--coref", o.coref, "coreference provider: identity or lexicon:PATH")->capture_default_str();
  };
  auto add_inference = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", o.mode, "full, nopseudo, noorigdoc, noblending or nojoint")->capture_default_str();
    sub->add_option("--evidence-source", o.evidence_source, "model or rules")->capture_default_str();
    sub->add_option("--evi-threshold", o.evi_threshold, "evidence probability threshold")->capture_default_str();
    add_coref(sub);
  };

  auto* validate = app.add_subcommand("validate", "check a corpus against the schema");
  validate->add_option("--input", o.input, "input corpus")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--output", o.output, "corpus output (default stdout)");
  synth->add_option("--lexicon-output", o.lexicon_output, "alias lexicon output");
  synth->add_option("--n-docs", o.synth.n_docs)->capture_default_str();
  synth->add_option("--vocab-size", o.synth.vocab_size, "family-name pool size")->capture_default_str();
  synth->add_option("--n-relations", o.synth.n_relations)->capture_default_str();
  synth->add_option("--units-per-doc", o.synth.units_per_doc)->capture_default_str();
  synth->add_option("--max-filler", o.synth.max_filler)->capture_default_str();
  synth->add_flag("--interleave", o.synth.interleave, "shuffle unit sentences together");
  synth->add_option("--mix", [&](const std::vector<std::string>& v) {
    if (v.size() != 4) return false;
    o.synth.mix = {std::stod(v[0]), std::stod(v[1]), std::stod(v[2]), std::stod(v[3])};
    return true;
  }, "intra coref bridge distractor fractions")->expected(4);
  add_seed(synth);

  auto* rules_cmd = app.add_subcommand("rules", "fill in silver evidence and print the category histogram");
  add_io(rules_cmd, false);
  add_coref(rules_cmd);
  rules_cmd->add_option("--scope", o.scope, "positive (labels only) or all (also every candidate pair)")
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "train the joint model");
  train->add_option("--input", o.input, "training corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--dev", o.dev, "development corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", o.checkpoint, "checkpoint output")->required();
  train->add_option("--log", o.log_path, "line-delimited JSON training log");
  add_seed(train);
  add_coref(train);
  auto& t = o.train;
  train->add_option("--lr-encoder", t.lr_encoder)->capture_default_str();
  train->add_option("--lr-heads", t.lr_heads)->capture_default_str();
  train->add_flag("--paper-lr", o.paper_lr, "use the pretrained-encoder learning rates 5e-5 / 1e-4");
  train->add_option("--warmup", t.warmup_fraction)->capture_default_str();
  train->add_option("--batch-docs", t.batch_docs)->capture_default_str();
  train->add_option("--max-epochs", t.max_epochs)->capture_default_str();
  train->add_option("--evi-weight", t.evi_weight, "lambda in L_RE + lambda * L_Evi")->capture_default_str();
  train->add_flag("--no-joint", t.no_joint, "train without the evidence loss");
  train->add_option("--patience", t.patience)->capture_default_str();
  train->add_option("--weight-decay", t.weight_decay)->capture_default_str();
  train->add_option("--clip-norm", t.clip_norm)->capture_default_str();
  train->add_option("--n-layers", o.enc.n_layers)->capture_default_str();
  train->add_option("--n-heads", o.enc.n_heads)->capture_default_str();
  train->add_option("--d-model", o.enc.d_model)->capture_default_str();
  train->add_option("--d-ff", o.enc.d_ff)->capture_default_str();
  train->add_option("--max-len", o.enc.max_len)->capture_default_str();

  auto* eval = app.add_subcommand("eval", "score predictions against a gold corpus");
  add_io(eval, false);
  eval->add_option("--predictions", o.predictions, "prediction records or DocRED-layout corpus")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--train", o.train_ref, "training corpus for Ign F1")->check(CLI::ExistingFile);
  add_coref(eval);

  auto* infer = app.add_subcommand("infer", "predict relations and evidence");
  add_io(infer, false);
  infer->add_option("--annotated", o.annotated, "also write the corpus with predictions attached");
  add_inference(infer);

  auto* tune = app.add_subcommand("tune-tau", "fit the blending threshold on a development corpus");
  tune->add_option("--input", o.input, "development corpus")->required()->check(CLI::ExistingFile);
  tune->add_option("--output", o.output, "checkpoint output (default: overwrite --checkpoint)");
  add_inference(tune);

  auto* report = app.add_subcommand("report", "corpus statistics and category histogram");
  add_io(report, false);
  add_coref(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw ConfigError("unknown --log-level " + level);
    spdlog::set_level(lvl);
    if (validate->parsed()) run_validate(o);
    else if (synth->parsed()) run_synth(o);
    else if (rules_cmd->parsed()) run_rules(o);
    else if (train->parsed()) run_train(o);
    else if (eval->parsed()) run_eval(o);
    else if (infer->parsed()) run_infer(o);
    else if (tune->parsed()) run_tune_tau(o);
    else if (report->parsed()) run_report(o);
  } catch (const docrex::Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
