#include "docrex/trainer.hpp"

#include <cmath>
#include <map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "docrex/errors.hpp"
#include "docrex/evi_head.hpp"
#include "docrex/metrics.hpp"
#include "docrex/rel_head.hpp"

namespace docrex::trainer {

using diffmath::Tape;
using diffmath::Tensor;

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.lr_encoder = 3e-3;
  cfg.lr_heads = 3e-3;
  return cfg;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(lr_encoder, "lr_encoder");
  positive(lr_heads, "lr_heads");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in (0, 1)");
  if (batch_docs == 0) throw ConfigError("batch_docs must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(evi_weight >= 0.0) || !std::isfinite(evi_weight)) throw ConfigError("evi_weight must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  positive(adam_eps, "adam_eps");
  positive(clip_norm, "clip_norm");
}

double lr_at(std::size_t step, std::size_t total, double warmup_fraction, double peak) {
  if (total == 0) return 0.0;
  const auto warmup = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(warmup_fraction * total)));
  if (step <= warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return 0.0;
  return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

LossParts joint_loss(Tape& tape, Model& model, const corpus::Document& doc, double lambda, bool with_evidence) {
  const auto pairs = corpus::candidate_pairs(doc);
  if (pairs.empty()) return {tape.constant(Tensor::scalar(0.0)), 0.0, 0.0};
  const std::size_t R = model.n_relations();
  Tensor positives({pairs.size(), R});
  std::map<EntityPair, std::size_t> row_of;
  for (std::size_t p = 0; p < pairs.size(); ++p) row_of[pairs[p]] = p;
  std::map<std::size_t, std::vector<std::size_t>> evidence;
  for (const auto& f : doc.facts) {
    const std::size_t p = row_of.at({f.head, f.tail});
    positives(p, f.relation) = 1.0;
    auto& ev = evidence[p];
    ev.insert(ev.end(), f.evidence.begin(), f.evidence.end());
  }
  std::vector<evi_head::EvidenceTarget> targets;
  for (auto& [p, ev] : evidence) {
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    if (!ev.empty()) targets.push_back({p, ev});
  }
  const bool use_evi = with_evidence && lambda > 0.0 && !targets.empty();

  const auto seq = prepare_sequence(model, doc);
  PairForward f = forward_pairs(tape, model, seq, pairs, use_evi);
  diffmath::Var re = rel_head::atl_loss(f.logits, positives);
  LossParts out{re, re.value().item(), 0.0};
  if (use_evi) {
    diffmath::Var evi = evi_head::evi_loss(f.evidence_logits, targets);
    out.evi = evi.value().item();
    out.total = diffmath::add(re, diffmath::scale(evi, lambda));
  }
  return out;
}

std::vector<corpus::Document> with_evidence_labels(const std::vector<corpus::Document>& docs,
                                                   const rules::CorefProvider* provider) {
  for (const auto& d : docs)
    for (const auto& f : d.facts)
      if (!f.evidence.empty()) return docs;
  if (provider == nullptr)
    throw ConfigError("training documents carry no evidence and no coreference provider was given for silver labels");
  std::vector<corpus::Document> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(rules::with_silver_evidence(d, *provider));
  return out;
}

AdamW::AdamW(const TrainConfig& cfg, const diffmath::ParameterStore& params) : cfg_(cfg) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.at(i).value.shape());
    v_.emplace_back(params.at(i).value.shape());
  }
  t_.assign(params.size(), 0);
}

void AdamW::step(diffmath::ParameterStore& params, double lr_encoder, double lr_heads) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    diffmath::Parameter& p = params.at(i);
    if (p.grad.all_zero()) continue;
    const double lr = p.name.starts_with("encoder.") ? lr_encoder : lr_heads;
    const std::size_t t = ++t_[i];
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    auto w = p.value.values();
    const auto g = p.grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_eps);
      w[k] -= lr * (update + cfg_.weight_decay * w[k]);
    }
  }
}

double clip_gradients(diffmath::ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (double g : params.at(i).grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i)
      for (double& g : params.at(i).grad.values()) g *= s;
  }
  return norm;
}

double dev_f1(Model& model, const std::vector<corpus::Document>& dev) {
  std::vector<metrics::Fact> pred;
  for (const auto& doc : dev) {
    const auto pairs = corpus::candidate_pairs(doc);
    const DocScores s = score_document(model, doc, pairs, false);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      for (std::size_t r : rel_head::predict(s.scores.row_span(p)))
        pred.push_back({doc.doc_id, pairs[p].first, pairs[p].second, model.relations.name(r)});
  }
  return metrics::re_f1(pred, metrics::gold_facts(dev, model.relations)).f1;
}

std::string record_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["loss_re"] = r.loss_re;
  j["loss_evi"] = r.loss_evi;
  j["dev_f1"] = r.dev_f1;
  j["lr"] = r.lr;
  return j.dump();
}

TrainResult train(Model model, const std::vector<corpus::Document>& train_docs,
                  const std::vector<corpus::Document>& dev_docs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_docs.empty()) throw ConfigError("training split is empty");
  if (dev_docs.empty()) throw ConfigError("development split is empty");
  const bool joint = !cfg.no_joint;
  if (joint && cfg.evi_weight > 0.0) {
    bool any_fact = false, any_evidence = false;
    for (const auto& d : train_docs)
      for (const auto& f : d.facts) {
        any_fact = true;
        any_evidence |= !f.evidence.empty();
      }
    if (any_fact && !any_evidence)
      throw ConfigError("joint training needs gold or silver evidence labels; supply a coreference provider or use no_joint");
  }
  model.joint = joint;
  Rng rng(cfg.seed);
  AdamW opt(cfg, model.params);
  const std::size_t steps_per_epoch = (train_docs.size() + cfg.batch_docs - 1) / cfg.batch_docs;
  const std::size_t total_steps = steps_per_epoch * cfg.max_epochs;

  TrainResult result{model, {}, -1.0, 0};
  std::vector<std::size_t> order(train_docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0, since_best = 0;
  model.params.zero_grad();
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double sum_re = 0.0, sum_evi = 0.0;
    double lr_enc = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_docs) {
      ++step;
      const std::size_t end = std::min(order.size(), b + cfg.batch_docs);
      for (std::size_t k = b; k < end; ++k) {
        const corpus::Document& doc = train_docs[order[k]];
        try {
          Tape tape;
          LossParts loss = joint_loss(tape, model, doc, cfg.evi_weight, joint);
          if (!std::isfinite(loss.re) || !std::isfinite(loss.evi)) throw NumericError("loss is not finite");
          tape.backward(loss.total);
          sum_re += loss.re;
          sum_evi += loss.evi;
        } catch (const NumericError& e) {
          std::string ids;
          for (std::size_t j = b; j < end; ++j) ids += (ids.empty() ? "" : ", ") + train_docs[order[j]].doc_id;
          throw TrainingError("non-finite value at step " + std::to_string(step) + " (document \"" + doc.doc_id +
                              "\"; batch: " + ids + "): " + e.what());
        }
      }
      clip_gradients(model.params, cfg.clip_norm);
      lr_enc = lr_at(step, total_steps, cfg.warmup_fraction, cfg.lr_encoder);
      opt.step(model.params, lr_enc, lr_at(step, total_steps, cfg.warmup_fraction, cfg.lr_heads));
      model.params.zero_grad();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = step;
    rec.loss_re = sum_re / static_cast<double>(train_docs.size());
    rec.loss_evi = sum_evi / static_cast<double>(train_docs.size());
    rec.dev_f1 = dev_f1(model, dev_docs);
    rec.lr = lr_enc;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    spdlog::debug("epoch {} loss_re {:.4f} loss_evi {:.4f} dev_f1 {:.4f}", epoch, rec.loss_re, rec.loss_evi,
                  rec.dev_f1);
    if (rec.dev_f1 > result.best_dev_f1) {
      result.best_dev_f1 = rec.dev_f1;
      result.best_epoch = epoch;
      result.model.params.copy_values_from(model.params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.model.joint = joint;
  return result;
}

}  // namespace docrex::trainer
