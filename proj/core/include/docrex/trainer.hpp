#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "docrex/corpus.hpp"
#include "docrex/model.hpp"
#include "docrex/rules.hpp"

namespace docrex::trainer {

struct TrainConfig {
  double lr_encoder = 5e-5;
  double lr_heads = 1e-4;
  double warmup_fraction = 0.06;
  std::size_t batch_docs = 4;
  std::size_t max_epochs = 30;
  double evi_weight = 0.1;  // lambda: L = L_RE + lambda * L_Evi
  std::uint64_t seed = 0;
  bool no_joint = false;
  std::size_t patience = 5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;

  // Learning rates sized for a randomly initialised desk-scale encoder.
  static TrainConfig desk();
  void validate() const;
};

// Linear warmup to `peak` over the first ceil(fraction * total) steps, then
// linear decay to zero at `total`. Steps are 1-based.
double lr_at(std::size_t step, std::size_t total, double warmup_fraction, double peak);

struct LossParts {
  diffmath::Var total;
  double re = 0.0;
  double evi = 0.0;
};

// Loss of one document; `lambda` = 0 or `with_evidence` = false leaves the
// evidence head out of the graph.
LossParts joint_loss(diffmath::Tape& tape, Model& model, const corpus::Document& doc, double lambda,
                     bool with_evidence);

// Returns the documents unchanged when any carries gold evidence, otherwise
// copies with silver evidence from `provider`. ConfigError when neither is
// available.
std::vector<corpus::Document> with_evidence_labels(const std::vector<corpus::Document>& docs,
                                                   const rules::CorefProvider* provider);

// Decoupled-weight-decay Adam. Tensors whose gradient is entirely zero are
// skipped, moments included.
class AdamW {
 public:
  AdamW(const TrainConfig& cfg, const diffmath::ParameterStore& params);
  void step(diffmath::ParameterStore& params, double lr_encoder, double lr_heads);

 private:
  TrainConfig cfg_;
  std::vector<diffmath::Tensor> m_, v_;
  std::vector<std::size_t> t_;
};

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_gradients(diffmath::ParameterStore& params, double max_norm);

// Doc-only relation F1 (S_O > 0).
double dev_f1(Model& model, const std::vector<corpus::Document>& dev);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss_re = 0.0;   // mean per document
  double loss_evi = 0.0;  // mean per document
  double dev_f1 = 0.0;
  double lr = 0.0;        // encoder rate at the epoch's last step
};

std::string record_json(const EpochRecord& r);

struct TrainResult {
  Model model;  // best dev-F1 snapshot
  std::vector<EpochRecord> log;
  double best_dev_f1 = 0.0;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Documents must already carry evidence labels unless cfg.no_joint.
TrainResult train(Model model, const std::vector<corpus::Document>& train_docs,
                  const std::vector<corpus::Document>& dev_docs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace docrex::trainer
