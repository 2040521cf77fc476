#include <gtest/gtest.h>

#include "docrex/fusion.hpp"
#include "docrex/trainer.hpp"

namespace tr = docrex::trainer;
using docrex::corpus::Document;

// Desk-size paired run on a coreference and bridge mix: the evidence head
// learns only with the evidence loss switched on.
TEST(PairedRun, JointTrainingImprovesEvidenceOverRelationOnly) {
  docrex::corpus::SynthConfig sc;
  sc.seed = 21;
  sc.mix = {0.0, 0.5, 0.5, 0.0};
  const auto synth = docrex::corpus::synth_corpus(sc);
  const auto& docs = synth.corpus.documents;
  const std::vector<Document> train(docs.begin(), docs.end() - 60), dev(docs.end() - 60, docs.end());
  auto pos_evi = [&](double lambda) {
    docrex::encoder::EncoderConfig ec;
    ec.seed = 4;
    tr::TrainConfig cfg = tr::TrainConfig::desk();
    cfg.max_epochs = 12;
    cfg.patience = 12;
    cfg.seed = 4;
    cfg.evi_weight = lambda;
    auto result = tr::train(
        docrex::Model::create(ec, docrex::corpus::TokenVocab::build(train), synth.corpus.relations), train, dev, cfg);
    const auto scored = docrex::fusion::score_documents(result.model, dev, {});
    const auto facts = docrex::metrics::gold_facts(dev, result.model.relations);
    return docrex::metrics::evi_f1(docrex::fusion::evidence_map(scored), docrex::metrics::gold_evidence(dev), facts,
                                   docrex::metrics::EvidenceScope::kPositivePairs)
        .f1;
  };
  const double joint = pos_evi(0.1), re_only = pos_evi(0.0);
  RecordProperty("pos_evi_joint", std::to_string(joint));
  RecordProperty("pos_evi_re_only", std::to_string(re_only));
  EXPECT_GT(joint, re_only) << "joint " << joint << " vs relation-only " << re_only;
}
