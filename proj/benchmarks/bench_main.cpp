#include <benchmark/benchmark.h>

#include "docrex/fusion.hpp"
#include "docrex/rules.hpp"
#include "docrex/trainer.hpp"

using namespace docrex;

namespace {

corpus::SynthCorpus bench_corpus(std::size_t n_docs) {
  corpus::SynthConfig cfg;
  cfg.n_docs = n_docs;
  cfg.seed = 1;
  return corpus::synth_corpus(cfg);
}

Model bench_model(const std::vector<corpus::Document>& docs, std::size_t n_relations) {
  std::vector<std::string> names;
  for (std::size_t r = 0; r < n_relations; ++r) names.push_back("R" + std::to_string(r));
  encoder::EncoderConfig cfg;
  return Model::create(cfg, corpus::TokenVocab::build(docs), corpus::RelationVocab(names));
}

void BM_Encode(benchmark::State& state) {
  const auto synth = bench_corpus(1);
  const auto& doc = synth.corpus.documents[0];
  Model model = bench_model({doc}, 6);
  const auto seq = prepare_sequence(model, doc);
  for (auto _ : state) {
    diffmath::Tape tape(false);
    benchmark::DoNotOptimize(encoder::encode(tape, model.params, model.encoder, seq).H.value().size());
  }
  state.counters["tokens"] = static_cast<double>(seq.size());
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const bool joint = state.range(0) != 0;
  const auto synth = bench_corpus(4);
  const auto& docs = synth.corpus.documents;
  Model model = bench_model(docs, 6);
  trainer::TrainConfig cfg = trainer::TrainConfig::desk();
  trainer::AdamW opt(cfg, model.params);
  for (auto _ : state) {
    for (const auto& doc : docs) {
      diffmath::Tape tape;
      tape.backward(trainer::joint_loss(tape, model, doc, cfg.evi_weight, joint).total);
    }
    trainer::clip_gradients(model.params, cfg.clip_norm);
    opt.step(model.params, 1e-4, 1e-4);
    model.params.zero_grad();
  }
  state.SetLabel(joint ? "joint" : "re-only");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SilverLabels(benchmark::State& state) {
  const auto synth = bench_corpus(100);
  rules::LexiconProvider provider(synth.lexicon);
  for (auto _ : state) {
    std::size_t n = 0;
    for (const auto& doc : synth.corpus.documents) n += rules::silver_labels(doc, provider, rules::Scope::kAllPairs).size();
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(BM_SilverLabels)->Unit(benchmark::kMillisecond);

void BM_TuneTau(benchmark::State& state) {
  Rng rng(5);
  std::vector<fusion::TauInstance> inst(static_cast<std::size_t>(state.range(0)));
  for (auto& i : inst) {
    i.label = rng.below(10) == 0;
    i.combined = rng.normal() + (i.label ? 2.0 : -2.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fusion::tune_tau(inst));
}
BENCHMARK(BM_TuneTau)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
