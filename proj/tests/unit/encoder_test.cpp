#include <cmath>

#include <gtest/gtest.h>

#include "docrex/encoder.hpp"
#include "docrex/errors.hpp"
#include "docrex/grad_check.hpp"
#include "testgen.hpp"

namespace dm = docrex::diffmath;
namespace enc = docrex::encoder;
using docrex::corpus::MarkedSequence;
using dm::Tape;
using dm::Tensor;
using dm::Var;

namespace {

enc::EncoderConfig small_config(std::size_t vocab, bool positions = true) {
  enc::EncoderConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 12;
  cfg.vocab_size = vocab;
  cfg.max_len = 64;
  cfg.seed = 4;
  cfg.use_positions = positions;
  return cfg;
}

Tensor random_matrix(docrex::Rng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  Tensor t({r, c});
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor stochastic_rows(docrex::Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = random_matrix(rng, r, c, 0.01, 1.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (double v : t.row_span(i)) s += v;
    for (double& v : t.row_span(i)) v /= s;
  }
  return t;
}

MarkedSequence sequence_with_mentions(std::size_t L, std::vector<std::vector<std::size_t>> starts) {
  MarkedSequence seq;
  seq.tokens.assign(L, docrex::corpus::TokenVocab::kMarker);
  seq.mention_start_pos = std::move(starts);
  seq.sent_spans = {{0, L}};
  return seq;
}

}  // namespace

TEST(Encoder, SingleTokenAttentionIsOne) {
  auto cfg = small_config(5);
  dm::ParameterStore params;
  docrex::Rng rng(1);
  enc::init_params(params, cfg, rng);
  Tape tape(false);
  auto out = enc::encode(tape, params, cfg, sequence_with_mentions(1, {{0}}));
  EXPECT_EQ(out.A.value().shape(), (dm::Shape{1, 1}));
  EXPECT_DOUBLE_EQ(out.A.value()(0, 0), 1.0);
}

TEST(Encoder, AttentionRowsAreStochasticAndRunsRepeat) {
  docrex::Rng gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto doc = testgen::random_document(gen, 4, 4);
    auto vocab = docrex::corpus::TokenVocab::build({doc});
    auto cfg = small_config(vocab.size());
    dm::ParameterStore params;
    docrex::Rng rng(trial);
    enc::init_params(params, cfg, rng);
    auto seq = docrex::corpus::insert_markers(doc, vocab);
    Tape t1(false), t2(false);
    auto a = enc::encode(t1, params, cfg, seq);
    auto b = enc::encode(t2, params, cfg, seq);
    EXPECT_TRUE(a.H.value() == b.H.value());
    EXPECT_EQ(a.H.value().shape(), (dm::Shape{seq.size(), cfg.d_model}));
    for (std::size_t r = 0; r < seq.size(); ++r) {
      double s = 0.0;
      for (double v : a.A.value().row_span(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Encoder, RejectsOverlongAndUnknownTokens) {
  auto cfg = small_config(5);
  cfg.max_len = 3;
  dm::ParameterStore params;
  docrex::Rng rng(1);
  enc::init_params(params, cfg, rng);
  Tape tape(false);
  EXPECT_THROW(enc::encode(tape, params, cfg, sequence_with_mentions(4, {{0}})), docrex::ConfigError);
  MarkedSequence bad = sequence_with_mentions(2, {{0}});
  bad.tokens[1] = 99;
  EXPECT_THROW(enc::encode(tape, params, cfg, bad), docrex::ConfigError);
  cfg.n_heads = 3;
  EXPECT_THROW(cfg.validate(), docrex::ConfigError);
}

TEST(EntityEmbedding, SingleMentionIsMarkerRow) {
  docrex::Rng rng(3);
  Tape tape(false);
  Tensor H = random_matrix(rng, 5, 4, -2, 2);
  Var e = enc::entity_embeddings(tape.leaf(H), sequence_with_mentions(5, {{3}}));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(e.value()(0, c), H(3, c));
}

TEST(EntityEmbedding, DuplicateRowsAddLogTwo) {
  docrex::Rng rng(4);
  Tape tape(false);
  Tensor H = random_matrix(rng, 4, 3, -2, 2);
  for (std::size_t c = 0; c < 3; ++c) H(2, c) = H(0, c);
  Var e = enc::entity_embeddings(tape.leaf(H), sequence_with_mentions(4, {{0, 2}}));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(e.value()(0, c), H(0, c) + std::log(2.0), 1e-12);
}

TEST(EntityEmbedding, MatchesHighPrecisionOracle) {
  docrex::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape(false);
    Tensor H = random_matrix(rng, 6, 4, -20, 20);
    Var e = enc::entity_embeddings(tape.leaf(H), sequence_with_mentions(6, {{0, 2, 5}, {1}}));
    for (std::size_t c = 0; c < 4; ++c) {
      long double acc = 0;
      for (std::size_t r : {0, 2, 5}) acc += std::exp(static_cast<long double>(H(r, c)));
      EXPECT_NEAR(e.value()(0, c), static_cast<double>(std::log(acc)), 1e-12);
    }
  }
}

TEST(EntityAttention, MeanOfMarkerRows) {
  docrex::Rng rng(6);
  Tape tape(false);
  Tensor A = stochastic_rows(rng, 5, 5);
  Var a = enc::entity_attention(tape.leaf(A), sequence_with_mentions(5, {{1, 4}, {2}}));
  double total = 0.0;
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(a.value()(0, c), 0.5 * (A(1, c) + A(4, c)), 1e-15);
    EXPECT_DOUBLE_EQ(a.value()(1, c), A(2, c));
    total += a.value()(0, c);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ContextEmbedding, UniformAttentionGivesColumnMean) {
  docrex::Rng rng(7);
  Tape tape(false);
  const std::size_t L = 6, d = 3;
  Tensor H = random_matrix(rng, L, d, -1, 1);
  Tensor U({1, L}, 1.0 / L);
  Var c = enc::context_embeddings(tape.leaf(U), tape.leaf(U), tape.leaf(H));
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t r = 0; r < L; ++r) mean += H(r, k) / L;
    EXPECT_NEAR(c.value()(0, k), mean, 1e-12);
  }
}

TEST(ContextEmbedding, OneHotSelectsRow) {
  docrex::Rng rng(8);
  Tape tape(false);
  Tensor H = random_matrix(rng, 5, 4, -1, 1);
  Tensor Ah({1, 5});
  Ah(0, 3) = 1.0;
  Tensor At = stochastic_rows(rng, 1, 5);
  Var c = enc::context_embeddings(tape.leaf(Ah), tape.leaf(At), tape.leaf(H));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(c.value()(0, k), H(3, k), 1e-15);
}

TEST(ContextEmbedding, ZeroOverlapFallsBackToUniform) {
  Tape tape(false);
  Tensor Ah = Tensor::matrix(1, 4, {1, 0, 0, 0});
  Tensor At = Tensor::matrix(1, 4, {0, 0, 0, 1});
  Var w = enc::context_weights(tape.leaf(Ah), tape.leaf(At));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(w.value()(0, k), 0.25);
}

// Property: weights form a distribution and c matches a dense evaluation.
TEST(ContextEmbedding, MatchesDenseOracle) {
  docrex::Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t P = 1 + rng.below(3), L = 2 + rng.below(8), d = 1 + rng.below(5);
    Tensor Ah = stochastic_rows(rng, P, L), At = stochastic_rows(rng, P, L);
    Tensor H = random_matrix(rng, L, d, -3, 3);
    Tape tape(false);
    Var w = enc::context_weights(tape.leaf(Ah), tape.leaf(At));
    Var c = enc::context_embeddings(tape.leaf(Ah), tape.leaf(At), tape.leaf(H));
    for (std::size_t p = 0; p < P; ++p) {
      double denom = 0.0, total = 0.0;
      for (std::size_t i = 0; i < L; ++i) denom += Ah(p, i) * At(p, i);
      for (std::size_t i = 0; i < L; ++i) {
        EXPECT_GE(w.value()(p, i), 0.0);
        total += w.value()(p, i);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
      for (std::size_t k = 0; k < d; ++k) {
        double expect = 0.0;
        for (std::size_t i = 0; i < L; ++i) expect += H(i, k) * Ah(p, i) * At(p, i) / denom;
        EXPECT_NEAR(c.value()(p, k), expect, 1e-12);
      }
    }
  }
}

TEST(Encoder, NoPositionModeIgnoresNonMentionTokenOrder) {
  docrex::corpus::Document doc;
  doc.doc_id = "p";
  doc.sentences = {{0, {"a", "x", "b", "y", "z"}}};
  doc.entities = {{0, {{0, 0, 0, 1, "a", "T"}}}, {1, {{1, 0, 2, 3, "b", "T"}}}};
  auto vocab = docrex::corpus::TokenVocab::build({doc});
  auto cfg = small_config(vocab.size(), false);
  dm::ParameterStore params;
  docrex::Rng rng(10);
  enc::init_params(params, cfg, rng);
  auto swapped = doc;
  std::swap(swapped.sentences[0].tokens[1], swapped.sentences[0].tokens[4]);
  Tape t1(false), t2(false);
  auto s1 = docrex::corpus::insert_markers(doc, vocab), s2 = docrex::corpus::insert_markers(swapped, vocab);
  Var e1 = enc::entity_embeddings(enc::encode(t1, params, cfg, s1).H, s1);
  Var e2 = enc::entity_embeddings(enc::encode(t2, params, cfg, s2).H, s2);
  for (std::size_t i = 0; i < e1.value().size(); ++i) EXPECT_NEAR(e1.value()[i], e2.value()[i], 1e-12);
}

TEST(Encoder, CompositeGradientMatchesFiniteDifferences) {
  docrex::Rng gen(11);
  auto doc = testgen::random_document(gen, 2, 3);
  while (doc.entities.size() < 2) doc = testgen::random_document(gen, 2, 3);
  auto vocab = docrex::corpus::TokenVocab::build({doc});
  auto cfg = small_config(vocab.size());
  dm::ParameterStore params;
  docrex::Rng rng(12);
  enc::init_params(params, cfg, rng);
  auto seq = docrex::corpus::insert_markers(doc, vocab);
  Tensor w({1, cfg.d_model});
  for (double& v : w.values()) v = gen.uniform(-1, 1);
  auto f = [&](Tape& tape) {
    auto out = enc::encode(tape, params, cfg, seq);
    Var e = enc::entity_embeddings(out.H, seq);
    Var a = enc::entity_attention(out.A, seq);
    const std::vector<std::size_t> h{0}, t{1};
    Var c = enc::context_embeddings(dm::gather_rows(a, h), dm::gather_rows(a, t), out.H);
    Var mix = dm::add(c, dm::tanh(dm::gather_rows(e, h)));
    return dm::sum(dm::mul(mix, tape.constant(w)));
  };
  EXPECT_LE(dm::grad_check(f, params), 1e-4);
}
