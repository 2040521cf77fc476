#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "docrex/checkpoint.hpp"
#include "docrex/errors.hpp"
#include "docrex/grad_check.hpp"
#include "docrex/ops.hpp"

namespace dm = docrex::diffmath;
using dm::Parameter;
using dm::ParameterStore;
using dm::Tape;
using dm::Tensor;
using dm::Var;

namespace {

Tensor random_tensor(docrex::Rng& rng, dm::Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::size_t dim(docrex::Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Contracts a non-scalar op output to a scalar with fixed random weights so
// every output element contributes to the checked gradient.
Var weighted_sum(Var v, const Tensor& w) {
  Tape& tape = *v.tape();
  return dm::sum(dm::mul(v, tape.constant(w)));
}

struct GradCase {
  const char* name;
  std::function<Var(Tape&, std::vector<Parameter*>&)> build;
};

}  // namespace

TEST(Tensor, ShapeAccessors) {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  Tensor r({4});
  EXPECT_EQ(r.rows(), 1u);
  EXPECT_EQ(r.cols(), 4u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), docrex::ShapeError);
  EXPECT_THROW(m.item(), docrex::ShapeError);
}

TEST(Tape, FanOutAccumulatesGradients) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  Var y = dm::add(dm::mul(x, x), x);  // x^2 + x
  tape.backward(y);
  EXPECT_DOUBLE_EQ((*tape.grad(x))[0], 7.0);
}

TEST(Tape, BackwardTwiceThrows) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(1.0));
  Var y = dm::scale(x, 2.0);
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), docrex::Error);
}

TEST(Tape, InferenceModeRecordsNoGradients) {
  ParameterStore store;
  Parameter& p = store.add("p", Tensor::scalar(2.0));
  Tape tape(false);
  Var y = dm::mul(tape.param(p), tape.param(p));
  EXPECT_FALSE(tape.needs_grad(y));
  EXPECT_DOUBLE_EQ(y.value().item(), 4.0);
}

TEST(Tape, NonFiniteValuesAreRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(10.0));
  Var big = dm::scale(x, 1e307);
  EXPECT_THROW(dm::scale(big, 10.0), docrex::NumericError);
}

TEST(Ops, ShapeMismatchNamesOp) {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}));
  Var b = tape.leaf(Tensor({2, 3}));
  try {
    dm::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const docrex::ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  docrex::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape(false);
    Var a = tape.leaf(random_tensor(rng, {dim(rng, 1, 6), dim(rng, 1, 9)}, -30, 30));
    Var s = dm::softmax(a, 1);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (double v : s.value().row_span(r)) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, LogsumexpMatchesLongDoubleOracle) {
  docrex::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(dim(rng, 1, 8));
    for (double& x : v) x = rng.uniform(-50, 50);
    long double m = *std::max_element(v.begin(), v.end());
    long double acc = 0;
    for (double x : v) acc += std::exp(static_cast<long double>(x) - m);
    EXPECT_NEAR(dm::logsumexp_values(v), static_cast<double>(m + std::log(acc)), 1e-12);
  }
}

TEST(Ops, SegmentLogsumexpIdentities) {
  Tape tape(false);
  Tensor h = Tensor::matrix(3, 2, {0.5, -1.0, 0.5, -1.0, 2.0, 3.0});
  Var out = dm::segment_logsumexp(tape.leaf(h), {{2}, {0, 1}});
  EXPECT_DOUBLE_EQ(out.value()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out.value()(0, 1), 3.0);
  EXPECT_NEAR(out.value()(1, 0), 0.5 + std::log(2.0), 1e-15);
  EXPECT_NEAR(out.value()(1, 1), -1.0 + std::log(2.0), 1e-15);
}

TEST(Ops, BceWithLogitsIsStable) {
  Tape tape(false);
  Var x = tape.leaf(Tensor::matrix(1, 3, {800.0, -800.0, 0.0}));
  const double loss = dm::bce_with_logits(x, Tensor::matrix(1, 3, {1.0, 0.0, 1.0})).value().item();
  EXPECT_NEAR(loss, std::log(2.0), 1e-12);
}

TEST(Ops, CrossEntropyValue) {
  Tape tape(false);
  Var x = tape.leaf(Tensor::matrix(1, 2, {0.0, 0.0}));
  const std::vector<std::size_t> target{1};
  EXPECT_NEAR(dm::cross_entropy_from_logits(x, target).value().item(), std::log(2.0), 1e-15);
}

TEST(Ops, LayerNormNormalizesRows) {
  docrex::Rng rng(3);
  Tape tape(false);
  Var x = tape.leaf(random_tensor(rng, {4, 8}, -5, 5));
  Tensor ones({1, 8}, 1.0);
  Var y = dm::layer_norm(x, tape.leaf(ones), tape.leaf(Tensor({1, 8})));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : y.value().row_span(r)) mean += v / 8.0;
    for (double v : y.value().row_span(r)) var += (v - mean) * (v - mean) / 8.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

// Property: every differentiable op passes a central-difference check on
// random shapes and values.
TEST(Ops, GradientsMatchFiniteDifferencesOnRandomShapes) {
  docrex::Rng rng(42);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t m = dim(rng, 1, 4), k = dim(rng, 1, 4), n = dim(rng, 1, 4);
    ParameterStore store;
    Parameter& A = store.add("A", random_tensor(rng, {m, k}));
    Parameter& B = store.add("B", random_tensor(rng, {k, n}));
    Parameter& C = store.add("C", random_tensor(rng, {m, k}));
    Parameter& row = store.add("row", random_tensor(rng, {1, k}));
    Parameter& s = store.add("s", random_tensor(rng, {1, 1}));
    Parameter& gamma = store.add("gamma", random_tensor(rng, {1, k}, 0.5, 1.5));
    const Tensor w_mk = random_tensor(rng, {m, k});
    const Tensor w_mn = random_tensor(rng, {m, n});
    const Tensor w_km = random_tensor(rng, {k, m});
    const Tensor targets = random_tensor(rng, {m, k}, 0.0, 1.0);
    std::vector<std::size_t> labels(m);
    for (auto& l : labels) l = rng.below(k);
    std::vector<std::size_t> picks{rng.below(m), rng.below(m), rng.below(m)};
    std::vector<std::vector<std::size_t>> segments{{0}, {}};
    for (std::size_t r = 0; r < m; ++r) segments[1].push_back(r);

    const std::vector<std::pair<const char*, dm::ScalarFn>> cases = {
        {"matmul", [&](Tape& t) { return weighted_sum(dm::matmul(t.param(A), t.param(B)), w_mn); }},
        {"add", [&](Tape& t) { return weighted_sum(dm::add(t.param(A), t.param(C)), w_mk); }},
        {"add_row", [&](Tape& t) { return weighted_sum(dm::add(t.param(A), t.param(row)), w_mk); }},
        {"add_scalar", [&](Tape& t) { return weighted_sum(dm::add(t.param(A), t.param(s)), w_mk); }},
        {"sub", [&](Tape& t) { return weighted_sum(dm::sub(t.param(A), t.param(row)), w_mk); }},
        {"mul", [&](Tape& t) { return weighted_sum(dm::mul(t.param(A), t.param(C)), w_mk); }},
        {"scale", [&](Tape& t) { return weighted_sum(dm::scale(t.param(A), -1.7), w_mk); }},
        {"tanh", [&](Tape& t) { return weighted_sum(dm::tanh(t.param(A)), w_mk); }},
        {"sigmoid", [&](Tape& t) { return weighted_sum(dm::sigmoid(t.param(A)), w_mk); }},
        {"softmax1", [&](Tape& t) { return weighted_sum(dm::softmax(t.param(A), 1), w_mk); }},
        {"softmax0", [&](Tape& t) { return weighted_sum(dm::softmax(t.param(A), 0), w_mk); }},
        {"lse1", [&](Tape& t) { return dm::sum(dm::logsumexp(t.param(A), 1)); }},
        {"lse0", [&](Tape& t) { return dm::sum(dm::logsumexp(dm::mul(t.param(A), t.param(C)), 0)); }},
        {"segment_lse", [&](Tape& t) { return dm::sum(dm::segment_logsumexp(t.param(A), segments)); }},
        {"layer_norm",
         [&](Tape& t) { return weighted_sum(dm::layer_norm(t.param(A), t.param(gamma), t.param(row)), w_mk); }},
        {"gather", [&](Tape& t) { return dm::sum(dm::tanh(dm::gather_rows(t.param(A), picks))); }},
        {"embedding", [&](Tape& t) { return dm::sum(dm::sigmoid(dm::embedding_gather(t.param(A), picks))); }},
        {"concat0", [&](Tape& t) { return dm::sum(dm::tanh(dm::concat({t.param(A), t.param(C)}, 0))); }},
        {"concat1", [&](Tape& t) { return dm::sum(dm::tanh(dm::concat({t.param(A), t.param(C)}, 1))); }},
        {"slice", [&](Tape& t) { return dm::sum(dm::tanh(dm::slice(t.param(A), 1, 0, (k + 1) / 2))); }},
        {"transpose", [&](Tape& t) { return weighted_sum(dm::transpose(t.param(A)), w_km); }},
        {"bce", [&](Tape& t) { return dm::bce_with_logits(t.param(A), targets); }},
        {"cross_entropy", [&](Tape& t) { return dm::cross_entropy_from_logits(t.param(A), labels); }},
    };
    for (const auto& [name, fn] : cases) {
      SCOPED_TRACE(name);
      EXPECT_LE(dm::grad_check(fn, store), 1e-6);
    }
  }
}

TEST(Ops, ReluGradientAwayFromKink) {
  ParameterStore store;
  Parameter& p = store.add("p", Tensor::matrix(1, 4, {-1.0, -0.3, 0.4, 2.0}));
  EXPECT_LE(dm::grad_check([&](Tape& t) { return dm::sum(dm::mul(dm::relu(t.param(p)), t.param(p))); }, store),
            1e-8);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParameterStore store;
  Parameter& p = store.add("p", Tensor::scalar(0.7));
  // A node whose backward deliberately reports twice the true derivative.
  auto f = [&](Tape& t) {
    Var x = t.param(p);
    return t.record("bad_square", Tensor::scalar(x.value().item() * x.value().item()), {x},
                    [](Tape& tape, std::size_t self) {
                      const std::size_t in = tape.input(self, 0);
                      tape.grad_ref(in)[0] += 4.0 * tape.value(in)[0] * (*tape.grad(self))[0];
                    });
  };
  EXPECT_GT(dm::grad_check(f, store), 0.1);
}

TEST(Checkpoint, RoundTripsExactly) {
  docrex::Rng rng(5);
  ParameterStore store;
  store.add("a.weight", random_tensor(rng, {3, 4}, -1e6, 1e6));
  store.add("b", random_tensor(rng, {2, 2, 2}));
  store.add("c", Tensor::scalar(std::numeric_limits<double>::denorm_min()));
  std::stringstream buf;
  dm::write_checkpoint(buf, store, R"({"k":1})");
  dm::Checkpoint ck = dm::read_checkpoint(buf);
  ASSERT_EQ(ck.params.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ck.params.at(i).name, store.at(i).name);
    EXPECT_TRUE(ck.params.at(i).value == store.at(i).value);
  }
  EXPECT_NE(ck.metadata_json.find("\"k\""), std::string::npos);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("not a header\n");
  EXPECT_THROW(dm::read_checkpoint(bad), docrex::IoError);
  ParameterStore store;
  store.add("a", Tensor({2, 2}, 1.0));
  std::stringstream buf;
  dm::write_checkpoint(buf, store, "{}");
  std::string text = buf.str();
  text.resize(text.size() - 8);
  std::stringstream truncated(text);
  EXPECT_THROW(dm::read_checkpoint(truncated), docrex::IoError);
}

TEST(Rng, SameSeedSameStream) {
  docrex::Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  docrex::Rng c(10);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = c.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u / 10000.0;
  }
  EXPECT_NEAR(mean, 0.5, 0.02);
}
