#include "docrex/rel_head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "docrex/errors.hpp"

namespace docrex::rel_head {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
}  // namespace

using diffmath::glorot_uniform;

void RelHeadParams::init(ParameterStore& params, std::size_t d, std::size_t n_relations, Rng& rng) {
  if (n_relations == 0) throw ConfigError("rel_head: at least one relation is required");
  params.add("rel_head.W_h", glorot_uniform({d, d}, d, d, rng));
  params.add("rel_head.W_t", glorot_uniform({d, d}, d, d, rng));
  params.add("rel_head.W_ch", glorot_uniform({d, d}, d, d, rng));
  params.add("rel_head.W_ct", glorot_uniform({d, d}, d, d, rng));
  params.add("rel_head.W_r", glorot_uniform({n_relations + 1, d, d}, d, d, rng));
  params.add("rel_head.b_r", Tensor({1, n_relations + 1}));
}

RelHeadParams RelHeadParams::bind(ParameterStore& params) {
  RelHeadParams p;
  p.W_h = &params.get("rel_head.W_h");
  p.W_t = &params.get("rel_head.W_t");
  p.W_ch = &params.get("rel_head.W_ch");
  p.W_ct = &params.get("rel_head.W_ct");
  p.W_r = &params.get("rel_head.W_r");
  p.b_r = &params.get("rel_head.b_r");
  if (p.W_r->value.rank() != 3 || p.W_r->value.shape()[0] != p.b_r->value.size()) {
    throw ConfigError("rel_head: W_r and b_r disagree on the class count");
  }
  return p;
}

std::pair<Var, Var> pair_repr(Tape& tape, const RelHeadParams& params, Var e_h, Var e_t, Var c) {
  using namespace diffmath;
  auto lin = [&](Parameter* w, Var x) { return matmul(x, transpose(tape.param(*w))); };
  Var z_h = diffmath::tanh(add(lin(params.W_h, e_h), lin(params.W_ch, c)));
  Var z_t = diffmath::tanh(add(lin(params.W_t, e_t), lin(params.W_ct, c)));
  return {z_h, z_t};
}

Var bilinear(Var x, Var W, Var y, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = W.value();
  const Tensor& yv = y.value();
  const Tensor& bv = b.value();
  if (wv.rank() != 3 || xv.shape() != yv.shape() || xv.cols() != wv.shape()[1] || wv.shape()[1] != wv.shape()[2] ||
      bv.size() != wv.shape()[0]) {
    throw ShapeError("bilinear: incompatible shapes " + diffmath::shape_string(xv.shape()) + ", " +
                     diffmath::shape_string(wv.shape()) + ", " + diffmath::shape_string(yv.shape()) + ", " +
                     diffmath::shape_string(bv.shape()));
  }
  const std::size_t P = xv.rows(), K = wv.shape()[0], d = xv.cols();
  const auto Pi = static_cast<Eigen::Index>(P), di = static_cast<Eigen::Index>(d);
  Tensor out({P, K});
  const MapC X(xv.values().data(), Pi, di), Y(yv.values().data(), Pi, di);
  RowMat T(Pi, di);
  for (std::size_t c = 0; c < K; ++c) {
    // row p: (x_p^T W_c) . y_p
    T.noalias() = X * MapC(wv.values().data() + c * d * d, di, di);
    const Eigen::VectorXd s = (T.array() * Y.array()).rowwise().sum();
    for (std::size_t p = 0; p < P; ++p) out(p, c) = s[static_cast<Eigen::Index>(p)] + bv[c];
  }
  return x.tape()->record("bilinear", std::move(out), {x, W, y, b}, [P, K, d](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const std::size_t ix = tape.input(self, 0), iw = tape.input(self, 1), iy = tape.input(self, 2),
                      ib = tape.input(self, 3);
    const auto Pi = static_cast<Eigen::Index>(P), di = static_cast<Eigen::Index>(d);
    const MapC X(tape.value(ix).values().data(), Pi, di);
    const MapC Y(tape.value(iy).values().data(), Pi, di);
    const double* W = tape.value(iw).values().data();
    const bool need_x = tape.needs_grad(ix), need_w = tape.needs_grad(iw), need_y = tape.needs_grad(iy);
    Tensor* gb = tape.needs_grad(ib) ? &tape.grad_ref(ib) : nullptr;
    Eigen::VectorXd gc(Pi);
    RowMat GY(Pi, di);
    for (std::size_t c = 0; c < K; ++c) {
      for (std::size_t p = 0; p < P; ++p) gc[static_cast<Eigen::Index>(p)] = g(p, c);
      if (gb) (*gb)[c] += gc.sum();
      const MapC Wc(W + c * d * d, di, di);
      GY.noalias() = gc.asDiagonal() * Y;
      if (need_x) Map(tape.grad_ref(ix).values().data(), Pi, di).noalias() += GY * Wc.transpose();
      if (need_w) Map(tape.grad_ref(iw).values().data() + c * d * d, di, di).noalias() += X.transpose() * GY;
      if (need_y) Map(tape.grad_ref(iy).values().data(), Pi, di).noalias() += gc.asDiagonal() * (X * Wc);
    }
  });
}

Var relation_logits(Tape& tape, const RelHeadParams& params, Var z_h, Var z_t) {
  return bilinear(z_h, tape.param(*params.W_r), z_t, tape.param(*params.b_r));
}

namespace {

// Log-normalizer over the classes selected by `in_set` plus TH.
double masked_lse(std::span<const double> y, const std::vector<bool>& in_set, bool want_positive) {
  const std::size_t th = y.size() - 1;
  double m = y[th];
  for (std::size_t r = 0; r < th; ++r)
    if (in_set[r] == want_positive) m = std::max(m, y[r]);
  double s = std::exp(y[th] - m);
  for (std::size_t r = 0; r < th; ++r)
    if (in_set[r] == want_positive) s += std::exp(y[r] - m);
  return m + std::log(s);
}

}  // namespace

double atl_loss_value(std::span<const double> y, const std::vector<bool>& positive) {
  const std::size_t th = y.size() - 1;
  const double lse_pos = masked_lse(y, positive, true);
  const double lse_neg = masked_lse(y, positive, false);
  double loss = lse_neg - y[th];
  for (std::size_t r = 0; r < th; ++r)
    if (positive[r]) loss += lse_pos - y[r];
  return loss;
}

Var atl_loss(Var logits, const Tensor& positives) {
  const Tensor& y = logits.value();
  if (y.rank() != 2 || positives.rows() != y.rows() || positives.cols() + 1 != y.cols()) {
    throw ShapeError("atl_loss: logits " + diffmath::shape_string(y.shape()) + " vs positives " +
                     diffmath::shape_string(positives.shape()));
  }
  const std::size_t P = y.rows(), R = positives.cols();
  std::vector<std::vector<bool>> masks(P, std::vector<bool>(R));
  double loss = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t r = 0; r < R; ++r) masks[p][r] = positives(p, r) > 0.5;
    loss += atl_loss_value(y.row_span(p), masks[p]);
  }
  return logits.tape()->record("atl_loss", Tensor::scalar(loss), {logits},
                               [masks = std::move(masks), R](Tape& tape, std::size_t self) {
    const double g = (*tape.grad(self))[0];
    const std::size_t in = tape.input(self, 0);
    if (!tape.needs_grad(in)) return;
    const Tensor& y = tape.value(in);
    Tensor& gy = tape.grad_ref(in);
    for (std::size_t p = 0; p < y.rows(); ++p) {
      const auto& pos = masks[p];
      const auto row = y.row_span(p);
      std::size_t n_pos = 0;
      for (bool b : pos) n_pos += b;
      // |P| * softmax over P u {TH} - 1_P, plus softmax over N u {TH} - 1_TH.
      const double lse_pos = masked_lse(row, pos, true);
      const double lse_neg = masked_lse(row, pos, false);
      for (std::size_t r = 0; r < R; ++r) {
        if (pos[r]) gy(p, r) += g * (static_cast<double>(n_pos) * std::exp(row[r] - lse_pos) - 1.0);
        else gy(p, r) += g * std::exp(row[r] - lse_neg);
      }
      gy(p, R) += g * (static_cast<double>(n_pos) * std::exp(row[R] - lse_pos) + std::exp(row[R] - lse_neg) - 1.0);
    }
  });
}

Tensor threshold_scores(const Tensor& logits) {
  const std::size_t P = logits.rows(), R = logits.cols() - 1;
  Tensor s({P, R});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t r = 0; r < R; ++r) s(p, r) = logits(p, r) - logits(p, R);
  return s;
}

std::vector<std::size_t> predict(std::span<const double> scores) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < scores.size(); ++r)
    if (scores[r] > 0.0) out.push_back(r);
  return out;
}

}  // namespace docrex::rel_head
