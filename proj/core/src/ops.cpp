#include "docrex/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "docrex/errors.hpp"

namespace docrex::diffmath {
namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape() != b.tape()) throw ShapeError(std::string(op) + ": operands live on different tapes");
}

// Accumulates g into the gradient of input k of node `self` if it needs one.
template <typename Fn>
void into_input(Tape& tape, std::size_t self, std::size_t k, Fn&& fn) {
  const std::size_t in = tape.input(self, k);
  if (!tape.needs_grad(in)) return;
  fn(tape.grad_ref(in), tape.value(in));
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// C (m x n) += A (m x k) * B (k x n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  Map(c, M, N).noalias() += MapC(a, M, K) * MapC(b, K, N);
}

// C (m x k) += G (m x n) * B^T where B is k x n
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  Map(c, M, K).noalias() += MapC(g, M, N) * MapC(b, K, N).transpose();
}

// C (k x n) += A^T * G where A is m x k and G is m x n
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  Map(c, K, N).noalias() += MapC(a, M, K).transpose() * MapC(g, M, N);
}

template <typename F, typename D>
Var unary(const char* op, Var a, F f, D dfdx_from_y) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape()->record(op, std::move(y), {a}, [dfdx_from_y](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& y = tape.value(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dfdx_from_y(x[i], y[i]);
    });
  });
}

}  // namespace

double logsumexp_values(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.cols() != bv.rows()) shape_fail("matmul", av.shape(), bv.shape());
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor c({m, n});
  gemm_nn(av.values().data(), bv.values().data(), c.values().data(), m, k, n);
  return a.tape()->record("matmul", std::move(c), {a, b}, [m, k, n](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& bv = tape.value(tape.input(self, 1));
    const Tensor& av = tape.value(tape.input(self, 0));
    into_input(tape, self, 0, [&](Tensor& ga, const Tensor&) {
      gemm_nt(g.values().data(), bv.values().data(), ga.values().data(), m, n, k);
    });
    into_input(tape, self, 1, [&](Tensor& gb, const Tensor&) {
      gemm_tn(av.values().data(), g.values().data(), gb.values().data(), m, k, n);
    });
  });
}

namespace {

enum class Broadcast { kNone, kRow, kScalar };

Broadcast check_binary(const char* op, Var a, Var b) {
  require_same_tape(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() == bv.shape()) return Broadcast::kNone;
  if (av.rank() == 2 && bv.rank() == 2 && bv.rows() == 1 && bv.cols() == av.cols()) return Broadcast::kRow;
  if (bv.size() == 1) return Broadcast::kScalar;
  shape_fail(op, av.shape(), bv.shape());
}

Var add_impl(const char* op, Var a, Var b, double sign) {
  const Broadcast bc = check_binary(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor c = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] += sign * (bc == Broadcast::kNone ? bv[i] : bc == Broadcast::kRow ? bv[i % cols] : bv[0]);
  }
  return a.tape()->record(op, std::move(c), {a, b}, [bc, cols, sign](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    into_input(tape, self, 0, [&](Tensor& ga, const Tensor&) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    into_input(tape, self, 1, [&](Tensor& gb, const Tensor&) {
      if (bc == Broadcast::kNone) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      } else if (bc == Broadcast::kRow) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += sign * g[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) gb[0] += sign * g[i];
      }
    });
  });
}

}  // namespace

Var add(Var a, Var b) { return add_impl("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_impl("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail("mul", av.shape(), bv.shape());
  Tensor c = av;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bv[i];
  return a.tape()->record("mul", std::move(c), {a, b}, [](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& av = tape.value(tape.input(self, 0));
    const Tensor& bv = tape.value(tape.input(self, 1));
    into_input(tape, self, 0, [&](Tensor& ga, const Tensor&) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    });
    into_input(tape, self, 1, [&](Tensor& gb, const Tensor&) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
  });
}

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace {

void check_axis(const char* op, const Tensor& t, int axis) {
  require_rank2(op, t);
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

// Visits each 1-D lane along `axis` as (offset, stride, length).
template <typename Fn>
void for_each_lane(const Tensor& t, int axis, Fn&& fn) {
  const std::size_t r = t.rows(), c = t.cols();
  if (axis == 1) {
    for (std::size_t i = 0; i < r; ++i) fn(i, i * c, std::size_t{1}, c);
  } else {
    for (std::size_t j = 0; j < c; ++j) fn(j, j, c, r);
  }
}

}  // namespace

Var softmax(Var a, int axis) {
  const Tensor& x = a.value();
  check_axis("softmax", x, axis);
  Tensor y(x.shape());
  for_each_lane(x, axis, [&](std::size_t, std::size_t off, std::size_t stride, std::size_t len) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) m = std::max(m, x[off + i * stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(x[off + i * stride] - m);
      y[off + i * stride] = e;
      s += e;
    }
    for (std::size_t i = 0; i < len; ++i) y[off + i * stride] /= s;
  });
  return a.tape()->record("softmax", std::move(y), {a}, [axis](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& y = tape.value(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor&) {
      for_each_lane(y, axis, [&](std::size_t, std::size_t off, std::size_t stride, std::size_t len) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += g[off + i * stride] * y[off + i * stride];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = off + i * stride;
          gx[k] += y[k] * (g[k] - dot);
        }
      });
    });
  });
}

Var logsumexp(Var a, int axis) {
  const Tensor& x = a.value();
  check_axis("logsumexp", x, axis);
  Tensor y(axis == 1 ? Shape{x.rows(), 1} : Shape{1, x.cols()});
  for_each_lane(x, axis, [&](std::size_t lane, std::size_t off, std::size_t stride, std::size_t len) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) m = std::max(m, x[off + i * stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += std::exp(x[off + i * stride] - m);
    y[lane] = m + std::log(s);
  });
  return a.tape()->record("logsumexp", std::move(y), {a}, [axis](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& y = tape.value(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
      for_each_lane(x, axis, [&](std::size_t lane, std::size_t off, std::size_t stride, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = off + i * stride;
          gx[k] += g[lane] * std::exp(x[k] - y[lane]);
        }
      });
    });
  });
}

Var segment_logsumexp(Var a, const std::vector<std::vector<std::size_t>>& segments) {
  const Tensor& x = a.value();
  require_rank2("segment_logsumexp", x);
  const std::size_t d = x.cols();
  Tensor y({segments.size(), d});
  for (std::size_t g = 0; g < segments.size(); ++g) {
    const auto& seg = segments[g];
    if (seg.empty()) throw ShapeError("segment_logsumexp: segment " + std::to_string(g) + " is empty");
    for (std::size_t r : seg) {
      if (r >= x.rows()) {
        throw ShapeError("segment_logsumexp: row " + std::to_string(r) + " out of range for " +
                         shape_string(x.shape()));
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t r : seg) m = std::max(m, x(r, j));
      double s = 0.0;
      for (std::size_t r : seg) s += std::exp(x(r, j) - m);
      y(g, j) = m + std::log(s);
    }
  }
  return a.tape()->record("segment_logsumexp", std::move(y), {a}, [segments](Tape& tape, std::size_t self) {
    const Tensor& gy = *tape.grad(self);
    const Tensor& y = tape.value(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
      const std::size_t d = x.cols();
      for (std::size_t g = 0; g < segments.size(); ++g) {
        for (std::size_t r : segments[g]) {
          for (std::size_t j = 0; j < d; ++j) gx(r, j) += gy(g, j) * std::exp(x(r, j) - y(g, j));
        }
      }
    });
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require_same_tape("layer_norm", x, gamma);
  require_same_tape("layer_norm", x, beta);
  const Tensor& xv = x.value();
  require_rank2("layer_norm", xv);
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c) {
    shape_fail("layer_norm", xv.shape(), gamma.value().shape());
  }
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor y({r, c});
  // Saved per row: normalized values and inverse std.
  auto xhat = std::make_shared<Tensor>(Shape{r, c});
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv(i, j) - mean) * is;
      (*xhat)(i, j) = h;
      y(i, j) = h * gv[j] + bv[j];
    }
  }
  return x.tape()->record("layer_norm", std::move(y), {x, gamma, beta},
                          [xhat, inv_std, r, c](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    const Tensor& gv = tape.value(tape.input(self, 1));
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor&) {
      const double n = static_cast<double>(c);
      for (std::size_t i = 0; i < r; ++i) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g(i, j) * gv[j];
          sum_dh += dh;
          sum_dh_h += dh * (*xhat)(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g(i, j) * gv[j];
          gx(i, j) += (*inv_std)[i] / n * (n * dh - sum_dh - (*xhat)(i, j) * sum_dh_h);
        }
      }
    });
    into_input(tape, self, 1, [&](Tensor& gg, const Tensor&) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gg[j] += g(i, j) * (*xhat)(i, j);
    });
    into_input(tape, self, 2, [&](Tensor& gb, const Tensor&) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
    });
  });
}

namespace {

Var gather_impl(const char* op, Var table, std::span<const std::size_t> ids) {
  const Tensor& t = table.value();
  require_rank2(op, t);
  const std::size_t d = t.cols();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  Tensor y({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= t.rows()) {
      throw ShapeError(std::string(op) + ": index " + std::to_string(idx[i]) + " out of range for " +
                       shape_string(t.shape()));
    }
    std::copy_n(t.values().data() + idx[i] * d, d, y.values().data() + i * d);
  }
  return table.tape()->record(op, std::move(y), {table}, [idx = std::move(idx), d](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    into_input(tape, self, 0, [&](Tensor& gt, const Tensor&) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += g[i * d + j];
    });
  });
}

}  // namespace

Var embedding_gather(Var table, std::span<const std::size_t> ids) {
  return gather_impl("embedding_gather", table, ids);
}

Var gather_rows(Var a, std::span<const std::size_t> rows) { return gather_impl("gather_rows", a, rows); }

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  for (const Var& p : parts) {
    require_same_tape("concat", parts[0], p);
    require_rank2("concat", p.value());
  }
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::size_t rows = parts[0].rows(), cols = parts[0].cols();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const std::size_t fixed = axis == 0 ? p.cols() : p.rows();
    if (fixed != (axis == 0 ? cols : rows)) shape_fail("concat", parts[0].shape(), p.shape());
    offsets.push_back(total);
    total += axis == 0 ? p.rows() : p.cols();
  }
  Tensor y(axis == 0 ? Shape{total, cols} : Shape{rows, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < pv.rows(); ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) {
        if (axis == 0) y(offsets[k] + i, j) = pv(i, j);
        else y(i, offsets[k] + j) = pv(i, j);
      }
  }
  return parts[0].tape()->record("concat", std::move(y), parts, [offsets, axis](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      into_input(tape, self, k, [&](Tensor& gp, const Tensor& pv) {
        for (std::size_t i = 0; i < pv.rows(); ++i)
          for (std::size_t j = 0; j < pv.cols(); ++j)
            gp(i, j) += axis == 0 ? g(offsets[k] + i, j) : g(i, offsets[k] + j);
      });
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  check_axis("slice", x, axis);
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (begin >= end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()) + " along axis " + std::to_string(axis));
  }
  const std::size_t rows = axis == 0 ? end - begin : x.rows();
  const std::size_t cols = axis == 1 ? end - begin : x.cols();
  Tensor y({rows, cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      y(i, j) = axis == 0 ? x(begin + i, j) : x(i, begin + j);
  return a.tape()->record("slice", std::move(y), {a}, [axis, begin](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor&) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
          if (axis == 0) gx(begin + i, j) += g(i, j);
          else gx(i, begin + j) += g(i, j);
        }
    });
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_rank2("transpose", x);
  Tensor y({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(j, i) = x(i, j);
  return a.tape()->record("transpose", std::move(y), {a}, [](Tape& tape, std::size_t self) {
    const Tensor& g = *tape.grad(self);
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor&) {
      for (std::size_t i = 0; i < gx.rows(); ++i)
        for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g(j, i);
    });
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape()->record("sum", Tensor::scalar(s), {a}, [](Tape& tape, std::size_t self) {
    const double g = (*tape.grad(self))[0];
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor&) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& x = logits.value();
  if (x.shape() != targets.shape()) shape_fail("bce_with_logits", x.shape(), targets.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // -[y log s(x) + (1-y) log(1-s(x))] = softplus(x) - y x
    loss += softplus_value(x[i]) - targets[i] * x[i];
  }
  return logits.tape()->record("bce_with_logits", Tensor::scalar(loss), {logits},
                               [targets](Tape& tape, std::size_t self) {
    const double g = (*tape.grad(self))[0];
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (sigmoid_value(x[i]) - targets[i]);
    });
  });
}

Var cross_entropy_from_logits(Var logits, std::span<const std::size_t> targets) {
  const Tensor& x = logits.value();
  require_rank2("cross_entropy_from_logits", x);
  if (targets.size() != x.rows()) {
    throw ShapeError("cross_entropy_from_logits: " + std::to_string(targets.size()) + " targets for " +
                     shape_string(x.shape()));
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (tgt[i] >= x.cols()) throw ShapeError("cross_entropy_from_logits: target out of range");
    loss += logsumexp_values(x.row_span(i)) - x(i, tgt[i]);
  }
  return logits.tape()->record("cross_entropy_from_logits", Tensor::scalar(loss), {logits},
                               [tgt = std::move(tgt)](Tape& tape, std::size_t self) {
    const double g = (*tape.grad(self))[0];
    into_input(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double lse = logsumexp_values(x.row_span(i));
        for (std::size_t j = 0; j < x.cols(); ++j) gx(i, j) += g * std::exp(x(i, j) - lse);
        gx(i, tgt[i]) -= g;
      }
    });
  });
}

}  // namespace docrex::diffmath
