#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "docrex/rng.hpp"
#include "docrex/tape.hpp"

// Differentiable operations. All inputs must live on the same tape; shape
// mismatches throw ShapeError naming the op and the offending shapes.
namespace docrex::diffmath {

using docrex::Rng;

Var matmul(Var a, Var b);
// Elementwise sum. `b` may also be a 1 x cols row broadcast over a's rows, or
// a 1 x 1 scalar broadcast over every element.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);

// axis 1 normalizes each row, axis 0 each column.
Var softmax(Var a, int axis);
// Reduces `axis`: rows x cols -> rows x 1 (axis 1) or 1 x cols (axis 0).
Var logsumexp(Var a, int axis);
// Coordinatewise logsumexp over groups of rows: output row g pools the rows
// listed in segments[g]. Every segment must be non-empty.
Var segment_logsumexp(Var a, const std::vector<std::vector<std::size_t>>& segments);

// Row-wise normalization with learned gain and bias (1 x cols each).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Gathers rows of `table` by index; also used as a generic row gather.
Var embedding_gather(Var table, std::span<const std::size_t> ids);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat(const std::vector<Var>& parts, int axis);
// Half-open range [begin, end) along axis.
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var transpose(Var a);
Var sum(Var a);

// Sum over elements of the numerically stable binary cross-entropy between
// sigmoid(logits) and targets in [0, 1]. Targets are constants.
Var bce_with_logits(Var logits, const Tensor& targets);
// Sum over rows of -log softmax(logits[row])[targets[row]].
Var cross_entropy_from_logits(Var logits, std::span<const std::size_t> targets);

// Matrix initialized uniformly in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Plain (non-recorded) numerics shared by ops and heads.
double logsumexp_values(std::span<const double> v);
double sigmoid_value(double x);
// log(1 + exp(x)) without overflow.
double softplus_value(double x);

}  // namespace docrex::diffmath
