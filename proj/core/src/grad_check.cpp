#include "docrex/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "docrex/errors.hpp"

namespace docrex::diffmath {
namespace {

double evaluate(const ScalarFn& f) {
  Tape tape(false);
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

Tensor recorded_gradient(const ScalarFn& f, Parameter& theta) {
  theta.zero_grad();
  Tape tape(true);
  Var out = f(tape);
  if (!std::isfinite(out.value().item())) throw NumericError("grad_check: objective is not finite");
  tape.backward(out);
  return theta.grad;
}

double compare(const ScalarFn& f, Parameter& theta, const Tensor& ad, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.value.size(); ++i) {
    const double saved = theta.value[i];
    theta.value[i] = saved + h;
    const double plus = evaluate(f);
    theta.value[i] = saved - h;
    const double minus = evaluate(f);
    theta.value[i] = saved;
    const double fd = (plus - minus) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(ad[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(ad[i] - fd) / denom);
  }
  return worst;
}

}  // namespace

double grad_check(const ScalarFn& f, Parameter& theta, double h) {
  const Tensor ad = recorded_gradient(f, theta);
  return compare(f, theta, ad, h);
}

double grad_check(const ScalarFn& f, ParameterStore& params, double h) {
  params.zero_grad();
  {
    Tape tape(true);
    Var out = f(tape);
    if (!std::isfinite(out.value().item())) throw NumericError("grad_check: objective is not finite");
    tape.backward(out);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params.at(k);
    const Tensor ad = p.grad;
    worst = std::max(worst, compare(f, p, ad, h));
  }
  return worst;
}

}  // namespace docrex::diffmath
