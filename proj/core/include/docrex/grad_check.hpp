#pragma once

#include <functional>

#include "docrex/tape.hpp"

namespace docrex::diffmath {

// Builds a scalar on the given tape. Must obtain the checked parameters
// through Tape::param so the tape can route their gradients.
using ScalarFn = std::function<Var(Tape&)>;

// Central-difference check of the recorded gradient of f with respect to
// theta. Returns max_i |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
// Throws NumericError if f is not finite at any probe point.
double grad_check(const ScalarFn& f, Parameter& theta, double h = 1e-5);

// Max of the above over every parameter in the store.
double grad_check(const ScalarFn& f, ParameterStore& params, double h = 1e-5);

}  // namespace docrex::diffmath
