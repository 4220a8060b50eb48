#pragma once

// Forward-mode dual numbers. The forward model is templated on its scalar so
// the same code yields values (double), high-precision values (long double)
// and exact Jacobians (Jet).
#include <ceres/jet.h>

namespace polrecon {

template <typename T, int N>
using Jet = ceres::Jet<T, N>;

/// Plain value of a scalar or jet.
template <typename T>
auto value_of(const T& x) { return x; }
template <typename T, int N>
T value_of(const ceres::Jet<T, N>& x) { return x.a; }

} // namespace polrecon
