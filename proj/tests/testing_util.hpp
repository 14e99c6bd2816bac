#pragma once

// Shared test oracles. The finite-difference gradient here is the reference
// that analytic gradients are validated against; it only ever evaluates the
// forward function, so it stays independent of the tape's backward rules.

#include "rsonerf/core.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace rsotest {

using rsonerf::ArrX;
using rsonerf::Index;

// Central finite differences d f / d x_i with step h, evaluated one
// coordinate at a time. `f` must read x afresh on every call.
inline ArrX<double> finite_diff_gradient(ArrX<double>& x,
                                         const std::function<double()>& f,
                                         double h = 1e-5) {
  ArrX<double> grad(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f();
    x[i] = saved - h;
    const double fm = f();
    x[i] = saved;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Norm-relative error between analytic and reference gradients.
inline double gradient_rel_error(const ArrX<double>& analytic,
                                 const ArrX<double>& reference) {
  const double denom = std::max(reference.matrix().norm(), 1e-12);
  return (analytic - reference).matrix().norm() / denom;
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("rsonerf_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rsotest
