#pragma once

// Adaptive Gauss-Kronrod (G7,K15) integration with an absolute-error
// target.  Used by the simulation oracles; the estimator pipeline itself
// is all exact step-function arithmetic and never calls this.

#include <functional>

#include "lyl/common.hpp"

namespace lyl {

struct QuadResult {
  double value;
  double error_estimate;
};

// Integrate f over [a,b] to absolute tolerance abs_tol.  Bisects the
// worst panel until the summed K15-vs-G7 error estimate is below
// abs_tol; throws QuadratureFailure if max_panels is exhausted first.
QuadResult integrate_gk(const std::function<double(double)>& f, double a,
                        double b, double abs_tol = 1e-8,
                        int max_panels = 2000);

}  // namespace lyl
