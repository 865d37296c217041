#pragma once

#include <functional>

namespace gausscap {

// Adaptive composite Gauss-Legendre quadrature, 64 nodes per panel.
// A panel is accepted once bisecting it changes the estimate by less than
// its share of the tolerance budget; otherwise it is split. Throws
// NumericError carrying the last two estimates if the recursion depth limit
// is hit before the tolerance is met.
struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 30;
};

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opt = {});

// Vector-valued variant sharing one adaptive subdivision: f(t, out) fills
// m components; a panel is accepted when every component has converged.
void integrate_multi(int m, const std::function<void(double, double*)>& f, double a, double b,
                     double* out, const QuadratureOptions& opt = {});

} // namespace gausscap
