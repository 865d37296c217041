#pragma once

#include "gausscap/solver.hpp"

namespace gausscap {

// n = 1 amplitude-constrained scalar Gaussian capacity C_S(u_p, u_a).
// The optimal input is symmetric, so the solver works on amplitude points
// rho_i in [0, sqrt(u_p)] against the reflected-Gaussian output density
// f_Y(y) = sum_i p_i (phi(y - rho_i) + phi(y + rho_i)) / 2.
SolverResult scalar_capacity(double u_p, double u_a);

} // namespace gausscap
