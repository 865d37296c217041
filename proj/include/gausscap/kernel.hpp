#pragma once

#include <limits>
#include <vector>

namespace gausscap {

// Identity vector Gaussian channel with amplitude constraints, nat units.
// u_a >= u_p means the average-power constraint is inactive.
struct ChannelSpec {
    int n = 2;                                            // dimension, >= 1
    double u_p = 0.0;                                     // peak power bound
    double u_a = std::numeric_limits<double>::infinity(); // average power bound

    ChannelSpec(int n_, double u_p_, double u_a_);
    bool average_constraint_active() const { return u_a < u_p; }
    double peak_amplitude() const; // sqrt(u_p)
};

// Dimension-dependent constants of the spherical rate formula:
// rate = h(V;F_P) + sum_i ln alpha_i + (1 - n/2) ln 2pi - n/2.
struct RateConstants {
    int n;
    std::vector<double> alphas;// alpha_1 .. alpha_{n-2}
    double additive_constant;  // sum ln alpha_i + (1 - n/2) ln 2pi - n/2
};

RateConstants rate_constants(int n);

// ln K_n(v, rho) for n >= 2, the conditional density of V = R^n/n given
// input amplitude rho:
//   K_n(v,rho) = e^{-(r^2+rho^2)/2} I_{n/2-1}(rho r) / (rho r)^{n/2-1},
//   r = (n v)^{1/n}, with the rho v = 0 branch 1/(Gamma(n/2) 2^{n/2-1})
// times the Gaussian factor. Continuous across the branch.
double kernel_log(int n, double v, double rho);

// Same quantity parameterized by the output radius r = (n v)^{1/n}; for
// large n this is the only usable form since v itself overflows a double.
double kernel_log_radial(int n, double r, double rho);

// d/d rho and d^2/d rho^2 of kernel_log_radial at fixed r.
double kernel_log_radial_drho(int n, double r, double rho);
double kernel_log_radial_d2rho(int n, double r, double rho);

} // namespace gausscap
