#pragma once

#include <cmath>

namespace gausscap {

// Order of a modified Bessel function of the first kind. Orders produced
// from a channel dimension n are the half-integers n/2 - 1 >= -1/2.
struct BesselOrder {
    double nu;

    explicit BesselOrder(double nu_);
    static BesselOrder from_dimension(int n);
};

// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

// e^{-x} I_nu(x) for x >= 0, nu >= -1/2.
// I_nu(0) conventions: returns 1 for nu = 0, 0 for nu > 0 and +inf for nu = -1/2.
double bessel_i_scaled(BesselOrder order, double x);

// ln( e^{-x} I_nu(x) / x^nu ), finite and continuous down to x = 0 where it
// equals -nu ln 2 - ln Gamma(nu+1). This is the form the channel kernel
// consumes; it never under- or overflows for nu >= 0.
double log_bessel_i_scaled_ratio(BesselOrder order, double x);

// Ratio I_{nu+1}(x) / I_nu(x), stable for all x >= 0 (tends to 0 at x = 0).
double bessel_i_ratio(BesselOrder order, double x);

} // namespace gausscap
