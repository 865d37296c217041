// Scaled modified Bessel functions of the first kind with real order
// nu >= -1/2, evaluated as e^{-x} I_nu(x).
//
// Three regimes:
//   * nu = +-1/2: closed forms in terms of e^{-2x} (exact, no cancellation),
//   * x >= 600 and x >= nu^2: large-argument expansion
//       e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k,
//     whose terms shrink geometrically in that range and which terminates
//     exactly for half-integer orders,
//   * everything else: the ascending series with all-positive terms,
//       I_nu(x) = (x/2)^nu / Gamma(nu+1) * sum_k c_k,
//       c_0 = 1, c_k = c_{k-1} (x^2/4) / (k (nu+k)),
//     accumulated with an explicit rescale so the partial sum never
//     overflows even when sum_k c_k ~ e^x.
//
// The kernel of the channel needs ln(e^{-x} I_nu(x) / x^nu), which stays
// finite as x -> 0 for any nu; it is computed directly in log form so huge
// orders with tiny arguments do not underflow.

#include "gausscap/specfun.hpp"
#include "gausscap/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gausscap {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct ScaledSum {
    double log_value; // ln of the quantity
};

// ln of sum_k c_k with c_0 = 1, c_k = c_{k-1} * q / (k (nu + k)), q = x^2/4.
double log_kummer_sum(double nu, double x)
{
    const double q = 0.25 * x * x;
    double sum = 1.0;
    double term = 1.0;
    double log_shift = 0.0;
    for (int k = 1; k < 2000000; ++k) {
        term *= q / (k * (nu + k));
        sum += term;
        if (sum > 1e280) {
            sum *= 1e-280;
            term *= 1e-280;
            log_shift += 280.0 * std::log(10.0);
        }
        // terms decay monotonically once q < k (nu + k)
        if (term < sum * 1e-18 && q < static_cast<double>(k) * (nu + k))
            return log_shift + std::log(sum);
    }
    throw NumericError("bessel_i_scaled: ascending series did not converge");
}

// sum_k (-1)^k a_k(nu) / x^k for x >= max(600, nu^2); the e^{-2x} reflection
// term of the exact half-integer formula is below 1e-500 here and is dropped.
double asymptotic_sum(double nu, double x)
{
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 60; ++k) {
        const double f = (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
        term *= -f;
        if (std::abs(term) < 1e-18 * std::abs(sum))
            break;
        sum += term;
        if (std::abs(f) >= 1.0)
            break; // asymptotic tail started to grow; sum is already converged to ~e^{-2x}
    }
    return sum;
}

bool is_half_integer_pm_half(double nu, double target)
{
    return std::abs(nu - target) < 1e-14;
}

void check_order_and_arg(double nu, double x)
{
    if (!(nu >= -0.5) || !std::isfinite(nu))
        throw std::domain_error("bessel order must satisfy nu >= -1/2");
    if (!(x >= 0.0) || !std::isfinite(x))
        throw std::domain_error("bessel argument must be finite and non-negative");
}

} // namespace

BesselOrder::BesselOrder(double nu_) : nu(nu_)
{
    if (!(nu >= -0.5) || !std::isfinite(nu))
        throw std::domain_error("BesselOrder: nu must be finite and >= -1/2");
}

BesselOrder BesselOrder::from_dimension(int n)
{
    if (n < 1)
        throw std::domain_error("BesselOrder::from_dimension: dimension must be >= 1");
    return BesselOrder(0.5 * n - 1.0);
}

double log_gamma(double x)
{
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::domain_error("log_gamma: argument must be finite and positive");
    return std::lgamma(x);
}

double bessel_i_scaled(BesselOrder order, double x)
{
    const double nu = order.nu;
    check_order_and_arg(nu, x);

    if (x == 0.0) {
        if (nu == 0.0)
            return 1.0;
        if (nu > 0.0)
            return 0.0;
        return std::numeric_limits<double>::infinity(); // nu = -1/2 diverges at 0
    }
    if (is_half_integer_pm_half(nu, -0.5))
        return std::sqrt(2.0 / (kTwoPi / 2.0 * x)) * 0.5 * (1.0 + std::exp(-2.0 * x));
    if (is_half_integer_pm_half(nu, 0.5))
        return std::sqrt(2.0 / (kTwoPi / 2.0 * x)) * 0.5 * (-std::expm1(-2.0 * x));

    if (x >= 600.0 && x >= nu * nu)
        return asymptotic_sum(nu, x) / std::sqrt(kTwoPi * x);

    const double log_val = nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) - x + log_kummer_sum(nu, x);
    return std::exp(log_val);
}

double log_bessel_i_scaled_ratio(BesselOrder order, double x)
{
    const double nu = order.nu;
    check_order_and_arg(nu, x);

    if (nu < 0.0)
        throw std::domain_error("log_bessel_i_scaled_ratio: requires nu >= 0");
    if (x == 0.0)
        return -nu * std::log(2.0) - std::lgamma(nu + 1.0);
    if (x >= 600.0 && x >= nu * nu)
        return std::log(asymptotic_sum(nu, x)) - 0.5 * std::log(kTwoPi * x) - nu * std::log(x);

    return -nu * std::log(2.0) - std::lgamma(nu + 1.0) - x + log_kummer_sum(nu, x);
}

double bessel_i_ratio(BesselOrder order, double x)
{
    const double nu = order.nu;
    check_order_and_arg(nu, x);
    if (nu < 0.0)
        throw std::domain_error("bessel_i_ratio: requires nu >= 0");
    if (x == 0.0)
        return 0.0;
    // I_{nu+1}/I_nu = x * exp(lr(nu+1) - lr(nu)) with lr = ln(e^{-x}I/x^nu)
    const double lr_hi = log_bessel_i_scaled_ratio(BesselOrder(nu + 1.0), x);
    const double lr_lo = log_bessel_i_scaled_ratio(order, x);
    return x * std::exp(lr_hi - lr_lo);
}

} // namespace gausscap
