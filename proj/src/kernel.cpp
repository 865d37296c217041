#include "gausscap/kernel.hpp"
#include "gausscap/errors.hpp"
#include "gausscap/specfun.hpp"

#include <cmath>
#include <stdexcept>

namespace gausscap {

namespace {

constexpr double kLnPi = 1.1447298858494001741;
constexpr double kLn2Pi = 1.8378770664093454836;

void check_dimension(int n)
{
    if (n < 2)
        throw std::domain_error("kernel: dimension must be >= 2 (use the scalar module for n = 1)");
}

} // namespace

ChannelSpec::ChannelSpec(int n_, double u_p_, double u_a_) : n(n_), u_p(u_p_), u_a(u_a_)
{
    if (n < 1)
        throw ValidationError("ChannelSpec: dimension must be >= 1");
    if (!(u_p >= 0.0))
        throw ValidationError("ChannelSpec: peak power must be >= 0");
    if (!(u_a >= 0.0))
        throw ValidationError("ChannelSpec: average power must be >= 0");
    if (std::isinf(u_p) && std::isinf(u_a))
        throw ValidationError("ChannelSpec: at least one of u_p, u_a must be finite");
}

double ChannelSpec::peak_amplitude() const
{
    return std::sqrt(u_p);
}

RateConstants rate_constants(int n)
{
    check_dimension(n);
    RateConstants rc;
    rc.n = n;
    rc.alphas.reserve(n >= 2 ? n - 2 : 0);
    for (int i = 1; i <= n - 2; ++i) {
        // alpha_i = sqrt(pi) Gamma((n-i)/2) / Gamma((n-i+1)/2)
        const double a = 0.5 * kLnPi + log_gamma(0.5 * (n - i)) - log_gamma(0.5 * (n - i + 1));
        rc.alphas.push_back(std::exp(a));
    }
    // sum ln alpha_i has the closed form -ln Gamma(n/2) + (n-2)/2 ln pi
    const double sum_log_alpha = -log_gamma(0.5 * n) + 0.5 * (n - 2) * kLnPi;
    rc.additive_constant = sum_log_alpha + (1.0 - 0.5 * n) * kLn2Pi - 0.5 * n;
    return rc;
}

double kernel_log_radial(int n, double r, double rho)
{
    check_dimension(n);
    if (!(r >= 0.0) || !(rho >= 0.0))
        throw std::domain_error("kernel: r and rho must be >= 0");
    const BesselOrder nu = BesselOrder::from_dimension(n);
    const double x = rho * r;
    // -(r^2+rho^2)/2 + x = -(r-rho)^2/2 keeps the Gaussian factor bounded
    return -0.5 * (r - rho) * (r - rho) + log_bessel_i_scaled_ratio(nu, x);
}

double kernel_log(int n, double v, double rho)
{
    check_dimension(n);
    if (!(v >= 0.0))
        throw std::domain_error("kernel: v must be >= 0");
    const double r = v == 0.0 ? 0.0 : std::exp((std::log(v) + std::log(static_cast<double>(n))) / n);
    return kernel_log_radial(n, r, rho);
}

double kernel_log_radial_drho(int n, double r, double rho)
{
    check_dimension(n);
    const BesselOrder nu = BesselOrder::from_dimension(n);
    // d/drho ln K = -rho + r I_{nu+1}(rho r)/I_nu(rho r)
    return -rho + r * bessel_i_ratio(nu, rho * r);
}

double kernel_log_radial_d2rho(int n, double r, double rho)
{
    check_dimension(n);
    const BesselOrder nu = BesselOrder::from_dimension(n);
    const double x = rho * r;
    // beta = I_{nu+1}/I_nu obeys beta' = 1 - beta^2 - (2nu+1) beta / x
    double beta_prime;
    if (x < 1e-12) {
        beta_prime = 1.0 / (2.0 * (nu.nu + 1.0));
    } else {
        const double beta = bessel_i_ratio(nu, x);
        beta_prime = 1.0 - beta * beta - (2.0 * nu.nu + 1.0) * beta / x;
    }
    return -1.0 + r * r * beta_prime;
}

} // namespace gausscap
