#pragma once

#include "gausscap/dist.hpp"

#include <vector>

namespace gausscap {

// KKT residual function s(rho) = h~_V(rho;F) - h(V;F) - lambda (rho^2 - u_a)
// sampled on a grid of [0, sqrt(u_p)] that always contains 0, sqrt(u_p) and
// every support point. A distribution is certified optimal when
// worst_violation and all mass-point residuals are <= 1e-5 nats.
struct KktReport {
    double lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> residuals;            // s at each grid point
    double worst_violation = 0.0;             // max over grid of s
    std::vector<double> mass_point_residuals; // |s(rho_i)| per support point
};

// ln f_V(v; F) = ln sum_i p_i K_n(v, rho_i).
double output_density_log(const AmplitudeDistribution& dist, double v);

// Same density parameterized by the output radius r = (n v)^{1/n}.
double output_density_log_radial(const AmplitudeDistribution& dist, double r);

// h(V; F) in nats by adaptive radial quadrature.
double output_entropy(const AmplitudeDistribution& dist);

// h~_V(rho; F) = -int K_n(v,rho) ln f_V(v;F) dv. Evaluation beyond
// sqrt(u_p) is allowed for diagnostics. Reuses a cached spline of ln f_V
// keyed by the distribution content.
double marginal_entropy_density(const AmplitudeDistribution& dist, double rho);

// Achievable rate h(V;F) + additive_constant(n), nats per channel use.
double rate(const AmplitudeDistribution& dist);

KktReport kkt_report(const AmplitudeDistribution& dist, double lambda, const ChannelSpec& spec,
                     int grid_size);

// Rate and output entropy of a continuous radial input law (used for the
// closed-form Rayleigh reference checks).
double continuous_output_entropy(const RadialDensity& density, int n);
double continuous_rate(const RadialDensity& density, int n);

} // namespace gausscap
