#pragma once

#include "gausscap/kernel.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gausscap {

// Finite amplitude distribution: the solver's decision variable.
// Invariants (enforced by make_distribution):
//   p_i > 0, sum p_i = 1 (to 1e-12), points strictly increasing,
//   points <= sqrt(u_p), sum p_i rho_i^2 <= u_a when finite.
struct AmplitudeDistribution {
    std::vector<double> points; // amplitudes rho_i >= 0, sorted
    std::vector<double> probs;
    ChannelSpec spec{2, 0.0, 0.0};

    std::size_t size() const { return points.size(); }
    double second_moment() const;
    std::uint64_t content_hash() const;
};

AmplitudeDistribution make_distribution(std::vector<double> points, std::vector<double> probs,
                                        const ChannelSpec& spec);

// Single mass at sqrt(u_p); requires u_a >= u_p.
AmplitudeDistribution seed_peak_only(const ChannelSpec& spec);

// Two-point seed (1 - u_a/u_p) at 0 and u_a/u_p at sqrt(u_p); requires
// 0 < u_a < u_p < inf. Its second moment is exactly u_a.
AmplitudeDistribution seed_avg_limited(const ChannelSpec& spec);

// Continuous radial reference density on [0, inf).
struct RadialDensity {
    std::function<double(double)> pdf;
    double support_hi; // integration cutoff covering all but ~1e-12 mass
    std::string tag;
};

// The generalized Rayleigh amplitude law of an N(0, (u_a/n) I_n) input:
// f(rho) = n^{n/2} rho^{n-1} e^{-n rho^2/(2 u_a)} / (2^{(n-2)/2} u_a^{n/2} Gamma(n/2)).
RadialDensity rayleigh_reference(int n, double u_a);

// Maximum-entropy law on [0, inf) under E[X^m] <= A and its entropy value;
// test support for the moment-constrained entropy bound.
double max_entropy_value(double m, double A);
std::function<double(double)> max_entropy_density(double m, double A);

// JSON interchange: {"points": [...], "probs": [...], "n": ..., "u_p": ..., "u_a": ...}.
// u_a = +inf is serialized as null and parsed from null / "inf" / absent.
std::string to_json(const AmplitudeDistribution& dist, int indent = -1);
AmplitudeDistribution distribution_from_json(const std::string& text);

} // namespace gausscap
