#pragma once

#include "gausscap/kernel.hpp"

#include <string>
#include <vector>

namespace gausscap {

// Non-identity channel described by the singular values of its matrix;
// equivalent to additive noise N(0, diag(lambda_i^{-2})) on an identity
// channel. Zero modes are dropped during SVD ingestion.
struct MimoSpec {
    std::vector<double> singular_values; // all > 0
    double u_p = 0.0;
    double u_a = 0.0;

    MimoSpec(std::vector<double> singular_values_, double u_p_, double u_a_);
    int rank() const { return static_cast<int>(singular_values.size()); }
};

// Builds a MimoSpec from a dense channel matrix (rows x cols); returns the
// number of dropped (numerically zero) singular values through *dropped.
MimoSpec mimo_spec_from_matrix(const std::vector<std::vector<double>>& matrix, double u_p,
                               double u_a, int* dropped = nullptr);

struct BoundSet {
    double gaussian_upper;
    double cubic_lower;
    double cubic_upper;
    double modified_cubic_lower;
    double elliptical_lower;
    double elliptical_upper; // identical to the whitening bounds
    double epi_lower;
};

// (n/2) ln(1 + min(u_p, u_a)/n): capacity of the relaxed average-power-only
// problem, an upper bound for the constrained identity channel.
double gaussian_upper(const ChannelSpec& spec);

// Rate of the single hypersphere at sqrt(u_p) (the constant-amplitude input).
double constant_amplitude_rate(int n, double u_p);

// EPI lower bound on the constant-amplitude rate:
// ((n-1)/2) ln(1 + 2^{2/(n-1)-1} u_p / (e [(n-1) Gamma((n-1)/2)]^{2/(n-1)})).
double epi_constant_amplitude_lower(int n, double u_p);

// MISO channel capacity: C_S(u_p ||h||^2, u_a ||h||^2).
double miso_capacity(double channel_norm, double u_p, double u_a);

// Max-entropy input parameters for the EPI bound: the density
// a e^{-lambda t^{2/n}} on [0, u_p^{n/2}/n]. lambda = 0 and a = n/u_p^{n/2}
// when u_a >= n u_p/(n+2); otherwise lambda > 0 solves the moment equation.
struct EpiParams {
    double lambda;
    double a;
    double log_a;    // ln a, usable when a itself over/underflows
    double h_input;  // resulting max input entropy h(X)
};
EpiParams solve_epi_params(int n, double u_p, double u_a);

BoundSet mimo_bounds(const MimoSpec& spec);

} // namespace gausscap
