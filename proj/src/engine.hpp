#pragma once

// Internal solver engine shared by the n >= 2 radial channel and the n = 1
// scalar channel. Both reduce to the same structure: an observable T >= 0
// whose conditional law given the input amplitude rho has density
// k(t|rho) e^{J(t)}, a mixture m(t) = sum_i p_i k(t|rho_i), an entropy
// functional h = -int m e^J ln m dt, and the marginal entropy density
// h~(rho) = -int k(t|rho) e^J ln m dt. The capacity solver (fixed-support
// ascent, KKT scan, point addition, multiplier bisection, power
// continuation) is written once against this interface.

#include "gausscap/entropy.hpp"
#include "gausscap/kernel.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace gausscap {
namespace detail {

class Model {
public:
    virtual ~Model() = default;
    virtual double t_max() const = 0;
    virtual double log_kernel(double t, double rho) const = 0;
    virtual double dlog_kernel_drho(double t, double rho) const = 0;
    virtual double d2log_kernel_drho2(double t, double rho) const = 0;
    // ln k, d ln k/d rho and d^2 ln k/d rho^2 in one evaluation
    virtual void kernel_all(double t, double rho, double* logk, double* dlogk,
                            double* d2logk) const;
    virtual double log_jacobian(double t) const = 0;
    // Interval containing all but ~e^{-90} of the mass of k(.|rho) e^J.
    virtual std::pair<double, double> window(double rho) const = 0;
    virtual double rate_offset() const = 0; // rate = h + offset
};

// t = r = ||output||; k = K_n(v(r), rho), J = (n-1) ln r.
class RadialModel final : public Model {
public:
    RadialModel(int n, double u_p);
    double t_max() const override { return t_max_; }
    double log_kernel(double r, double rho) const override;
    double dlog_kernel_drho(double r, double rho) const override;
    double d2log_kernel_drho2(double r, double rho) const override;
    void kernel_all(double r, double rho, double* logk, double* dlogk,
                    double* d2logk) const override;
    double log_jacobian(double r) const override;
    std::pair<double, double> window(double rho) const override;
    double rate_offset() const override { return offset_; }
    int dimension() const { return n_; }

private:
    int n_;
    double t_max_;
    double offset_;
};

// t = |y| for the scalar channel; k = (phi(t-rho)+phi(t+rho))/2, J = ln 2.
class ScalarModel final : public Model {
public:
    explicit ScalarModel(double u_p);
    double t_max() const override { return t_max_; }
    double log_kernel(double t, double rho) const override;
    double dlog_kernel_drho(double t, double rho) const override;
    double d2log_kernel_drho2(double t, double rho) const override;
    double log_jacobian(double) const override;
    std::pair<double, double> window(double rho) const override;
    double rate_offset() const override;

private:
    double t_max_;
};

struct Support {
    std::vector<double> points;
    std::vector<double> probs;
    double second_moment() const;
};

// Exact mixture evaluation (log-sum-exp over the support, no caching).
class MixtureEval {
public:
    MixtureEval(const Model& model, const Support& support, double quad_tol = 1e-11);

    double log_mix(double t) const;
    double entropy() const;

    struct HTilde {
        double value;
        double deriv;
        double deriv2;
        double kernel_mass; // should be ~1; used to absorb window truncation
    };
    HTilde h_tilde_full(double rho) const;
    double h_tilde(double rho) const;

private:
    const Model& model_;
    const Support& support_;
    double tol_;
};

// Spline of ln m(t) on a uniform grid for many queries against one fixed
// mixture; falls back to the exact log-sum-exp outside the grid. Build
// once, read from any number of threads.
class CachedDensity {
public:
    CachedDensity(const Model& model, Support support, double quad_tol = 1e-11);

    double log_mix(double t) const;
    double entropy() const { return entropy_; }
    double h_tilde(double rho) const;
    const Support& support() const { return support_; }

private:
    const Model& model_;
    Support support_;
    double tol_;
    double t_lo_, t_hi_, dt_;
    std::vector<double> values_; // ln m at grid points
    std::vector<double> second_; // spline second derivatives
    double entropy_;
};

struct TraceRow {
    int support_size;
    double rate;
    double worst_violation;
};

struct SolveParams {
    int max_support = 64;
    double pg_tol = 1e-7;
    int max_opt_iterations = 2000;
    double add_tol_final = 1e-6;  // grow support while worst residual exceeds this
    double add_tol_cont = 1e-5;   // looser target during continuation
    int scan_grid_cont = 128;
    int scan_grid_final = 256;
    int kkt_grid_final = 512;
    double cert_tol = 1e-5; // reported certification threshold
    double moment_tol = 1e-6;
    double quad_tol = 1e-11;
    bool keep_trace = true;
};

struct CoreResult {
    Support support;
    double lambda = 0.0;
    double entropy_h = 0.0;
    double capacity = 0.0;
    KktReport kkt;
    std::vector<TraceRow> trace;
};

using ModelFactory = std::function<std::unique_ptr<Model>(double u_p)>;

// Fixed-support ascent of h - lambda E[P^2] over positions in [0, sqrt(u_p)]
// and probabilities on the simplex (projected Barzilai-Borwein steps).
Support optimize_support(const Model& model, double u_p, double lambda, Support s,
                         const SolveParams& prm);

struct ScanResult {
    double worst = 0.0;
    double arg_worst = 0.0;
    double entropy_h = 0.0;
    KktReport report;
};

// Residual scan against a cached density; local maxima are refined by
// parabolic steps and appended to the report grid.
ScanResult kkt_scan(const Model& model, const CachedDensity& cached, double u_p, double lambda,
                    double moment_ref, int grid_size, const SolveParams& prm);

// Full Smith-style solve with continuation; see solver.cpp for the public
// wrapper and the meaning of the fields.
CoreResult solve_core(const ModelFactory& make_model, double u_p, double u_a,
                      const SolveParams& prm);

} // namespace detail
} // namespace gausscap
