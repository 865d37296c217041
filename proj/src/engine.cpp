#include "engine.hpp"

#include "gausscap/errors.hpp"
#include "gausscap/quadrature.hpp"
#include "gausscap/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

namespace gausscap {
namespace detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLn2Pi = 0.91893853320467274178;
constexpr double kHalfLn2PiE = 1.4189385332046727418;
constexpr double kMergeGap = 1e-7;  // collapse points this close during optimization
constexpr double kPruneProb = 1e-10;

// Euclidean projection onto the probability simplex.
void project_simplex(std::vector<double>& v)
{
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0;
    double tau = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        css += u[i];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            tau = t;
            k = static_cast<int>(i + 1);
        }
    }
    (void)k;
    for (double& x : v)
        x = std::max(0.0, x - tau);
}

std::string format_trace(const std::vector<TraceRow>& trace)
{
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (i)
            os << ", ";
        os << "(" << trace[i].support_size << ", " << trace[i].rate << ", "
           << trace[i].worst_violation << ")";
    }
    os << "]";
    return os.str();
}

} // namespace

// ---------------------------------------------------------------- models

void Model::kernel_all(double t, double rho, double* logk, double* dlogk, double* d2logk) const
{
    *logk = log_kernel(t, rho);
    *dlogk = dlog_kernel_drho(t, rho);
    *d2logk = d2log_kernel_drho2(t, rho);
}

RadialModel::RadialModel(int n, double u_p) : n_(n)
{
    t_max_ = std::sqrt(static_cast<double>(n) + u_p) + 14.0;
    offset_ = rate_constants(n).additive_constant;
}

double RadialModel::log_kernel(double r, double rho) const
{
    return kernel_log_radial(n_, r, rho);
}

double RadialModel::dlog_kernel_drho(double r, double rho) const
{
    return kernel_log_radial_drho(n_, r, rho);
}

double RadialModel::d2log_kernel_drho2(double r, double rho) const
{
    return kernel_log_radial_d2rho(n_, r, rho);
}

void RadialModel::kernel_all(double r, double rho, double* logk, double* dlogk,
                             double* d2logk) const
{
    const BesselOrder nu = BesselOrder::from_dimension(n_);
    const double x = rho * r;
    const double lr = log_bessel_i_scaled_ratio(nu, x);
    *logk = -0.5 * (r - rho) * (r - rho) + lr;
    double beta, beta_prime;
    if (x < 1e-12) {
        beta = 0.5 * x / (nu.nu + 1.0);
        beta_prime = 1.0 / (2.0 * (nu.nu + 1.0));
    } else {
        const double lr_hi = log_bessel_i_scaled_ratio(BesselOrder(nu.nu + 1.0), x);
        beta = x * std::exp(lr_hi - lr);
        beta_prime = 1.0 - beta * beta - (2.0 * nu.nu + 1.0) * beta / x;
    }
    *dlogk = -rho + r * beta;
    *d2logk = -1.0 + r * r * beta_prime;
}

double RadialModel::log_jacobian(double r) const
{
    return r <= 0.0 ? kNegInf : (n_ - 1) * std::log(r);
}

std::pair<double, double> RadialModel::window(double rho) const
{
    // ||x + W|| concentrates around sqrt(n + rho^2) with sub-Gaussian
    // fluctuations of unit scale (1-Lipschitz function of W)
    const double c = std::sqrt(static_cast<double>(n_) + rho * rho);
    return {std::max(0.0, c - 14.0), c + 13.0};
}

ScalarModel::ScalarModel(double u_p)
{
    t_max_ = std::sqrt(u_p) + 14.0;
}

double ScalarModel::log_kernel(double t, double rho) const
{
    const double a1 = -0.5 * (t - rho) * (t - rho); // dominant lobe: t, rho >= 0
    const double a2 = -0.5 * (t + rho) * (t + rho);
    return a1 + std::log1p(std::exp(a2 - a1)) - std::log(2.0) - kHalfLn2Pi;
}

double ScalarModel::dlog_kernel_drho(double t, double rho) const
{
    const double a1 = -0.5 * (t - rho) * (t - rho);
    const double a2 = -0.5 * (t + rho) * (t + rho);
    const double w1 = 1.0 / (1.0 + std::exp(a2 - a1));
    return w1 * (t - rho) - (1.0 - w1) * (t + rho);
}

double ScalarModel::d2log_kernel_drho2(double t, double rho) const
{
    const double a1 = -0.5 * (t - rho) * (t - rho);
    const double a2 = -0.5 * (t + rho) * (t + rho);
    const double w1 = 1.0 / (1.0 + std::exp(a2 - a1));
    const double w2 = 1.0 - w1;
    return -1.0 + 4.0 * w1 * w2 * t * t;
}

double ScalarModel::log_jacobian(double) const
{
    return std::log(2.0); // f_{|Y|} = 2 m
}

std::pair<double, double> ScalarModel::window(double rho) const
{
    return {std::max(0.0, rho - 14.0), rho + 13.0};
}

double ScalarModel::rate_offset() const
{
    return -kHalfLn2PiE;
}

// --------------------------------------------------------------- support

double Support::second_moment() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        m += probs[i] * points[i] * points[i];
    return m;
}

// ----------------------------------------------------------- MixtureEval

MixtureEval::MixtureEval(const Model& model, const Support& support, double quad_tol)
    : model_(model), support_(support), tol_(quad_tol)
{
}

double MixtureEval::log_mix(double t) const
{
    // streaming log-sum-exp; no per-call storage
    const std::size_t n = support_.points.size();
    double m = kNegInf;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (support_.probs[i] <= 0.0)
            continue;
        const double a = std::log(support_.probs[i]) + model_.log_kernel(t, support_.points[i]);
        if (a <= m) {
            s += std::exp(a - m);
        } else {
            s = s * std::exp(m - a) + 1.0;
            m = a;
        }
    }
    return m == kNegInf ? kNegInf : m + std::log(s);
}

double MixtureEval::entropy() const
{
    // h = -int m e^J ln m dt, integrated as -(I[g-c] + c I[1]) with the
    // measured mass absorbing window truncation
    const double hi = model_.t_max();
    double t_ref = 0.5 * hi;
    {
        std::size_t top = 0;
        for (std::size_t i = 1; i < support_.probs.size(); ++i)
            if (support_.probs[i] > support_.probs[top])
                top = i;
        const auto w = model_.window(support_.points[top]);
        t_ref = 0.5 * (w.first + std::min(w.second, hi));
    }
    const double c = log_mix(t_ref);
    double out[2];
    QuadratureOptions opt;
    opt.abs_tol = tol_;
    opt.rel_tol = tol_;
    integrate_multi(
        2,
        [&](double t, double* v) {
            const double g = log_mix(t);
            const double w = std::exp(g + model_.log_jacobian(t));
            v[0] = w;
            v[1] = w * (g - c);
        },
        0.0, hi, out, opt);
    return -(out[1] + c * out[0]);
}

MixtureEval::HTilde MixtureEval::h_tilde_full(double rho) const
{
    const auto win = model_.window(rho);
    const double c = log_mix(0.5 * (win.first + win.second));
    double out[4];
    QuadratureOptions opt;
    opt.abs_tol = tol_;
    opt.rel_tol = tol_;
    integrate_multi(
        4,
        [&](double t, double* v) {
            double logk, dlogk, d2logk;
            model_.kernel_all(t, rho, &logk, &dlogk, &d2logk);
            const double base = std::exp(logk + model_.log_jacobian(t));
            const double g = log_mix(t) - c;
            v[0] = base;
            v[1] = base * g;
            v[2] = base * dlogk * g;
            v[3] = base * (dlogk * dlogk + d2logk) * g;
        },
        win.first, win.second, out, opt);
    // d^m/drho^m int k e^J dt = 0, so the c-shift leaves derivatives exact
    return HTilde{-(out[1] + c * out[0]), -out[2], -out[3], out[0]};
}

double MixtureEval::h_tilde(double rho) const
{
    const auto win = model_.window(rho);
    const double c = log_mix(0.5 * (win.first + win.second));
    double out[2];
    QuadratureOptions opt;
    opt.abs_tol = tol_;
    opt.rel_tol = tol_;
    integrate_multi(
        2,
        [&](double t, double* v) {
            const double base = std::exp(model_.log_kernel(t, rho) + model_.log_jacobian(t));
            v[0] = base;
            v[1] = base * (log_mix(t) - c);
        },
        win.first, win.second, out, opt);
    return -(out[1] + c * out[0]);
}

// --------------------------------------------------------- CachedDensity

CachedDensity::CachedDensity(const Model& model, Support support, double quad_tol)
    : model_(model), support_(std::move(support)), tol_(quad_tol)
{
    t_lo_ = 0.0;
    t_hi_ = model.t_max();
    const int m = std::min(16384, std::max(2048, static_cast<int>(t_hi_ * 192.0)));
    dt_ = (t_hi_ - t_lo_) / (m - 1);
    values_.resize(m);
    MixtureEval exact(model_, support_, tol_);
    for (int i = 0; i < m; ++i)
        values_[i] = exact.log_mix(t_lo_ + i * dt_);

    // natural cubic spline second derivatives (uniform grid Thomas sweep)
    second_.assign(m, 0.0);
    std::vector<double> cp(m, 0.0), rhs(m, 0.0);
    for (int i = 1; i < m - 1; ++i)
        rhs[i] = 6.0 * (values_[i + 1] - 2.0 * values_[i] + values_[i - 1]) / (dt_ * dt_);
    // diag 4, off-diag 1 after dividing by dt^2/... (standard form)
    for (int i = 1; i < m - 1; ++i) {
        const double denom = 4.0 - (i > 1 ? cp[i - 1] : 0.0);
        cp[i] = 1.0 / denom;
        rhs[i] = (rhs[i] - (i > 1 ? rhs[i - 1] : 0.0)) / denom;
    }
    for (int i = m - 2; i >= 1; --i)
        second_[i] = rhs[i] - cp[i] * second_[i + 1];

    // entropy against the spline
    double t_ref;
    {
        std::size_t top = 0;
        for (std::size_t i = 1; i < support_.probs.size(); ++i)
            if (support_.probs[i] > support_.probs[top])
                top = i;
        const auto w = model_.window(support_.points[top]);
        t_ref = 0.5 * (w.first + std::min(w.second, t_hi_));
    }
    const double c = log_mix(t_ref);
    double out[2];
    QuadratureOptions opt;
    opt.abs_tol = tol_;
    opt.rel_tol = tol_;
    integrate_multi(
        2,
        [&](double t, double* v) {
            const double g = log_mix(t);
            const double w = std::exp(g + model_.log_jacobian(t));
            v[0] = w;
            v[1] = w * (g - c);
        },
        t_lo_, t_hi_, out, opt);
    entropy_ = -(out[1] + c * out[0]);
}

double CachedDensity::log_mix(double t) const
{
    if (t < t_lo_ || t > t_hi_) {
        MixtureEval exact(model_, support_, tol_);
        return exact.log_mix(t);
    }
    const double u = (t - t_lo_) / dt_;
    int i = static_cast<int>(u);
    if (i >= static_cast<int>(values_.size()) - 1)
        i = static_cast<int>(values_.size()) - 2;
    const double b = u - i;
    const double a = 1.0 - b;
    return a * values_[i] + b * values_[i + 1] +
           ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * dt_ * dt_ / 6.0;
}

double CachedDensity::h_tilde(double rho) const
{
    const auto win = model_.window(rho);
    const double c = log_mix(0.5 * (win.first + win.second));
    double out[2];
    QuadratureOptions opt;
    opt.abs_tol = tol_;
    opt.rel_tol = tol_;
    integrate_multi(
        2,
        [&](double t, double* v) {
            const double base = std::exp(model_.log_kernel(t, rho) + model_.log_jacobian(t));
            v[0] = base;
            v[1] = base * (log_mix(t) - c);
        },
        win.first, win.second, out, opt);
    return -(out[1] + c * out[0]);
}

// --------------------------------------------------------- optimization

namespace {

struct GradientEval {
    std::vector<double> h_tilde;
    std::vector<double> dh_tilde;
    std::vector<double> ddh_tilde;
    double objective; // sum p_i (h~_i - lambda rho_i^2)
};

GradientEval evaluate(const Model& model, const Support& s, double lambda, double quad_tol)
{
    GradientEval ev;
    const std::size_t n = s.points.size();
    ev.h_tilde.resize(n);
    ev.dh_tilde.resize(n);
    ev.ddh_tilde.resize(n);
    MixtureEval mix(model, s, quad_tol);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.probs[i] <= 0.0) {
            // dead point: value still needed for the entering test
            ev.h_tilde[i] = mix.h_tilde(s.points[i]);
            ev.dh_tilde[i] = 0.0;
            ev.ddh_tilde[i] = 0.0;
            continue;
        }
        const auto ht = mix.h_tilde_full(s.points[i]);
        ev.h_tilde[i] = ht.value;
        ev.dh_tilde[i] = ht.deriv;
        ev.ddh_tilde[i] = ht.deriv2;
        obj += s.probs[i] * (ht.value - lambda * s.points[i] * s.points[i]);
    }
    ev.objective = obj;
    return ev;
}

// dense LU solve with partial pivoting for the small KKT systems
bool lu_solve(std::vector<std::vector<double>> a, std::vector<double>& b)
{
    const std::size_t n = a.size();
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i)
        piv[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[best][col]))
                best = r;
        if (std::abs(a[best][col]) < 1e-300)
            return false;
        std::swap(a[col], a[best]);
        std::swap(b[col], b[best]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0)
                continue;
            for (std::size_t c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            sum -= a[i][c] * b[c];
        b[i] = sum / a[i][i];
    }
    return true;
}

// merge colliding points in place; returns true if anything merged
bool merge_close_points(Support& s)
{
    const std::size_t n = s.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(s.points[i] - s.points[j]) < kMergeGap) {
                s.probs[i] += s.probs[j];
                s.points.erase(s.points.begin() + j);
                s.probs.erase(s.probs.begin() + j);
                return true;
            }
        }
    }
    return false;
}

// SPD solve by Cholesky with a tiny ridge; sizes are <= max_support
bool spd_solve(std::vector<std::vector<double>> a, std::vector<std::vector<double>>& rhs_cols)
{
    const std::size_t n = a.size();
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        tr += a[i][i];
    const double ridge = 1e-13 * (tr / n + 1.0);
    for (std::size_t i = 0; i < n; ++i)
        a[i][i] += ridge;
    // in-place Cholesky
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (std::size_t k = 0; k < j; ++k)
                sum -= a[i][k] * a[j][k];
            if (i == j) {
                if (!(sum > 0.0))
                    return false;
                a[i][i] = std::sqrt(sum);
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    for (auto& b : rhs_cols) {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = b[i];
            for (std::size_t k = 0; k < i; ++k)
                sum -= a[i][k] * b[k];
            b[i] = sum / a[i][i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double sum = b[i];
            for (std::size_t k = i + 1; k < n; ++k)
                sum -= a[k][i] * b[k];
            b[i] = sum / a[i][i];
        }
    }
    return true;
}

// Exact solve of the concave probability subproblem at fixed positions:
// maximize h(mixture) - lambda sum p_i rho_i^2 over the simplex by
// active-set Newton with the Gram matrix Q_ij = int k_i k_j e^J / m dt.
void solve_probs(const Model& model, double lambda, Support& s, double quad_tol)
{
    const std::size_t n = s.points.size();
    if (n == 1) {
        s.probs[0] = 1.0;
        return;
    }
    QuadratureOptions opt;
    opt.abs_tol = quad_tol;
    opt.rel_tol = quad_tol;

    auto objective = [&](const Support& sup) {
        MixtureEval mix(model, sup, quad_tol);
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (sup.probs[i] > 0.0)
                f += sup.probs[i] *
                     (mix.h_tilde(sup.points[i]) - lambda * sup.points[i] * sup.points[i]);
        return f;
    };

    for (int newton = 0; newton < 60; ++newton) {
        MixtureEval mix(model, s, quad_tol);
        std::vector<double> g(n);
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = mix.h_tilde(s.points[i]) - lambda * s.points[i] * s.points[i];
            if (s.probs[i] > 0.0)
                f += s.probs[i] * g[i];
        }

        std::vector<std::size_t> act;
        for (std::size_t i = 0; i < n; ++i)
            if (s.probs[i] > 0.0)
                act.push_back(i);
        const std::size_t m = act.size();

        // Gram matrix on the active set, windows intersected per pair
        std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
        for (std::size_t a = 0; a < m; ++a) {
            const auto wa = model.window(s.points[act[a]]);
            for (std::size_t b = a; b < m; ++b) {
                const auto wb = model.window(s.points[act[b]]);
                const double lo = std::max({wa.first, wb.first, 0.0});
                const double hi = std::min(wa.second, wb.second);
                double v = 0.0;
                if (hi > lo) {
                    const double ra = s.points[act[a]], rb = s.points[act[b]];
                    v = integrate(
                        [&](double t) {
                            const double lm = mix.log_mix(t);
                            return std::exp(model.log_kernel(t, ra) + model.log_kernel(t, rb) +
                                            model.log_jacobian(t) - lm);
                        },
                        lo, hi, opt);
                }
                q[a][b] = v;
                q[b][a] = v;
            }
        }

        std::vector<std::vector<double>> cols(2, std::vector<double>(m));
        for (std::size_t a = 0; a < m; ++a) {
            cols[0][a] = g[act[a]];
            cols[1][a] = 1.0;
        }
        if (!spd_solve(q, cols))
            break;
        double num = 0.0, den = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            num += cols[0][a];
            den += cols[1][a];
        }
        const double mu = num / std::max(den, 1e-300);
        std::vector<double> delta(m);
        double gd = 0.0, step_max = std::numeric_limits<double>::infinity();
        double res = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            delta[a] = cols[0][a] - mu * cols[1][a];
            gd += g[act[a]] * delta[a];
            if (delta[a] < 0.0)
                step_max = std::min(step_max, -s.probs[act[a]] / delta[a]);
            res = std::max(res, std::abs(g[act[a]] - mu));
        }

        // entering test for zero-probability points
        bool entered = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (s.probs[i] == 0.0 && g[i] > mu + 1e-12) {
                s.probs[i] = 1e-12;
                entered = true;
            }
        }
        if (entered) {
            double total = std::accumulate(s.probs.begin(), s.probs.end(), 0.0);
            for (double& p : s.probs)
                p /= total;
            continue;
        }
        if (res <= 1e-12 * (1.0 + std::abs(mu)))
            return;

        double t = std::min(1.0, 0.9995 * step_max);
        Support trial = s;
        bool ok = false;
        for (int bt = 0; bt < 50; ++bt) {
            trial.probs = s.probs;
            for (std::size_t a = 0; a < m; ++a)
                trial.probs[act[a]] = std::max(0.0, s.probs[act[a]] + t * delta[a]);
            const double ft = objective(trial);
            if (ft >= f + 1e-4 * t * gd - 1e-14 * (1.0 + std::abs(f))) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok)
            return; // no improving step left at this scale
        s.probs = trial.probs;
        for (double& p : s.probs)
            if (p < 1e-15)
                p = 0.0;
        double total = std::accumulate(s.probs.begin(), s.probs.end(), 0.0);
        for (double& p : s.probs)
            p /= total;
    }
}

} // namespace

namespace {

// Reduced objective phi(rho) = max_p J(rho, p): probabilities are re-solved
// exactly for every position iterate, so the position block can be driven
// by BFGS on a small, smooth function (envelope gradient p_i dJ/drho_i).
struct ReducedEval {
    double objective;
    std::vector<double> grad;     // p_i (dh~_i - 2 lambda rho_i)
    std::vector<double> drho;     // dh~_i - 2 lambda rho_i
    std::vector<double> p_resid;  // simplex-projected probability residual
};

ReducedEval reduced_eval(const Model& model, double lambda, Support& s, double quad_tol)
{
    solve_probs(model, lambda, s, quad_tol);
    GradientEval ev = evaluate(model, s, lambda, quad_tol);
    const std::size_t n = s.points.size();
    ReducedEval out;
    out.objective = ev.objective;
    out.grad.resize(n);
    out.drho.resize(n);
    out.p_resid.resize(n);
    std::vector<double> pt = s.probs;
    for (std::size_t i = 0; i < n; ++i)
        pt[i] += ev.h_tilde[i] - lambda * s.points[i] * s.points[i];
    project_simplex(pt);
    for (std::size_t i = 0; i < n; ++i) {
        out.drho[i] = ev.dh_tilde[i] - 2.0 * lambda * s.points[i];
        out.grad[i] = s.probs[i] * out.drho[i];
        out.p_resid[i] = pt[i] - s.probs[i];
    }
    return out;
}

double joint_residual(const Support& s, const ReducedEval& ev, double peak)
{
    double res = 0.0;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const double rt = std::clamp(s.points[i] + ev.grad[i], 0.0, peak);
        res = std::max(res, std::abs(rt - s.points[i]));
        res = std::max(res, std::abs(ev.p_resid[i]));
    }
    return res;
}

} // namespace

Support optimize_support(const Model& model, double u_p, double lambda, Support s,
                         const SolveParams& prm)
{
    const double peak = std::sqrt(u_p);
    if (peak <= 0.0)
        return s;
    while (merge_close_points(s)) {
    }
    if (s.points.size() == 1 && s.points[0] >= peak - 1e-12 && lambda == 0.0) {
        // single boundary point with no multiplier: position fixed by the box
        s.points[0] = peak;
        s.probs[0] = 1.0;
        MixtureEval mix(model, s, prm.quad_tol);
        const auto ht = mix.h_tilde_full(peak);
        if (ht.deriv >= 0.0)
            return s; // ascent still pushes outward; boundary optimal
    }

    const int max_outer = std::max(prm.max_opt_iterations / 4, 100);
    double last_res = std::numeric_limits<double>::infinity();

    ReducedEval ev = reduced_eval(model, lambda, s, prm.quad_tol);
    std::size_t n = s.points.size();

    // inverse Hessian approximation for the position block
    std::vector<std::vector<double>> binv;
    auto reset_binv = [&](double scale) {
        binv.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            binv[i][i] = scale;
    };
    reset_binv(1.0);

    for (int outer = 0; outer < max_outer; ++outer) {
        n = s.points.size();
        last_res = joint_residual(s, ev, peak);
        if (last_res <= prm.pg_tol)
            return s;

        // frozen coordinates: at a box face with the gradient pointing out,
        // or carrying no probability
        std::vector<bool> frozen(n);
        for (std::size_t i = 0; i < n; ++i)
            frozen[i] = s.probs[i] <= 0.0 ||
                        (s.points[i] <= 0.0 && ev.grad[i] < 0.0) ||
                        (s.points[i] >= peak && ev.grad[i] > 0.0);

        std::vector<double> dir(n, 0.0);
        double gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (frozen[i])
                continue;
            double v = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (!frozen[j])
                    v += binv[i][j] * ev.grad[j];
            dir[i] = v;
            gd += ev.grad[i] * v;
        }
        if (!(gd > 0.0)) {
            // not an ascent direction (stale curvature); restart from scaled identity
            double gn = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (!frozen[i])
                    gn = std::max(gn, std::abs(ev.grad[i]));
            if (gn == 0.0)
                return s; // all positions pinned; probabilities already optimal
            reset_binv(0.1 / gn);
            for (std::size_t i = 0; i < n; ++i)
                dir[i] = frozen[i] ? 0.0 : binv[i][i] * ev.grad[i];
            gd = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                gd += ev.grad[i] * dir[i];
        }

        Support cand = s;
        ReducedEval evc;
        bool moved = false;
        double t = 1.0;
        bool merged = false;
        for (int bt = 0; bt < 30; ++bt) {
            cand.points = s.points;
            cand.probs = s.probs;
            for (std::size_t i = 0; i < n; ++i)
                cand.points[i] = std::clamp(s.points[i] + t * dir[i], 0.0, peak);
            merged = false;
            while (merge_close_points(cand))
                merged = true;
            evc = reduced_eval(model, lambda, cand, prm.quad_tol);
            if (merged ||
                evc.objective >= ev.objective + 1e-4 * t * gd - 1e-13 * (1.0 + std::abs(ev.objective))) {
                moved = true;
                break;
            }
            t *= 0.4;
        }
        if (!moved) {
            if (last_res <= 50.0 * prm.pg_tol)
                return s; // pinned by quadrature noise
            // shrink the curvature estimate and try again
            reset_binv(binv[0][0] * 0.1);
            continue;
        }

        if (merged || cand.points.size() != n) {
            s = std::move(cand);
            ev = reduced_eval(model, lambda, s, prm.quad_tol);
            n = s.points.size();
            reset_binv(1.0);
            continue;
        }

        // BFGS update on the inverse Hessian of -phi (so curvature pairs use
        // y = g_old - g_new, which has positive s^T y for concave phi)
        std::vector<double> step(n), y(n);
        double sy = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            step[i] = cand.points[i] - s.points[i];
            y[i] = ev.grad[i] - evc.grad[i];
            sy += step[i] * y[i];
            ss += step[i] * step[i];
        }
        if (sy > 1e-12 * std::sqrt(ss) * std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0))) {
            // binv <- (I - s y^T / sy) binv (I - y s^T / sy) + s s^T / sy
            std::vector<double> by(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    by[i] += binv[i][j] * y[j];
            const double yby = std::inner_product(y.begin(), y.end(), by.begin(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    binv[i][j] += ((sy + yby) * step[i] * step[j]) / (sy * sy) -
                                  (by[i] * step[j] + step[i] * by[j]) / sy;
        }
        s = std::move(cand);
        ev = std::move(evc);
    }

    if (last_res <= 100.0 * prm.pg_tol)
        return s;
    std::ostringstream msg;
    msg << "optimize_fixed_support did not converge: projected-gradient residual " << last_res
        << " after " << max_outer << " outer iterations, support size " << s.points.size();
    throw NumericError(msg.str());
}

// ---------------------------------------------------------------- KKT scan

ScanResult kkt_scan(const Model& model, const CachedDensity& cached, double u_p, double lambda,
                    double moment_ref, int grid_size, const SolveParams& prm)
{
    (void)prm;
    const double peak = std::sqrt(u_p);
    const Support& s = cached.support();

    std::vector<double> grid;
    const int g = std::max(grid_size, 2);
    grid.reserve(g + s.points.size() + 2);
    for (int i = 0; i < g; ++i)
        grid.push_back(peak * i / (g - 1));
    for (double p : s.points)
        grid.push_back(p);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               grid.end());

    const double h = cached.entropy();
    auto resid = [&](double rho) {
        double v = cached.h_tilde(rho) - h;
        if (lambda != 0.0)
            v -= lambda * (rho * rho - moment_ref);
        return v;
    };

    ScanResult out;
    out.entropy_h = h;
    out.report.lambda = lambda;
    out.report.grid = grid;
    out.report.residuals.resize(grid.size());
    out.worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = resid(grid[i]);
        out.report.residuals[i] = v;
        if (v > out.worst) {
            out.worst = v;
            out.arg_worst = grid[i];
        }
    }

    // refine interior local maxima by successive parabolic interpolation
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = out.report.residuals[i];
        const bool up = i == 0 || v >= out.report.residuals[i - 1];
        const bool dn = i + 1 == grid.size() || v >= out.report.residuals[i + 1];
        if (up && dn)
            peaks.push_back(i);
    }
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
        return out.report.residuals[a] > out.report.residuals[b];
    });
    if (peaks.size() > 4)
        peaks.resize(4);
    for (std::size_t idx : peaks) {
        if (idx == 0 || idx + 1 >= grid.size())
            continue;
        double xa = grid[idx - 1], xb = grid[idx], xc = grid[idx + 1];
        double fb = out.report.residuals[idx];
        for (int it = 0; it < 5; ++it) {
            const double fa = resid(xa), fc = resid(xc);
            const double num = (xb - xa) * (xb - xa) * (fb - fc) - (xb - xc) * (xb - xc) * (fb - fa);
            const double den = (xb - xa) * (fb - fc) - (xb - xc) * (fb - fa);
            if (std::abs(den) < 1e-300)
                break;
            double xs = xb - 0.5 * num / den;
            if (!(xs > xa) || !(xs < xc) || std::abs(xs - xb) < 1e-12)
                break;
            const double fs = resid(xs);
            if (fs > fb) {
                if (xs < xb)
                    xc = xb;
                else
                    xa = xb;
                xb = xs;
                fb = fs;
            } else {
                if (xs < xb)
                    xa = xs;
                else
                    xc = xs;
            }
        }
        out.report.grid.push_back(xb);
        out.report.residuals.push_back(fb);
        if (fb > out.worst) {
            out.worst = fb;
            out.arg_worst = xb;
        }
    }

    out.report.mass_point_residuals.resize(s.points.size());
    for (std::size_t i = 0; i < s.points.size(); ++i)
        out.report.mass_point_residuals[i] = std::abs(resid(s.points[i]));
    out.report.worst_violation = out.worst;
    return out;
}

// ------------------------------------------------------------- solve core

namespace {

void prune_support(Support& s)
{
    Support out;
    double total = 0.0;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (s.probs[i] > kPruneProb) {
            out.points.push_back(s.points[i]);
            out.probs.push_back(s.probs[i]);
            total += s.probs[i];
        }
    }
    if (out.points.empty()) {
        // all mass pruned is impossible for a simplex vector, keep the largest
        std::size_t top = std::distance(s.probs.begin(), std::max_element(s.probs.begin(), s.probs.end()));
        out.points.push_back(s.points[top]);
        out.probs.push_back(1.0);
        total = 1.0;
    }
    for (double& p : out.probs)
        p /= total;
    s = std::move(out);
}

void sort_support(Support& s)
{
    std::vector<std::size_t> order(s.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&s](std::size_t a, std::size_t b) { return s.points[a] < s.points[b]; });
    Support out;
    for (std::size_t k : order) {
        out.points.push_back(s.points[k]);
        out.probs.push_back(s.probs[k]);
    }
    s = std::move(out);
}

// optimize + KKT-driven point addition at a fixed multiplier
ScanResult grow_support(const Model& model, double u_p, double lambda, Support& s, double add_tol,
                        int grid_size, const SolveParams& prm, std::vector<TraceRow>* trace)
{
    for (int round = 0;; ++round) {
        s = optimize_support(model, u_p, lambda, std::move(s), prm);
        const std::size_t before = s.points.size();
        prune_support(s);
        if (s.points.size() != before)
            s = optimize_support(model, u_p, lambda, std::move(s), prm);

        CachedDensity cached(model, s, prm.quad_tol);
        ScanResult scan = kkt_scan(model, cached, u_p, lambda, s.second_moment(), grid_size, prm);
        if (trace && prm.keep_trace)
            trace->push_back(TraceRow{static_cast<int>(s.points.size()),
                                      scan.entropy_h + model.rate_offset(), scan.worst});
        if (scan.worst <= add_tol)
            return scan;
        if (static_cast<int>(s.points.size()) >= prm.max_support) {
            std::ostringstream msg;
            msg << "support growth cap reached (" << prm.max_support
                << " points) before certification: worst residual " << scan.worst
                << " nats at rho = " << scan.arg_worst << "; best-effort rate "
                << scan.entropy_h + model.rate_offset() << "; trace "
                << (trace ? format_trace(*trace) : std::string("[]"));
            throw NumericError(msg.str());
        }
        double min_gap = std::numeric_limits<double>::infinity();
        for (double p : s.points)
            min_gap = std::min(min_gap, std::abs(p - scan.arg_worst));
        if (min_gap < 1e-6)
            return scan; // residual peak sits on an existing point; nothing to add
        for (double& p : s.probs)
            p *= (1.0 - 1e-3);
        s.points.push_back(scan.arg_worst);
        s.probs.push_back(1e-3);
    }
}

std::vector<double> power_ladder(double target)
{
    std::vector<double> steps;
    double u = std::min(target, 0.5);
    steps.push_back(u);
    while (u < target) {
        u = std::min(target, u + std::min(0.5, u / 10.0));
        steps.push_back(u);
    }
    return steps;
}

} // namespace

CoreResult solve_core(const ModelFactory& make_model, double u_p, double u_a,
                      const SolveParams& prm)
{
    if (!(u_p >= 0.0) || !std::isfinite(u_p))
        throw ValidationError("solve: peak power must be finite and >= 0");
    if (!(u_a >= 0.0))
        throw ValidationError("solve: average power must be >= 0");

    CoreResult result;
    std::vector<TraceRow> trace;
    const bool relaxed = !(u_a < u_p);

    Support s;
    double lambda = 0.0;
    std::unique_ptr<Model> model = make_model(u_p);

    if (u_p == 0.0 || u_a == 0.0) {
        s.points = {0.0};
        s.probs = {1.0};
        if (u_a == 0.0 && u_p > 0.0) {
            // smallest multiplier certifying the zero-power optimum:
            // lambda >= sup (h~(rho) - h)/rho^2 over (0, sqrt(u_p)]
            CachedDensity cached(*model, s, prm.quad_tol);
            const double h = cached.entropy();
            const double peak = std::sqrt(u_p);
            for (int i = 1; i <= 256; ++i) {
                const double rho = peak * i / 256.0;
                lambda = std::max(lambda, (cached.h_tilde(rho) - h) / (rho * rho));
            }
            lambda = std::max(0.0, lambda) * (1.0 + 1e-6) + 1e-9;
        }
    } else if (relaxed) {
        const std::vector<double> ladder = power_ladder(u_p);
        s.points = {std::sqrt(ladder.front())};
        s.probs = {1.0};
        double prev_peak = std::sqrt(ladder.front());
        for (std::size_t k = 0; k < ladder.size(); ++k) {
            const double u = ladder[k];
            const bool final_step = (k + 1 == ladder.size());
            model = make_model(u);
            const double peak = std::sqrt(u);
            for (double& p : s.points)
                if (p >= prev_peak - 1e-9)
                    p = peak; // boundary point tracks the growing peak
            grow_support(*model, u, 0.0, s, final_step ? prm.add_tol_final : prm.add_tol_cont,
                         final_step ? prm.scan_grid_final : prm.scan_grid_cont, prm, &trace);
            prev_peak = peak;
        }
        lambda = 0.0;
    } else {
        // binding average constraint: continuation over u_a at fixed u_p
        const std::vector<double> ladder = power_ladder(u_a);
        const double q0 = ladder.front() / u_p;
        s.points = {0.0, std::sqrt(u_p)};
        s.probs = {1.0 - q0, q0};
        lambda = 0.5;

        auto moment_at = [&](double lam, double add_tol, int grid) {
            grow_support(*model, u_p, lam, s, add_tol, grid, prm, &trace);
            return s.second_moment();
        };

        for (std::size_t k = 0; k < ladder.size(); ++k) {
            const double a = ladder[k];
            const bool final_step = (k + 1 == ladder.size());
            if (!final_step) {
                // keep the multiplier consistent with the current budget
                double lam_prev = -1.0, g_prev = 0.0;
                for (int it = 0; it < 8; ++it) {
                    const double m2 = moment_at(lambda, prm.add_tol_cont, prm.scan_grid_cont);
                    const double g = m2 - a;
                    if (std::abs(g) <= std::max(1e-3 * a, 1e-5))
                        break;
                    if (lambda == 0.0 && g <= 0.0)
                        break;
                    double next;
                    if (lam_prev >= 0.0 && std::abs(g - g_prev) > 1e-14) {
                        next = lambda - g * (lambda - lam_prev) / (g - g_prev);
                    } else {
                        next = lambda * (g > 0.0 ? 1.6 : 0.6);
                    }
                    if (!(next >= 0.0) || !std::isfinite(next) || next > 50.0 * (lambda + 1.0))
                        next = lambda * (g > 0.0 ? 1.6 : 0.6);
                    lam_prev = lambda;
                    g_prev = g;
                    lambda = next;
                }
            } else {
                // outer bisection on lambda driving E[P^2] to u_a; we land on
                // the slack side so the result is feasible within moment_tol
                auto m_final = [&](double lam) {
                    return moment_at(lam, prm.add_tol_final, prm.scan_grid_cont);
                };
                double m_cur = m_final(lambda);
                if (m_cur > a || (lambda > 0.0 && a - m_cur > prm.moment_tol)) {
                    double lo, hi;
                    if (m_cur > a) {
                        lo = lambda;
                        hi = std::max(0.25, 2.0 * std::max(lambda, 1e-3));
                        int doublings = 0;
                        while (m_final(hi) > a) {
                            lo = hi;
                            hi *= 2.0;
                            if (++doublings > 60)
                                throw NumericError("lambda bracket expansion failed: average "
                                                   "constraint never slack; trace " +
                                                   format_trace(trace));
                        }
                    } else {
                        lo = 0.0;
                        hi = lambda;
                    }
                    // invariant: the state corresponds to hi and is feasible
                    Support s_hi = s;
                    double m_hi = s.second_moment();
                    bool done = a - m_hi <= prm.moment_tol;
                    for (int it = 0; it < 200 && !done; ++it) {
                        if (hi < 1e-11) {
                            // multiplier vanishes: the constraint is genuinely slack
                            hi = 0.0;
                            m_final(0.0);
                            s_hi = s;
                            done = true;
                            break;
                        }
                        const double mid = 0.5 * (lo + hi);
                        const double m2 = m_final(mid);
                        if (m2 > a) {
                            lo = mid;
                        } else {
                            hi = mid;
                            s_hi = s;
                            m_hi = m2;
                            if (a - m2 <= prm.moment_tol)
                                done = true;
                        }
                        if (hi - lo < 1e-15 * (1.0 + hi) && !done)
                            throw NumericError(
                                "lambda bisection stalled before meeting the moment tolerance; "
                                "trace " +
                                format_trace(trace));
                    }
                    if (!done)
                        throw NumericError(
                            "lambda bisection failed to meet the moment tolerance; trace " +
                            format_trace(trace));
                    s = std::move(s_hi);
                    lambda = hi;
                }
            }
        }
    }

    // final strict growth and certification at the target spec
    model = make_model(u_p);
    if (u_p > 0.0 && u_a > 0.0)
        grow_support(*model, u_p, lambda, s, prm.add_tol_final, prm.scan_grid_final, prm, &trace);
    sort_support(s);

    CachedDensity cached(*model, s, prm.quad_tol);
    const double moment_ref = std::isfinite(u_a) ? u_a : 0.0;
    ScanResult fin = kkt_scan(*model, cached, u_p, lambda, moment_ref, prm.kkt_grid_final, prm);

    double worst_mass = 0.0;
    for (double v : fin.report.mass_point_residuals)
        worst_mass = std::max(worst_mass, v);
    if (fin.worst > prm.cert_tol || worst_mass > prm.cert_tol) {
        std::ostringstream msg;
        msg << "certification failed: worst residual " << fin.worst << ", mass-point residual "
            << worst_mass << " (tolerance " << prm.cert_tol << "); best-effort rate "
            << fin.entropy_h + model->rate_offset() << "; trace " << format_trace(trace);
        throw NumericError(msg.str());
    }

    result.support = std::move(s);
    result.lambda = lambda;
    MixtureEval exact(*model, result.support, prm.quad_tol);
    result.entropy_h = exact.entropy();
    result.capacity = result.entropy_h + model->rate_offset();
    result.kkt = std::move(fin.report);
    result.trace = std::move(trace);
    return result;
}

} // namespace detail
} // namespace gausscap
