#include "gausscap/bounds.hpp"
#include "gausscap/dist.hpp"
#include "gausscap/entropy.hpp"
#include "gausscap/errors.hpp"
#include "gausscap/quadrature.hpp"
#include "gausscap/scalar.hpp"
#include "gausscap/solver.hpp"
#include "gausscap/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gausscap {

namespace {

constexpr double kLnPi = 1.1447298858494001741;
constexpr double kLn2PiE = 2.8378770664093454836;

// int_0^T tau^k e^{-lambda tau} d tau via tau = w^2 (smooth integrand for
// half-integer k, which is what dimensions produce)
double truncated_moment(double k, double lambda, double T)
{
    QuadratureOptions opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-13;
    const double whi = std::sqrt(T);
    return integrate(
        [k, lambda](double w) {
            return 2.0 * std::pow(w, 2.0 * k + 1.0) * std::exp(-lambda * w * w);
        },
        0.0, whi, opt);
}

double identity_capacity(int n, double u_p, double u_a)
{
    if (n >= 2)
        return solve_capacity(ChannelSpec(n, u_p, u_a)).capacity;
    return scalar_capacity(u_p, u_a).capacity;
}

} // namespace

MimoSpec::MimoSpec(std::vector<double> singular_values_, double u_p_, double u_a_)
    : singular_values(std::move(singular_values_)), u_p(u_p_), u_a(u_a_)
{
    if (singular_values.empty())
        throw ValidationError("MimoSpec: needs at least one singular value");
    for (double s : singular_values)
        if (!(s > 0.0) || !std::isfinite(s))
            throw ValidationError("MimoSpec: singular values must be finite and > 0");
    if (!(u_p >= 0.0) || !(u_a >= 0.0))
        throw ValidationError("MimoSpec: power bounds must be >= 0");
    if (std::isinf(u_p) && std::isinf(u_a))
        throw ValidationError("MimoSpec: at least one of u_p, u_a must be finite");
    std::sort(singular_values.begin(), singular_values.end());
}

MimoSpec mimo_spec_from_matrix(const std::vector<std::vector<double>>& matrix, double u_p,
                               double u_a, int* dropped)
{
    if (matrix.empty() || matrix.front().empty())
        throw ValidationError("channel matrix must be non-empty");
    const std::size_t rows = matrix.size();
    const std::size_t cols = matrix.front().size();
    for (const auto& row : matrix)
        if (row.size() != cols)
            throw ValidationError("channel matrix rows must have equal length");

    // eigenvalues of H^T H by cyclic Jacobi; singular values are their roots
    std::vector<std::vector<double>> a(cols, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < rows; ++k)
                s += matrix[k][i] * matrix[k][j];
            a[i][j] = s;
        }
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < cols; ++p)
            for (std::size_t q = p + 1; q < cols; ++q)
                off += a[p][q] * a[p][q];
        if (off < 1e-26)
            break;
        for (std::size_t p = 0; p < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                if (std::abs(a[p][q]) < 1e-300)
                    continue;
                const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t k = 0; k < cols; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < cols; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> sv;
    double top = 0.0;
    for (std::size_t i = 0; i < cols; ++i)
        top = std::max(top, std::max(a[i][i], 0.0));
    top = std::sqrt(top);
    int drop = 0;
    for (std::size_t i = 0; i < cols; ++i) {
        const double s = std::sqrt(std::max(a[i][i], 0.0));
        if (s > 1e-12 * std::max(top, 1.0))
            sv.push_back(s);
        else
            ++drop;
    }
    if (dropped)
        *dropped = drop;
    if (sv.empty())
        throw ValidationError("channel matrix has rank zero");
    return MimoSpec(std::move(sv), u_p, u_a);
}

double gaussian_upper(const ChannelSpec& spec)
{
    const double p = std::min(spec.u_p, spec.u_a);
    return 0.5 * spec.n * std::log1p(p / spec.n);
}

double constant_amplitude_rate(int n, double u_p)
{
    if (n < 2)
        throw std::domain_error("constant_amplitude_rate: n must be >= 2");
    if (!(u_p >= 0.0) || !std::isfinite(u_p))
        throw std::domain_error("constant_amplitude_rate: u_p must be finite and >= 0");
    const ChannelSpec spec(n, u_p, std::numeric_limits<double>::infinity());
    return rate(seed_peak_only(spec));
}

double epi_constant_amplitude_lower(int n, double u_p)
{
    if (n < 2)
        throw std::domain_error("epi_constant_amplitude_lower: n must be >= 2");
    if (!(u_p >= 0.0))
        throw std::domain_error("epi_constant_amplitude_lower: u_p must be >= 0");
    if (u_p == 0.0)
        return 0.0;
    const double m = n - 1.0;
    // 2^{2/(n-1)-1} u_p / (e [(n-1) Gamma((n-1)/2)]^{2/(n-1)})
    const double log_denom = 1.0 + (2.0 / m) * (std::log(m) + log_gamma(0.5 * m));
    const double log_num = (2.0 / m - 1.0) * std::log(2.0) + std::log(u_p);
    return 0.5 * m * std::log1p(std::exp(log_num - log_denom));
}

double miso_capacity(double channel_norm, double u_p, double u_a)
{
    if (!(channel_norm >= 0.0))
        throw ValidationError("miso_capacity: channel norm must be >= 0");
    if (channel_norm == 0.0)
        return 0.0;
    const double g = channel_norm * channel_norm;
    return scalar_capacity(u_p * g, u_a * g).capacity;
}

EpiParams solve_epi_params(int n, double u_p, double u_a)
{
    if (n < 1)
        throw std::domain_error("solve_epi_params: n must be >= 1");
    if (!(u_p > 0.0) || !std::isfinite(u_p))
        throw std::domain_error("solve_epi_params: u_p must be finite and > 0");
    if (!(u_a >= 0.0))
        throw std::domain_error("solve_epi_params: u_a must be >= 0");

    const double n_pow = std::pow(static_cast<double>(n), 2.0 / n); // n^{2/n}
    const double T = u_p / n_pow; // upper limit after tau = t^{2/n}
    EpiParams out{};

    if (u_a >= n * u_p / (n + 2.0)) {
        out.lambda = 0.0;
        out.log_a = std::log(static_cast<double>(n)) - 0.5 * n * std::log(u_p);
        out.a = std::exp(out.log_a);
    } else {
        const double target = u_a / n_pow;
        auto moment = [&](double lambda) {
            return truncated_moment(0.5 * n, lambda, T) /
                   truncated_moment(0.5 * n - 1.0, lambda, T);
        };
        double hi = 1.0 / std::max(target, 1e-300);
        int doublings = 0;
        while (moment(hi) > target) {
            hi *= 2.0;
            if (++doublings > 200)
                throw NumericError("solve_epi_params: moment bracket expansion failed");
        }
        double lo = 0.0;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (moment(mid) > target)
                lo = mid;
            else
                hi = mid;
        }
        out.lambda = 0.5 * (lo + hi);
        const double denom = 0.5 * n * truncated_moment(0.5 * n - 1.0, out.lambda, T);
        out.log_a = -std::log(denom);
        out.a = std::exp(out.log_a);
    }

    // h(X) = lambda u_a / n^{2/n} + ln(2 pi^{n/2} / (a Gamma(n/2)))
    const double carried = out.lambda > 0.0 ? out.lambda * u_a / n_pow : 0.0;
    out.h_input = carried + std::log(2.0) + 0.5 * n * kLnPi - out.log_a - log_gamma(0.5 * n);
    return out;
}

BoundSet mimo_bounds(const MimoSpec& spec)
{
    const int n = spec.rank();
    const auto& sv = spec.singular_values;

    BoundSet b{};

    // water-filling over noise levels 1/lambda_i^2 with budget min(u_p, u_a)
    {
        const double budget = std::min(spec.u_p, spec.u_a);
        std::vector<double> noise(sv.size());
        for (std::size_t i = 0; i < sv.size(); ++i)
            noise[i] = 1.0 / (sv[i] * sv[i]);
        std::sort(noise.begin(), noise.end());
        double level = 0.0;
        for (std::size_t k = 1; k <= noise.size(); ++k) {
            const double partial = std::accumulate(noise.begin(), noise.begin() + k, 0.0);
            const double mu = (budget + partial) / k;
            if (k == noise.size() || mu <= noise[k]) {
                level = mu;
                break;
            }
        }
        double c = 0.0;
        for (double nv : noise)
            if (level > nv)
                c += 0.5 * std::log(level / nv);
        b.gaussian_upper = c;
    }

    double cubic_lo = 0.0, cubic_hi = 0.0, mod_cubic = 0.0;
    const double sum_sq = std::accumulate(sv.begin(), sv.end(), 0.0,
                                          [](double acc, double s) { return acc + s * s; });
    for (double s : sv) {
        const double g = s * s;
        cubic_lo += scalar_capacity(g * spec.u_p / n, g * spec.u_a / n).capacity;
        cubic_hi += scalar_capacity(g * spec.u_p, g * spec.u_a).capacity;
        const double v = g / sum_sq;
        mod_cubic += scalar_capacity(g * v * spec.u_p, g * v * spec.u_a).capacity;
    }
    b.cubic_lower = cubic_lo;
    b.cubic_upper = cubic_hi;
    b.modified_cubic_lower = mod_cubic;

    const double g_min = sv.front() * sv.front();
    const double g_max = sv.back() * sv.back();
    b.elliptical_lower = identity_capacity(n, g_min * spec.u_p, g_min * spec.u_a);
    b.elliptical_upper =
        (g_max == g_min) ? b.elliptical_lower
                         : identity_capacity(n, g_max * spec.u_p, g_max * spec.u_a);

    // EPI bound: (n/2) ln(e^{2 h(X)/n} + 2 pi e |Sigma|^{1/n}) - (1/2) ln((2 pi e)^n |Sigma|)
    {
        const EpiParams ep = solve_epi_params(n, spec.u_p, spec.u_a);
        double log_det_sigma = 0.0;
        for (double s : sv)
            log_det_sigma += -2.0 * std::log(s);
        const double noise_term = std::exp(kLn2PiE + log_det_sigma / n);
        b.epi_lower = 0.5 * n * std::log(std::exp(2.0 * ep.h_input / n) + noise_term) -
                      0.5 * (n * kLn2PiE + log_det_sigma);
    }

    return b;
}

} // namespace gausscap
