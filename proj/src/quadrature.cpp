#include "gausscap/quadrature.hpp"
#include "gausscap/errors.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace gausscap {

namespace {

constexpr int kNodes = 64;

struct GaussRule {
    std::array<double, kNodes> x; // nodes on (-1, 1)
    std::array<double, kNodes> w;
};

// Nodes as the roots of P_64 by Newton iteration from the Chebyshev guess.
GaussRule build_rule()
{
    GaussRule r{};
    const int n = kNodes;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        long double z = std::cos(M_PI * (i + 0.75L) / (n + 0.5L));
        long double pp = 0.0L;
        for (int it = 0; it < 100; ++it) {
            long double p0 = 1.0L, p1 = 0.0L;
            for (int j = 0; j < n; ++j) {
                const long double p2 = p1;
                p1 = p0;
                p0 = ((2.0L * j + 1.0L) * z * p1 - j * p2) / (j + 1.0L);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0L);
            const long double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-19L)
                break;
        }
        const long double wt = 2.0L / ((1.0L - z * z) * pp * pp);
        r.x[i] = static_cast<double>(-z);
        r.x[n - 1 - i] = static_cast<double>(z);
        r.w[i] = static_cast<double>(wt);
        r.w[n - 1 - i] = static_cast<double>(wt);
    }
    return r;
}

const GaussRule& rule()
{
    static const GaussRule r = build_rule();
    return r;
}

double gl_panel(const std::function<double(double)>& f, double a, double b)
{
    const GaussRule& r = rule();
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < kNodes; ++i)
        s += r.w[i] * f(c + h * r.x[i]);
    return s * h;
}

struct AdaptiveState {
    const std::function<double(double)>* f;
    double tol_per_length; // tolerance budget per unit length
    int max_depth;
};

double refine(const AdaptiveState& st, double a, double b, double coarse, int depth)
{
    const double m = 0.5 * (a + b);
    const double left = gl_panel(*st.f, a, m);
    const double right = gl_panel(*st.f, m, b);
    const double fine = left + right;
    const double err = std::abs(fine - coarse);
    if (err <= st.tol_per_length * (b - a) || err <= 1e-16 * std::abs(fine))
        return fine;
    if (depth >= st.max_depth) {
        std::ostringstream msg;
        msg << "quadrature did not converge on [" << a << ", " << b
            << "]: last two estimates " << coarse << " and " << fine;
        throw NumericError(msg.str());
    }
    return refine(st, a, m, left, depth + 1) + refine(st, m, b, right, depth + 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opt)
{
    if (!(b > a))
        return 0.0;
    const double coarse = gl_panel(f, a, b);
    const double scale = std::max(std::abs(coarse), 1e-300);
    const double tol = std::max(opt.abs_tol, opt.rel_tol * scale);
    AdaptiveState st{&f, tol / (b - a), opt.max_depth};
    return refine(st, a, b, coarse, 0);
}

namespace {

constexpr int kMaxMulti = 8;

struct MultiState {
    int m;
    const std::function<void(double, double*)>* f;
    double tol_per_length[kMaxMulti];
    int max_depth;
};

void gl_panel_multi(const MultiState& st, double a, double b, double* acc)
{
    const GaussRule& r = rule();
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double vals[kMaxMulti];
    for (int j = 0; j < st.m; ++j)
        acc[j] = 0.0;
    for (int i = 0; i < kNodes; ++i) {
        (*st.f)(c + h * r.x[i], vals);
        for (int j = 0; j < st.m; ++j)
            acc[j] += r.w[i] * vals[j];
    }
    for (int j = 0; j < st.m; ++j)
        acc[j] *= h;
}

void refine_multi(const MultiState& st, double a, double b, const double* coarse, int depth,
                  double* out)
{
    const double mid = 0.5 * (a + b);
    double left[kMaxMulti], right[kMaxMulti];
    gl_panel_multi(st, a, mid, left);
    gl_panel_multi(st, mid, b, right);
    bool ok = true;
    for (int j = 0; j < st.m && ok; ++j) {
        const double fine = left[j] + right[j];
        const double err = std::abs(fine - coarse[j]);
        if (err > st.tol_per_length[j] * (b - a) && err > 1e-16 * std::abs(fine))
            ok = false;
    }
    if (ok) {
        for (int j = 0; j < st.m; ++j)
            out[j] += left[j] + right[j];
        return;
    }
    if (depth >= st.max_depth) {
        std::ostringstream msg;
        msg << "quadrature (multi) did not converge on [" << a << ", " << b << "]";
        throw NumericError(msg.str());
    }
    refine_multi(st, a, mid, left, depth + 1, out);
    refine_multi(st, mid, b, right, depth + 1, out);
}

} // namespace

void integrate_multi(int m, const std::function<void(double, double*)>& f, double a, double b,
                     double* out, const QuadratureOptions& opt)
{
    if (m < 1 || m > kMaxMulti)
        throw NumericError("integrate_multi: component count out of range");
    for (int j = 0; j < m; ++j)
        out[j] = 0.0;
    if (!(b > a))
        return;
    MultiState st{m, &f, {}, opt.max_depth};
    double coarse[kMaxMulti];
    gl_panel_multi(st, a, b, coarse);
    for (int j = 0; j < m; ++j) {
        const double scale = std::max(std::abs(coarse[j]), 1e-300);
        st.tol_per_length[j] = std::max(opt.abs_tol, opt.rel_tol * scale) / (b - a);
    }
    refine_multi(st, a, b, coarse, 0, out);
}

} // namespace gausscap
