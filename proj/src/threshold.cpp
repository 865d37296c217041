#include "gausscap/threshold.hpp"
#include "gausscap/errors.hpp"

#include "engine.hpp"

#include <cmath>
#include <sstream>

namespace gausscap {

double peak_threshold_defect(int n, double u_p)
{
    if (n < 2)
        throw std::domain_error("peak_threshold: n must be >= 2");
    if (!(u_p > 0.0))
        throw std::domain_error("peak_threshold: u_p must be > 0");
    detail::RadialModel model(n, u_p);
    detail::Support s{{std::sqrt(u_p)}, {1.0}};
    detail::MixtureEval mix(model, s, 1e-11);
    return mix.h_tilde(0.0) - mix.entropy();
}

double peak_threshold(int n)
{
    if (n < 2)
        throw std::domain_error("peak_threshold: n must be >= 2");

    double lo = 1e-3;
    double hi = 20.0 * n;
    double g_lo = peak_threshold_defect(n, lo);
    double g_hi = peak_threshold_defect(n, hi);
    // g < 0 below the threshold (single sphere optimal), > 0 above it
    for (int tries = 0; g_lo > 0.0 && tries < 8; ++tries) {
        lo *= 0.25;
        g_lo = peak_threshold_defect(n, lo);
    }
    for (int tries = 0; g_hi < 0.0 && tries < 8; ++tries) {
        hi *= 2.0;
        g_hi = peak_threshold_defect(n, hi);
    }
    if (!(g_lo < 0.0) || !(g_hi > 0.0)) {
        std::ostringstream msg;
        msg << "peak_threshold: no sign change on [" << lo << ", " << hi << "] (g = " << g_lo
            << ", " << g_hi << ")";
        throw NumericError(msg.str());
    }

    while (hi - lo > 2e-4) {
        const double mid = 0.5 * (lo + hi);
        if (peak_threshold_defect(n, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace gausscap
