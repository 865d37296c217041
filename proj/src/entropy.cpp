#include "gausscap/entropy.hpp"
#include "gausscap/errors.hpp"
#include "gausscap/quadrature.hpp"

#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace gausscap {

namespace {

constexpr double kQuadTol = 1e-11;

detail::Support support_of(const AmplitudeDistribution& dist)
{
    return detail::Support{dist.points, dist.probs};
}

// Build-once/read-many cache of spline-backed densities keyed by the
// distribution content hash. The marginal entropy density is queried at
// hundreds of rho values against one fixed f_V, so the spline pays for
// itself immediately.
class DensityCache {
public:
    struct Entry {
        std::unique_ptr<detail::RadialModel> model;
        std::unique_ptr<detail::CachedDensity> density;
    };

    std::shared_ptr<const Entry> get(const AmplitudeDistribution& dist)
    {
        const std::uint64_t key = dist.content_hash();
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = map_.find(key);
        if (it != map_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            return it->second.first;
        }
        auto entry = std::make_shared<Entry>();
        entry->model = std::make_unique<detail::RadialModel>(dist.spec.n, dist.spec.u_p);
        entry->density =
            std::make_unique<detail::CachedDensity>(*entry->model, support_of(dist), kQuadTol);
        lru_.push_front(key);
        map_[key] = {entry, lru_.begin()};
        if (map_.size() > 24) {
            map_.erase(lru_.back());
            lru_.pop_back();
        }
        return entry;
    }

private:
    std::mutex mutex_;
    std::unordered_map<std::uint64_t,
                       std::pair<std::shared_ptr<const Entry>, std::list<std::uint64_t>::iterator>>
        map_;
    std::list<std::uint64_t> lru_;
};

DensityCache& cache()
{
    static DensityCache c;
    return c;
}

void require_vector_dims(const AmplitudeDistribution& dist)
{
    if (dist.spec.n < 2)
        throw std::domain_error("entropy: distribution must live on a channel with n >= 2");
}

} // namespace

double output_density_log(const AmplitudeDistribution& dist, double v)
{
    require_vector_dims(dist);
    if (!(v >= 0.0))
        throw std::domain_error("output_density_log: v must be >= 0");
    const int n = dist.spec.n;
    const double r =
        v == 0.0 ? 0.0 : std::exp((std::log(v) + std::log(static_cast<double>(n))) / n);
    return output_density_log_radial(dist, r);
}

double output_density_log_radial(const AmplitudeDistribution& dist, double r)
{
    require_vector_dims(dist);
    detail::RadialModel model(dist.spec.n, dist.spec.u_p);
    const detail::Support s = support_of(dist);
    return detail::MixtureEval(model, s, kQuadTol).log_mix(r);
}

double output_entropy(const AmplitudeDistribution& dist)
{
    require_vector_dims(dist);
    detail::RadialModel model(dist.spec.n, dist.spec.u_p);
    const detail::Support s = support_of(dist);
    return detail::MixtureEval(model, s, kQuadTol).entropy();
}

double marginal_entropy_density(const AmplitudeDistribution& dist, double rho)
{
    require_vector_dims(dist);
    if (!(rho >= 0.0))
        throw std::domain_error("marginal_entropy_density: rho must be >= 0");
    auto entry = cache().get(dist);
    return entry->density->h_tilde(rho);
}

double rate(const AmplitudeDistribution& dist)
{
    detail::RadialModel model(dist.spec.n, dist.spec.u_p);
    const detail::Support s = support_of(dist);
    return detail::MixtureEval(model, s, kQuadTol).entropy() + model.rate_offset();
}

KktReport kkt_report(const AmplitudeDistribution& dist, double lambda, const ChannelSpec& spec,
                     int grid_size)
{
    require_vector_dims(dist);
    if (grid_size < 64)
        throw ValidationError("kkt_report: grid_size must be >= 64");
    if (spec.n != dist.spec.n)
        throw ValidationError("kkt_report: spec dimension does not match the distribution");
    if (!(lambda >= 0.0))
        throw ValidationError("kkt_report: lambda must be >= 0");
    auto entry = cache().get(dist);
    detail::SolveParams prm;
    const double moment_ref = std::isfinite(spec.u_a) ? spec.u_a : 0.0;
    detail::ScanResult scan = detail::kkt_scan(*entry->model, *entry->density, spec.u_p, lambda,
                                               moment_ref, grid_size, prm);
    return scan.report;
}

double continuous_output_entropy(const RadialDensity& density, int n)
{
    if (n < 2)
        throw std::domain_error("continuous_output_entropy: n must be >= 2");
    const double rho_hi = density.support_hi;
    detail::RadialModel model(n, rho_hi * rho_hi);

    // ln f_V(v(r)) = ln int K(r | rho) f_P(rho) drho, one radial quadrature
    // per spline node
    QuadratureOptions opt;
    opt.abs_tol = 1e-12;
    opt.rel_tol = 1e-10;
    auto log_fv = [&](double r) {
        // integrate in linear space against the dominant kernel scale
        const double peak_log = model.log_kernel(r, std::min(rho_hi, r));
        const double val = integrate(
            [&](double rho) {
                const double f = density.pdf(rho);
                return f <= 0.0 ? 0.0 : f * std::exp(model.log_kernel(r, rho) - peak_log);
            },
            0.0, rho_hi, opt);
        return peak_log + std::log(std::max(val, 1e-300));
    };

    const double t_hi = model.t_max();
    const double c = log_fv(std::sqrt(static_cast<double>(n)) + 1.0);
    double out[2];
    QuadratureOptions outer;
    outer.abs_tol = 1e-9;
    outer.rel_tol = 1e-9;
    integrate_multi(
        2,
        [&](double r, double* v) {
            const double g = log_fv(r);
            const double w = std::exp(g + model.log_jacobian(r));
            v[0] = w;
            v[1] = w * (g - c);
        },
        0.0, t_hi, out, outer);
    return -(out[1] + c * out[0]);
}

double continuous_rate(const RadialDensity& density, int n)
{
    return continuous_output_entropy(density, n) + rate_constants(n).additive_constant;
}

} // namespace gausscap
