#include "gausscap/dist.hpp"
#include "gausscap/errors.hpp"
#include "gausscap/specfun.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace gausscap {

namespace {

constexpr double kMergeTol = 1e-9; // amplitude merge tolerance for near-duplicates
constexpr double kProbSumTol = 1e-12;
constexpr double kMomentSlack = 1e-9;

} // namespace

double AmplitudeDistribution::second_moment() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        m += probs[i] * points[i] * points[i];
    return m;
}

std::uint64_t AmplitudeDistribution::content_hash() const
{
    // FNV-1a over the raw doubles; collisions only cost a cache rebuild
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double d) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<double>(spec.n));
    mix(spec.u_p);
    mix(spec.u_a);
    for (double p : points)
        mix(p);
    for (double p : probs)
        mix(p);
    return h;
}

AmplitudeDistribution make_distribution(std::vector<double> points, std::vector<double> probs,
                                        const ChannelSpec& spec)
{
    if (points.empty() || points.size() != probs.size())
        throw ValidationError("distribution: points and probs must have equal length >= 1");

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&points](std::size_t a, std::size_t b) { return points[a] < points[b]; });

    const double peak = spec.peak_amplitude();
    std::vector<double> xs, ps;
    xs.reserve(points.size());
    ps.reserve(points.size());
    for (std::size_t k : order) {
        const double x = points[k];
        const double p = probs[k];
        if (!std::isfinite(x) || x < 0.0)
            throw ValidationError("distribution: amplitudes must be finite and >= 0");
        if (!std::isfinite(p) || p < 0.0)
            throw ValidationError("distribution: probabilities must be finite and >= 0");
        if (x > peak * (1.0 + 1e-12) + 1e-300)
            throw ValidationError("distribution: amplitude exceeds the peak bound sqrt(u_p)");
        if (!xs.empty() && x - xs.back() <= kMergeTol) {
            ps.back() += p; // merge coincident points
        } else {
            xs.push_back(std::min(x, peak));
            ps.push_back(p);
        }
    }

    double total = std::accumulate(ps.begin(), ps.end(), 0.0);
    if (std::abs(total - 1.0) > kProbSumTol)
        throw ValidationError("distribution: probabilities must sum to 1 within 1e-12");

    // drop zero-probability points left over from merges/pruning
    std::vector<double> fx, fp;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ps[i] > 0.0) {
            fx.push_back(xs[i]);
            fp.push_back(ps[i] / total);
        }
    }
    if (fx.empty())
        throw ValidationError("distribution: at least one point needs positive probability");

    AmplitudeDistribution dist;
    dist.points = std::move(fx);
    dist.probs = std::move(fp);
    dist.spec = spec;

    if (std::isfinite(spec.u_a) && dist.second_moment() > spec.u_a + kMomentSlack)
        throw ValidationError("distribution: second moment exceeds the average power bound u_a");
    return dist;
}

AmplitudeDistribution seed_peak_only(const ChannelSpec& spec)
{
    if (!std::isfinite(spec.u_p))
        throw ValidationError("seed_peak_only: requires finite peak power");
    if (spec.u_a < spec.u_p)
        throw ValidationError("seed_peak_only: requires u_a >= u_p (use seed_avg_limited)");
    return make_distribution({spec.peak_amplitude()}, {1.0}, spec);
}

AmplitudeDistribution seed_avg_limited(const ChannelSpec& spec)
{
    if (!(spec.u_a > 0.0) || !(spec.u_a < spec.u_p) || !std::isfinite(spec.u_p))
        throw ValidationError("seed_avg_limited: requires 0 < u_a < u_p < inf");
    const double q = spec.u_a / spec.u_p;
    return make_distribution({0.0, spec.peak_amplitude()}, {1.0 - q, q}, spec);
}

RadialDensity rayleigh_reference(int n, double u_a)
{
    if (n < 2)
        throw std::domain_error("rayleigh_reference: dimension must be >= 2");
    if (!(u_a > 0.0) || !std::isfinite(u_a))
        throw std::domain_error("rayleigh_reference: u_a must be finite and positive");
    const double log_norm = 0.5 * n * std::log(static_cast<double>(n)) -
                            0.5 * (n - 2) * std::log(2.0) - 0.5 * n * std::log(u_a) -
                            log_gamma(0.5 * n);
    const double rate = 0.5 * n / u_a;
    RadialDensity d;
    d.pdf = [n, log_norm, rate](double rho) {
        if (rho <= 0.0)
            return 0.0;
        return std::exp(log_norm + (n - 1) * std::log(rho) - rate * rho * rho);
    };
    d.support_hi = std::sqrt(u_a) + 10.0 * std::sqrt(u_a / n) + 5.0;
    std::ostringstream tag;
    tag << "generalized-rayleigh(n=" << n << ", u_a=" << u_a << ")";
    d.tag = tag.str();
    return d;
}

double max_entropy_value(double m, double A)
{
    if (!(m > 0.0) || !(A > 0.0))
        throw std::domain_error("max_entropy_value: m and A must be positive");
    const double g_ratio = std::exp(log_gamma((m + 1.0) / m) - log_gamma(1.0 / m));
    const double scale = std::pow(g_ratio / A, 1.0 / m); // (Gamma((m+1)/m)/(Gamma(1/m) A))^{1/m}
    return g_ratio - std::log(m * scale / std::tgamma(1.0 / m));
}

std::function<double(double)> max_entropy_density(double m, double A)
{
    if (!(m > 0.0) || !(A > 0.0))
        throw std::domain_error("max_entropy_density: m and A must be positive");
    const double g_ratio = std::exp(log_gamma((m + 1.0) / m) - log_gamma(1.0 / m));
    const double lambda = g_ratio / A;
    const double norm = m * std::pow(lambda, 1.0 / m) / std::tgamma(1.0 / m);
    return [m, lambda, norm](double x) {
        if (x < 0.0)
            return 0.0;
        return norm * std::exp(-lambda * std::pow(x, m));
    };
}

std::string to_json(const AmplitudeDistribution& dist, int indent)
{
    nlohmann::json j;
    j["points"] = dist.points;
    j["probs"] = dist.probs;
    j["n"] = dist.spec.n;
    j["u_p"] = dist.spec.u_p;
    if (std::isfinite(dist.spec.u_a))
        j["u_a"] = dist.spec.u_a;
    else
        j["u_a"] = nullptr;
    return j.dump(indent);
}

AmplitudeDistribution distribution_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("distribution JSON parse error: ") + e.what());
    }
    if (!j.contains("points") || !j.contains("probs") || !j.contains("n") || !j.contains("u_p"))
        throw ValidationError("distribution JSON needs points, probs, n and u_p");
    double u_a = std::numeric_limits<double>::infinity();
    if (j.contains("u_a") && !j["u_a"].is_null()) {
        if (j["u_a"].is_string()) {
            if (j["u_a"] != "inf")
                throw ValidationError("distribution JSON: u_a string must be \"inf\"");
        } else {
            u_a = j["u_a"].get<double>();
        }
    }
    const ChannelSpec spec(j["n"].get<int>(), j["u_p"].get<double>(), u_a);
    return make_distribution(j["points"].get<std::vector<double>>(),
                             j["probs"].get<std::vector<double>>(), spec);
}

} // namespace gausscap
