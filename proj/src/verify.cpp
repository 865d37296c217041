#include "gausscap/verify.hpp"
#include "gausscap/errors.hpp"

#include "engine.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <random>
#include <thread>
#include <vector>

namespace gausscap {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// mt19937_64 + Marsaglia polar transform: bit-reproducible across platforms,
// unlike std::normal_distribution
class NormalGen {
public:
    explicit NormalGen(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (have_) {
            have_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_ = true;
        return u * f;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_ = false;
};

std::size_t pick_component(const std::vector<double>& probs, double u)
{
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc)
            return i;
    }
    return probs.size() - 1;
}

constexpr int kChunks = 64;

} // namespace

McEntropy mc_entropy(const AmplitudeDistribution& dist, std::int64_t samples, std::uint64_t seed)
{
    if (samples < 10000)
        throw ValidationError("mc_entropy: needs at least 10^4 samples");
    if (dist.spec.n < 2)
        throw ValidationError("mc_entropy: distribution must live on a channel with n >= 2");

    const int n = dist.spec.n;
    detail::RadialModel model(n, dist.spec.u_p);
    const detail::Support support{dist.points, dist.probs};
    detail::MixtureEval mix(model, support, 1e-11);

    struct ChunkAcc {
        double sum = 0.0;
        double sumsq = 0.0;
        std::int64_t count = 0;
    };
    std::vector<ChunkAcc> acc(kChunks);

    auto run_chunk = [&](int c) {
        const std::int64_t lo = samples * c / kChunks;
        const std::int64_t hi = samples * (c + 1) / kChunks;
        NormalGen gen(splitmix64(seed ^ (0x517cc1b727220a95ull * (c + 1))));
        ChunkAcc a;
        std::vector<double> y(n);
        for (std::int64_t k = lo; k < hi; ++k) {
            const std::size_t idx = pick_component(dist.probs, gen.uniform());
            const double rho = dist.points[idx];
            // direction from a normalized Gaussian, then add the noise
            double norm2 = 0.0;
            for (int j = 0; j < n; ++j) {
                y[j] = gen.normal();
                norm2 += y[j] * y[j];
            }
            const double scale = rho / std::sqrt(std::max(norm2, 1e-300));
            double r2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double yj = y[j] * scale + gen.normal();
                r2 += yj * yj;
            }
            const double val = -mix.log_mix(std::sqrt(r2));
            a.sum += val;
            a.sumsq += val * val;
            ++a.count;
        }
        return a;
    };

    const unsigned workers =
        std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    std::vector<std::future<void>> futs;
    std::atomic_int next{0};
    for (unsigned w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&]() {
            for (int c = next.fetch_add(1); c < kChunks; c = next.fetch_add(1))
                acc[c] = run_chunk(c);
        }));
    }
    for (auto& f : futs)
        f.get();

    double sum = 0.0, sumsq = 0.0;
    std::int64_t count = 0;
    for (const ChunkAcc& a : acc) { // merged in chunk order
        sum += a.sum;
        sumsq += a.sumsq;
        count += a.count;
    }
    const double mean = sum / count;
    const double var = std::max(0.0, (sumsq - sum * mean) / (count - 1));
    McEntropy out;
    out.estimate = mean;
    out.stderr_ = std::sqrt(var / count);
    out.samples = count;
    out.seed = seed;
    out.generator = "mt19937_64+polar";
    return out;
}

std::vector<std::vector<double>> sample_input_vectors(const AmplitudeDistribution& dist, int n,
                                                      std::int64_t count, std::uint64_t seed)
{
    if (count < 1)
        throw ValidationError("sample_input_vectors: count must be >= 1");
    if (n != dist.spec.n)
        throw ValidationError("sample_input_vectors: n does not match the distribution");
    if (n < 2)
        throw ValidationError("sample_input_vectors: needs n >= 2");

    NormalGen gen(splitmix64(seed));
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
        const std::size_t idx = pick_component(dist.probs, gen.uniform());
        const double rho = dist.points[idx];
        std::vector<double> x(n);
        double norm2 = 0.0;
        for (int j = 0; j < n; ++j) {
            x[j] = gen.normal();
            norm2 += x[j] * x[j];
        }
        const double scale = rho / std::sqrt(std::max(norm2, 1e-300));
        for (int j = 0; j < n; ++j)
            x[j] *= scale;
        out.push_back(std::move(x));
    }
    return out;
}

} // namespace gausscap
