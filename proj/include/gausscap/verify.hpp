#pragma once

#include "gausscap/dist.hpp"

#include <cstdint>
#include <vector>

namespace gausscap {

// Monte-Carlo plug-in estimate of the output entropy h(V): sample the input
// amplitude from dist, a direction uniform on the hypersphere, add the
// Gaussian noise and average -ln f_V with the analytic mixture density.
// Deterministic for a fixed seed (chunked mt19937_64 + polar Box-Muller,
// independent of thread count).
struct McEntropy {
    double estimate; // nats
    double stderr_;  // standard error of the mean
    std::int64_t samples;
    std::uint64_t seed;
    const char* generator; // recorded generator choice
};

McEntropy mc_entropy(const AmplitudeDistribution& dist, std::int64_t samples, std::uint64_t seed);

// Input vectors: amplitude from dist, direction by normalizing an
// n-dimensional standard Gaussian (equivalent to the spherical phase laws).
std::vector<std::vector<double>> sample_input_vectors(const AmplitudeDistribution& dist, int n,
                                                      std::int64_t count, std::uint64_t seed);

} // namespace gausscap
