#pragma once

#include "gausscap/entropy.hpp"

#include <vector>

namespace gausscap {

struct TraceEntry {
    int support_size;
    double rate;
    double worst_violation;
};

// Certified solve outcome. kkt.worst_violation and all mass-point residuals
// are <= 1e-5 nats on success; capacity equals rate(dist) by construction.
struct SolverResult {
    double capacity = 0.0; // nats per channel use
    AmplitudeDistribution dist;
    double lambda = 0.0; // average-power multiplier, 0 when inactive
    KktReport kkt;
    std::vector<TraceEntry> trace;
};

// Local maximizer of rate(dist) - lambda E[P^2] over point positions in
// [0, sqrt(u_p)] and probabilities on the simplex, support size unchanged
// except for merges of colliding points.
AmplitudeDistribution optimize_fixed_support(const ChannelSpec& spec,
                                             const AmplitudeDistribution& init, double lambda);

// Smith-style capacity solve for the identity channel, n >= 2, finite u_p:
// continuation over power, KKT-driven point addition, bisection on the
// average-power multiplier when the constraint binds.
SolverResult solve_capacity(const ChannelSpec& spec);

} // namespace gausscap
