#include "gausscap/scalar.hpp"
#include "gausscap/errors.hpp"

#include "engine.hpp"

#include <cmath>
#include <memory>

namespace gausscap {

SolverResult scalar_capacity(double u_p, double u_a)
{
    if (!std::isfinite(u_p) || !(u_p >= 0.0))
        throw ValidationError("scalar_capacity: peak power must be finite and >= 0");
    if (!(u_a >= 0.0))
        throw ValidationError("scalar_capacity: average power must be >= 0");

    detail::SolveParams prm;
    detail::ModelFactory factory = [](double up) { return std::make_unique<detail::ScalarModel>(up); };
    detail::CoreResult core = detail::solve_core(factory, u_p, u_a, prm);

    SolverResult res;
    res.capacity = core.capacity;
    res.dist = make_distribution(core.support.points, core.support.probs, ChannelSpec(1, u_p, u_a));
    res.lambda = core.lambda;
    res.kkt = std::move(core.kkt);
    res.trace.reserve(core.trace.size());
    for (const auto& row : core.trace)
        res.trace.push_back(TraceEntry{row.support_size, row.rate, row.worst_violation});
    return res;
}

} // namespace gausscap
