#include "gausscap/solver.hpp"
#include "gausscap/errors.hpp"

#include "engine.hpp"

#include <cmath>
#include <memory>

namespace gausscap {

namespace {

SolverResult from_core(detail::CoreResult core, const ChannelSpec& spec)
{
    SolverResult res;
    res.capacity = core.capacity;
    res.dist = make_distribution(core.support.points, core.support.probs, spec);
    res.lambda = core.lambda;
    res.kkt = std::move(core.kkt);
    res.trace.reserve(core.trace.size());
    for (const auto& row : core.trace)
        res.trace.push_back(TraceEntry{row.support_size, row.rate, row.worst_violation});
    return res;
}

} // namespace

AmplitudeDistribution optimize_fixed_support(const ChannelSpec& spec,
                                             const AmplitudeDistribution& init, double lambda)
{
    if (spec.n < 2)
        throw std::domain_error("optimize_fixed_support: requires n >= 2");
    if (!(lambda >= 0.0))
        throw ValidationError("optimize_fixed_support: lambda must be >= 0");
    if (init.spec.n != spec.n)
        throw ValidationError("optimize_fixed_support: init does not match the spec");

    detail::RadialModel model(spec.n, spec.u_p);
    detail::SolveParams prm;
    detail::Support s{init.points, init.probs};
    s = detail::optimize_support(model, spec.u_p, lambda, std::move(s), prm);

    // validate against a spec whose average bound cannot reject the iterate:
    // with lambda fixed the optimizer maximizes the penalized objective and
    // the moment may legitimately exceed u_a
    ChannelSpec relaxed(spec.n, spec.u_p, std::numeric_limits<double>::infinity());
    AmplitudeDistribution out = make_distribution(s.points, s.probs, relaxed);
    out.spec = spec;
    return out;
}

SolverResult solve_capacity(const ChannelSpec& spec)
{
    if (spec.n < 2)
        throw std::domain_error("solve_capacity: requires n >= 2 (use scalar_capacity for n = 1)");
    if (!std::isfinite(spec.u_p))
        throw ValidationError("solve_capacity: peak power must be finite");

    const int n = spec.n;
    detail::SolveParams prm;
    detail::ModelFactory factory = [n](double u_p) {
        return std::make_unique<detail::RadialModel>(n, u_p);
    };
    detail::CoreResult core = detail::solve_core(factory, spec.u_p, spec.u_a, prm);
    return from_core(std::move(core), spec);
}

} // namespace gausscap
