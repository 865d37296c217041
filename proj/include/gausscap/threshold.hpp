#pragma once

namespace gausscap {

// Peak-power threshold u_p^t(n): the largest peak power for which the
// single hypersphere at sqrt(u_p) stays optimal when the average constraint
// is inactive. Found by bisecting
//     g(u_p) = h~_V(0; F_{P_1}(u_p)) - h(V; F_{P_1}(u_p))
// whose root marks the first KKT violation, which occurs at rho = 0.
double peak_threshold(int n);

// The residual defect g(u_p) itself (s(0) of the single-point input).
double peak_threshold_defect(int n, double u_p);

} // namespace gausscap
