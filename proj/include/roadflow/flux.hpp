#pragma once

#include <algorithm>
#include <cmath>

#include "roadflow/errors.hpp"

namespace roadflow {

enum class Branch { free_flow, congested };

// Parabolic (Greenshields) fundamental diagram
//
//   f(u) = v_max * u * (1 - u / u_max)
//
// with free-flow speed v_max = f'(0) and jam density u_max, f(u_max) = 0.
// The flux is concave, so the wave speed f'(u) is strictly decreasing and
// every inverse below is single-valued on its branch.
struct FluxFunction {
  double v_max = 1.0;
  double u_max = 1.0;

  static constexpr double kTol = 1e-12;

  FluxFunction() = default;
  FluxFunction(double v_max_, double u_max_) : v_max(v_max_), u_max(u_max_) {
    if (!(v_max > 0.0) || !(u_max > 0.0))
      throw ValidationError("flux", "v_max and u_max must be positive");
  }

  double critical_density() const { return 0.5 * u_max; }
  double max_flow() const { return 0.25 * v_max * u_max; }

  // Clamps roundoff-sized excursions outside [0, u_max]; larger ones are
  // genuine domain violations.
  double clamp_density(double u) const {
    if (u < -kTol * std::max(1.0, u_max) ||
        u > u_max + kTol * std::max(1.0, u_max))
      throw DomainError("density outside [0, u_max]");
    return std::clamp(u, 0.0, u_max);
  }

  double flow(double u) const {
    u = clamp_density(u);
    return v_max * u * (1.0 - u / u_max);
  }

  // Characteristic speed f'(u) = v_max (1 - 2u/u_max).
  double wave_speed(double u) const {
    u = clamp_density(u);
    return v_max * (1.0 - 2.0 * u / u_max);
  }

  // Unique u with f'(u) = w.
  double inverse_wave_speed(double w) const {
    if (std::abs(w) > v_max * (1.0 + kTol))
      throw DomainError("wave speed outside [-v_max, v_max]");
    w = std::clamp(w, -v_max, v_max);
    return 0.5 * u_max * (1.0 - w / v_max);
  }

  // Maximum flow an upstream state can deliver: f(min{u, u*}).
  double demand(double u) const {
    u = clamp_density(u);
    return flow(std::min(u, critical_density()));
  }

  // Maximum flow a downstream state can absorb: f(max{u, u*}).
  double supply(double u) const {
    u = clamp_density(u);
    return flow(std::max(u, critical_density()));
  }

  // Root of f(u) = q on [0, u*] (free branch) or [u*, u_max] (congested).
  // q slightly above the maximum flow (roundoff from flux optimizations)
  // maps to the critical density.
  double inverse_flow(double q, Branch branch) const {
    const double fs = max_flow();
    const double tol = kTol * std::max(1.0, fs);
    if (q < -tol || q > fs + tol) throw DomainError("flow outside [0, f*]");
    q = std::max(q, 0.0);
    if (q >= fs) return critical_density();
    const double r = std::sqrt(std::max(0.0, 1.0 - 4.0 * q / (v_max * u_max)));
    return branch == Branch::free_flow ? 0.5 * u_max * (1.0 - r)
                                       : 0.5 * u_max * (1.0 + r);
  }

  // Mean density of the similarity profile connecting u and v,
  //   [f'(w)w - f(w)]_u^v / [f'(w)]_u^v,
  // which for the parabolic flux reduces to the arithmetic mean. Not domain
  // checked: the reconstruction fail-safe may transiently hold values outside
  // [0, u_max] and their areas must still be accountable.
  double chord_average(double u, double v) const { return 0.5 * (u + v); }
};

}  // namespace roadflow
