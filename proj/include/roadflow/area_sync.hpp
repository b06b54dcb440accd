#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "roadflow/node_riemann.hpp"
#include "roadflow/particle_field.hpp"

namespace roadflow {

struct SyncDiagnostics {
  long fallback_reconstructions = 0;  // step-(3) constant fills
  long out_of_range_values = 0;       // fail-safe value left [0, u_max]
  void absorb(const SyncDiagnostics& other) {
    fallback_reconstructions += other.fallback_reconstructions;
    out_of_range_values += other.out_of_range_values;
  }
};

// Rate C at which I_b - coeff * I_a grows for two flux-linked boundary
// traces (gamma_b = coeff * gamma_a): the unknown node-flux terms cancel and
//   C = u_b f_b'(u_b) - coeff * u_a f_a'(u_a).
inline double area_drift_rate(const FluxFunction& flux_a, double u_a,
                              const FluxFunction& flux_b, double u_b,
                              double coeff) {
  const double qa = flux_a.flow(u_a), qb = flux_b.flow(u_b);
  if (std::abs(qb - coeff * qa) > 1e-7 * std::max(1.0, flux_a.max_flow()))
    throw InternalError("area_drift_rate: traces are not flux-linked");
  return u_b * flux_b.wave_speed(u_b) - coeff * u_a * flux_a.wave_speed(u_a);
}

// Bookkeeping for one edge end incident to a node, covering the step that
// just finished. The signed end area I is the integral of the solution
// between the edge boundary and the extremal particle (right end: positive
// beyond the edge; left end: positive inside the gap). It obeys
//   dI/dt = phi(t) - g(u_ext),  g(u) = f(u) - u f'(u),
// with phi the (unknown) boundary-trace flux, so Phi = I + g(u_ext) dt is the
// integrated flux through the node on this edge. Ends whose extremal particle
// reached the boundary have I measured; gaps are filled from the flux
// relations of the junction.
struct EndState {
  Side side = Side::right;
  FluxFunction flux;
  double u_ext = 0.0;    // extremal value during the elapsed step
  double credit = 0.0;   // area credit taken at this end during the step
  double gap = 0.0;
  double gap_area = 0.0;  // area the constant extension put into the gap
  bool known = false;
  double end_area = 0.0;            // signed I
  double trace_flux_integral = 0.0;  // Phi
};

namespace detail {
inline double end_sign(Side side) { return side == Side::right ? 1.0 : -1.0; }
inline double area_flux(const EndState& e) {
  return e.flux.flow(e.u_ext) - e.u_ext * e.flux.wave_speed(e.u_ext);
}

// Amount by which a linear boundary-flux path phi0 -> phi1 over one step
// exceeds the admitted level c: the integral of max(phi(t) - c, 0).
inline double clipped_flux_surplus(double phi0, double phi1, double c,
                                   double dt) {
  const double a = phi0 - c, b = phi1 - c;
  if (a <= 0.0 && b <= 0.0) return 0.0;
  if (a >= 0.0 && b >= 0.0) return 0.5 * (a + b) * dt;
  const double top = std::max(a, b);
  return 0.5 * top * top / (top - std::min(a, b)) * dt;
}
// Replaces the constant extrapolation across a one-step boundary gap by the
// wave profile a linear-in-time boundary flux emits: sample values
// interpolate the old and new junction states, their emission times follow
// from the flux path, and each sample sits on its own characteristic. Leaves
// the field untouched (returning 0) whenever the gap is not a clean one-step
// emission fan. Returns the area added relative to the constant
// extrapolation so the caller can keep the books exact.
inline double fill_emission_gap(ParticleField& field, Side side, double gap,
                                double dt) {
  auto& ps = field.particles;
  if (ps.size() < 3 || gap <= field.position_tol || dt <= 0.0) return 0.0;
  const FluxFunction& flux = field.flux;
  const bool left = side == Side::left;
  const Particle pnew = left ? ps[0] : ps[ps.size() - 1];
  const Particle pext = left ? ps[1] : ps[ps.size() - 2];
  const Particle pold = left ? ps[2] : ps[ps.size() - 3];
  const double xb = pnew.x;
  if (std::abs(pext.x - xb) > field.position_tol) return 0.0;
  if (pext.u != pold.u) return 0.0;
  if (std::abs(std::abs(pold.x - xb) - gap) > field.position_tol) return 0.0;
  const double u_new = pnew.u, u_prev = pold.u;
  if (std::abs(u_new - u_prev) <= 1e-12 * std::max(1.0, flux.u_max))
    return 0.0;
  const double sgn = left ? 1.0 : -1.0;
  if (sgn * flux.wave_speed(u_prev) <= 0.0 ||
      sgn * flux.wave_speed(u_new) < 0.0)
    return 0.0;
  // The old extremal state must have opened the gap by free motion alone.
  if (std::abs(sgn * flux.wave_speed(u_prev) * dt - gap) >
      1e-9 * gap + field.position_tol)
    return 0.0;
  const double g_new = flux.flow(u_new), g_prev = flux.flow(u_prev);
  if (std::abs(g_new - g_prev) <= 1e-14 * std::max(1.0, flux.max_flow()))
    return 0.0;

  const int samples = 8;
  std::vector<Particle> chain;
  chain.push_back({0.0, u_new});
  for (int j = 1; j < samples; ++j) {
    const double u = u_new + (u_prev - u_new) * j / samples;
    const double theta = (flux.flow(u) - g_prev) / (g_new - g_prev);
    if (theta < 0.0 || theta > 1.0) return 0.0;
    const double x = sgn * flux.wave_speed(u) * dt * (1.0 - theta);
    // Drop samples whose characteristics already crossed (compressive path).
    if (x <= chain.back().x + field.position_tol || x >= gap) continue;
    chain.push_back({x, u});
  }
  chain.push_back({gap, u_prev});
  if (chain.size() < 3) return 0.0;

  double new_area = 0.0;
  for (std::size_t j = 0; j + 1 < chain.size(); ++j)
    new_area += (chain[j + 1].x - chain[j].x) *
                flux.chord_average(chain[j].u, chain[j + 1].u);

  // Swap the extrapolation particle for the interior samples.
  std::vector<Particle> interior(chain.begin() + 1, chain.end() - 1);
  for (Particle& p : interior) p.x = xb + sgn * p.x;
  if (left) {
    ps.erase(ps.begin() + 1);
    ps.insert(ps.begin() + 1, interior.begin(), interior.end());
  } else {
    ps.erase(ps.end() - 2);
    std::reverse(interior.begin(), interior.end());
    ps.insert(ps.end() - 1, interior.begin(), interior.end());
  }
  return new_area - gap * u_prev;
}
}  // namespace detail

// Determines the signed end areas of all gap ends from the measured ends and
// the junction flux relations (destination matrix; merging ratios when both
// ingoing ends jammed). Returns whatever flux-integral imbalance could not be
// routed to a gap end; the caller adds it back as an area correction so the
// scheme stays exactly conservative.
inline double propagate_virtual_areas(const NodeSpec& spec,
                                      std::vector<EndState>& ins,
                                      std::vector<EndState>& outs, double dt) {
  for (auto* group : {&ins, &outs})
    for (EndState& e : *group)
      if (e.known)
        e.trace_flux_integral = e.end_area + detail::area_flux(e) * dt;

  const std::size_t m = outs.size();
  double mismatch = 0.0;

  if (ins.size() == 1) {
    EndState& in = ins[0];
    if (!in.known) {
      double measured = 0.0, open_frac = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (outs[j].known)
          measured += outs[j].trace_flux_integral;
        else
          open_frac += spec.destination[j][0];
      }
      if (open_frac > 1.0 - 1e-12) {
        // No measured end anchors the balance; fall back to the constant
        // trace the previous junction solution installed.
        in.trace_flux_integral = in.flux.flow(in.u_ext) * dt;
      } else {
        in.trace_flux_integral = measured / (1.0 - open_frac);
      }
    }
    int last_open = -1;
    for (std::size_t j = 0; j < m; ++j)
      if (!outs[j].known) {
        outs[j].trace_flux_integral =
            spec.destination[j][0] * in.trace_flux_integral;
        last_open = static_cast<int>(j);
      }
    double total_out = 0.0;
    for (const EndState& o : outs) total_out += o.trace_flux_integral;
    mismatch = in.trace_flux_integral - total_out;
    if (last_open >= 0) {
      outs[last_open].trace_flux_integral += mismatch;
      mismatch = 0.0;
    }
  } else {  // 2-to-1 confluence
    EndState& out = outs[0];
    const bool known0 = ins[0].known, known1 = ins[1].known;
    if (!known0 || !known1) {
      if (!out.known)
        out.trace_flux_integral = out.flux.flow(out.u_ext) * dt;
      if (!known0 && !known1) {
        const double c0 = spec.merge_weights[0], c1 = spec.merge_weights[1];
        ins[0].trace_flux_integral =
            out.trace_flux_integral * (c0 / (c0 + c1));
        ins[1].trace_flux_integral =
            out.trace_flux_integral - ins[0].trace_flux_integral;
      } else if (known0) {
        ins[1].trace_flux_integral =
            out.trace_flux_integral - ins[0].trace_flux_integral;
      } else {
        ins[0].trace_flux_integral =
            out.trace_flux_integral - ins[1].trace_flux_integral;
      }
    } else if (!out.known) {
      out.trace_flux_integral =
          ins[0].trace_flux_integral + ins[1].trace_flux_integral;
    }
    mismatch = ins[0].trace_flux_integral + ins[1].trace_flux_integral -
               out.trace_flux_integral;
    if (!out.known) mismatch = 0.0;
  }

  for (auto* group : {&ins, &outs})
    for (EndState& e : *group)
      if (!e.known)
        e.end_area = e.trace_flux_integral - detail::area_flux(e) * dt;
  return mismatch;
}

// Adds delta_area to the solution near one edge end without touching the
// extremal (junction-state) particle. Walking outward over particles
// 2, 3, ..., first a continuous constant+linear profile is tried, then a
// constant within the local value range; the window grows while neither fits.
// A plain constant of whatever value is needed serves as fail-safe once the
// walk exhausts the edge.
inline void reconstruct_area(ParticleField& field, double delta_area,
                             Side side, SyncDiagnostics& diag) {
  auto& ps = field.particles;
  const std::size_t n = ps.size();
  const double u_cap = field.flux.u_max;
  const double span = std::max(1.0, field.hull_right() - field.hull_left());
  if (std::abs(delta_area) <= 5e-15 * std::max(1.0, u_cap * span)) return;
  if (n < 2)
    throw InternalError("reconstruct_area: need at least two particles");

  const bool from_left = side == Side::left;
  auto pick = [&](std::size_t j) -> const Particle& {
    return from_left ? ps[j] : ps[n - 1 - j];
  };
  const double x0 = pick(0).x;
  const double u0 = pick(0).u;
  auto offset = [&](std::size_t j) { return std::abs(pick(j).x - x0); };

  // Replaces particles 0..k (from the chosen end) by a boundary-relative
  // profile given as ascending (offset, value) points.
  auto apply = [&](std::size_t k, const std::vector<Particle>& profile) {
    std::vector<Particle> repl;
    repl.reserve(profile.size());
    const double utol = 1e-14 * std::max(1.0, u_cap);
    for (const Particle& p : profile) {
      if (!repl.empty() && p.x - repl.back().x <= field.position_tol &&
          std::abs(p.u - repl.back().u) <= utol)
        continue;
      repl.push_back(p);
    }
    for (Particle& p : repl) p.x = from_left ? x0 + p.x : x0 - p.x;
    if (!from_left) std::reverse(repl.begin(), repl.end());
    if (from_left) {
      ps.erase(ps.begin(), ps.begin() + k + 1);
      ps.insert(ps.begin(), repl.begin(), repl.end());
    } else {
      ps.erase(ps.end() - (k + 1), ps.end());
      ps.insert(ps.end(), repl.begin(), repl.end());
    }
  };

  double window_area = 0.0;
  double lo_val = u0, hi_val = u0;
  std::size_t k = 0;
  while (true) {
    ++k;
    window_area += std::abs(segment_area(field.flux, pick(k - 1), pick(k)));
    lo_val = std::min(lo_val, pick(k).u);
    hi_val = std::max(hi_val, pick(k).u);
    const double width = offset(k);
    const double target = window_area + delta_area;
    const double uk = pick(k).u;

    if (width > field.position_tol) {
      // Step 1: constant + linear profile joining particles 0 and k.
      if (target >= width * std::min(u0, uk) &&
          target <= width * std::max(u0, uk) && u0 != uk) {
        const double half = 0.5 * (u0 - uk);
        double y = (target - width * uk) / half;  // linear near the end
        if (y >= 0.0 && y <= width) {
          apply(k, {{0.0, u0}, {std::clamp(y, 0.0, width), uk}, {width, uk}});
          return;
        }
        y = (target - width * 0.5 * (u0 + uk)) / half;  // constant near the end
        if (y >= 0.0 && y <= width) {
          apply(k, {{0.0, u0}, {std::clamp(y, 0.0, width), u0}, {width, uk}});
          return;
        }
      }
      // Step 2: constant within the local value range.
      if (target >= width * lo_val && target <= width * hi_val) {
        const double u = target / width;
        apply(k, {{0.0, u0}, {0.0, u}, {width, u}, {width, uk}});
        return;
      }
    }
    // Reaching this point means no step above could place the area in the
    // current window, so keep growing while particles remain: a wider window
    // whose value range covers the correction (typical once a uniform
    // stretch ends) beats overwriting a narrow one with a non-local density.
    if (k + 1 < n) continue;

    // Step 3: fail-safe constant matching the area exactly.
    if (width <= field.position_tol)
      throw InternalError("reconstruct_area: zero-width window");
    const double u = target / width;
    ++diag.fallback_reconstructions;
    if (u < 0.0 || u > u_cap) ++diag.out_of_range_values;
    apply(k, {{0.0, u0}, {0.0, u}, {width, u}, {width, uk}});
    return;
  }
}

struct IncidentEdge {
  ParticleField* field = nullptr;
  double length = 0.0;
};

// One node coupling: pulls every incident solution back onto its edge, solves
// the junction Riemann problem on the boundary traces, installs the new
// states, and redistributes the tracked end areas so that the network total
// is conserved exactly.
inline void synchronize_node(const NodeSpec& spec,
                             const std::vector<IncidentEdge>& in_edges,
                             const std::vector<IncidentEdge>& out_edges,
                             double dt, SyncDiagnostics& diag) {
  const std::size_t n = in_edges.size(), m = out_edges.size();
  if (n != spec.fan_in() || m != spec.fan_out())
    throw InternalError("synchronize_node: edge count mismatch");

  std::vector<EndState> ins(n), outs(m);
  std::vector<double> demands(n), supplies(m), trace_in(n), trace_out(m);
  for (std::size_t i = 0; i < n; ++i) {
    ParticleField& f = *in_edges[i].field;
    const TrimResult tr = f.boundary_trim(in_edges[i].length, Side::right);
    EndState& e = ins[i];
    e.side = Side::right;
    e.flux = f.flux;
    e.u_ext = tr.extremal_value;
    e.credit = f.take_credit(Side::right);
    e.gap = tr.gap;
    e.gap_area = tr.gap_area;
    e.known = tr.gap <= 0.0;
    if (e.known) e.end_area = tr.excess - e.credit;
    trace_in[i] = tr.boundary_value;
    demands[i] = e.flux.demand(tr.boundary_value);
  }
  for (std::size_t j = 0; j < m; ++j) {
    ParticleField& f = *out_edges[j].field;
    const TrimResult tr = f.boundary_trim(out_edges[j].length, Side::left);
    EndState& e = outs[j];
    e.side = Side::left;
    e.flux = f.flux;
    e.u_ext = tr.extremal_value;
    e.credit = f.take_credit(Side::left);
    e.gap = tr.gap;
    e.gap_area = tr.gap_area;
    e.known = tr.gap <= 0.0;
    if (e.known) e.end_area = -tr.excess + e.credit;
    trace_out[j] = tr.boundary_value;
    supplies[j] = e.flux.supply(tr.boundary_value);
  }

  const NodeFluxes fluxes = solve_node_fluxes(spec, demands, supplies);

  // Corrections to the measured flux integrals. A free extremal value whose
  // characteristics crossed the boundary outward follows a linear flux path
  // from f(u_ext) to the end's demand/supply; when a junction constraint
  // became binding during the step, the part above gamma never crossed the
  // node and is clipped off (the linear-path estimate of the crossing time
  // is second-order accurate). A stationary or inward extremal value is
  // itself the admitted junction state, so the boundary flux ran at f(u_ext)
  // throughout and any measured deviation is merge noise from this edge.
  // Either way the adjustment is handed back to the edge below, so the
  // scheme stays exactly conservative.
  std::vector<double> in_surplus(n, 0.0), out_surplus(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (ins[i].known) {
      const EndState& e = ins[i];
      double s;
      if (e.flux.wave_speed(e.u_ext) > 0.0)
        s = detail::clipped_flux_surplus(e.flux.flow(e.u_ext), demands[i],
                                         fluxes.gamma_in[i], dt);
      else
        s = e.end_area + detail::area_flux(e) * dt -
            e.flux.flow(e.u_ext) * dt;
      ins[i].end_area -= s;
      in_surplus[i] = s;
    }
  for (std::size_t j = 0; j < m; ++j)
    if (outs[j].known) {
      const EndState& e = outs[j];
      double s;
      if (e.flux.wave_speed(e.u_ext) < 0.0)
        s = detail::clipped_flux_surplus(e.flux.flow(e.u_ext), supplies[j],
                                         fluxes.gamma_out[j], dt);
      else
        s = e.end_area + detail::area_flux(e) * dt -
            e.flux.flow(e.u_ext) * dt;
      outs[j].end_area -= s;
      out_surplus[j] = s;
    }

  for (std::size_t i = 0; i < n; ++i)
    in_edges[i].field->insert_boundary_state(
        riemann_new_state(ins[i].flux, trace_in[i], fluxes.gamma_in[i], true),
        Side::right);
  for (std::size_t j = 0; j < m; ++j)
    out_edges[j].field->insert_boundary_state(
        riemann_new_state(outs[j].flux, trace_out[j], fluxes.gamma_out[j],
                          false),
        Side::left);

  const double mismatch = propagate_virtual_areas(spec, ins, outs, dt);

  for (std::size_t i = 0; i < n; ++i) {
    const EndState& e = ins[i];
    if (e.known) {
      if (in_surplus[i] != 0.0)  // held-back vehicles queue at the node
        reconstruct_area(*in_edges[i].field, in_surplus[i], Side::right,
                         diag);
      continue;
    }
    const double target_gap = -e.end_area;  // right end: gap area = -I
    const double fill =
        detail::fill_emission_gap(*in_edges[i].field, Side::right, e.gap, dt);
    reconstruct_area(*in_edges[i].field,
                     target_gap - e.gap_area - fill - e.credit,
                     Side::right, diag);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const EndState& e = outs[j];
    if (e.known) {
      if (out_surplus[j] != 0.0)  // area the edge never actually received
        reconstruct_area(*out_edges[j].field, -out_surplus[j], Side::left,
                         diag);
      continue;
    }
    const double target_gap = e.end_area;  // left end: gap area = +I
    const double fill =
        detail::fill_emission_gap(*out_edges[j].field, Side::left, e.gap, dt);
    reconstruct_area(*out_edges[j].field,
                     target_gap - e.gap_area - fill - e.credit, Side::left,
                     diag);
  }
  if (mismatch != 0.0)
    reconstruct_area(*out_edges[0].field, mismatch, Side::left, diag);
}

}  // namespace roadflow
