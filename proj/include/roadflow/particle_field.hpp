#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "roadflow/flux.hpp"

namespace roadflow {

// One characteristic particle: a sample (x, u) that travels at f'(u).
struct Particle {
  double x = 0.0;
  double u = 0.0;
};

enum class Side { left, right };

inline Side opposite(Side s) { return s == Side::left ? Side::right : Side::left; }

// Result of pulling the solution back onto the edge interval at one end.
struct TrimResult {
  double boundary_value = 0.0;  // solution value placed on the edge boundary
  double excess = 0.0;          // area removed beyond the boundary (>= 0)
  double gap = 0.0;             // distance the extremal particle stopped short
  double gap_area = 0.0;        // area added by constant extrapolation over the gap
  double extremal_value = 0.0;  // extremal particle value before trimming
};

// Area under the similarity profile between two neighboring particles.
inline double segment_area(const FluxFunction& flux, const Particle& p,
                           const Particle& q) {
  return (q.x - p.x) * flux.chord_average(p.u, q.u);
}

// The per-edge state of the particle method: an ordered particle sequence,
// the edge's flux, the shock-insertion distance d, and the area credits taken
// when merges happened at the hull boundaries.
class ParticleField {
 public:
  FluxFunction flux;
  double shock_distance = 0.0;  // d: spacing of particles inserted at merges
  std::vector<Particle> particles;
  double credit_left = 0.0;
  double credit_right = 0.0;
  double position_tol = 1e-12;

  ParticleField() = default;
  ParticleField(FluxFunction flux_, double d, std::vector<Particle> ps,
                double pos_tol = 1e-12)
      : flux(flux_), shock_distance(d), particles(std::move(ps)),
        position_tol(pos_tol) {
    if (particles.empty())
      throw ValidationError("field", "a particle field needs at least one particle");
  }

  // Samples a density profile at spacing h; the first and last particle land
  // exactly on 0 and L.
  static ParticleField sample_initial(const std::function<double(double)>& profile,
                                      double length, double h, FluxFunction flux,
                                      double d) {
    if (!(h > 0.0) || !(length > 0.0))
      throw ValidationError("field", "need h > 0 and L > 0");
    const double tol = 1e-12 * std::max(1.0, length);
    std::vector<Particle> ps;
    for (double x = 0.0; x < length - tol; x += h)
      ps.push_back({x, sample_value(profile, x, flux)});
    ps.push_back({length, sample_value(profile, length, flux)});
    return ParticleField(flux, d, std::move(ps), tol);
  }

  std::size_t size() const { return particles.size(); }
  double hull_left() const { return particles.front().x; }
  double hull_right() const { return particles.back().x; }

  // Similarity-profile value at x. For the parabolic flux the profile between
  // particles is linear in x; it is evaluated through the wave-speed inverse
  // so the formula stays tied to the flux.
  double interpolant_value(double x) const {
    const double tol = position_tol;
    if (x < hull_left() - tol || x > hull_right() + tol)
      throw DomainError("position outside the particle hull");
    x = std::clamp(x, hull_left(), hull_right());
    // First segment whose right endpoint is >= x.
    auto it = std::lower_bound(particles.begin(), particles.end(), x,
                               [](const Particle& p, double v) { return p.x < v; });
    if (it == particles.begin()) return it->u;
    if (it == particles.end()) return particles.back().u;
    const Particle& a = *(it - 1);
    const Particle& b = *it;
    return value_on_segment(a, b, x);
  }

  double value_on_segment(const Particle& a, const Particle& b, double x) const {
    const double dx = b.x - a.x;
    if (dx <= position_tol || a.u == b.u) return a.u;
    const double theta = (x - a.x) / dx;
    const double wa = flux.wave_speed(a.u);
    const double wb = flux.wave_speed(b.u);
    return flux.inverse_wave_speed(wa + theta * (wb - wa));
  }

  double total_area() const {
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < particles.size(); ++i)
      area += segment_area(flux, particles[i], particles[i + 1]);
    return area;
  }

  // Earliest positive collision time of adjacent particles with converging
  // characteristics. Coincident pairs are pending merges, not future
  // collisions, and are excluded here.
  std::optional<double> first_collision_time() const {
    std::optional<double> best;
    for (std::size_t i = 0; i + 1 < particles.size(); ++i) {
      const double dx = particles[i + 1].x - particles[i].x;
      if (dx <= position_tol) continue;
      const double dv = flux.wave_speed(particles[i].u) -
                        flux.wave_speed(particles[i + 1].u);
      if (dv <= 0.0) continue;
      const double t = dx / dv;
      if (!best || t < *best) best = t;
    }
    return best;
  }

  // Merges the coincident pair (i, i+1) into a single area-conserving
  // particle. Neighbors further than d away are first replaced by particles
  // inserted on the profile at distance d; a missing neighbor is created at
  // distance d with the extremal value, recording an area credit.
  void merge_at(std::size_t i) {
    if (i + 1 >= particles.size())
      throw InternalError("merge_at: pair index out of range");
    if (particles[i + 1].x - particles[i].x > position_tol)
      throw InternalError("merge_at: particles are not coincident");
    if (flux.wave_speed(particles[i].u) <= flux.wave_speed(particles[i + 1].u))
      throw InternalError("merge_at: characteristics do not converge");

    const double d = shock_distance;
    const double x0 = 0.5 * (particles[i].x + particles[i + 1].x);
    particles[i].x = particles[i + 1].x = x0;

    // Insert only when the neighbor is beyond d by more than the position
    // tolerance: landing an insert on top of an existing particle would
    // create a new coincident pair and merge resolution could cycle.
    if (i == 0) {
      credit_left += d * particles[i].u;
      particles.insert(particles.begin(), Particle{x0 - d, particles[0].u});
      ++i;
    } else if (x0 - particles[i - 1].x > d + position_tol) {
      const double v = value_on_segment(particles[i - 1], particles[i], x0 - d);
      particles.insert(particles.begin() + i, Particle{x0 - d, v});
      ++i;
    }
    const std::size_t j = i + 1;
    if (j == particles.size() - 1) {
      credit_right += d * particles[j].u;
      particles.push_back(Particle{x0 + d, particles[j].u});
    } else if (particles[j + 1].x - x0 > d + position_tol) {
      const double v = value_on_segment(particles[j], particles[j + 1], x0 + d);
      particles.insert(particles.begin() + j + 1, Particle{x0 + d, v});
    }

    const double xl = particles[i - 1].x;
    const double xr = particles[j + 1].x;
    double merged;
    if (xr - xl > position_tol) {
      merged = ((x0 - xl) * particles[i].u + (xr - x0) * particles[j].u) /
               (xr - xl);
    } else {
      merged = 0.5 * (particles[i].u + particles[j].u);
    }
    particles[i] = Particle{x0, merged};
    particles.erase(particles.begin() + j);
  }

  // Moves every particle along its characteristic for the given duration,
  // merging colliding pairs as they occur.
  void advance(double duration) {
    if (duration < 0.0) throw DomainError("advance: negative duration");
    resolve_pending_merges();
    double remaining = duration;
    while (true) {
      const auto t = first_collision_time();
      if (!t || *t >= remaining) {
        translate(remaining);
        resolve_pending_merges();
        return;
      }
      translate(*t);
      remaining -= *t;
      resolve_pending_merges();
    }
  }

  // Pulls the solution back onto the edge interval at one end: truncates onto
  // the boundary when particles overshot it (reporting the removed area), or
  // extends the last value to the boundary when they stopped short. The areas
  // reported are exact differences of total_area so ledger accounting closes.
  TrimResult boundary_trim(double length, Side side) {
    const double xb = side == Side::right ? length : 0.0;
    TrimResult r;
    if (side == Side::right) {
      r.extremal_value = particles.back().u;
      const double xn = particles.back().x;
      if (xn > xb + position_tol) {
        const double before = total_area();
        truncate_right(xb);
        r.excess = before - total_area();
        r.boundary_value = particles.back().u;
      } else if (xn < xb - position_tol) {
        r.gap = xb - xn;
        r.boundary_value = particles.back().u;
        const double before = total_area();
        particles.push_back(Particle{xb, particles.back().u});
        r.gap_area = total_area() - before;
      } else {
        r.boundary_value = particles.back().u;
      }
    } else {
      r.extremal_value = particles.front().u;
      const double x1 = particles.front().x;
      if (x1 < xb - position_tol) {
        const double before = total_area();
        truncate_left(xb);
        r.excess = before - total_area();
        r.boundary_value = particles.front().u;
      } else if (x1 > xb + position_tol) {
        r.gap = x1 - xb;
        r.boundary_value = particles.front().u;
        const double before = total_area();
        particles.insert(particles.begin(), Particle{xb, particles.front().u});
        r.gap_area = total_area() - before;
      } else {
        r.boundary_value = particles.front().u;
      }
    }
    return r;
  }

  // Installs a junction state as the new extremal particle: a zero-width jump
  // at the extremal position, node-side value outermost. Adds no area.
  void insert_boundary_state(double u_hat, Side side) {
    const double utol = 1e-12 * std::max(1.0, flux.u_max);
    if (side == Side::right) {
      if (std::abs(u_hat - particles.back().u) <= utol) return;
      particles.push_back(Particle{particles.back().x, u_hat});
    } else {
      if (std::abs(u_hat - particles.front().u) <= utol) return;
      particles.insert(particles.begin(), Particle{particles.front().x, u_hat});
    }
  }

  double take_credit(Side side) {
    double& c = side == Side::left ? credit_left : credit_right;
    const double v = c;
    c = 0.0;
    return v;
  }

 private:
  static double sample_value(const std::function<double(double)>& profile,
                             double x, const FluxFunction& flux) {
    const double u = profile(x);
    const double tol = 1e-12 * std::max(1.0, flux.u_max);
    if (u < -tol || u > flux.u_max + tol)
      throw ValidationError("profile", "initial profile leaves [0, u_max]");
    return std::clamp(u, 0.0, flux.u_max);
  }

  void translate(double dt) {
    if (dt == 0.0) return;
    for (Particle& p : particles) p.x += flux.wave_speed(p.u) * dt;
  }

  // Merges every coincident converging pair, smallest index first, until no
  // zero-width collision remains.
  void resolve_pending_merges() {
    bool merged = true;
    while (merged) {
      merged = false;
      for (std::size_t i = 0; i + 1 < particles.size();) {
        if (particles[i + 1].x - particles[i].x <= position_tol &&
            flux.wave_speed(particles[i].u) >
                flux.wave_speed(particles[i + 1].u)) {
          merge_at(i);
          merged = true;
          i = i > 2 ? i - 2 : 0;
        } else {
          ++i;
        }
      }
    }
  }

  void truncate_right(double xb) {
    std::size_t k = particles.size();
    while (k > 0 && particles[k - 1].x > xb + position_tol) --k;
    if (k == 0) throw InternalError("trim: entire hull beyond the boundary");
    const double ub = k < particles.size()
                          ? value_on_segment(particles[k - 1], particles[k], xb)
                          : particles.back().u;
    particles.resize(k);
    if (std::abs(particles.back().x - xb) <= position_tol)
      particles.back().x = xb;
    else
      particles.push_back(Particle{xb, ub});
  }

  void truncate_left(double xb) {
    std::size_t k = 0;
    while (k < particles.size() && particles[k].x < xb - position_tol) ++k;
    if (k == particles.size())
      throw InternalError("trim: entire hull beyond the boundary");
    const double ub = k > 0 ? value_on_segment(particles[k - 1], particles[k], xb)
                            : particles.front().u;
    particles.erase(particles.begin(), particles.begin() + k);
    if (std::abs(particles.front().x - xb) <= position_tol)
      particles.front().x = xb;
    else
      particles.insert(particles.begin(), Particle{xb, ub});
  }
};

}  // namespace roadflow
