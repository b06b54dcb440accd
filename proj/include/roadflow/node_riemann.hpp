#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "roadflow/flux.hpp"

namespace roadflow {

// Junction description: ingoing and outgoing edge indices, the destination
// matrix A (m x n, column-stochastic) routing ingoing flux to outgoing edges,
// and the merging vector c that resolves degenerate throughput maxima.
struct NodeSpec {
  std::vector<int> in_edges;
  std::vector<int> out_edges;
  // Row-major m x n. a[j][i] is the fraction of edge i's flux leaving on j.
  std::vector<std::vector<double>> destination;
  std::vector<double> merge_weights;  // length n, strictly positive

  std::size_t fan_in() const { return in_edges.size(); }
  std::size_t fan_out() const { return out_edges.size(); }

  void validate() {
    const std::size_t n = fan_in(), m = fan_out();
    const bool supported = (n == 1 && m == 1) || (n == 1 && m == 2) ||
                           (n == 2 && m == 1);
    if (!supported)
      throw ValidationError("node_shape",
                            "unsupported junction shape " + std::to_string(n) +
                                "-to-" + std::to_string(m));
    if (destination.empty()) {
      // Default: everything through (valid only when m == 1).
      if (m != 1)
        throw ValidationError("node_matrix", "destination matrix required");
      destination.assign(1, std::vector<double>(n, 1.0));
    }
    if (destination.size() != m)
      throw ValidationError("node_matrix", "destination matrix has wrong row count");
    for (auto& row : destination) {
      if (row.size() != n)
        throw ValidationError("node_matrix", "destination matrix has wrong column count");
      for (double a : row)
        if (a < 0.0 || a > 1.0)
          throw ValidationError("node_matrix", "destination fractions must lie in [0,1]");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum += destination[j][i];
      if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError("node_matrix",
                              "destination matrix column does not sum to 1");
      // Make the column sum exactly 1 so routed fluxes add up bit-exactly.
      destination[m - 1][i] = 1.0;
      for (std::size_t j = 0; j + 1 < m; ++j)
        destination[m - 1][i] -= destination[j][i];
    }
    if (merge_weights.empty()) merge_weights.assign(n, 1.0);
    if (merge_weights.size() != n)
      throw ValidationError("node_merge", "merging vector has wrong length");
    for (double c : merge_weights)
      if (!(c > 0.0))
        throw ValidationError("node_merge", "merging weights must be positive");
  }
};

struct NodeFluxes {
  std::vector<double> gamma_in;
  std::vector<double> gamma_out;
};

// Throughput-maximizing junction fluxes subject to demand, supply and the
// destination matrix. Closed forms for the supported 1-1, 1-2, 2-1 shapes.
inline NodeFluxes solve_node_fluxes(const NodeSpec& spec,
                                    const std::vector<double>& demands,
                                    const std::vector<double>& supplies) {
  const std::size_t n = spec.fan_in(), m = spec.fan_out();
  if (demands.size() != n || supplies.size() != m)
    throw InternalError("solve_node_fluxes: demand/supply size mismatch");
  for (double d : demands)
    if (d < 0.0) throw DomainError("negative demand");
  for (double s : supplies)
    if (s < 0.0) throw DomainError("negative supply");

  NodeFluxes out;
  if (n == 1) {
    double g = demands[0];
    for (std::size_t j = 0; j < m; ++j) {
      const double a = spec.destination[j][0];
      if (a > 0.0) g = std::min(g, supplies[j] / a);
    }
    out.gamma_in = {g};
  } else {  // n == 2, m == 1
    const double d1 = demands[0], d2 = demands[1], s = supplies[0];
    if (d1 + d2 <= s) {
      out.gamma_in = {d1, d2};
    } else {
      const double c1 = spec.merge_weights[0], c2 = spec.merge_weights[1];
      double g1 = s * (c1 / (c1 + c2));
      double g2 = s - g1;
      if (g1 > d1) {
        g1 = d1;
        g2 = s - d1;
      } else if (g2 > d2) {
        g2 = d2;
        g1 = s - d2;
      }
      out.gamma_in = {g1, g2};
    }
  }
  out.gamma_out.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i)
      out.gamma_out[j] += spec.destination[j][i] * out.gamma_in[i];
  return out;
}

// New boundary state for one edge after the junction assigns it the flux
// gamma. Ingoing edges take the congested root, outgoing edges the free one,
// so the resulting wave leaves the node.
inline double riemann_new_state(const FluxFunction& flux, double u_old,
                                double gamma, bool ingoing) {
  const double fs = flux.max_flow();
  const double tol = 1e-12 * std::max(1.0, fs);
  if (gamma > fs + tol)
    throw InternalError("riemann_new_state: flux above the maximum flow");
  if (std::abs(gamma - flux.flow(u_old)) <= tol) return u_old;
  return flux.inverse_flow(gamma,
                           ingoing ? Branch::congested : Branch::free_flow);
}

enum class EdgeClass { influencing, affected, neutral };

// Direction of information at the node for the coming step: toward the node
// (influencing), away from it (affected), or stationary (neutral).
inline EdgeClass classify_edge(const FluxFunction& flux, double u_old,
                               double u_hat, bool ingoing) {
  const double utol = 1e-12 * std::max(1.0, flux.u_max);
  const double wtol = 1e-12 * std::max(1.0, flux.v_max);
  const double toward = ingoing ? 1.0 : -1.0;  // sign of speeds pointing at the node
  if (std::abs(u_hat - u_old) > utol) {
    const double shock = (flux.flow(u_hat) - flux.flow(u_old)) / (u_hat - u_old);
    if (std::abs(shock) <= wtol) return EdgeClass::neutral;
    return EdgeClass::affected;  // the wave is built to move away from the node
  }
  const double w = flux.wave_speed(u_old);
  if (std::abs(w) <= wtol) return EdgeClass::neutral;
  return w * toward > 0.0 ? EdgeClass::influencing : EdgeClass::affected;
}

}  // namespace roadflow
