#pragma once

#include <cmath>
#include <ostream>
#include <thread>
#include <vector>

#include "roadflow/network.hpp"

namespace roadflow {

struct SimConfig {
  Network network;
  double dt = 0.0;  // 0 selects the default 0.8 * max_sync_dt
  double t_final = 0.0;
  double snapshot_every = 0.0;  // 0: only initial and final snapshots
  bool parallel = false;
};

struct EdgeSnapshot {
  std::string edge_id;
  std::vector<Particle> particles;
  double credit_left = 0.0;
  double credit_right = 0.0;
  double area = 0.0;
};

struct Snapshot {
  double time = 0.0;
  std::vector<EdgeSnapshot> edges;
};

struct RunResult {
  std::vector<Snapshot> snapshots;
  SyncDiagnostics diag;
  double inflow = 0.0;
  double outflow = 0.0;
  double initial_area = 0.0;
  double final_area = 0.0;
  std::vector<ParticleField> final_fields;
};

namespace detail {

inline Snapshot take_snapshot(double t, const Network& net,
                              const std::vector<ParticleField>& fields) {
  Snapshot s;
  s.time = t;
  for (std::size_t e = 0; e < fields.size(); ++e)
    s.edges.push_back({net.edges[e].id, fields[e].particles,
                       fields[e].credit_left, fields[e].credit_right,
                       fields[e].total_area()});
  return s;
}

inline void advance_all(std::vector<ParticleField>& fields, double step,
                        bool parallel) {
  if (!parallel || fields.size() < 2) {
    for (ParticleField& f : fields) f.advance(step);
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(fields.size(),
                            std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t e = w; e < fields.size(); e += workers)
        fields[e].advance(step);
    });
  for (std::thread& t : pool) t.join();
}

}  // namespace detail

// Evolves the whole network: repeat (advance every edge by dt, then
// synchronize every node and external boundary). The final step is shortened
// to land on t_final exactly; a zero-length synchronization at t=0 installs
// the initial junction states.
inline RunResult run_simulation(const SimConfig& cfg) {
  const Network& net = cfg.network;
  const double dt_max = net.max_sync_dt();
  const double dt = cfg.dt > 0.0 ? cfg.dt : 0.8 * dt_max;
  if (!(dt > 0.0) || dt > dt_max * (1.0 + 1e-12))
    throw ValidationError("dt", "need 0 < dt <= max_sync_dt");
  if (cfg.t_final < 0.0) throw ValidationError("t_final", "t_final >= 0");

  std::vector<ParticleField> fields;
  for (const EdgeSpec& e : net.edges) fields.push_back(e.make_field());
  std::vector<BoundaryLedger> ledgers(net.boundaries.size());

  RunResult result;
  result.initial_area = 0.0;
  for (const ParticleField& f : fields) result.initial_area += f.total_area();

  auto synchronize_all = [&](double elapsed) {
    for (const NodeSpec& node : net.nodes) {
      std::vector<IncidentEdge> ins, outs;
      for (int e : node.in_edges)
        ins.push_back({&fields[e], net.edges[e].length});
      for (int e : node.out_edges)
        outs.push_back({&fields[e], net.edges[e].length});
      synchronize_node(node, ins, outs, elapsed, result.diag);
    }
    for (std::size_t b = 0; b < net.boundaries.size(); ++b) {
      const BoundarySpec& bc = net.boundaries[b];
      apply_external_boundary(fields[bc.edge], net.edges[bc.edge].length, bc,
                              elapsed, ledgers[b], result.diag);
    }
  };

  synchronize_all(0.0);
  result.snapshots.push_back(detail::take_snapshot(0.0, net, fields));

  const double time_tol = 1e-12 * std::max(1.0, cfg.t_final);
  double t = 0.0;
  double next_snap =
      cfg.snapshot_every > 0.0 ? cfg.snapshot_every : cfg.t_final;
  while (t < cfg.t_final - time_tol) {
    const double step = std::min(dt, cfg.t_final - t);
    detail::advance_all(fields, step, cfg.parallel);
    synchronize_all(step);
    t += step;
    if (t >= next_snap - time_tol || t >= cfg.t_final - time_tol) {
      result.snapshots.push_back(detail::take_snapshot(t, net, fields));
      if (cfg.snapshot_every > 0.0)
        while (next_snap <= t + time_tol) next_snap += cfg.snapshot_every;
    }
  }
  for (const BoundaryLedger& l : ledgers) {
    result.inflow += l.inflow;
    result.outflow += l.outflow;
  }
  result.final_area = 0.0;
  for (const ParticleField& f : fields) result.final_area += f.total_area();
  result.final_fields = std::move(fields);
  return result;
}

inline void write_snapshot_header(std::ostream& os) { os << "t,edge_id,x,u\n"; }

inline void write_snapshot(const Snapshot& snap, std::ostream& os) {
  const std::string t = detail::fmt17(snap.time);
  for (const EdgeSnapshot& e : snap.edges)
    for (const Particle& p : e.particles)
      os << t << ',' << e.edge_id << ',' << detail::fmt17(p.x) << ','
         << detail::fmt17(p.u) << '\n';
}

inline void write_snapshots(const std::vector<Snapshot>& snaps,
                            std::ostream& os) {
  write_snapshot_header(os);
  for (const Snapshot& s : snaps) write_snapshot(s, os);
}

struct Norms {
  double linf = 0.0;
  double l2 = 0.0;
};

// Norms of the difference of two interpolants on [x0, x1], by composite
// Simpson quadrature on the union of both particle grids refined tenfold.
inline Norms error_norms(const ParticleField& a, const ParticleField& b,
                         double x0, double x1) {
  if (!(x0 < x1)) throw DomainError("error_norms: empty interval");
  for (const ParticleField* f : {&a, &b})
    if (x0 < f->hull_left() - f->position_tol ||
        x1 > f->hull_right() + f->position_tol)
      throw DomainError("error_norms: interval outside a particle hull");

  std::vector<double> xs{x0, x1};
  for (const ParticleField* f : {&a, &b})
    for (const Particle& p : f->particles)
      if (p.x > x0 && p.x < x1) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  const double xtol = 1e-13 * std::max(1.0, x1 - x0);
  xs.erase(std::unique(xs.begin(), xs.end(),
                       [&](double p, double q) { return q - p <= xtol; }),
           xs.end());
  if (xs.back() < x1) xs.push_back(x1);

  auto diff = [&](double x) {
    return a.interpolant_value(x) - b.interpolant_value(x);
  };
  Norms n;
  double sq = 0.0;
  constexpr int kPanels = 10;  // Simpson panels per base interval
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double w = (xs[i + 1] - xs[i]) / (2 * kPanels);
    double acc = 0.0;
    for (int j = 0; j <= 2 * kPanels; ++j) {
      const double v = diff(xs[i] + j * w);
      n.linf = std::max(n.linf, std::abs(v));
      const double weight =
          (j == 0 || j == 2 * kPanels) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      acc += weight * v * v;
    }
    sq += acc * w / 3.0;
  }
  n.l2 = std::sqrt(std::max(0.0, sq));
  return n;
}

struct ConvergenceRow {
  int k = 0;
  double dt = 0.0;
  double linf = 0.0;
  double l2 = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double order_linf = 0.0;  // least-squares slope of log error vs log dt
  double order_l2 = 0.0;
};

namespace detail {
inline double fit_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
}  // namespace detail

// Time-step refinement study on a fixed network: runs dt = 2^(-k/2) for each
// k, compares the named edge against the k_ref reference on [x0, x1], and
// fits the observed orders.
inline ConvergenceResult convergence_study(const Network& net, double t_final,
                                           const std::vector<int>& k_list,
                                           int k_ref, std::size_t edge,
                                           double x0, double x1,
                                           bool parallel = false) {
  auto run_with_k = [&](int k) {
    SimConfig cfg;
    cfg.network = net;
    cfg.dt = std::pow(2.0, -0.5 * k);
    cfg.t_final = t_final;
    cfg.parallel = parallel;
    return run_simulation(cfg);
  };
  const RunResult ref = run_with_k(k_ref);

  ConvergenceResult out;
  std::vector<double> lx, ll2, llinf;
  for (int k : k_list) {
    const RunResult r = run_with_k(k);
    const Norms n =
        error_norms(r.final_fields[edge], ref.final_fields[edge], x0, x1);
    out.rows.push_back({k, std::pow(2.0, -0.5 * k), n.linf, n.l2});
    lx.push_back(std::log(out.rows.back().dt));
    llinf.push_back(std::log(std::max(n.linf, 1e-300)));
    ll2.push_back(std::log(std::max(n.l2, 1e-300)));
  }
  if (k_list.size() >= 2) {
    out.order_linf = detail::fit_slope(lx, llinf);
    out.order_l2 = detail::fit_slope(lx, ll2);
  }
  return out;
}

}  // namespace roadflow
