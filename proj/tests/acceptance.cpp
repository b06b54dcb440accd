// Acceptance gate: one PASS/FAIL line per criterion, exit 1 if any fail.
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "roadflow/presets.hpp"
#include "roadflow/sim_driver.hpp"

using namespace roadflow;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& what) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, what.c_str());
  if (!ok) ++failures;
}

// 1. Second-order convergence in dt on the bottleneck problem.
void criterion1() {
  const Network net = bottleneck_network(8e-4, 2e-4);
  const ConvergenceResult res = convergence_study(
      net, 3.0, {4, 5, 6, 7, 8, 9, 10, 11, 12}, 16, 1, 0.0, 0.3);
  const bool ok = res.order_l2 >= 1.7 && res.order_l2 <= 2.3;
  std::ostringstream msg;
  msg << "convergence order (L2 slope " << res.order_l2
      << " must lie in [1.7, 2.3])";
  report(1, ok, msg.str());
}

// 2. Exact conservation: closed ring and bottleneck audit.
void criterion2() {
  Network ring = parse_network(
      "edge a L=1 vmax=1 umax=1 h=0.05 d=0.0125 init=cosine(0.45,0.35,2)\n"
      "edge b L=1 vmax=1 umax=1 h=0.05 d=0.0125 init=cosine(0.45,0.35,2)\n"
      "node in=a out=b\n"
      "node in=b out=a\n");
  SimConfig rc;
  rc.network = ring;
  rc.dt = 0.05;
  rc.t_final = 10.0;  // 200 synchronization steps
  const RunResult r = run_simulation(rc);
  const double ring_rel =
      std::abs(r.final_area - r.initial_area) / r.initial_area;

  SimConfig bc;
  bc.network = bottleneck_network(8e-2, 2e-2);
  bc.dt = 0.25;
  bc.t_final = 3.0;
  const RunResult b = run_simulation(bc);
  const double audit_rel =
      std::abs((b.final_area - b.initial_area) - (b.inflow - b.outflow)) /
      std::max(1.0, b.initial_area);

  const bool ok = ring_rel <= 1e-10 && audit_rel <= 1e-10;
  std::ostringstream msg;
  msg << "conservation (ring 200-step rel drift " << ring_rel
      << ", bottleneck audit rel " << audit_rel << ", both <= 1e-10)";
  report(2, ok, msg.str());
}

// 3. Method-of-characteristics equivalence on smooth monotone data.
void criterion3() {
  FluxFunction flux(1.0, 1.0);
  auto u0 = [](double x) { return 0.3 + 0.4 / (1.0 + std::exp(-8 * (x - 1))); };
  auto f = ParticleField::sample_initial(u0, 2.0, 0.05, flux, 0.01);
  const double tau = 0.9 * *f.first_collision_time();
  f.advance(tau);
  auto ref = ParticleField::sample_initial(u0, 2.0, 0.05, flux, 0.01);
  double particle_err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Particle p0 = ref.particles[i];
    particle_err = std::max(
        particle_err,
        std::abs(f.particles[i].x - (p0.x + flux.wave_speed(p0.u) * tau)));
    particle_err = std::max(particle_err, std::abs(f.particles[i].u - p0.u));
  }
  auto max_err = [&](double h) {
    auto g = ParticleField::sample_initial(u0, 2.0, h, flux, h / 4);
    g.advance(tau);
    double e = 0.0;
    for (double x = 0.4; x <= 1.7; x += 0.001)
      e = std::max(e, std::abs(g.interpolant_value(x) -
                               oracle::moc_value(flux, u0, x, tau, -1.0, 3.0)));
    return e;
  };
  const double order = std::log2(max_err(0.04) / max_err(0.02));
  const bool ok = particle_err <= 1e-12 && order >= 1.9;
  std::ostringstream msg;
  msg << "characteristics oracle (particle error " << particle_err
      << " <= 1e-12, h-halving order " << order << " >= 1.9)";
  report(3, ok, msg.str());
}

// 4. Riemann shock against the exact trajectory and a Godunov reference.
void criterion4() {
  FluxFunction flux(1.0, 1.0);
  const double d = 1e-3;
  auto u0 = [](double x) { return x < 0.5 ? 0.2 : 0.8; };
  // Sample well beyond [0,1]: the particle hull translates with the waves.
  std::vector<Particle> ps;
  for (double x = -1.0; x <= 2.0 + 1e-12; x += 0.01)
    ps.push_back({x, u0(x + 1e-9)});
  ParticleField f(flux, d, ps);
  f.advance(1.0);
  double shock = -1.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i)
    if (f.particles[i].u < 0.5 && f.particles[i + 1].u >= 0.5)
      shock = 0.5 * (f.particles[i].x + f.particles[i + 1].x);

  oracle::Godunov ref(flux, 1.0, 2000, u0);
  ref.run(1.0);
  double l1 = 0.0;
  const int probes = 1000;
  for (int i = 0; i < probes; ++i) {
    const double x = (i + 0.5) / probes;
    l1 += std::abs(f.interpolant_value(x) - ref.value(x)) / probes;
  }
  const bool ok = std::abs(shock - 0.5) <= 2 * d + 0.01 && l1 <= 5e-2;
  std::ostringstream msg;
  msg << "shock oracle (position offset " << std::abs(shock - 0.5) << " <= "
      << 2 * d + 0.01 << ", Godunov L1 " << l1 << " <= 5e-2)";
  report(4, ok, msg.str());
}

// 5. Node solver vs brute-force flux maximization, 1000 tuples per shape.
void criterion5() {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FluxFunction flux(1.0, 1.0);
  double worst_gamma = 0.0, worst_route = 0.0;
  bool fans_ok = true;

  auto check = [&](NodeSpec spec) {
    spec.validate();
    const std::size_t n = spec.fan_in(), m = spec.fan_out();
    std::vector<double> u_in(n), u_out(m), demands(n), supplies(m);
    for (std::size_t i = 0; i < n; ++i) {
      u_in[i] = uni(rng);
      demands[i] = flux.demand(u_in[i]);
    }
    for (std::size_t j = 0; j < m; ++j) {
      u_out[j] = uni(rng);
      supplies[j] = flux.supply(u_out[j]);
    }
    const NodeFluxes got = solve_node_fluxes(spec, demands, supplies);
    const std::vector<double> want =
        oracle::grid_search_fluxes(spec, demands, supplies);
    for (std::size_t i = 0; i < n; ++i)
      worst_gamma = std::max(worst_gamma, std::abs(got.gamma_in[i] - want[i]));
    for (std::size_t j = 0; j < m; ++j) {
      double routed = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        routed += spec.destination[j][i] * got.gamma_in[i];
      worst_route = std::max(worst_route, std::abs(routed - got.gamma_out[j]));
    }
    // Every changed boundary state must radiate away from the node.
    for (std::size_t i = 0; i < n; ++i) {
      const double u_hat =
          riemann_new_state(flux, u_in[i], got.gamma_in[i], true);
      if (std::abs(u_hat - u_in[i]) > 1e-12 &&
          classify_edge(flux, u_in[i], u_hat, true) == EdgeClass::influencing)
        fans_ok = false;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double u_hat =
          riemann_new_state(flux, u_out[j], got.gamma_out[j], false);
      if (std::abs(u_hat - u_out[j]) > 1e-12 &&
          classify_edge(flux, u_out[j], u_hat, false) == EdgeClass::influencing)
        fans_ok = false;
    }
  };

  for (int trial = 0; trial < 1000; ++trial) {
    check({{0}, {1}, {}, {}});
    const double a = uni(rng);
    check({{0}, {1, 2}, {{a}, {1.0 - a}}, {}});
    check({{0, 1}, {2}, {}, {0.1 + uni(rng), 0.1 + uni(rng)}});
  }
  const bool ok = worst_gamma <= 2e-3 && worst_route <= 1e-12 && fans_ok;
  std::ostringstream msg;
  msg << "node solver vs grid search (max flux gap " << worst_gamma
      << " <= 2e-3, routing identity gap " << worst_route
      << " <= 1e-12, fans move away: " << (fans_ok ? "yes" : "no") << ")";
  report(5, ok, msg.str());
}

// 6. Chord-average identity for the parabolic flux.
void criterion6() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst = 0.0, worst_quad = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double vm = 0.5 + uni(rng), um = 0.5 + 1.5 * uni(rng);
    FluxFunction flux(vm, um);
    const double u = um * uni(rng), v = um * uni(rng);
    worst =
        std::max(worst, std::abs(flux.chord_average(u, v) - 0.5 * (u + v)));
    if (trial % 500 == 0)  // quadrature cross-check on a subsample
      worst_quad = std::max(
          worst_quad, std::abs(flux.chord_average(u, v) -
                               oracle::chord_average_by_quadrature(flux, u, v)));
  }
  const bool ok = worst < 1e-12 && worst_quad < 1e-6;
  std::ostringstream msg;
  msg << "chord average (max identity gap " << worst
      << " < 1e-12 on 10000 pairs, quadrature gap " << worst_quad
      << " < 1e-6)";
  report(6, ok, msg.str());
}

// Largest upward rise across a short span on each edge (shock locator). The
// rise is accumulated over a window of a few shock distances: a single shock
// may be resolved by more than one particle pair.
std::optional<double> shock_position(const ParticleField& f) {
  double best_jump = 0.25, pos = -1.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    for (std::size_t j = i + 1;
         j < f.size() &&
         f.particles[j].x - f.particles[i].x <= 4 * f.shock_distance + 1e-12;
         ++j) {
      const double jump = f.particles[j].u - f.particles[i].u;
      if (jump > best_jump) {
        best_jump = jump;
        pos = 0.5 * (f.particles[i].x + f.particles[j].x);
      }
    }
  }
  if (pos < 0.0) return std::nullopt;
  return pos;
}

// 7. Diamond network at three resolutions: no fail-safe, consistent shocks.
void criterion7() {
  std::vector<RunResult> runs;
  std::size_t fallbacks = 0;
  for (double s : {1.0, 5.0, 20.0}) {
    SimConfig cfg;
    cfg.network = diamond_network(s);
    cfg.dt = 1e-2 * s;
    cfg.t_final = 2.0;
    runs.push_back(run_simulation(cfg));
    fallbacks += runs.back().diag.fallback_reconstructions;
  }
  // Shock positions extracted from the s=1 and s=5 runs agree within 0.05.
  bool shocks_ok = true;
  int shocks_found = 0;
  std::ostringstream detail;
  for (std::size_t e = 0; e < runs[0].final_fields.size(); ++e) {
    const auto p1 = shock_position(runs[0].final_fields[e]);
    const auto p5 = shock_position(runs[1].final_fields[e]);
    if (!p1) continue;
    ++shocks_found;
    if (!p5 || std::abs(*p1 - *p5) > 0.05) shocks_ok = false;
  }
  const bool ok = fallbacks == 0 && shocks_ok && shocks_found > 0;
  std::ostringstream msg;
  msg << "diamond robustness (fail-safe activations " << fallbacks
      << " == 0; " << shocks_found
      << " shocks at s=1, positions match s=5 within 0.05: "
      << (shocks_ok ? "yes" : "no") << ")";
  report(7, ok, msg.str());
}

// 8. Byte-identical snapshots, serial vs parallel, on criteria 1 and 7 configs.
void criterion8() {
  auto render = [](const SimConfig& cfg) {
    const RunResult r = run_simulation(cfg);
    std::ostringstream os;
    write_snapshots(r.snapshots, os);
    return os.str();
  };
  bool ok = true;
  {
    SimConfig cfg;
    cfg.network = bottleneck_network(8e-4, 2e-4);
    cfg.dt = 0.25;  // k = 4 member of the criterion-1 family
    cfg.t_final = 3.0;
    cfg.snapshot_every = 1.0;
    const std::string serial = render(cfg);
    cfg.parallel = true;
    ok = ok && serial == render(cfg) && serial == render(cfg);
  }
  {
    SimConfig cfg;
    cfg.network = diamond_network(5.0);
    cfg.dt = 5e-2;
    cfg.t_final = 2.0;
    cfg.snapshot_every = 0.5;
    const std::string serial = render(cfg);
    cfg.parallel = true;
    ok = ok && serial == render(cfg);
  }
  report(8, ok, "determinism (serial vs parallel snapshots byte-identical)");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  return failures == 0 ? 0 : 1;
}
