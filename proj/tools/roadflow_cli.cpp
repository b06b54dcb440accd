#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "roadflow/presets.hpp"
#include "roadflow/sim_driver.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDiagnostic = 3;

roadflow::Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw roadflow::ValidationError("io", "cannot read network file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return roadflow::parse_network(buf.str());
}

void override_spacing(roadflow::Network& net, double h, double d) {
  for (roadflow::EdgeSpec& e : net.edges) {
    if (h > 0.0) e.h = h;
    if (d > 0.0) e.d = d;
  }
  net.validate();
}

void write_output(const std::vector<roadflow::Snapshot>& snaps,
                  const std::string& out_path) {
  if (out_path.empty()) {
    roadflow::write_snapshots(snaps, std::cout);
    return;
  }
  std::ofstream out(out_path);
  if (!out)
    throw roadflow::ValidationError("io", "cannot write " + out_path);
  roadflow::write_snapshots(snaps, out);
}

int report(const roadflow::RunResult& r, bool strict_tvd) {
  std::fprintf(stderr,
               "area initial=%.17g final=%.17g inflow=%.17g outflow=%.17g "
               "audit=%.3e\n",
               r.initial_area, r.final_area, r.inflow, r.outflow,
               r.final_area - r.initial_area - (r.inflow - r.outflow));
  if (r.diag.fallback_reconstructions > 0)
    std::fprintf(stderr,
                 "diagnostic: %ld fail-safe reconstructions (%ld out of "
                 "range)\n",
                 r.diag.fallback_reconstructions, r.diag.out_of_range_values);
  if (strict_tvd && r.diag.fallback_reconstructions > 0) return kExitDiagnostic;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LWR traffic flow on road networks via characteristic particles"};
  // Help is --help only: the short -h would collide with the --h option.
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  std::string network_path, out_path;
  double dt = 0.0, tfinal = -1.0, h = 0.0, d = 0.0, snapshot_every = 0.0;
  double scale = 1.0;
  int kmin = 4, kmax = 12, kref = 16;
  bool strict_tvd = false, parallel = false;

  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print help");
    sub->add_option("--dt", dt, "synchronization time step");
    sub->add_option("--tfinal", tfinal, "final time");
    sub->add_option("--h", h, "particle spacing override");
    sub->add_option("--d", d, "shock-insertion distance override");
    sub->add_option("--snapshot-every", snapshot_every, "snapshot interval");
    sub->add_option("--out", out_path, "output CSV path (default stdout)");
    sub->add_flag("--strict-tvd", strict_tvd,
                  "exit 3 if the fail-safe reconstruction triggers");
    sub->add_flag("--parallel", parallel, "advance edges on a thread pool");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "simulate a network file");
  cmd_run->add_option("--network", network_path, "network document")
      ->required();
  add_common(cmd_run);

  CLI::App* cmd_conv = app.add_subcommand(
      "converge", "bottleneck time-step refinement study");
  cmd_conv->add_option("--network", network_path,
                       "network document (default: built-in bottleneck)");
  cmd_conv->add_option("--kmin", kmin, "smallest k, dt = 2^(-k/2)");
  cmd_conv->add_option("--kmax", kmax, "largest k");
  cmd_conv->add_option("--kref", kref, "reference k");
  add_common(cmd_conv);

  CLI::App* cmd_diamond =
      app.add_subcommand("diamond", "seven-edge diamond network run");
  cmd_diamond->add_option("--scale", scale, "resolution scale s");
  add_common(cmd_diamond);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      roadflow::Network net = load_network(network_path);
      override_spacing(net, h, d);
      roadflow::SimConfig cfg;
      cfg.network = std::move(net);
      cfg.dt = dt;
      cfg.t_final = tfinal < 0.0 ? 1.0 : tfinal;
      cfg.snapshot_every = snapshot_every;
      cfg.parallel = parallel;
      const roadflow::RunResult r = roadflow::run_simulation(cfg);
      write_output(r.snapshots, out_path);
      return report(r, strict_tvd);
    }
    if (cmd_conv->parsed()) {
      roadflow::Network net = network_path.empty()
                                  ? roadflow::bottleneck_network(8e-4, 2e-4)
                                  : load_network(network_path);
      override_spacing(net, h, d);
      std::vector<int> ks;
      for (int k = kmin; k <= kmax; ++k) ks.push_back(k);
      const int edge = net.edges.size() > 1 ? 1 : 0;
      const roadflow::ConvergenceResult res = roadflow::convergence_study(
          net, tfinal < 0.0 ? 3.0 : tfinal, ks, kref, edge, 0.0, 0.3,
          parallel);
      std::ostringstream table;
      table << "k,dt,linf,l2\n";
      for (const roadflow::ConvergenceRow& row : res.rows)
        table << row.k << ',' << roadflow::detail::fmt17(row.dt) << ','
              << roadflow::detail::fmt17(row.linf) << ','
              << roadflow::detail::fmt17(row.l2) << '\n';
      if (out_path.empty()) {
        std::cout << table.str();
      } else {
        std::ofstream out(out_path);
        out << table.str();
      }
      std::fprintf(stderr, "fitted order: linf=%.3f l2=%.3f\n", res.order_linf,
                   res.order_l2);
      return 0;
    }
    // diamond
    roadflow::SimConfig cfg;
    cfg.network = roadflow::diamond_network(scale);
    override_spacing(cfg.network, h, d);
    cfg.dt = dt > 0.0 ? dt : 1e-2 * scale;
    cfg.t_final = tfinal < 0.0 ? 2.0 : tfinal;
    cfg.snapshot_every = snapshot_every;
    cfg.parallel = parallel;
    const roadflow::RunResult r = roadflow::run_simulation(cfg);
    write_output(r.snapshots, out_path);
    return report(r, strict_tvd);
  } catch (const roadflow::ValidationError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.code.c_str(), e.what());
    return kExitValidation;
  } catch (const roadflow::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
