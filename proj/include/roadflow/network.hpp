#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "roadflow/area_sync.hpp"
#include "roadflow/node_riemann.hpp"
#include "roadflow/particle_field.hpp"

namespace roadflow {

struct InitialProfile {
  enum class Kind { constant, linear, cosine, samples };
  Kind kind = Kind::constant;
  double a = 0.0;
  double b = 0.0;
  double k = 0.0;              // cosine wavenumber: a + b cos(k pi x)
  std::vector<double> values;  // samples, equispaced over [0, L]

  double operator()(double x, double length) const {
    switch (kind) {
      case Kind::constant:
        return a;
      case Kind::linear:
        return a + b * x;
      case Kind::cosine:
        return a + b * std::cos(k * 3.14159265358979323846 * x);
      case Kind::samples: {
        if (values.empty())
          throw ValidationError("profile", "samples() needs at least one value");
        if (values.size() == 1) return values[0];
        double s = x / length * static_cast<double>(values.size() - 1);
        s = std::max(0.0, std::min(s, static_cast<double>(values.size() - 1)));
        const auto i =
            std::min(static_cast<std::size_t>(s), values.size() - 2);
        const double t = s - static_cast<double>(i);
        return values[i] + t * (values[i + 1] - values[i]);
      }
    }
    throw InternalError("unknown profile kind");
  }
};

struct EdgeSpec {
  std::string id;
  double length = 1.0;
  FluxFunction flux;
  double h = 0.0;  // target particle spacing
  double d = 0.0;  // shock-insertion distance
  InitialProfile init;

  void validate() const {
    if (!(length > 0.0))
      throw ValidationError("edge_length", "edge " + id + ": L must be positive");
    if (!(d > 0.0) || !(d <= h) || !(h < length))
      throw ValidationError("edge_spacing",
                            "edge " + id + ": need 0 < d <= h < L");
  }

  ParticleField make_field() const {
    const InitialProfile& profile = init;
    const double L = length;
    return ParticleField::sample_initial(
        [&profile, L](double x) { return profile(x, L); }, L, h, flux, d);
  }
};

struct BoundarySpec {
  int edge = -1;
  Side end = Side::left;
  bool absorbing = false;
  double u = 0.0;
};

struct Network {
  std::vector<EdgeSpec> edges;
  std::vector<NodeSpec> nodes;  // in_edges/out_edges are indices into edges
  std::vector<BoundarySpec> boundaries;

  int edge_index(const std::string& id) const {
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (edges[i].id == id) return static_cast<int>(i);
    return -1;
  }

  // Validates every component and checks that each edge end (right end feeds
  // a node's ingoing slot or a boundary; left end takes a node's outgoing
  // slot or a boundary) is attached exactly once.
  void validate() {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i].validate();
      for (std::size_t j = i + 1; j < edges.size(); ++j)
        if (edges[i].id == edges[j].id)
          throw ValidationError("edge_id", "duplicate edge id " + edges[i].id);
    }
    std::vector<int> right_uses(edges.size(), 0), left_uses(edges.size(), 0);
    auto check_index = [&](int e) {
      if (e < 0 || e >= static_cast<int>(edges.size()))
        throw ValidationError("unknown_edge", "edge index out of range");
    };
    for (NodeSpec& node : nodes) {
      node.validate();
      for (int e : node.in_edges) {
        check_index(e);
        ++right_uses[e];
      }
      for (int e : node.out_edges) {
        check_index(e);
        ++left_uses[e];
      }
    }
    for (const BoundarySpec& bc : boundaries) {
      check_index(bc.edge);
      ++(bc.end == Side::right ? right_uses : left_uses)[bc.edge];
      if (!bc.absorbing) {
        const double um = edges[bc.edge].flux.u_max;
        if (bc.u < 0.0 || bc.u > um)
          throw ValidationError("boundary_value",
                                "boundary density outside [0, u_max] on edge " +
                                    edges[bc.edge].id);
      }
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (right_uses[e] != 1)
        throw ValidationError("edge_attachment",
                              "right end of edge " + edges[e].id +
                                  " must attach to exactly one node or boundary");
      if (left_uses[e] != 1)
        throw ValidationError("edge_attachment",
                              "left end of edge " + edges[e].id +
                                  " must attach to exactly one node or boundary");
    }
  }

  // Largest synchronization step: information must not cross any edge
  // midpoint within one step, so dt <= (L/2) / v_max on every edge.
  double max_sync_dt() const {
    if (edges.empty())
      throw ValidationError("network_empty", "network has no edges");
    double dt = std::numeric_limits<double>::infinity();
    for (const EdgeSpec& e : edges)
      dt = std::min(dt, 0.5 * e.length / e.flux.v_max);
    return dt;
  }
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Cursor {
  std::string_view text;
  int line = 0;

  bool next_line(std::string& out) {
    while (!text.empty()) {
      const std::size_t nl = text.find('\n');
      std::string_view raw =
          nl == std::string_view::npos ? text : text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{}
                                          : text.substr(nl + 1);
      ++line;
      const std::size_t hash = raw.find('#');
      if (hash != std::string_view::npos) raw = raw.substr(0, hash);
      std::size_t b = raw.find_first_not_of(" \t\r");
      if (b == std::string_view::npos) continue;
      std::size_t e = raw.find_last_not_of(" \t\r");
      out.assign(raw.substr(b, e - b + 1));
      return true;
    }
    return false;
  }
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> toks;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) toks.push_back(s.substr(i, j - i));
    i = j;
  }
  return toks;
}

inline double parse_number(const std::string& tok, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ValidationError("syntax", "line " + std::to_string(line) +
                                        ": bad number '" + tok + "'");
  }
  if (used != tok.size())
    throw ValidationError("syntax", "line " + std::to_string(line) +
                                        ": bad number '" + tok + "'");
  return v;
}

inline std::vector<double> parse_number_list(const std::string& s, int line) {
  std::vector<double> out;
  for (const std::string& part : split(s, ','))
    out.push_back(parse_number(part, line));
  return out;
}

// key=value pair; value may itself contain '=',''s are split on the first.
inline bool split_kv(const std::string& tok, std::string& key,
                     std::string& value) {
  const std::size_t eq = tok.find('=');
  if (eq == std::string::npos) return false;
  key = tok.substr(0, eq);
  value = tok.substr(eq + 1);
  return true;
}

inline InitialProfile parse_profile(const std::string& s, int line) {
  const std::size_t open = s.find('(');
  if (open == std::string::npos || s.back() != ')')
    throw ValidationError("syntax", "line " + std::to_string(line) +
                                        ": bad init spec '" + s + "'");
  const std::string name = s.substr(0, open);
  const std::vector<double> args =
      parse_number_list(s.substr(open + 1, s.size() - open - 2), line);
  InitialProfile p;
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ValidationError("syntax", "line " + std::to_string(line) + ": " +
                                          name + " takes " + std::to_string(n) +
                                          " arguments");
  };
  if (name == "constant") {
    need(1);
    p.kind = InitialProfile::Kind::constant;
    p.a = args[0];
  } else if (name == "linear") {
    need(2);
    p.kind = InitialProfile::Kind::linear;
    p.a = args[0];
    p.b = args[1];
  } else if (name == "cosine") {
    need(3);
    p.kind = InitialProfile::Kind::cosine;
    p.a = args[0];
    p.b = args[1];
    p.k = args[2];
  } else if (name == "samples") {
    if (args.empty())
      throw ValidationError("syntax", "line " + std::to_string(line) +
                                          ": samples() needs values");
    p.kind = InitialProfile::Kind::samples;
    p.values = args;
  } else {
    throw ValidationError("syntax", "line " + std::to_string(line) +
                                        ": unknown profile '" + name + "'");
  }
  return p;
}

inline std::string serialize_profile(const InitialProfile& p) {
  using Kind = InitialProfile::Kind;
  switch (p.kind) {
    case Kind::constant:
      return "constant(" + fmt17(p.a) + ")";
    case Kind::linear:
      return "linear(" + fmt17(p.a) + "," + fmt17(p.b) + ")";
    case Kind::cosine:
      return "cosine(" + fmt17(p.a) + "," + fmt17(p.b) + "," + fmt17(p.k) + ")";
    case Kind::samples: {
      std::string out = "samples(";
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        if (i) out += ',';
        out += fmt17(p.values[i]);
      }
      return out + ")";
    }
  }
  throw InternalError("unknown profile kind");
}

}  // namespace detail

// Line-oriented network document. '#' starts a comment. Directives:
//   edge <id> L=<f> vmax=<f> umax=<f> h=<f> d=<f> init=<profile>
//   node in=<id,...> out=<id,...> [A=<row;row;...>] [c=<f,...>]
//   boundary edge=<id> end=<left|right> <u=<f>|absorbing>
inline Network parse_network(std::string_view text) {
  using namespace detail;
  Network net;
  // Node edge ids must be resolved after all edges are known.
  struct PendingNode {
    std::vector<std::string> in_ids, out_ids;
    NodeSpec spec;
    int line = 0;
  };
  std::vector<PendingNode> pending_nodes;
  struct PendingBoundary {
    std::string edge_id;
    BoundarySpec spec;
    int line = 0;
  };
  std::vector<PendingBoundary> pending_boundaries;

  Cursor cur{text};
  std::string line;
  while (cur.next_line(line)) {
    const std::vector<std::string> toks = tokenize(line);
    const std::string& head = toks[0];
    auto syntax = [&](const std::string& msg) {
      return ValidationError("syntax",
                             "line " + std::to_string(cur.line) + ": " + msg);
    };
    if (head == "edge") {
      if (toks.size() < 2) throw syntax("edge needs an id");
      EdgeSpec e;
      e.id = toks[1];
      double vmax = 1.0, umax = 1.0;
      bool have_init = false;
      for (std::size_t i = 2; i < toks.size(); ++i) {
        std::string key, value;
        if (!split_kv(toks[i], key, value))
          throw syntax("expected key=value, got '" + toks[i] + "'");
        if (key == "L")
          e.length = parse_number(value, cur.line);
        else if (key == "vmax")
          vmax = parse_number(value, cur.line);
        else if (key == "umax")
          umax = parse_number(value, cur.line);
        else if (key == "h")
          e.h = parse_number(value, cur.line);
        else if (key == "d")
          e.d = parse_number(value, cur.line);
        else if (key == "init") {
          e.init = parse_profile(value, cur.line);
          have_init = true;
        } else {
          throw syntax("unknown edge key '" + key + "'");
        }
      }
      if (!have_init) throw syntax("edge " + e.id + " needs init=");
      e.flux = FluxFunction(vmax, umax);
      net.edges.push_back(std::move(e));
    } else if (head == "node") {
      PendingNode pn;
      pn.line = cur.line;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        std::string key, value;
        if (!split_kv(toks[i], key, value))
          throw syntax("expected key=value, got '" + toks[i] + "'");
        if (key == "in")
          pn.in_ids = split(value, ',');
        else if (key == "out")
          pn.out_ids = split(value, ',');
        else if (key == "A")
          for (const std::string& row : split(value, ';'))
            pn.spec.destination.push_back(parse_number_list(row, cur.line));
        else if (key == "c")
          pn.spec.merge_weights = parse_number_list(value, cur.line);
        else
          throw syntax("unknown node key '" + key + "'");
      }
      if (pn.in_ids.empty() || pn.out_ids.empty())
        throw syntax("node needs in= and out=");
      pending_nodes.push_back(std::move(pn));
    } else if (head == "boundary") {
      PendingBoundary pb;
      pb.line = cur.line;
      bool have_end = false, have_cond = false;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (toks[i] == "absorbing") {
          pb.spec.absorbing = true;
          have_cond = true;
          continue;
        }
        std::string key, value;
        if (!split_kv(toks[i], key, value))
          throw syntax("expected key=value, got '" + toks[i] + "'");
        if (key == "edge") {
          pb.edge_id = value;
        } else if (key == "end") {
          if (value == "left")
            pb.spec.end = Side::left;
          else if (value == "right")
            pb.spec.end = Side::right;
          else
            throw syntax("end must be left or right");
          have_end = true;
        } else if (key == "u") {
          pb.spec.u = parse_number(value, cur.line);
          have_cond = true;
        } else {
          throw syntax("unknown boundary key '" + key + "'");
        }
      }
      if (pb.edge_id.empty() || !have_end || !have_cond)
        throw syntax("boundary needs edge=, end= and u=/absorbing");
      pending_boundaries.push_back(std::move(pb));
    } else {
      throw syntax("unknown directive '" + head + "'");
    }
  }

  auto resolve = [&](const std::string& id, int at_line) {
    const int e = net.edge_index(id);
    if (e < 0)
      throw ValidationError("unknown_edge", "line " + std::to_string(at_line) +
                                                ": unknown edge id '" + id +
                                                "'");
    return e;
  };
  for (PendingNode& pn : pending_nodes) {
    for (const std::string& id : pn.in_ids)
      pn.spec.in_edges.push_back(resolve(id, pn.line));
    for (const std::string& id : pn.out_ids)
      pn.spec.out_edges.push_back(resolve(id, pn.line));
    net.nodes.push_back(std::move(pn.spec));
  }
  for (PendingBoundary& pb : pending_boundaries) {
    pb.spec.edge = resolve(pb.edge_id, pb.line);
    net.boundaries.push_back(pb.spec);
  }
  net.validate();
  return net;
}

inline std::string serialize_network(const Network& net) {
  using detail::fmt17;
  std::string out;
  for (const EdgeSpec& e : net.edges) {
    out += "edge " + e.id + " L=" + fmt17(e.length) +
           " vmax=" + fmt17(e.flux.v_max) + " umax=" + fmt17(e.flux.u_max) +
           " h=" + fmt17(e.h) + " d=" + fmt17(e.d) +
           " init=" + detail::serialize_profile(e.init) + "\n";
  }
  auto id_list = [&](const std::vector<int>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ',';
      s += net.edges[ids[i]].id;
    }
    return s;
  };
  for (const NodeSpec& node : net.nodes) {
    out += "node in=" + id_list(node.in_edges) +
           " out=" + id_list(node.out_edges) + " A=";
    for (std::size_t j = 0; j < node.destination.size(); ++j) {
      if (j) out += ';';
      for (std::size_t i = 0; i < node.destination[j].size(); ++i) {
        if (i) out += ',';
        out += fmt17(node.destination[j][i]);
      }
    }
    out += " c=";
    for (std::size_t i = 0; i < node.merge_weights.size(); ++i) {
      if (i) out += ',';
      out += fmt17(node.merge_weights[i]);
    }
    out += "\n";
  }
  for (const BoundarySpec& bc : net.boundaries) {
    out += "boundary edge=" + net.edges[bc.edge].id +
           " end=" + (bc.end == Side::left ? std::string("left") : "right");
    out += bc.absorbing ? " absorbing" : " u=" + fmt17(bc.u);
    out += "\n";
  }
  return out;
}

// Mutable per-boundary run state: the flux installed by the previous
// synchronization (the ghost trace is constant, so its integrated flux over
// the elapsed step is exactly gamma_prev * dt) and the cumulative exchange.
struct BoundaryLedger {
  double gamma_prev = 0.0;
  double inflow = 0.0;   // area that entered through this boundary
  double outflow = 0.0;  // area that left through this boundary
};

// External boundary as a virtual 1-to-1 junction against a constant ghost
// state: same trim / Riemann / area bookkeeping as an interior node, with the
// ghost side's integrated flux known exactly.
inline void apply_external_boundary(ParticleField& field, double length,
                                    const BoundarySpec& bc, double dt,
                                    BoundaryLedger& ledger,
                                    SyncDiagnostics& diag) {
  const Side side = bc.end;
  const double sigma = detail::end_sign(side);
  const TrimResult tr = field.boundary_trim(length, side);
  const double credit = field.take_credit(side);
  const bool known = tr.gap <= 0.0;
  const EndState probe{side, field.flux, tr.extremal_value};
  const double g_dt = detail::area_flux(probe) * dt;

  const FluxFunction& flux = field.flux;
  const double trace = tr.boundary_value;
  double gamma, edge_cap;
  bool ingoing;
  if (side == Side::right) {
    const double ghost_supply = bc.absorbing ? flux.max_flow() : flux.supply(bc.u);
    edge_cap = flux.demand(trace);
    gamma = std::min(edge_cap, ghost_supply);
    ingoing = true;
  } else {
    const double ghost_demand = bc.absorbing ? 0.0 : flux.demand(bc.u);
    edge_cap = flux.supply(trace);
    gamma = std::min(ghost_demand, edge_cap);
    ingoing = false;
  }

  double phi;  // integrated flux through the boundary over the elapsed step
  if (known) {
    phi = sigma * (tr.excess - credit) + g_dt;
    // If the ghost side admits less flux than the uncoupled evolution pushed
    // through the boundary (its constraint became binding during the step),
    // the overshoot stays in the edge as queued-up area. That linear flux
    // path only applies when the extremal characteristics actually crossed
    // the boundary outward; a stationary or inward extremal value is itself
    // the admitted boundary state, so the flux ran at f(u_ext) and any
    // measured deviation is merge noise refunded to the edge.
    const double ws = flux.wave_speed(tr.extremal_value);
    const bool outward = side == Side::right ? ws > 0.0 : ws < 0.0;
    const double surplus =
        outward ? detail::clipped_flux_surplus(flux.flow(tr.extremal_value),
                                               edge_cap, gamma, dt)
                : phi - flux.flow(tr.extremal_value) * dt;
    if (surplus != 0.0) {
      phi -= surplus;
      reconstruct_area(field, sigma * surplus, side, diag);
    }
  } else {
    // The ghost trace is constant, so its flux integral is known exactly.
    phi = ledger.gamma_prev * dt;
    const double end_area = phi - g_dt;
    reconstruct_area(field, -sigma * end_area - tr.gap_area - credit, side,
                     diag);
  }
  // Net area the boundary handed the edge is -sigma * phi (left end: +phi).
  const double net = -sigma * phi;
  if (net >= 0.0)
    ledger.inflow += net;
  else
    ledger.outflow -= net;

  field.insert_boundary_state(riemann_new_state(flux, trace, gamma, ingoing),
                              side);
  ledger.gamma_prev = gamma;
}

}  // namespace roadflow
