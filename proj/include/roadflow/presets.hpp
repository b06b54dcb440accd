#pragma once

#include "roadflow/network.hpp"

namespace roadflow {

// Two-road bottleneck: a slow wide road (v=1, u_max=2) feeding a fast narrow
// one (v=1.5, u_max=1). Initial data u1(x) = 1-x, u2(x) = 0.8x; density 1
// prescribed upstream, 0.8 downstream.
inline Network bottleneck_network(double h, double d) {
  Network net;
  EdgeSpec e1;
  e1.id = "e1";
  e1.length = 1.0;
  e1.flux = FluxFunction(1.0, 2.0);
  e1.h = h;
  e1.d = d;
  e1.init = {InitialProfile::Kind::linear, 1.0, -1.0};
  EdgeSpec e2 = e1;
  e2.id = "e2";
  e2.flux = FluxFunction(1.5, 1.0);
  e2.init = {InitialProfile::Kind::linear, 0.0, 0.8};
  net.edges = {e1, e2};
  NodeSpec node;
  node.in_edges = {0};
  node.out_edges = {1};
  net.nodes = {node};
  net.boundaries = {{0, Side::left, false, 1.0}, {1, Side::right, false, 0.8}};
  net.validate();
  return net;
}

// Seven-edge diamond: one inflow road splitting twice (even splits), two
// confluences, one outflow road. All roads identical (L=1, v=1, u_max=1),
// initial data 0.4 + 0.4 cos(3 pi x) everywhere. `scale` multiplies the
// resolution parameters h and d (the driver scales dt the same way).
inline Network diamond_network(double scale) {
  Network net;
  for (int i = 1; i <= 7; ++i) {
    EdgeSpec e;
    e.id = "e" + std::to_string(i);
    e.length = 1.0;
    e.flux = FluxFunction(1.0, 1.0);
    e.h = 2e-2 * scale;
    e.d = 5e-3 * scale;
    e.init = {InitialProfile::Kind::cosine, 0.4, 0.4, 3.0};
    net.edges.push_back(e);
  }
  auto split = [](int in, int out1, int out2) {
    NodeSpec n;
    n.in_edges = {in};
    n.out_edges = {out1, out2};
    n.destination = {{0.5}, {0.5}};
    return n;
  };
  auto merge = [](int in1, int in2, int out) {
    NodeSpec n;
    n.in_edges = {in1, in2};
    n.out_edges = {out};
    return n;
  };
  net.nodes = {split(0, 1, 2), split(2, 3, 4), merge(1, 4, 5), merge(5, 3, 6)};
  net.boundaries = {{0, Side::left, false, 0.8}, {6, Side::right, true, 0.0}};
  net.validate();
  return net;
}

}  // namespace roadflow
