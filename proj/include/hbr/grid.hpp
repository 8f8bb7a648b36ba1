#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace hbr {

enum class NodeMask : std::uint8_t { exterior = 0, interior = 1, boundary = 2 };

// Node (i, j) sits at origin + h (i, j); storage is row-major with j outer.
struct GridField {
  int nx = 0, ny = 0;
  double h = 1.0;
  Vec2 origin{};
  std::vector<double> values;
  std::vector<NodeMask> mask;
  std::vector<double> boundary_data;  // meaningful on boundary nodes only

  std::size_t size() const { return std::size_t(nx) * std::size_t(ny); }
  std::size_t idx(int i, int j) const { return std::size_t(j) * std::size_t(nx) + std::size_t(i); }
  Vec2 pos(int i, int j) const { return {origin.x + h * i, origin.y + h * j}; }
  Vec2 pos(std::size_t k) const { return pos(int(k % std::size_t(nx)), int(k / std::size_t(nx))); }
  bool is(std::size_t k, NodeMask m) const { return mask[k] == m; }

  std::size_t count(NodeMask m) const {
    std::size_t n = 0;
    for (auto v : mask) n += v == m;
    return n;
  }

  // Bilinear interpolation; every corner of the containing cell must be non-exterior.
  double sample(Vec2 p) const {
    double fx = (p.x - origin.x) / h, fy = (p.y - origin.y) / h;
    int i = int(std::floor(fx)), j = int(std::floor(fy));
    if (i == nx - 1) --i;
    if (j == ny - 1) --j;
    if (i < 0 || j < 0 || i + 1 >= nx || j + 1 >= ny) throw ArgumentError("sample point outside the grid");
    double tx = fx - i, ty = fy - j;
    for (auto k : {idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)})
      if (mask[k] == NodeMask::exterior) throw ArgumentError("sample point touches an exterior node");
    return (1 - tx) * (1 - ty) * values[idx(i, j)] + tx * (1 - ty) * values[idx(i + 1, j)] +
           (1 - tx) * ty * values[idx(i, j + 1)] + tx * ty * values[idx(i + 1, j + 1)];
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write grid file '" + path + "'");
    out << std::setprecision(17);
    out << nx << ' ' << ny << ' ' << h << '\n';
    out << "mask 0=exterior 1=interior 2=boundary\n";
    out << "origin " << origin.x << ' ' << origin.y << '\n';
    for (std::size_t k = 0; k < size(); ++k)
      out << int(mask[k]) << ' ' << (mask[k] == NodeMask::exterior ? 0.0 : values[k]) << '\n';
  }

  static GridField read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid file '" + path + "'");
    GridField g;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("grid file is empty");
    {
      std::istringstream ss(line);
      if (!(ss >> g.nx >> g.ny >> g.h) || g.nx < 1 || g.ny < 1 || !(g.h > 0))
        throw ConfigError("grid header must read 'nx ny h'");
    }
    if (!std::getline(in, line) || line.rfind("mask", 0) != 0) throw ConfigError("grid file lacks the mask legend");
    std::streampos after_legend = in.tellg();
    if (std::getline(in, line) && line.rfind("origin", 0) == 0) {
      std::istringstream ss(line.substr(6));
      ss >> g.origin.x >> g.origin.y;
    } else {
      in.clear();
      in.seekg(after_legend);
    }
    g.values.assign(g.size(), 0.0);
    g.mask.assign(g.size(), NodeMask::exterior);
    g.boundary_data.assign(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      int m;
      double v;
      if (!(in >> m >> v) || m < 0 || m > 2) throw ConfigError("grid record " + std::to_string(k) + " malformed");
      g.mask[k] = NodeMask(m);
      g.values[k] = v;
      if (g.mask[k] == NodeMask::boundary) g.boundary_data[k] = v;
    }
    return g;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv '" + path + "'");
    out << std::setprecision(17) << "x,y,mask,value\n";
    for (std::size_t k = 0; k < size(); ++k) {
      if (mask[k] == NodeMask::exterior) continue;
      Vec2 p = pos(k);
      out << p.x << ',' << p.y << ',' << int(mask[k]) << ',' << values[k] << '\n';
    }
  }
};

// Interior: predicate holds and the node is off the window frame. Boundary: any other node with an
// interior 8-neighbour. Boundary data comes from data(project(p)).
inline GridField rasterize(const std::function<bool(Vec2)>& interior, const std::function<Vec2(Vec2)>& project,
                           Vec2 lo, Vec2 hi, double h, const std::function<double(Vec2)>& data) {
  if (!(h > 0.0) || !(hi.x > lo.x) || !(hi.y > lo.y)) throw ArgumentError("rasterize needs h > 0 and a non-empty window");
  GridField g;
  g.h = h;
  g.origin = lo;
  g.nx = int(std::lround((hi.x - lo.x) / h)) + 1;
  g.ny = int(std::lround((hi.y - lo.y) / h)) + 1;
  g.values.assign(g.size(), 0.0);
  g.mask.assign(g.size(), NodeMask::exterior);
  g.boundary_data.assign(g.size(), 0.0);
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i)
      if (interior(g.pos(i, j))) g.mask[g.idx(i, j)] = NodeMask::interior;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      auto k = g.idx(i, j);
      if (g.mask[k] == NodeMask::interior) continue;
      bool touches = false;
      for (int dj = -1; dj <= 1 && !touches; ++dj)
        for (int di = -1; di <= 1; ++di) {
          int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
          if (g.mask[g.idx(a, b)] == NodeMask::interior) {
            touches = true;
            break;
          }
        }
      if (!touches) continue;
      g.mask[k] = NodeMask::boundary;
      g.boundary_data[k] = data(project(g.pos(i, j)));
      g.values[k] = g.boundary_data[k];
    }
  return g;
}

// Domain clipped to the window; nodes outside the domain take data at their nearest boundary point.
inline GridField rasterize(const DomainSpec& dom, Vec2 lo, Vec2 hi, double h, const std::function<double(Vec2)>& data) {
  return rasterize([&](Vec2 p) { return dom.inside(p); },
                   [&](Vec2 p) { return dom.inside(p) ? p : dom.nearest_boundary_point(p); }, lo, hi, h, data);
}

}  // namespace hbr
