#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace hbr {

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Segment {
  Vec2 a, b;
};

inline Vec2 closest_on_segment(Vec2 p, const Segment& s) {
  Vec2 d = s.b - s.a;
  double L2 = d.dot(d);
  if (L2 == 0.0) return s.a;
  double t = std::clamp((p - s.a).dot(d) / L2, 0.0, 1.0);
  return s.a + d * t;
}

inline double dist_to_segment(Vec2 p, const Segment& s) { return dist(p, closest_on_segment(p, s)); }

// Portion of a segment inside the closed disc B(c, r), if any.
inline std::optional<Segment> clip_to_disc(const Segment& s, Vec2 c, double r) {
  Vec2 d = s.b - s.a, f = s.a - c;
  double A = d.dot(d), B = 2.0 * f.dot(d), C = f.dot(f) - r * r;
  if (A == 0.0) {
    if (C <= 0.0) return s;
    return std::nullopt;
  }
  double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t0 = std::max(0.0, (-B - sq) / (2.0 * A)), t1 = std::min(1.0, (-B + sq) / (2.0 * A));
  if (t0 > t1) return std::nullopt;
  return Segment{s.a + d * t0, s.a + d * t1};
}

enum class DomainKind { half_space, lipschitz_graph, cube, cube_minus_ball, annulus_sector };

inline std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::half_space: return "half_space";
    case DomainKind::lipschitz_graph: return "lipschitz_graph";
    case DomainKind::cube: return "cube";
    case DomainKind::cube_minus_ball: return "cube_minus_ball";
    case DomainKind::annulus_sector: return "annulus_sector";
  }
  return "?";
}

inline DomainKind domain_kind_from_string(const std::string& s) {
  if (s == "half_space") return DomainKind::half_space;
  if (s == "lipschitz_graph") return DomainKind::lipschitz_graph;
  if (s == "cube") return DomainKind::cube;
  if (s == "cube_minus_ball") return DomainKind::cube_minus_ball;
  if (s == "annulus_sector") return DomainKind::annulus_sector;
  throw ConfigError("unknown domain.kind '" + s + "'");
}

// Planar domain with exact membership and boundary distance.
//   half_space       {x2 > 0}
//   lipschitz_graph  {x2 > g(x1)}, g piecewise linear, constant beyond the table
//   cube             (x_lo, x_hi) x (y_lo, y_hi)
//   cube_minus_ball  cube \ closed ball, or cube intersected with the open ball when keep_ball_side
//   annulus_sector   {r_in < |x - c| < r_out, angle in (a0, a1)}
struct DomainSpec {
  DomainKind kind = DomainKind::half_space;
  std::vector<double> gx, gy;
  double l = 0.0;
  double r0 = 1.0;
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  Vec2 center{};
  double radius = 0.5;
  bool keep_ball_side = false;
  double r_in = 1.0, r_out = 2.0, a0 = 0.0, a1 = std::numbers::pi;

  double L() const { return std::max(l, 2.0); }

  static DomainSpec half_space(double r0 = 4.0) {
    DomainSpec d;
    d.r0 = r0;
    return d;
  }

  static DomainSpec graph(std::vector<double> xs, std::vector<double> ys, double r0 = 4.0) {
    if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("graph table needs at least two rows");
    double lip = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (!(xs[i] > xs[i - 1])) throw ConfigError("graph table x column must be strictly increasing");
      lip = std::max(lip, std::abs(ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
    }
    DomainSpec d;
    d.kind = DomainKind::lipschitz_graph;
    d.gx = std::move(xs);
    d.gy = std::move(ys);
    d.l = lip;
    d.r0 = r0;
    return d;
  }

  // g(x) = l |x| on [-extent, extent].
  static DomainSpec wedge(double l, double extent = 4.0, double r0 = 4.0) {
    return graph({-extent, 0.0, extent}, {l * extent, 0.0, l * extent}, r0);
  }

  static DomainSpec cube(double xlo, double xhi, double ylo, double yhi) {
    if (!(xhi > xlo && yhi > ylo)) throw ConfigError("cube needs x_hi > x_lo and y_hi > y_lo");
    DomainSpec d;
    d.kind = DomainKind::cube;
    d.x_lo = xlo;
    d.x_hi = xhi;
    d.y_lo = ylo;
    d.y_hi = yhi;
    d.r0 = std::min(xhi - xlo, yhi - ylo) / 2.0;
    return d;
  }

  static DomainSpec cube_minus_ball(double xlo, double xhi, double ylo, double yhi, Vec2 c, double rad,
                                    bool keep_ball_side) {
    DomainSpec d = cube(xlo, xhi, ylo, yhi);
    d.kind = DomainKind::cube_minus_ball;
    d.center = c;
    d.radius = rad;
    d.keep_ball_side = keep_ball_side;
    return d;
  }

  static DomainSpec annulus_sector(Vec2 c, double rin, double rout, double a0, double a1) {
    if (!(rout > rin && rin >= 0.0 && a1 > a0)) throw ConfigError("annulus_sector needs r_out > r_in >= 0, a1 > a0");
    DomainSpec d;
    d.kind = DomainKind::annulus_sector;
    d.center = c;
    d.r_in = rin;
    d.r_out = rout;
    d.a0 = a0;
    d.a1 = a1;
    d.r0 = (rout - rin) / 2.0;
    return d;
  }

  double g(double x) const {
    if (x <= gx.front()) return gy.front();
    if (x >= gx.back()) return gy.back();
    auto it = std::upper_bound(gx.begin(), gx.end(), x);
    std::size_t j = std::size_t(it - gx.begin()), i = j - 1;
    double w = (x - gx[i]) / (gx[j] - gx[i]);
    return (1.0 - w) * gy[i] + w * gy[j];
  }

  bool inside(Vec2 p) const {
    switch (kind) {
      case DomainKind::half_space: return p.y > 0.0;
      case DomainKind::lipschitz_graph: return p.y > g(p.x);
      case DomainKind::cube: return in_box(p);
      case DomainKind::cube_minus_ball: {
        double r = dist(p, center);
        return in_box(p) && (keep_ball_side ? r < radius : r > radius);
      }
      case DomainKind::annulus_sector: {
        Vec2 q = p - center;
        double r = q.norm(), a = std::atan2(q.y, q.x);
        return r > r_in && r < r_out && a > a0 && a < a1;
      }
    }
    return false;
  }

  // Boundary pieces within distance `reach` of `near` (arcs as chords).
  std::vector<Segment> boundary_segments(Vec2 near, double reach) const {
    std::vector<Segment> out;
    auto keep = [&](const Segment& s) {
      if (dist_to_segment(near, s) <= reach) out.push_back(s);
    };
    const double far = std::abs(near.x) + std::abs(near.y) + reach + 1.0;
    switch (kind) {
      case DomainKind::half_space:
        keep({{near.x - far, 0.0}, {near.x + far, 0.0}});
        break;
      case DomainKind::lipschitz_graph: {
        double left = std::min(gx.front(), near.x - reach) - 1.0, right = std::max(gx.back(), near.x + reach) + 1.0;
        keep({{left, gy.front()}, {gx.front(), gy.front()}});
        for (std::size_t i = 1; i < gx.size(); ++i) keep({{gx[i - 1], gy[i - 1]}, {gx[i], gy[i]}});
        keep({{gx.back(), gy.back()}, {right, gy.back()}});
        break;
      }
      case DomainKind::cube:
        for (auto& s : box_edges()) keep(s);
        break;
      case DomainKind::cube_minus_ball: {
        for (auto& s : box_edges()) {
          for (auto& piece : split_by_circle(s)) {
            Vec2 mid = (piece.a + piece.b) * 0.5;
            bool in_ball = dist(mid, center) < radius;
            if (in_ball == keep_ball_side) keep(piece);
          }
        }
        for (auto& s : circle_chords(center, radius, 0.0, 2.0 * std::numbers::pi)) {
          Vec2 mid = (s.a + s.b) * 0.5;
          if (in_box(mid)) keep(s);
        }
        break;
      }
      case DomainKind::annulus_sector: {
        for (auto& s : circle_chords(center, r_in, a0, a1)) keep(s);
        for (auto& s : circle_chords(center, r_out, a0, a1)) keep(s);
        for (double a : {a0, a1}) {
          Vec2 e{std::cos(a), std::sin(a)};
          keep({center + e * r_in, center + e * r_out});
        }
        break;
      }
    }
    return out;
  }

  // d(p, boundary); exact for segment pieces and for circles seen from inside, chord-accurate otherwise.
  double boundary_distance(Vec2 p) const {
    if (kind == DomainKind::half_space) return std::abs(p.y);
    if (inside(p)) {
      switch (kind) {
        case DomainKind::cube: return box_distance(p);
        case DomainKind::cube_minus_ball: return std::min(box_distance(p), std::abs(dist(p, center) - radius));
        case DomainKind::annulus_sector: {
          double rc = dist(p, center), d = std::min(rc - r_in, r_out - rc);
          for (double a : {a0, a1}) {
            Vec2 e{std::cos(a), std::sin(a)};
            d = std::min(d, dist_to_segment(p, {center + e * r_in, center + e * r_out}));
          }
          return d;
        }
        default: break;
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto& s : boundary_segments(p, best)) best = std::min(best, dist_to_segment(p, s));
    return best;
  }

  double signed_distance(Vec2 p) const { return inside(p) ? boundary_distance(p) : -boundary_distance(p); }

  Vec2 nearest_boundary_point(Vec2 p) const {
    if (kind == DomainKind::half_space) return {p.x, 0.0};
    Vec2 best = p;
    double bd = std::numeric_limits<double>::infinity();
    for (auto& s : boundary_segments(p, std::numeric_limits<double>::infinity())) {
      Vec2 q = closest_on_segment(p, s);
      double d = dist(p, q);
      if (d < bd) {
        bd = d;
        best = q;
      }
    }
    return best;
  }

  bool on_boundary(Vec2 w, double tol = 1e-9) const { return boundary_distance(w) <= tol; }

  // Inward unit normal used by the corkscrew march; graph kinds march along +x2.
  Vec2 inward_direction(Vec2 w) const {
    switch (kind) {
      case DomainKind::half_space:
      case DomainKind::lipschitz_graph: return {0.0, 1.0};
      default: break;
    }
    const double eps = 1e-7;
    Vec2 best{0.0, 1.0};
    double bd = -1.0;
    for (int k = 0; k < 64; ++k) {
      double a = 2.0 * std::numbers::pi * k / 64.0;
      Vec2 e{std::cos(a), std::sin(a)};
      Vec2 q = w + e * eps;
      double d = inside(q) ? boundary_distance(q) : -1.0;
      if (d > bd + 1e-15) {
        bd = d;
        best = e;
      }
    }
    return best;
  }

  // Arc-length samples of boundary within the closed disc B(c, r), spacing ds.
  std::vector<Vec2> boundary_samples(Vec2 c, double r, double ds) const {
    std::vector<Vec2> out;
    for (auto& s : boundary_segments(c, r)) {
      auto clipped = clip_to_disc(s, c, r);
      if (!clipped) continue;
      double len = dist(clipped->a, clipped->b);
      int n = std::max(1, int(std::ceil(len / ds)));
      for (int i = 0; i <= n; ++i) out.push_back(clipped->a + (clipped->b - clipped->a) * (double(i) / n));
    }
    return out;
  }

private:
  bool in_box(Vec2 p) const { return p.x > x_lo && p.x < x_hi && p.y > y_lo && p.y < y_hi; }
  double box_distance(Vec2 p) const { return std::min({p.x - x_lo, x_hi - p.x, p.y - y_lo, y_hi - p.y}); }

  std::vector<Segment> box_edges() const {
    return {{{x_lo, y_lo}, {x_hi, y_lo}},
            {{x_hi, y_lo}, {x_hi, y_hi}},
            {{x_hi, y_hi}, {x_lo, y_hi}},
            {{x_lo, y_hi}, {x_lo, y_lo}}};
  }

  std::vector<Segment> split_by_circle(const Segment& s) const {
    Vec2 d = s.b - s.a, f = s.a - center;
    double A = d.dot(d), B = 2.0 * f.dot(d), C = f.dot(f) - radius * radius;
    double disc = B * B - 4.0 * A * C;
    std::vector<double> ts = {0.0};
    if (disc > 0.0) {
      double sq = std::sqrt(disc);
      for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)})
        if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
    ts.push_back(1.0);
    std::vector<Segment> out;
    for (std::size_t i = 1; i < ts.size(); ++i) out.push_back({s.a + d * ts[i - 1], s.a + d * ts[i]});
    return out;
  }

  static std::vector<Segment> circle_chords(Vec2 c, double r, double from, double to, int per_turn = 4096) {
    int n = std::max(8, int(std::ceil(per_turn * (to - from) / (2.0 * std::numbers::pi))));
    std::vector<Segment> out;
    for (int i = 0; i < n; ++i) {
      double t0 = from + (to - from) * i / n, t1 = from + (to - from) * (i + 1) / n;
      out.push_back({c + Vec2{std::cos(t0), std::sin(t0)} * r, c + Vec2{std::cos(t1), std::sin(t1)} * r});
    }
    return out;
  }
};

// Two-column CSV "x,g(x)".
inline DomainSpec load_graph_table(const std::string& path, double r0 = 4.0) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph table '" + path + "'");
  std::vector<double> xs, ys;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a >> b)) {
      if (xs.empty() && lineno == 1) continue;
      throw ConfigError("malformed graph table line " + std::to_string(lineno));
    }
    xs.push_back(a);
    ys.push_back(b);
  }
  return DomainSpec::graph(std::move(xs), std::move(ys), r0);
}

inline double hausdorff_distance(const std::vector<Vec2>& E, const std::vector<Vec2>& F) {
  if (E.empty() || F.empty()) throw ArgumentError("hausdorff_distance needs non-empty sets");
  auto directed = [](const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
    double worst = 0.0;
    for (auto& a : A) {
      double best = std::numeric_limits<double>::infinity();
      for (auto& b : B) best = std::min(best, dist(a, b));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(E, F), directed(F, E));
}

namespace detail {

// Bucketed point set for nearest-distance queries.
class NearestIndex {
public:
  NearestIndex(const std::vector<Vec2>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts_.size(); ++i) buckets_[key(cell_of(pts_[i]))].push_back(i);
  }

  double nearest(Vec2 q) const {
    auto [ci, cj] = cell_of(q);
    double best = std::numeric_limits<double>::infinity();
    for (long k = 0;; ++k) {
      if (best < (double(k) - 1.0) * cell_) break;
      if (k > 1000000) break;
      for (long i = ci - k; i <= ci + k; ++i)
        for (long j = cj - k; j <= cj + k; ++j) {
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != k) continue;
          auto it = buckets_.find(key({i, j}));
          if (it == buckets_.end()) continue;
          for (auto idx : it->second) best = std::min(best, dist(q, pts_[idx]));
        }
    }
    return best;
  }

private:
  std::pair<long, long> cell_of(Vec2 p) const { return {long(std::floor(p.x / cell_)), long(std::floor(p.y / cell_))}; }
  static long long key(std::pair<long, long> c) { return (long long)(c.first) * 4000037LL + c.second; }
  std::vector<Vec2> pts_;
  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

}  // namespace detail

inline double lipschitz_to_delta(double l) {
  if (!(l >= 0.0)) throw ArgumentError("Lipschitz constant must be >= 0");
  if (!(l < 0.125)) throw DomainError("lipschitz_to_delta needs l < 1/8");
  return l / std::sqrt(l * l + 1.0);
}

struct ReifenbergReport {
  double delta = 0.0;
  double angle = 0.0;        // best line direction in radians
  double resolution = 0.0;   // sample spacing divided by r
  bool separated = true;
  std::size_t separation_points = 0;
};

// Scaled Hausdorff distance between boundary and the best line through w, within B(w, r).
inline ReifenbergReport reifenberg_delta(const DomainSpec& dom, Vec2 w, double r, double ds) {
  if (!(r > 0.0) || !(r < dom.r0)) throw ArgumentError("reifenberg_delta needs 0 < r < r0");
  if (!(ds > 0.0)) throw ArgumentError("sample spacing must be positive");
  if (!dom.on_boundary(w, 1e-9 + 1e-12 * r)) throw ArgumentError("w is not on the boundary");

  std::vector<Segment> bd;
  for (auto& s : dom.boundary_segments(w, r))
    if (auto c = clip_to_disc(s, w, r)) bd.push_back(*c);
  auto E = dom.boundary_samples(w, r, ds);
  if (E.empty()) throw ArgumentError("boundary has no points inside B(w, r)");
  const int nline = std::max(2, int(std::ceil(2.0 * r / ds)));

  // many pieces (arcs): nearest-sample lookup instead of exact segment distance
  std::optional<detail::NearestIndex> index;
  if (bd.size() > 64) index.emplace(E, std::max(ds, r / 64.0));
  auto to_boundary = [&](Vec2 q) {
    if (index) return index->nearest(q);
    double best = std::numeric_limits<double>::infinity();
    for (auto& s : bd) best = std::min(best, dist_to_segment(q, s));
    return best;
  };

  auto objective = [&](double theta) {
    Vec2 e{std::cos(theta), std::sin(theta)};
    Segment line{w - e * r, w + e * r};
    double worst = 0.0;
    for (auto& p : E) worst = std::max(worst, dist_to_segment(p, line));
    for (int i = 0; i <= nline; ++i) worst = std::max(worst, to_boundary(line.a + (line.b - line.a) * (double(i) / nline)));
    return worst / r;
  };

  const int coarse = 720;
  const double step = std::numbers::pi / coarse;
  int bi = 0;
  double bv = std::numeric_limits<double>::infinity();
  for (int i = 0; i < coarse; ++i) {
    double v = objective(i * step);
    if (v < bv) {
      bv = v;
      bi = i;
    }
  }
  double lo = (bi - 1) * step, hi = (bi + 1) * step;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  double fc = objective(c), fd = objective(d);
  while (hi - lo > 1e-6) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = objective(d);
    }
  }
  double theta = 0.5 * (lo + hi);
  double v = objective(theta);
  ReifenbergReport rep;
  if (v <= bv) {
    rep.delta = v;
    rep.angle = theta;
  } else {
    rep.delta = bv;
    rep.angle = bi * step;
  }
  rep.resolution = ds / r;

  // separation: interior points far from the boundary lie on one side of the line
  Vec2 e{std::cos(rep.angle), std::sin(rep.angle)}, nrm{-e.y, e.x};
  int side = 0;
  const int ng = std::max(8, int(std::ceil(2.0 * r / (4.0 * ds))));
  for (int i = 0; i <= ng; ++i)
    for (int j = 0; j <= ng; ++j) {
      Vec2 x = w + Vec2{-r + 2.0 * r * i / ng, -r + 2.0 * r * j / ng};
      if (dist(x, w) >= r || !dom.inside(x)) continue;
      if (dom.boundary_distance(x) < 2.0 * rep.delta * r) continue;
      ++rep.separation_points;
      double sd = (x - w).dot(nrm);
      int s = sd > 0 ? 1 : (sd < 0 ? -1 : 0);
      if (s == 0 || (side != 0 && s != side)) rep.separated = false;
      if (side == 0) side = s;
    }
  return rep;
}

struct CorkscrewResult {
  Vec2 point;
  double distance_to_w = 0.0;
  double clearance = 0.0;
};

// Inward march from w, starting at r/2 and stepping outward by r/64 until both corkscrew
// inequalities hold strictly.
inline CorkscrewResult corkscrew(const DomainSpec& dom, Vec2 w, double r) {
  if (!(r > 0.0) || !(r < dom.r0)) throw ArgumentError("corkscrew needs 0 < r < r0");
  const double L = dom.L();
  Vec2 n = dom.inward_direction(w);
  for (int k = 0; k < 32; ++k) {
    double t = r / 2.0 + k * r / 64.0;
    if (t >= r) break;
    Vec2 a = w + n * t;
    if (!dom.inside(a)) continue;
    double da = dist(a, w), cl = dom.boundary_distance(a);
    if (da > r / L && da < r && cl > r / L) return {a, da, cl};
  }
  throw NumericalFailure("corkscrew: no admissible point on the inward ray from w");
}

// Exterior corkscrew: some sampled point outside the closure with the same two inequalities.
inline std::optional<Vec2> exterior_corkscrew(const DomainSpec& dom, Vec2 w, double r, int samples = 64) {
  const double L = dom.L();
  for (int i = 1; i < samples; ++i)
    for (int k = 0; k < 4 * samples; ++k) {
      double t = r * double(i) / samples, a = 2.0 * std::numbers::pi * k / (4.0 * samples);
      Vec2 p = w + Vec2{std::cos(a), std::sin(a)} * t;
      if (dom.inside(p) || !(t > r / L)) continue;
      if (dom.boundary_distance(p) > r / L) return p;
    }
  return std::nullopt;
}

struct BallChain {
  std::vector<Vec2> centers;
  double radius = 0.0;
  std::size_t n_bound = 0;
  bool within_budget = true;
};

// Equal balls along the segment x -> y with 2B inside the domain.
inline BallChain harnack_chain(const DomainSpec& dom, Vec2 x, Vec2 y, double scale) {
  if (!(scale > 0.0)) throw ArgumentError("scale must be positive");
  if (!dom.inside(x) || !dom.inside(y)) throw ArgumentError("chain endpoints must be interior");
  for (Vec2 p : {x, y})
    if (dom.boundary_distance(p) < scale)
      throw PreconditionError("chain endpoint clearance " + std::to_string(dom.boundary_distance(p)) +
                              " is below the requested scale " + std::to_string(scale));
  BallChain ch;
  ch.radius = scale / 2.0;
  double len = dist(x, y);
  ch.within_budget = len <= dom.L() * scale;
  ch.n_bound = std::size_t(2.0 * dom.L()) + 1;
  std::size_t n = len == 0.0 ? 1 : std::size_t(std::ceil(len / ch.radius)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    double t = n == 1 ? 0.0 : double(i) / double(n - 1);
    Vec2 c = x + (y - x) * t;
    if (dom.boundary_distance(c) < 2.0 * ch.radius)
      throw PreconditionError("chain ball at (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                              ") has clearance below 2 rho");
    ch.centers.push_back(c);
  }
  return ch;
}

inline bool chain_predicates_hold(const DomainSpec& dom, const BallChain& ch, Vec2 x, Vec2 y) {
  if (ch.centers.empty()) return false;
  if (dist(ch.centers.front(), x) >= ch.radius || dist(ch.centers.back(), y) >= ch.radius) return false;
  for (std::size_t i = 0; i < ch.centers.size(); ++i) {
    if (dom.boundary_distance(ch.centers[i]) < 2.0 * ch.radius || !dom.inside(ch.centers[i])) return false;
    if (i > 0 && dist(ch.centers[i], ch.centers[i - 1]) >= 2.0 * ch.radius) return false;
  }
  return true;
}

// Cap = domain within B(0, 2.25); Gamma = boundary within B(0, 2).
struct RetractedCap {
  const DomainSpec* dom = nullptr;
  double s = 0.0;
  static constexpr double cap_radius = 2.25;
  static constexpr double gamma_radius = 2.0;

  double gamma_distance(Vec2 x) const {
    double best = std::numeric_limits<double>::infinity();
    for (auto& seg : dom->boundary_segments({0.0, 0.0}, gamma_radius))
      if (auto c = clip_to_disc(seg, {0.0, 0.0}, gamma_radius)) best = std::min(best, dist_to_segment(x, *c));
    return best;
  }
  bool in_cap(Vec2 x) const { return dom->inside(x) && x.norm() < cap_radius; }
  bool contains(Vec2 x) const { return in_cap(x) && gamma_distance(x) >= s; }
};

inline RetractedCap retracted_cap(const DomainSpec& dom, double s) {
  if (!(s >= 0.0)) throw ArgumentError("retracted cap offset must be >= 0");
  return RetractedCap{&dom, s};
}

// Concrete cap offset bound: half the gap between the cap ball and Gamma.
inline constexpr double cap_s_tilde() { return (RetractedCap::cap_radius - RetractedCap::gamma_radius) / 2.0; }

// max over lattice x in cap_s minus cap_2s of d(x, cap_2s) / s.
inline double retracted_cap_constant(const DomainSpec& dom, double s, double spacing) {
  if (!(s > 0.0) || !(spacing > 0.0)) throw ArgumentError("retracted_cap_constant needs s > 0 and spacing > 0");
  auto a = retracted_cap(dom, s), b = retracted_cap(dom, 2.0 * s);
  const double R = RetractedCap::cap_radius;
  const long n = long(std::ceil(2.0 * R / spacing)) + 1;
  std::vector<char> inner(std::size_t(n * n), 0);
  std::vector<std::pair<long, long>> ring;
  bool any_inner = false;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      Vec2 p{-R + i * spacing, -R + j * spacing};
      if (p.norm() >= R || !a.contains(p)) continue;
      if (b.contains(p)) {
        inner[std::size_t(i * n + j)] = 1;
        any_inner = true;
      } else {
        ring.push_back({i, j});
      }
    }
  if (!any_inner) throw NumericalFailure("retracted cap at 2s is empty on the sample lattice");
  double worst = 0.0;
  for (auto [i, j] : ring) {
    double best = std::numeric_limits<double>::infinity();
    for (long k = 1; k < n && best > (k - 1) * spacing; ++k)
      for (long u = std::max(0L, i - k); u <= std::min(n - 1, i + k); ++u)
        for (long v = std::max(0L, j - k); v <= std::min(n - 1, j + k); ++v) {
          if (std::max(std::abs(u - i), std::abs(v - j)) != k || !inner[std::size_t(u * n + v)]) continue;
          best = std::min(best, spacing * std::hypot(double(u - i), double(v - j)));
        }
    worst = std::max(worst, best);
  }
  return worst / s;
}

struct StretchMap {
  double factor = 1.0;  // x2 -> factor * x2
  double lambda_multiplier = 1.0;
  double Lambda_multiplier = 1.0;

  Vec2 apply(Vec2 p) const { return {p.x, p.y * factor}; }
  Vec2 inverse(Vec2 p) const { return {p.x, p.y / factor}; }

  DomainSpec apply(const DomainSpec& d) const {
    if (d.kind != DomainKind::lipschitz_graph) throw ArgumentError("stretch_map applies to graph domains");
    std::vector<double> ys = d.gy;
    for (double& y : ys) y *= factor;
    return DomainSpec::graph(d.gx, ys, d.r0);
  }
};

// Vertical dilation taking an l-graph to a target-graph; v = u o T^-1 has D^2 v = S D^2 u S
// with S = diag(1, 1/factor), so the ellipticity pair picks up multipliers min(1, factor^2) and max(1, factor^2).
inline StretchMap stretch_map(double l, double target) {
  if (!(target > 0.0) || !(l >= target)) throw ArgumentError("stretch_map needs l >= target > 0");
  StretchMap m;
  m.factor = target / l;
  m.lambda_multiplier = std::min(1.0, m.factor * m.factor);
  m.Lambda_multiplier = std::max(1.0, m.factor * m.factor);
  return m;
}

}  // namespace hbr
