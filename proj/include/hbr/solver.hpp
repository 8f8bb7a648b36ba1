#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "nonlinearity.hpp"

namespace hbr {

struct EllipticityPair {
  double lambda = 1.0;
  double Lambda = 1.0;

  EllipticityPair() = default;
  EllipticityPair(double l, double L) : lambda(l), Lambda(L) {
    if (!(l > 0.0) || !(L >= l) || !std::isfinite(L)) throw ConfigError("ellipticity needs 0 < lambda <= Lambda");
  }
};

struct Sym2 {
  double a = 0.0, b = 0.0, c = 0.0;  // [[a, b], [b, c]]
};

enum class PucciSign { plus, minus };

// P+(X) = max over A in [lambda, Lambda] of -tr(AX); P- is the min.
inline double pucci_apply(const EllipticityPair& ell, Sym2 X, PucciSign sign) {
  double m = 0.5 * (X.a + X.c), d = std::hypot(0.5 * (X.a - X.c), X.b);
  double e[2] = {m + d, m - d};
  double out = 0.0;
  for (double v : e) {
    if (sign == PucciSign::plus)
      out -= v >= 0.0 ? ell.lambda * v : ell.Lambda * v;
    else
      out -= v >= 0.0 ? ell.Lambda * v : ell.lambda * v;
  }
  return out;
}

enum class OperatorKind { pucci_minus_drift, pucci_plus_drift, px_laplace };

inline std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::pucci_minus_drift: return "pucci_minus_drift";
    case OperatorKind::pucci_plus_drift: return "pucci_plus_drift";
    case OperatorKind::px_laplace: return "px_laplace";
  }
  return "?";
}

inline OperatorKind operator_kind_from_string(const std::string& s) {
  if (s == "pucci_minus_drift") return OperatorKind::pucci_minus_drift;
  if (s == "pucci_plus_drift") return OperatorKind::pucci_plus_drift;
  if (s == "px_laplace") return OperatorKind::px_laplace;
  throw ConfigError("unknown operator '" + s + "'");
}

// pucci_minus_drift:  P-(D^2u) = phi_R(|Du|)
// pucci_plus_drift:   P+(D^2u) = -phi_R(|Du|)
// px_laplace:         -Lap u - (p-2) Lap_inf u - log|Du| <grad p, Du> = 0
struct Problem {
  OperatorKind op = OperatorKind::pucci_minus_drift;
  EllipticityPair ell;
  RescaledNonlinearity nl{Nonlinearity::homogeneous(), 1.0};
  std::function<double(Vec2)> p_field;
  std::function<Vec2(Vec2)> grad_p;  // central differences of p_field when empty

  void validate() const {
    if (op == OperatorKind::px_laplace && !p_field) throw ConfigError("px_laplace requires an exponent field p(x)");
  }

  Vec2 grad_p_at(Vec2 x) const {
    if (grad_p) return grad_p(x);
    const double e = 1e-6;
    return {(p_field({x.x + e, x.y}) - p_field({x.x - e, x.y})) / (2 * e),
            (p_field({x.x, x.y + e}) - p_field({x.x, x.y - e})) / (2 * e)};
  }
};

struct SolverOptions {
  double tol = 1e-8;  // multiplied by max(1, boundary data range)
  int max_iters = 200;
  int orientations = 16;
};

struct SolveDiagnostics {
  int iterations = 0;
  std::vector<double> residual_history;
  double tol_used = 0.0;
  double final_residual = 0.0;
  bool negative_data_warning = false;
  std::size_t upwind_nodes = 0;
  std::size_t clipped_candidates = 0;
};

struct SolveResult {
  GridField field;
  SolveDiagnostics diag;
};

namespace detail {

// Neighbour offsets: E W N S NE SW NW SE.
inline constexpr std::array<std::array<int, 2>, 8> kNbr = {
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {-1, 1}, {1, -1}}};

// Monotone 9-point weights for tr(A D^2u) = sum_j w_j (u_j - u_C) / h^2.
struct Weights {
  std::array<double, 8> w{};
  bool clipped = false;
};

inline Weights weights_for(Sym2 A) {
  Weights out;
  double b = A.b, lim = std::min(A.a, A.c);
  if (std::abs(b) > lim) {
    b = std::copysign(lim, b);
    out.clipped = true;
  }
  double ab = std::abs(b);
  out.w[0] = out.w[1] = A.a - ab;
  out.w[2] = out.w[3] = A.c - ab;
  if (b >= 0.0)
    out.w[4] = out.w[5] = ab;
  else
    out.w[6] = out.w[7] = ab;
  return out;
}

inline std::vector<Weights> pucci_candidates(const EllipticityPair& ell, int K) {
  std::vector<Weights> out;
  out.push_back(weights_for({ell.lambda, 0.0, ell.lambda}));
  out.push_back(weights_for({ell.Lambda, 0.0, ell.Lambda}));
  for (int k = 0; k < K; ++k) {
    double th = std::numbers::pi * k / K, c = std::cos(th), s = std::sin(th);
    // R diag(lambda, Lambda) R^T
    Sym2 A{ell.lambda * c * c + ell.Lambda * s * s, (ell.lambda - ell.Lambda) * c * s,
           ell.lambda * s * s + ell.Lambda * c * c};
    out.push_back(weights_for(A));
  }
  return out;
}

// Local linearisation of F at one interior node: value and partials on C + 8 neighbours.
struct NodeRow {
  double F = 0.0;
  std::array<double, 9> dF{};  // index 0 = centre, 1..8 = kNbr
  bool upwind = false;
};

enum class GradRule { centered, upwind_minus, upwind_plus };

struct GradEval {
  double g = 0.0;
  std::array<double, 9> dg{};
};

inline GradEval grad_magnitude(const std::array<double, 9>& u, double h, GradRule rule) {
  GradEval out;
  double floor = h * h;
  double gx, gy;
  std::array<double, 9> dx{}, dy{};
  if (rule == GradRule::centered) {
    gx = (u[1] - u[2]) / (2 * h);
    gy = (u[3] - u[4]) / (2 * h);
    dx[1] = 1 / (2 * h);
    dx[2] = -1 / (2 * h);
    dy[3] = 1 / (2 * h);
    dy[4] = -1 / (2 * h);
  } else {
    double s = rule == GradRule::upwind_minus ? 1.0 : -1.0;
    auto pick = [&](int plus, int minus, double& g, std::array<double, 9>& d) {
      double fp = s * (u[plus] - u[0]) / h, fm = s * (u[minus] - u[0]) / h;
      g = 0.0;
      if (fp >= fm && fp > 0.0) {
        g = fp;
        d[plus] = s / h;
        d[0] = -s / h;
      } else if (fm > fp && fm > 0.0) {
        g = fm;
        d[minus] = s / h;
        d[0] = -s / h;
      }
    };
    pick(1, 2, gx, dx);
    pick(3, 4, gy, dy);
  }
  double g = std::hypot(gx, gy);
  if (g <= floor) {
    out.g = floor;
    return out;
  }
  out.g = g;
  for (int k = 0; k < 9; ++k) out.dg[k] = (gx * dx[k] + gy * dy[k]) / g;
  return out;
}

class Discretization {
public:
  Discretization(const Problem& prob, const GridField& grid, int K)
      : prob_(prob), grid_(grid), cands_(pucci_candidates(prob.ell, K)) {
    for (auto& c : cands_) clipped_ += c.clipped;
  }

  std::size_t clipped() const { return clipped_; }

  std::array<double, 9> local(const std::vector<double>& u, int i, int j) const {
    std::array<double, 9> v{};
    v[0] = u[grid_.idx(i, j)];
    for (int n = 0; n < 8; ++n) v[n + 1] = u[grid_.idx(i + kNbr[n][0], j + kNbr[n][1])];
    return v;
  }

  // sum_j w_j (u_j - u_C) / h^2 for candidate k
  double trace_term(const std::array<double, 9>& v, const Weights& W) const {
    double s = 0.0;
    for (int n = 0; n < 8; ++n) s += W.w[n] * (v[n + 1] - v[0]);
    return s / (grid_.h * grid_.h);
  }

  // Best candidate index and value of -L_k u: max for plus, min for minus.
  std::pair<std::size_t, double> pucci(const std::array<double, 9>& v, PucciSign sign) const {
    std::size_t best = 0;
    double bv = sign == PucciSign::plus ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cands_.size(); ++k) {
      double val = -trace_term(v, cands_[k]);
      if (sign == PucciSign::plus ? val > bv : val < bv) {
        bv = val;
        best = k;
      }
    }
    return {best, bv};
  }

  // sign_drift = +1 for P+ u + phi(|Du|), -1 for P- u - phi(|Du|).
  NodeRow pucci_row(const std::array<double, 9>& v, PucciSign sign, double sign_drift) const {
    NodeRow row;
    auto [k, pv] = pucci(v, sign);
    const auto& W = cands_[k];
    const double h2 = grid_.h * grid_.h;
    for (int n = 0; n < 8; ++n) {
      row.dF[n + 1] -= W.w[n] / h2;
      row.dF[0] += W.w[n] / h2;
    }
    row.F = pv;
    if (prob_.nl.base.has_drift()) {
      GradEval ge = grad_magnitude(v, grid_.h, GradRule::centered);
      double wmin = std::min(W.w[0], W.w[2]);
      if (grid_.h * prob_.nl.ddrift(ge.g) > 2.0 * wmin) {
        row.upwind = true;
        ge = grad_magnitude(v, grid_.h, sign_drift > 0 ? GradRule::upwind_plus : GradRule::upwind_minus);
      }
      double d = prob_.nl.drift(ge.g), dd = prob_.nl.ddrift(ge.g);
      row.F += sign_drift * d;
      for (int n = 0; n < 9; ++n) row.dF[n] += sign_drift * dd * ge.dg[n];
    }
    return row;
  }

  // Frozen-coefficient row for the p(x) operator (A and the log factor from the current iterate).
  NodeRow px_row(const std::array<double, 9>& v, Vec2 x) const {
    NodeRow row;
    const double h = grid_.h, h2 = h * h;
    double gx = (v[1] - v[2]) / (2 * h), gy = (v[3] - v[4]) / (2 * h);
    double g = std::hypot(gx, gy);
    double p = prob_.p_field(x);
    Sym2 A{1.0, 0.0, 1.0};
    if (g > h2) {
      double nx = gx / g, ny = gy / g;
      A = {1.0 + (p - 2.0) * nx * nx, (p - 2.0) * nx * ny, 1.0 + (p - 2.0) * ny * ny};
    }
    Weights W = weights_for(A);
    for (int n = 0; n < 8; ++n) {
      row.dF[n + 1] -= W.w[n] / h2;
      row.dF[0] += W.w[n] / h2;
      row.F -= W.w[n] * (v[n + 1] - v[0]) / h2;
    }
    // beta . Du with beta = -log|Du| grad p
    Vec2 gp = prob_.grad_p_at(x);
    double lg = std::log(std::max(g, h2));
    double bx = -lg * gp.x, by = -lg * gp.y;
    auto first_order = [&](double b, int plus, int minus, double wdiag) {
      if (b == 0.0) return;
      if (std::abs(b) * h <= 2.0 * wdiag) {
        row.F += b * (v[plus] - v[minus]) / (2 * h);
        row.dF[plus] += b / (2 * h);
        row.dF[minus] -= b / (2 * h);
      } else {
        row.upwind = true;
        if (b > 0) {
          row.F += b * (v[0] - v[minus]) / h;
          row.dF[0] += b / h;
          row.dF[minus] -= b / h;
        } else {
          row.F += b * (v[plus] - v[0]) / h;
          row.dF[plus] += b / h;
          row.dF[0] -= b / h;
        }
      }
    };
    first_order(bx, 1, 2, W.w[0]);
    first_order(by, 3, 4, W.w[2]);
    return row;
  }

  NodeRow row(const std::vector<double>& u, int i, int j) const {
    auto v = local(u, i, j);
    switch (prob_.op) {
      case OperatorKind::pucci_minus_drift: return pucci_row(v, PucciSign::minus, -1.0);
      case OperatorKind::pucci_plus_drift: return pucci_row(v, PucciSign::plus, +1.0);
      case OperatorKind::px_laplace: return px_row(v, grid_.pos(i, j));
    }
    return {};
  }

private:
  const Problem& prob_;
  const GridField& grid_;
  std::vector<Weights> cands_;
  std::size_t clipped_ = 0;
};

inline void check_stencil_support(const GridField& g) {
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is(g.idx(i, j), NodeMask::interior)) continue;
      if (i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny)
        throw ArgumentError("interior node on the grid frame");
      for (auto [di, dj] : kNbr)
        if (g.is(g.idx(i + di, j + dj), NodeMask::exterior))
          throw ArgumentError("interior node with an exterior neighbour; mark it boundary");
    }
}

}  // namespace detail

// max over interior nodes of |F(u)|
inline double residual(const Problem& prob, const GridField& field, int orientations = 16) {
  prob.validate();
  detail::check_stencil_support(field);
  detail::Discretization disc(prob, field, orientations);
  double worst = 0.0;
  for (int j = 0; j < field.ny; ++j)
    for (int i = 0; i < field.nx; ++i)
      if (field.is(field.idx(i, j), NodeMask::interior))
        worst = std::max(worst, std::abs(disc.row(field.values, i, j).F));
  return worst;
}

// Semismooth Newton (policy iteration) on the monotone scheme; LU solves via Eigen.
inline SolveResult solve_dirichlet(const Problem& prob, const GridField& grid, const SolverOptions& opt = {}) {
  prob.validate();
  detail::check_stencil_support(grid);
  SolveResult res;
  res.field = grid;
  GridField& f = res.field;

  double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.is(k, NodeMask::boundary)) {
      f.values[k] = f.boundary_data[k];
      dmin = std::min(dmin, f.boundary_data[k]);
      dmax = std::max(dmax, f.boundary_data[k]);
    }
  if (!std::isfinite(dmin)) throw ArgumentError("grid has no boundary nodes");
  res.diag.negative_data_warning = dmin < 0.0;
  res.diag.tol_used = opt.tol * std::max(1.0, dmax - dmin);

  std::vector<long> unk(f.size(), -1);
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f.is(k, NodeMask::interior)) {
      unk[k] = long(nodes.size());
      nodes.push_back(k);
    }
  const long n = long(nodes.size());
  if (n == 0) return res;
  for (auto k : nodes) f.values[k] = 0.5 * (dmin + dmax);

  detail::Discretization disc(prob, f, opt.orientations);
  res.diag.clipped_candidates = disc.clipped();

  auto evaluate = [&](const std::vector<double>& u, Eigen::VectorXd& F, std::vector<detail::NodeRow>* rows) {
    double worst = 0.0;
    std::size_t up = 0;
    for (long r = 0; r < n; ++r) {
      auto k = nodes[std::size_t(r)];
      int i = int(k % std::size_t(f.nx)), j = int(k / std::size_t(f.nx));
      auto row = disc.row(u, i, j);
      F[r] = row.F;
      worst = std::max(worst, std::abs(row.F));
      up += row.upwind;
      if (rows) (*rows)[std::size_t(r)] = row;
    }
    res.diag.upwind_nodes = up;
    return worst;
  };

  // fixed sparsity: every row carries the centre and all interior neighbours
  Eigen::SparseMatrix<double> J(n, n);
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(n) * 9);
    for (long r = 0; r < n; ++r) {
      auto k = nodes[std::size_t(r)];
      int i = int(k % std::size_t(f.nx)), j = int(k / std::size_t(f.nx));
      trip.emplace_back(r, r, 1.0);
      for (auto [di, dj] : detail::kNbr) {
        long c = unk[f.idx(i + di, j + dj)];
        if (c >= 0) trip.emplace_back(r, c, 1.0);
      }
    }
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(J);

  std::vector<detail::NodeRow> rows(static_cast<std::size_t>(n));
  Eigen::VectorXd F(n), Ftrial(n);
  double r0 = evaluate(f.values, F, &rows);
  res.diag.residual_history.push_back(r0);
  std::vector<double> trial;
  for (int it = 0; it < opt.max_iters && r0 > res.diag.tol_used; ++it) {
    for (long r = 0; r < n; ++r) {
      auto k = nodes[std::size_t(r)];
      int i = int(k % std::size_t(f.nx)), j = int(k / std::size_t(f.nx));
      const auto& row = rows[std::size_t(r)];
      J.coeffRef(r, r) = row.dF[0];
      for (int m = 0; m < 8; ++m) {
        long c = unk[f.idx(i + detail::kNbr[m][0], j + detail::kNbr[m][1])];
        if (c >= 0) J.coeffRef(r, c) = row.dF[m + 1];
      }
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success)
      throw NumericalFailure("Newton Jacobian is singular at iteration " + std::to_string(it), res.diag.residual_history);
    Eigen::VectorXd delta = lu.solve(-F);
    double step = 1.0;
    double r1 = r0;
    for (int ls = 0; ls < 30; ++ls) {
      trial = f.values;
      for (long r = 0; r < n; ++r) trial[nodes[std::size_t(r)]] += step * delta[r];
      r1 = evaluate(trial, Ftrial, nullptr);
      if (r1 < r0 || r1 <= res.diag.tol_used) break;
      step *= 0.5;
    }
    f.values.swap(trial);
    r0 = evaluate(f.values, F, &rows);
    res.diag.residual_history.push_back(r0);
    res.diag.iterations = it + 1;
  }
  res.diag.final_residual = r0;
  if (r0 > res.diag.tol_used)
    throw NumericalFailure("solve_dirichlet did not reach tolerance in " + std::to_string(opt.max_iters) +
                               " iterations (residual " + std::to_string(r0) + ")",
                           res.diag.residual_history);
  return res;
}

struct ViscosityReport {
  // supersolution of P+ u = -phi: violated where P+ u + phi < -tol
  std::size_t super_plus_violations = 0;
  // subsolution of P- u = phi: violated where P- u - phi > tol
  std::size_t sub_minus_violations = 0;
  // subsolution of P+ u = -phi: violated where P+ u + phi > tol
  std::size_t sub_plus_violations = 0;
  // supersolution of P- u = phi: violated where P- u - phi < -tol
  std::size_t super_minus_violations = 0;
  double worst_super_plus = 0.0, worst_sub_minus = 0.0, worst_sub_plus = 0.0, worst_super_minus = 0.0;
  std::optional<Vec2> worst_super_plus_node, worst_sub_minus_node, worst_sub_plus_node, worst_super_minus_node;
  std::size_t checked = 0;
};

// Discrete viscosity inequalities at interior nodes (restricted by `where` when given).
inline ViscosityReport check_viscosity_inequalities(const Problem& prob, const GridField& field, double tol,
                                                    const std::function<bool(Vec2)>& where = {},
                                                    int orientations = 16) {
  detail::check_stencil_support(field);
  Problem plus = prob, minus = prob;
  plus.op = OperatorKind::pucci_plus_drift;
  minus.op = OperatorKind::pucci_minus_drift;
  detail::Discretization dp(plus, field, orientations), dm(minus, field, orientations);
  ViscosityReport rep;
  auto track = [](double excess, Vec2 x, std::size_t& count, double& worst, std::optional<Vec2>& node) {
    if (excess <= 0.0) return;
    ++count;
    if (excess > worst) {
      worst = excess;
      node = x;
    }
  };
  for (int j = 0; j < field.ny; ++j)
    for (int i = 0; i < field.nx; ++i) {
      if (!field.is(field.idx(i, j), NodeMask::interior)) continue;
      Vec2 x = field.pos(i, j);
      if (where && !where(x)) continue;
      ++rep.checked;
      double a = dp.row(field.values, i, j).F;  // P+ u + phi
      double b = dm.row(field.values, i, j).F;  // P- u - phi
      track(-a - tol, x, rep.super_plus_violations, rep.worst_super_plus, rep.worst_super_plus_node);
      track(b - tol, x, rep.sub_minus_violations, rep.worst_sub_minus, rep.worst_sub_minus_node);
      track(a - tol, x, rep.sub_plus_violations, rep.worst_sub_plus, rep.worst_sub_plus_node);
      track(-b - tol, x, rep.super_minus_violations, rep.worst_super_minus, rep.worst_super_minus_node);
    }
  return rep;
}

// max |u - exact| over non-exterior nodes
inline double max_error(const GridField& f, const std::function<double(Vec2)>& exact) {
  double e = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (!f.is(k, NodeMask::exterior)) e = std::max(e, std::abs(f.values[k] - exact(f.pos(k))));
  return e;
}

}  // namespace hbr
