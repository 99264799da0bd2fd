#include "structura/reference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "structura/error.hpp"

namespace structura::reference {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Appends the logic constraints of `kind` (over nu = D mu) to poly, in
// nu coordinates; the caller rescales.
void logic_constraints(const FactorAttachment& att, std::size_t d,
                       std::vector<LinearConstraint>& out) {
  auto ones = std::vector<double>(d, 1.0);
  switch (att.kind) {
    case FactorKind::Xor:
      out.push_back({ones, 1.0, true});
      break;
    case FactorKind::Or: {
      std::vector<double> a(d, -1.0);
      out.push_back({a, -1.0, false});
      break;
    }
    case FactorKind::AtMostOne:
      out.push_back({ones, 1.0, false});
      break;
    case FactorKind::Budget:
      out.push_back({ones, att.budget, false});
      break;
    case FactorKind::Knapsack:
      out.push_back({att.costs, att.budget, false});
      break;
    case FactorKind::OrOut: {
      const std::size_t o = d - 1;
      for (std::size_t i = 0; i < o; ++i) {
        std::vector<double> a(d, 0.0);
        a[i] = 1.0;
        a[o] = -1.0;
        out.push_back({a, 0.0, false});
      }
      std::vector<double> a(d, -1.0);
      a[o] = 1.0;
      out.push_back({a, 0.0, false});
      break;
    }
    case FactorKind::Negated: {
      std::vector<LinearConstraint> inner;
      logic_constraints(*att.inner, d, inner);
      for (auto& c : inner) {
        for (std::size_t k = 0; k < d; ++k) {
          if (!att.negation_mask[k]) continue;
          c.b -= c.a[k];
          c.a[k] = -c.a[k];
        }
        out.push_back(std::move(c));
      }
      break;
    }
    default:
      throw InvalidArgument("factor_polytope: unsupported kind " +
                            std::string(to_string(att.kind)));
  }
}

}  // namespace

BruteForceResult brute_force_sparsemap(std::span<const Structure> structures,
                                       std::span<const double> eta_m,
                                       std::span<const double> eta_n,
                                       std::span<const double> delta) {
  const std::size_t count = structures.size();
  if (count == 0 || count > 20) {
    throw InvalidArgument("brute_force_sparsemap: needs between 1 and 20 structures");
  }
  const std::size_t d = eta_m.size();
  const std::size_t dn = eta_n.size();
  if (delta.size() != d) throw InvalidArgument("brute_force_sparsemap: delta length mismatch");

  Eigen::MatrixXd mt(d, count), nt(dn, count);
  for (std::size_t k = 0; k < count; ++k) {
    if (structures[k].m.size() != d || structures[k].n.size() != dn) {
      throw InvalidArgument("brute_force_sparsemap: structure shape mismatch");
    }
    for (std::size_t i = 0; i < d; ++i) mt(i, k) = structures[k].m[i] / delta[i];
    for (std::size_t i = 0; i < dn; ++i) nt(i, k) = structures[k].n[i];
  }
  const Eigen::Map<const Eigen::VectorXd> eta(eta_m.data(), static_cast<Eigen::Index>(d));
  const Eigen::Map<const Eigen::VectorXd> eta_add(eta_n.data(), static_cast<Eigen::Index>(dn));
  const std::size_t max_support = std::min(count, d + dn + 1);

  BruteForceResult best;
  bool have = false;
  for (std::size_t mask = 1; mask < (std::size_t{1} << count); ++mask) {
    const std::size_t k = static_cast<std::size_t>(std::popcount(mask));
    if (k > max_support) continue;
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < count; ++j) {
      if (mask & (std::size_t{1} << j)) idx.push_back(static_cast<Eigen::Index>(j));
    }
    Eigen::MatrixXd ms(d, k), ns(dn, k);
    for (std::size_t j = 0; j < k; ++j) {
      ms.col(j) = mt.col(idx[j]);
      ns.col(j) = nt.col(idx[j]);
    }
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.block(0, 1, 1, k).setOnes();
    kkt.block(1, 0, k, 1).setOnes();
    kkt.bottomRightCorner(k, k) = ms.transpose() * ms;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd rhs(k + 1);
    rhs[0] = 1.0;
    rhs.tail(k) = ms.transpose() * eta + ns.transpose() * eta_add;
    Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::VectorXd p = sol.tail(k);
    if (p.minCoeff() < -1e-12) continue;
    p = p.cwiseMax(0.0);
    p /= p.sum();
    Eigen::VectorXd mu = ms * p;
    Eigen::VectorXd nu = ns * p;
    const double obj = 0.5 * (eta - mu).squaredNorm() - eta_add.dot(nu);
    if (!have || obj < best.objective - 1e-14) {
      have = true;
      best.objective = obj;
      best.mu.assign(mu.data(), mu.data() + d);
      best.nu.assign(nu.data(), nu.data() + dn);
      best.p.assign(count, 0.0);
      for (std::size_t j = 0; j < k; ++j) best.p[static_cast<std::size_t>(idx[j])] = p[j];
    }
  }
  if (!have) throw SolverError("brute_force_sparsemap: no feasible support found");
  return best;
}

Polytope factor_polytope(const FactorAttachment& att, std::span<const double> delta) {
  const std::size_t d = att.degree();
  if (delta.size() != d) throw InvalidArgument("factor_polytope: delta length mismatch");
  Polytope poly;
  poly.num_quadratic = d;
  poly.lower.assign(d, 0.0);
  poly.upper.resize(d);
  for (std::size_t i = 0; i < d; ++i) poly.upper[i] = 1.0 / delta[i];

  if (att.kind == FactorKind::Pair) {
    const double d1 = delta[0], d2 = delta[1];
    if (att.additional_scores.size() == 1) {
      // x = (mu1, mu2, nu12)
      poly.lower.push_back(0.0);
      poly.upper.push_back(1.0);
      poly.constraints.push_back({{-d1, 0.0, 1.0}, 0.0, false});
      poly.constraints.push_back({{0.0, -d2, 1.0}, 0.0, false});
      poly.constraints.push_back({{d1, d2, -1.0}, 1.0, false});
    } else {
      // x = (mu1, mu2, P_FF, P_FT, P_TF, P_TT)
      for (int k = 0; k < 4; ++k) {
        poly.lower.push_back(0.0);
        poly.upper.push_back(1.0);
      }
      poly.constraints.push_back({{0, 0, 1, 1, 1, 1}, 1.0, true});
      poly.constraints.push_back({{d1, 0, 0, 0, -1, -1}, 0.0, true});
      poly.constraints.push_back({{0, d2, 0, -1, 0, -1}, 0.0, true});
    }
    return poly;
  }

  std::vector<LinearConstraint> nu_space;
  logic_constraints(att, d, nu_space);
  for (auto& c : nu_space) {
    for (std::size_t i = 0; i < d; ++i) c.a[i] *= delta[i];
    poly.constraints.push_back(std::move(c));
  }
  return poly;
}

std::vector<double> project_polytope(const Polytope& poly, std::span<const double> x,
                                     double tol, std::size_t max_iterations) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const std::size_t n = x.size();
  if (poly.lower.size() != n || poly.upper.size() != n) {
    throw InvalidArgument("project_polytope: dimension mismatch");
  }

  std::vector<const LinearConstraint*> eqs, ineqs;
  for (const auto& c : poly.constraints) (c.equality ? eqs : ineqs).push_back(&c);
  std::size_t me = eqs.size();
  std::size_t mi = ineqs.size();
  for (std::size_t i = 0; i < n; ++i) {
    mi += std::isfinite(poly.lower[i]) + std::isfinite(poly.upper[i]);
  }
  MatrixXd A(me, n), G(mi, n);
  VectorXd b(me), h(mi);
  for (std::size_t r = 0; r < me; ++r) {
    for (std::size_t i = 0; i < n; ++i) A(r, i) = eqs[r]->a[i];
    b(r) = eqs[r]->b;
  }
  G.setZero();
  std::size_t row = 0;
  for (const auto* c : ineqs) {
    for (std::size_t i = 0; i < n; ++i) G(row, i) = c->a[i];
    h(row++) = c->b;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(poly.upper[i])) { G(row, i) = 1.0; h(row++) = poly.upper[i]; }
    if (std::isfinite(poly.lower[i])) { G(row, i) = -1.0; h(row++) = -poly.lower[i]; }
  }

  const VectorXd x0 = Eigen::Map<const VectorXd>(x.data(), static_cast<Eigen::Index>(n));
  auto violation = [&](const VectorXd& z) {
    double v = 0.0;
    if (me > 0) v = (A * z - b).cwiseAbs().maxCoeff();
    if (mi > 0) v = std::max(v, (G * z - h).maxCoeff());
    return v;
  };

  // Primal-dual interior point (Mehrotra predictor-corrector).
  VectorXd z = x0, nu = VectorXd::Zero(me), lam = VectorXd::Ones(mi);
  VectorXd s = (h - G * z).cwiseMax(1.0);
  bool converged = false;
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ne = static_cast<Eigen::Index>(me);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const VectorXd rd = z - x0 + G.transpose() * lam + A.transpose() * nu;
    const VectorXd re = A * z - b;
    const VectorXd ri = G * z + s - h;
    const double mu = mi > 0 ? lam.dot(s) / static_cast<double>(mi) : 0.0;
    double res = rd.cwiseAbs().maxCoeff();
    if (me > 0) res = std::max(res, re.cwiseAbs().maxCoeff());
    if (mi > 0) res = std::max(res, ri.cwiseAbs().maxCoeff());
    if (!std::isfinite(res) || (res < tol && mu < tol)) {
      converged = std::isfinite(res);
      break;
    }

    const VectorXd w = lam.cwiseQuotient(s);
    MatrixXd K = MatrixXd::Zero(ni + ne, ni + ne);
    K.topLeftCorner(ni, ni) = MatrixXd::Identity(ni, ni) + G.transpose() * w.asDiagonal() * G;
    K.topRightCorner(ni, ne) = A.transpose();
    K.bottomLeftCorner(ne, ni) = A;
    const Eigen::FullPivLU<MatrixXd> lu(K);

    auto direction = [&](const VectorXd& rc, VectorXd& dz, VectorXd& dnu, VectorXd& dlam,
                         VectorXd& ds) {
      VectorXd rhs(ni + ne);
      rhs.head(ni) = -rd - G.transpose() * (w.cwiseProduct(ri) + rc.cwiseQuotient(s));
      rhs.tail(ne) = -re;
      const VectorXd sol = lu.solve(rhs);
      dz = sol.head(ni);
      dnu = sol.tail(ne);
      dlam = w.cwiseProduct(G * dz + ri) + rc.cwiseQuotient(s);
      ds = (rc - s.cwiseProduct(dlam)).cwiseQuotient(lam);
    };
    auto max_step = [](const VectorXd& v, const VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      }
      return a;
    };

    VectorXd dz, dnu, dlam, ds;
    direction(-lam.cwiseProduct(s), dz, dnu, dlam, ds);
    const double a_aff = std::min(max_step(lam, dlam), max_step(s, ds));
    const double mu_aff =
        mi > 0 ? (lam + a_aff * dlam).dot(s + a_aff * ds) / static_cast<double>(mi) : 0.0;
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
    const VectorXd rc = (-lam.cwiseProduct(s) - dlam.cwiseProduct(ds)).array() + sigma * mu;
    direction(rc, dz, dnu, dlam, ds);
    const double alpha = std::min(1.0, 0.995 * std::min(max_step(lam, dlam), max_step(s, ds)));
    z += alpha * dz;
    nu += alpha * dnu;
    lam += alpha * dlam;
    s += alpha * ds;
  }
  if (!converged || !(violation(z) < 1e-9)) {
    throw SolverError("project_polytope: no feasible projection found");
  }

  // Polish: project exactly onto the face identified by the interior point.
  std::vector<Eigen::Index> active;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(mi); ++r) {
    if (lam(r) > s(r)) active.push_back(r);
  }
  MatrixXd C(me + active.size(), n);
  VectorXd d(me + active.size());
  C.topRows(ne) = A;
  d.head(ne) = b;
  for (std::size_t k = 0; k < active.size(); ++k) {
    C.row(ne + static_cast<Eigen::Index>(k)) = G.row(active[k]);
    d(ne + static_cast<Eigen::Index>(k)) = h(active[k]);
  }
  VectorXd polished = x0;
  if (C.rows() > 0) {
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(C * C.transpose());
    const VectorXd mult = cod.solve(C * x0 - d);
    polished = x0 - C.transpose() * mult;
    bool dual_ok = true;
    for (std::size_t k = 0; k < active.size(); ++k) {
      dual_ok = dual_ok && mult(ne + static_cast<Eigen::Index>(k)) > -1e-9;
    }
    if (!dual_ok || violation(polished) > 1e-12) polished = z;
  } else if (violation(polished) > 1e-12) {
    polished = z;
  }
  return {polished.data(), polished.data() + n};
}

PgResult projected_gradient_qp(const Projector& project, std::span<const double> eta,
                               std::size_t num_quadratic, std::size_t max_steps,
                               double step_size, double tol) {
  const std::size_t n = eta.size();
  auto gradient_step = [&](const std::vector<double>& x) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      double g = i < num_quadratic ? x[i] - eta[i] : -eta[i];
      z[i] = x[i] - step_size * g;
    }
    return project(z);
  };

  PgResult r;
  std::vector<double> x = project(std::vector<double>(eta.begin(), eta.end()));
  std::vector<double> yk = x;
  double t = 1.0;
  for (std::size_t k = 1; k <= max_steps; ++k) {
    std::vector<double> next = gradient_step(yk);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - x[i]));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) yk[i] = next[i] + (t - 1.0) / t_next * (next[i] - x[i]);
    t = t_next;
    x = std::move(next);
    r.iterations = k;
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  r.x = std::move(x);
  return r;
}

double finite_difference_jvp(const VectorMap& f, std::span<const double> eta,
                             std::span<const double> v, std::span<const double> d, double h) {
  std::vector<double> plus(eta.begin(), eta.end()), minus(eta.begin(), eta.end());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  std::vector<double> fp = f(plus), fm = f(minus);
  return (dot(d, fp) - dot(d, fm)) / (2.0 * h);
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradientProbe random_probe(const FactorGraph& graph, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  GradientProbe probe;
  double vv = 0.0, dd = 0.0;
  probe.v_m.resize(graph.num_variables());
  for (double& x : probe.v_m) {
    x = normal(rng);
    vv += x * x;
  }
  probe.v_n.resize(graph.num_factors());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    probe.v_n[f].resize(graph.factor(f).additional_scores.size());
    for (double& x : probe.v_n[f]) {
      x = normal(rng);
      vv += x * x;
    }
  }
  probe.d.resize(graph.num_variables());
  for (double& x : probe.d) {
    x = normal(rng);
    dd += x * x;
  }
  const double sv = 1.0 / std::sqrt(std::max(vv, 1e-300));
  const double sd = 1.0 / std::sqrt(std::max(dd, 1e-300));
  for (double& x : probe.v_m) x *= sv;
  for (auto& vn : probe.v_n) {
    for (double& x : vn) x *= sv;
  }
  for (double& x : probe.d) x *= sd;
  return probe;
}

GradientCheck check_gradient(const FactorGraph& graph, const Scores& scores,
                             const AdmmConfig& admm, const BackwardConfig& backward,
                             const GradientProbe& probe, double h) {
  auto shifted = [&](double t) {
    Scores s = scores;
    for (std::size_t j = 0; j < s.eta_m.size(); ++j) s.eta_m[j] += t * probe.v_m[j];
    for (std::size_t f = 0; f < s.eta_n.size(); ++f) {
      for (std::size_t k = 0; k < s.eta_n[f].size(); ++k) s.eta_n[f][k] += t * probe.v_n[f][k];
    }
    return solve(graph, s, admm);
  };

  GradientCheck out;
  LpSparseMapSolution base = shifted(0.0);
  LpSparseMapSolution plus = shifted(h);
  LpSparseMapSolution minus = shifted(-h);
  out.converged = base.converged() && plus.converged() && minus.converged();

  JvpResult g = jvp(graph, base, probe.d, backward);
  out.analytic = dot(g.d_m, probe.v_m);
  for (std::size_t f = 0; f < g.d_n.size(); ++f) out.analytic += dot(g.d_n[f], probe.v_n[f]);

  const double f0 = dot(probe.d, base.mu);
  const double fp = dot(probe.d, plus.mu);
  const double fm = dot(probe.d, minus.mu);
  out.numeric = (fp - fm) / (2.0 * h);
  out.relative_error = relative_error(out.analytic, out.numeric);
  out.support_stable = relative_error((fp - f0) / h, (f0 - fm) / h) <= 1e-4;
  return out;
}

}  // namespace structura::reference
