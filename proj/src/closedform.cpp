#include "structura/closedform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "structura/error.hpp"

namespace structura {

namespace {

constexpr double kFeasibilitySlack = 1e-12;
constexpr double kPairTie = 1e-9;
constexpr double kInteriorTol = 1e-12;

// Strictly inside the bounds; values within rounding of a bound count as
// active so degenerate points get the locally constant Jacobian.
bool interior(double x, double lo, double hi) {
  return x > lo + kInteriorTol && x < hi - kInteriorTol;
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

std::vector<double> upper_bounds(std::span<const double> delta) {
  std::vector<double> hi(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!(delta[i] > 0.0)) throw InvalidArgument("delta entries must be positive");
    hi[i] = 1.0 / delta[i];
  }
  return hi;
}

double weighted_sum(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

ClosedFormResult clip_unit(std::span<const double> eta, std::span<const double> delta) {
  require_same_size(eta.size(), delta.size(), "closed form");
  std::vector<double> lo(eta.size(), 0.0);
  std::vector<double> hi = upper_bounds(delta);
  ClosedFormResult r = project_box(eta, lo, hi);
  r.cert.delta.assign(delta.begin(), delta.end());
  return r;
}

ClosedFormResult tight_unit(std::span<const double> eta, std::span<const double> delta,
                            std::vector<double> weights, double rhs) {
  ScbqpProblem p;
  p.eta.assign(eta.begin(), eta.end());
  p.lower.assign(eta.size(), 0.0);
  p.upper = upper_bounds(delta);
  p.weights = std::move(weights);
  p.rhs = rhs;
  ClosedFormResult r = solve_scbqp(p);
  r.cert.delta.assign(delta.begin(), delta.end());
  return r;
}

std::vector<double> masked(std::span<const double> v, const std::vector<bool>& mask) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask[i]) out[i] = v[i];
  }
  return out;
}

std::vector<double> tight_product(const ClosedFormCertificate& c, std::span<const double> v) {
  std::vector<double> out = masked(v, c.support);
  double wd = 0.0, ww = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!c.support[i]) continue;
    wd += c.weights[i] * v[i];
    ww += c.weights[i] * c.weights[i];
  }
  if (ww > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (c.support[i]) out[i] -= c.weights[i] * wd / ww;
    }
  }
  return out;
}

// Jacobian of the cone projection: v v^T / ||v||^2 on S(rho) with
// v_i = 1 / delta_i, identity elsewhere.
std::vector<double> cone_product(const ClosedFormCertificate& c, std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  double vd = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!c.cone_set[i]) continue;
    vd += v[i] / c.delta[i];
    vv += 1.0 / (c.delta[i] * c.delta[i]);
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (c.cone_set[i]) out[i] = (vd / vv) / c.delta[i];
  }
  return out;
}

std::vector<double> apply_signs(std::vector<double> v, const std::vector<bool>& mask) {
  if (mask.empty()) return v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask[i]) v[i] = -v[i];
  }
  return v;
}

std::vector<double> unsigned_product(const ClosedFormCertificate& c, std::span<const double> v,
                                     bool transpose) {
  switch (c.branch) {
    case Branch::Box:
    case Branch::ClipFeasible:
    case Branch::OrOutStep1:
      return masked(v, c.support);
    case Branch::EqualityTight:
    case Branch::OrOutStep3:
      return tight_product(c, v);
    case Branch::Cone:
    case Branch::OrOutStep2:
      if (transpose) return cone_product(c, masked(v, c.support));
      return masked(cone_product(c, v), c.support);
    default:
      break;
  }
  throw InvalidArgument("closed-form Jacobian: unsupported branch");
}

struct PairSolve {
  double mu1, mu2, mu12;
  Branch branch;
  Eigen::Matrix<double, 2, 3> jac;
};

PairSolve solve_pair_nonneg(double e1, double e2, double e12, double d1, double d2) {
  PairSolve s{};
  if (d1 * e1 > d2 * e2 + d2 * d2 * e12) {
    s.mu1 = clip(e1, 0.0, 1.0 / d1);
    s.mu2 = clip(e2 + d2 * e12, 0.0, 1.0 / d2);
  } else if (d2 * e2 > d1 * e1 + d1 * d1 * e12) {
    s.mu1 = clip(e1 + d1 * e12, 0.0, 1.0 / d1);
    s.mu2 = clip(e2, 0.0, 1.0 / d2);
  } else {
    double t = (d1 * d2 * d2 * e1 + d1 * d1 * d2 * e2 + d1 * d1 * d2 * d2 * e12) /
               (d1 * d1 + d2 * d2);
    t = clip(t, 0.0, 1.0);
    s.mu1 = t / d1;
    s.mu2 = t / d2;
  }
  const double nu1 = d1 * s.mu1;
  const double nu2 = d2 * s.mu2;
  s.mu12 = std::min(nu1, nu2);

  const double m1 = (s.mu1 > 0.0 && nu1 < 1.0) ? 1.0 : 0.0;
  const double m2 = (s.mu2 > 0.0 && nu2 < 1.0) ? 1.0 : 0.0;
  s.jac.setZero();
  if (std::abs(nu1 - nu2) <= kPairTie) {
    s.branch = Branch::PairCase3;
    const double t = 0.5 * (nu1 + nu2);
    if (t > 0.0 && t < 1.0) {
      const double den = d1 * d1 + d2 * d2;
      s.jac << d2 * d2, d1 * d2, d1 * d2 * d2,
               d1 * d2, d1 * d1, d1 * d1 * d2;
      s.jac /= den;
    }
  } else if (nu1 > nu2) {
    s.branch = Branch::PairCase1;
    s.jac << m1, 0.0, 0.0,
             0.0, m2, m2 * d2;
  } else {
    s.branch = Branch::PairCase2;
    s.jac << m1, 0.0, m1 * d1,
             0.0, m2, 0.0;
  }
  return s;
}

}  // namespace

const char* to_string(Branch b) {
  switch (b) {
    case Branch::Box: return "box";
    case Branch::ClipFeasible: return "clip-feasible";
    case Branch::EqualityTight: return "equality-tight";
    case Branch::Cone: return "cone";
    case Branch::PairCase1: return "pair-case-1";
    case Branch::PairCase2: return "pair-case-2";
    case Branch::PairCase3: return "pair-case-3";
    case Branch::OrOutStep1: return "orout-step-1";
    case Branch::OrOutStep2: return "orout-step-2";
    case Branch::OrOutStep3: return "orout-step-3";
  }
  return "unknown";
}

ClosedFormResult project_box(std::span<const double> eta, std::span<const double> lower,
                             std::span<const double> upper) {
  require_same_size(eta.size(), lower.size(), "project_box");
  require_same_size(eta.size(), upper.size(), "project_box");
  ClosedFormResult r;
  r.mu.resize(eta.size());
  r.cert.branch = Branch::Box;
  r.cert.support.resize(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (lower[i] > upper[i]) {
      throw InvalidArgument("project_box: lower bound exceeds upper bound at index " +
                            std::to_string(i));
    }
    r.mu[i] = clip(eta[i], lower[i], upper[i]);
    r.cert.support[i] = interior(r.mu[i], lower[i], upper[i]);
  }
  return r;
}

ClosedFormResult solve_scbqp(const ScbqpProblem& p) {
  const std::size_t d = p.eta.size();
  require_same_size(d, p.lower.size(), "solve_scbqp");
  require_same_size(d, p.upper.size(), "solve_scbqp");
  require_same_size(d, p.weights.size(), "solve_scbqp");
  for (std::size_t i = 0; i < d; ++i) {
    if (p.lower[i] > p.upper[i]) {
      throw InvalidArgument("solve_scbqp: lower bound exceeds upper bound at index " +
                            std::to_string(i));
    }
    if (!std::isfinite(p.weights[i]) || !std::isfinite(p.eta[i])) {
      throw InvalidArgument("solve_scbqp: non-finite input");
    }
  }

  auto value = [&](double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s += p.weights[i] * clip(p.eta[i] + p.weights[i] * tau, p.lower[i], p.upper[i]);
    }
    return s;
  };

  double lo_sum = 0.0, hi_sum = 0.0;
  std::vector<double> breaks;
  for (std::size_t i = 0; i < d; ++i) {
    const double w = p.weights[i];
    if (w > 0.0) {
      lo_sum += w * p.lower[i];
      hi_sum += w * p.upper[i];
    } else if (w < 0.0) {
      lo_sum += w * p.upper[i];
      hi_sum += w * p.lower[i];
    }
    if (w != 0.0) {
      breaks.push_back((p.lower[i] - p.eta[i]) / w);
      breaks.push_back((p.upper[i] - p.eta[i]) / w);
    }
  }
  const double slack = 1e-12 * (1.0 + std::abs(p.rhs));
  if (p.rhs < lo_sum - slack || p.rhs > hi_sum + slack) {
    throw InvalidArgument("solve_scbqp: infeasible, rhs " + std::to_string(p.rhs) +
                          " outside the attainable range [" + std::to_string(lo_sum) + ", " +
                          std::to_string(hi_sum) + "]");
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double tau = 0.0;
  if (!breaks.empty()) {
    // Segment [breaks[j], breaks[j+1]] containing the crossing f(tau) = rhs.
    double seg_lo, seg_hi, probe;
    if (value(breaks.front()) > p.rhs) {
      seg_lo = -INFINITY;
      seg_hi = breaks.front();
      probe = breaks.front() - 1.0;
    } else {
      std::size_t lo = 0, hi = breaks.size();
      while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (value(breaks[mid]) <= p.rhs) lo = mid; else hi = mid;
      }
      seg_lo = breaks[lo];
      if (lo + 1 < breaks.size()) {
        seg_hi = breaks[lo + 1];
        probe = 0.5 * (seg_lo + seg_hi);
      } else {
        seg_hi = INFINITY;
        probe = seg_lo + 1.0;
      }
    }
    // Bound and free contributions are summed apart so small free scores
    // are not absorbed by the bound total.
    double bound = 0.0, free = 0.0, curvature = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = p.weights[i];
      if (w == 0.0) continue;
      const double x = p.eta[i] + w * probe;
      if (x > p.lower[i] && x < p.upper[i]) {
        free += w * p.eta[i];
        curvature += w * w;
      } else {
        bound += w * clip(x, p.lower[i], p.upper[i]);
      }
    }
    if (curvature > 0.0) {
      tau = ((p.rhs - bound) - free) / curvature;
      tau = std::min(std::max(tau, seg_lo), seg_hi);
    } else {
      tau = std::isfinite(seg_lo) ? seg_lo : seg_hi;
    }
  }

  ClosedFormResult r;
  r.mu.resize(d);
  r.cert.branch = Branch::EqualityTight;
  r.cert.tau = tau;
  r.cert.weights = p.weights;
  r.cert.support.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    r.mu[i] = clip(p.eta[i] + p.weights[i] * tau, p.lower[i], p.upper[i]);
    r.cert.support[i] = interior(r.mu[i], p.lower[i], p.upper[i]);
  }
  return r;
}

std::vector<double> jvp_scbqp(const ClosedFormCertificate& cert, std::span<const double> w,
                              std::span<const double> d) {
  require_same_size(d.size(), cert.support.size(), "jvp_scbqp");
  require_same_size(d.size(), w.size(), "jvp_scbqp");
  ClosedFormCertificate c = cert;
  c.weights.assign(w.begin(), w.end());
  return tight_product(c, d);
}

ClosedFormResult solve_xor(std::span<const double> eta, std::span<const double> delta) {
  require_same_size(eta.size(), delta.size(), "solve_xor");
  return tight_unit(eta, delta, std::vector<double>(delta.begin(), delta.end()), 1.0);
}

ClosedFormResult solve_or(std::span<const double> eta, std::span<const double> delta) {
  ClosedFormResult r = clip_unit(eta, delta);
  if (weighted_sum(delta, r.mu) >= 1.0) {
    r.cert.branch = Branch::ClipFeasible;
    return r;
  }
  return solve_xor(eta, delta);
}

ClosedFormResult solve_budget(std::span<const double> eta, std::span<const double> delta,
                              double budget) {
  ClosedFormResult r = clip_unit(eta, delta);
  if (weighted_sum(delta, r.mu) <= budget) {
    r.cert.branch = Branch::ClipFeasible;
    return r;
  }
  return tight_unit(eta, delta, std::vector<double>(delta.begin(), delta.end()), budget);
}

ClosedFormResult solve_at_most_one(std::span<const double> eta,
                                   std::span<const double> delta) {
  return solve_budget(eta, delta, 1.0);
}

ClosedFormResult solve_knapsack(std::span<const double> eta, std::span<const double> delta,
                                std::span<const double> costs, double budget) {
  require_same_size(eta.size(), costs.size(), "solve_knapsack");
  std::vector<double> w(costs.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(costs[i] >= 0.0)) throw InvalidArgument("solve_knapsack: costs must be non-negative");
    w[i] = costs[i] * delta[i];
  }
  ClosedFormResult r = clip_unit(eta, delta);
  if (weighted_sum(w, r.mu) <= budget) {
    r.cert.branch = Branch::ClipFeasible;
    return r;
  }
  return tight_unit(eta, delta, std::move(w), budget);
}

ClosedFormResult project_cone_a1(std::span<const double> eta, std::span<const double> delta) {
  const std::size_t d = eta.size();
  require_same_size(d, delta.size(), "project_cone_a1");
  if (d < 2) throw InvalidArgument("project_cone_a1: needs at least one input and the output");
  upper_bounds(delta);
  const std::size_t out = d - 1;

  std::vector<std::size_t> order(out);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return delta[a] * eta[a] > delta[b] * eta[b];
  });

  double num = eta[out] / delta[out];
  double den = 1.0 / (delta[out] * delta[out]);
  double tau = num / den;
  std::size_t rho = 0;
  while (rho < out) {
    const std::size_t next = order[rho];
    if (tau >= delta[next] * eta[next]) break;
    num += eta[next] / delta[next];
    den += 1.0 / (delta[next] * delta[next]);
    tau = num / den;
    ++rho;
  }

  ClosedFormResult r;
  r.mu.assign(eta.begin(), eta.end());
  r.cert.branch = Branch::Cone;
  r.cert.tau = tau;
  r.cert.cone_size = rho;
  r.cert.cone_set.assign(d, false);
  r.cert.cone_set[out] = true;
  for (std::size_t k = 0; k < rho; ++k) r.cert.cone_set[order[k]] = true;
  for (std::size_t i = 0; i < d; ++i) {
    if (r.cert.cone_set[i]) r.mu[i] = tau / delta[i];
  }
  r.cert.support.assign(d, true);
  r.cert.delta.assign(delta.begin(), delta.end());
  return r;
}

ClosedFormResult solve_orout(std::span<const double> eta, std::span<const double> delta) {
  const std::size_t d = eta.size();
  if (d < 2) throw InvalidArgument("solve_orout: needs at least one input and the output");
  const std::size_t out = d - 1;

  auto a1_holds = [&](const std::vector<double>& mu) {
    for (std::size_t i = 0; i < out; ++i) {
      if (delta[i] * mu[i] > delta[out] * mu[out] + kFeasibilitySlack) return false;
    }
    return true;
  };
  auto a2_holds = [&](const std::vector<double>& mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < out; ++i) s += delta[i] * mu[i];
    return s + kFeasibilitySlack >= delta[out] * mu[out];
  };

  ClosedFormResult r = clip_unit(eta, delta);
  const bool a1 = a1_holds(r.mu);
  if (a1 && a2_holds(r.mu)) {
    r.cert.branch = Branch::OrOutStep1;
    return r;
  }
  if (!a1) {
    ClosedFormResult cone = project_cone_a1(eta, delta);
    ClosedFormResult boxed = clip_unit(cone.mu, delta);
    if (a2_holds(boxed.mu)) {
      cone.mu = std::move(boxed.mu);
      cone.cert.branch = Branch::OrOutStep2;
      cone.cert.support = std::move(boxed.cert.support);
      return cone;
    }
  }
  std::vector<bool> last(d, false);
  last[out] = true;
  ClosedFormResult tight = apply_negation(
      [](std::span<const double> e, std::span<const double> dl) { return solve_xor(e, dl); },
      last, eta, delta);
  tight.cert.branch = Branch::OrOutStep3;
  return tight;
}

std::vector<double> flip_masked(std::span<const double> x, std::span<const double> delta,
                                const std::vector<bool>& mask) {
  require_same_size(x.size(), delta.size(), "negation");
  require_same_size(x.size(), mask.size(), "negation");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (mask[k]) out[k] = 1.0 / delta[k] - out[k];
  }
  return out;
}

PairScores pair_reparametrize(std::span<const double> eta_m, std::span<const double> eta_n,
                              double delta1, double delta2) {
  if (eta_m.size() != 4 || eta_n.size() != 4) {
    throw InvalidArgument("pair_reparametrize: expects 4 variable scores and 4 joint scores");
  }
  const double ff = eta_n[0], ft = eta_n[1], tf = eta_n[2], tt = eta_n[3];
  PairScores s;
  s.eta1 = 0.5 * (eta_m[1] - eta_m[0] + 1.0 / delta1 + delta1 * (tf - ff));
  s.eta2 = 0.5 * (eta_m[3] - eta_m[2] + 1.0 / delta2 + delta2 * (ft - ff));
  s.eta12 = 0.5 * (ff - ft - tf + tt);
  return s;
}

ClosedFormResult solve_pair(double eta1, double eta2, double eta12, double delta1,
                            double delta2) {
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) {
    throw InvalidArgument("solve_pair: delta entries must be positive");
  }
  ClosedFormResult r;
  r.cert.delta = {delta1, delta2};
  if (eta12 < 0.0) {
    PairSolve s = solve_pair_nonneg(eta1 + delta1 * eta12, 1.0 / delta2 - eta2, -eta12,
                                    delta1, delta2);
    Eigen::Matrix3d a;
    a << 1.0, 0.0, delta1,
         0.0, -1.0, 0.0,
         0.0, 0.0, -1.0;
    Eigen::Matrix2d b;
    b << 1.0, 0.0,
         0.0, -1.0;
    r.mu = {s.mu1, 1.0 / delta2 - s.mu2};
    r.nu = {delta1 * s.mu1 - s.mu12};
    r.cert.branch = s.branch;
    r.cert.pair_flip = true;
    r.cert.pair_jacobian = b * s.jac * a;
  } else {
    PairSolve s = solve_pair_nonneg(eta1, eta2, eta12, delta1, delta2);
    r.mu = {s.mu1, s.mu2};
    r.nu = {s.mu12};
    r.cert.branch = s.branch;
    r.cert.pair_jacobian = s.jac;
  }
  r.cert.support = {interior(r.mu[0], 0.0, 1.0 / delta1), interior(r.mu[1], 0.0, 1.0 / delta2)};
  return r;
}

std::vector<double> jvp_closed_form(const ClosedFormCertificate& cert,
                                    std::span<const double> v) {
  switch (cert.branch) {
    case Branch::PairCase1:
    case Branch::PairCase2:
    case Branch::PairCase3: {
      require_same_size(v.size(), 3, "pair jvp");
      Eigen::Vector2d out = cert.pair_jacobian * Eigen::Vector3d(v[0], v[1], v[2]);
      return {out[0], out[1]};
    }
    default:
      break;
  }
  require_same_size(v.size(), cert.support.size(), "closed-form jvp");
  std::vector<double> signed_v = apply_signs(std::vector<double>(v.begin(), v.end()),
                                             cert.negation_mask);
  return apply_signs(unsigned_product(cert, signed_v, false), cert.negation_mask);
}

std::vector<double> vjp_closed_form(const ClosedFormCertificate& cert,
                                    std::span<const double> d) {
  switch (cert.branch) {
    case Branch::PairCase1:
    case Branch::PairCase2:
    case Branch::PairCase3: {
      require_same_size(d.size(), 2, "pair vjp");
      Eigen::Vector3d out = cert.pair_jacobian.transpose() * Eigen::Vector2d(d[0], d[1]);
      return {out[0], out[1], out[2]};
    }
    default:
      break;
  }
  require_same_size(d.size(), cert.support.size(), "closed-form vjp");
  std::vector<double> signed_d = apply_signs(std::vector<double>(d.begin(), d.end()),
                                             cert.negation_mask);
  return apply_signs(unsigned_product(cert, signed_d, true), cert.negation_mask);
}

}  // namespace structura
