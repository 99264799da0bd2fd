#include "structura/activeset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "structura/error.hpp"

namespace structura {

namespace {

constexpr double kPivotFloor = 1e-12;

Eigen::VectorXd scaled_m(const Structure& s, std::span<const double> delta) {
  Eigen::VectorXd col(static_cast<Eigen::Index>(s.m.size()));
  for (std::size_t k = 0; k < s.m.size(); ++k) col[k] = s.m[k] / delta[k];
  return col;
}

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void refactorize(ActiveSetState& st) {
  const Eigen::Index k = st.mbar.cols();
  Eigen::MatrixXd kkt(k + 1, k + 1);
  kkt(0, 0) = 0.0;
  kkt.block(0, 1, 1, k).setOnes();
  kkt.block(1, 0, k, 1).setOnes();
  kkt.bottomRightCorner(k, k) = st.mbar.transpose() * st.mbar;
  st.kkt_inverse = kkt.fullPivLu().inverse();
}

void start_from(ActiveSetState& st, Structure s, std::span<const double> delta) {
  Eigen::VectorXd col = scaled_m(s, delta);
  const double g = col.squaredNorm();
  st.mbar = col;
  st.nbar = as_vector(s.n);
  st.active.assign(1, std::move(s));
  st.p = Eigen::VectorXd::Ones(1);
  st.kkt_inverse.resize(2, 2);
  st.kkt_inverse << -g, 1.0, 1.0, 0.0;
}

// Borders the inverse with one more structure. Returns false (and leaves
// the state untouched) when the column is affinely dependent on S.
bool add_column(ActiveSetState& st, Structure s, std::span<const double> delta) {
  const Eigen::Index k = st.mbar.cols();
  Eigen::VectorXd col = scaled_m(s, delta);
  Eigen::VectorXd b(k + 1);
  b[0] = 1.0;
  b.tail(k) = st.mbar.transpose() * col;
  const double c = col.squaredNorm();
  Eigen::VectorXd u = st.kkt_inverse * b;
  const double schur = c - b.dot(u);
  if (!(schur > kPivotFloor * std::max(1.0, c))) return false;

  Eigen::MatrixXd inv(k + 2, k + 2);
  inv.topLeftCorner(k + 1, k + 1) = st.kkt_inverse + u * u.transpose() / schur;
  inv.block(0, k + 1, k + 1, 1) = -u / schur;
  inv.block(k + 1, 0, 1, k + 1) = -u.transpose() / schur;
  inv(k + 1, k + 1) = 1.0 / schur;
  st.kkt_inverse = std::move(inv);

  st.mbar.conservativeResize(Eigen::NoChange, k + 1);
  st.mbar.col(k) = col;
  st.nbar.conservativeResize(Eigen::NoChange, k + 1);
  st.nbar.col(k) = as_vector(s.n);
  st.p.conservativeResize(k + 1);
  st.p[k] = 0.0;
  st.active.push_back(std::move(s));
  return true;
}

Eigen::MatrixXd drop_index(const Eigen::MatrixXd& a, Eigen::Index r, bool rows, bool cols) {
  Eigen::MatrixXd out(a.rows() - (rows ? 1 : 0), a.cols() - (cols ? 1 : 0));
  for (Eigen::Index i = 0, oi = 0; i < a.rows(); ++i) {
    if (rows && i == r) continue;
    for (Eigen::Index j = 0, oj = 0; j < a.cols(); ++j) {
      if (cols && j == r) continue;
      out(oi, oj++) = a(i, j);
    }
    ++oi;
  }
  return out;
}

void remove_column(ActiveSetState& st, Eigen::Index idx) {
  const Eigen::Index r = idx + 1;
  const double e = st.kkt_inverse(r, r);
  Eigen::VectorXd u = drop_index(st.kkt_inverse.col(r), r, true, false);

  st.mbar = drop_index(st.mbar, idx, false, true);
  st.nbar = drop_index(st.nbar, idx, false, true);
  st.p = drop_index(st.p, idx, true, false);
  st.active.erase(st.active.begin() + idx);
  if (st.active.empty()) {
    st.kkt_inverse.resize(0, 0);
    return;
  }

  if (std::abs(e) < kPivotFloor) {
    refactorize(st);
  } else {
    st.kkt_inverse = drop_index(st.kkt_inverse, r, true, true) - u * u.transpose() / e;
  }
}

// Coefficients a (summing to one) with Mbar a = m~ for a column in the
// affine hull of the active set.
Eigen::VectorXd affine_coefficients(const ActiveSetState& st, const Structure& s,
                                    std::span<const double> delta) {
  const Eigen::Index k = st.mbar.cols();
  Eigen::VectorXd b(k + 1);
  b[0] = 1.0;
  b.tail(k) = st.mbar.transpose() * scaled_m(s, delta);
  return (st.kkt_inverse * b).tail(k);
}

// Adds s, which improves on the active set. When s is affinely dependent
// on the active columns the objective is linear along e_s - a, so weight
// moves onto s until an active structure hits zero and is dropped.
bool enter_structure(ActiveSetState& st, Structure s, std::span<const double> delta) {
  double weight = 0.0;
  while (true) {
    if (st.size() == 0) {
      start_from(st, std::move(s), delta);
      return true;
    }
    Eigen::VectorXd a = affine_coefficients(st, s, delta);
    const Eigen::Index k = st.mbar.cols();
    if (add_column(st, s, delta)) {
      st.p[k] = weight;
      return true;
    }
    double step = 0.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (a[i] <= kPivotFloor) continue;
      double t = st.p[i] / a[i];
      if (block < 0 || t < step) {
        step = t;
        block = i;
      }
    }
    if (block < 0) return false;
    st.p -= step * a;
    st.p[block] = 0.0;
    st.p = st.p.cwiseMax(0.0);
    weight += step;
    remove_column(st, block);
  }
}

bool same_structure(const Structure& a, const Structure& b) {
  return a.m == b.m && a.n == b.n;
}

}  // namespace

Eigen::MatrixXd ActiveSetState::q() const {
  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  return kkt_inverse.bottomRightCorner(k, k);
}

SparseMapSolution solve_sparsemap(const MapOracle& oracle,
                                  std::span<const double> eta_m,
                                  std::span<const double> eta_n,
                                  std::span<const double> delta,
                                  const SparseMapConfig& cfg,
                                  const ActiveSetState* warm) {
  const std::size_t d = eta_m.size();
  const std::size_t dn = eta_n.size();
  if (delta.size() != d) {
    throw InvalidArgument("solve_sparsemap: delta has " + std::to_string(delta.size()) +
                          " entries, expected " + std::to_string(d));
  }
  if (cfg.max_iterations < 1 || !(cfg.support_tolerance > 0.0)) {
    throw InvalidArgument("solve_sparsemap: max_iterations >= 1 and tolerance > 0 required");
  }
  for (double x : delta) {
    if (!(x > 0.0)) throw InvalidArgument("solve_sparsemap: delta entries must be positive");
  }

  const Eigen::Map<const Eigen::VectorXd> eta(eta_m.data(), static_cast<Eigen::Index>(d));
  const Eigen::Map<const Eigen::VectorXd> eta_add(eta_n.data(), static_cast<Eigen::Index>(dn));
  const Eigen::Map<const Eigen::VectorXd> dvec(delta.data(), static_cast<Eigen::Index>(d));

  auto call_oracle = [&](const Eigen::VectorXd& scores) {
    Structure s = oracle(std::span<const double>(scores.data(), d), eta_n);
    if (s.m.size() != d || s.n.size() != dn) {
      throw SolverError("oracle returned a structure of the wrong shape");
    }
    return s;
  };

  SparseMapSolution sol;
  ActiveSetState& st = sol.state;
  const bool reuse = warm != nullptr && warm->size() > 0 &&
                     warm->mbar.rows() == static_cast<Eigen::Index>(d) &&
                     warm->nbar.rows() == static_cast<Eigen::Index>(dn);
  if (reuse) {
    st = *warm;
  } else {
    Eigen::VectorXd scores = eta.cwiseQuotient(dvec);
    start_from(st, call_oracle(scores), delta);
  }

  std::size_t it = 0;
  while (it < cfg.max_iterations) {
    ++it;
    const Eigen::Index k = st.mbar.cols();
    Eigen::VectorXd rhs(k + 1);
    rhs[0] = 1.0;
    rhs.tail(k) = st.mbar.transpose() * eta + st.nbar.transpose() * eta_add;
    Eigen::VectorXd sys = st.kkt_inverse * rhs;
    Eigen::VectorXd p_new = sys.tail(k);

    if (p_new.minCoeff() < 0.0) {
      double alpha = 1.0;
      Eigen::Index block = -1;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (p_new[i] >= 0.0) continue;
        double a = st.p[i] / (st.p[i] - p_new[i]);
        if (block < 0 || a < alpha) {
          alpha = a;
          block = i;
        }
      }
      st.p += alpha * (p_new - st.p);
      st.p[block] = 0.0;
      remove_column(st, block);
      st.p /= st.p.sum();
      continue;
    }

    st.p = p_new;
    st.tau = sys[0];
    Eigen::VectorXd mu = st.mbar * st.p;
    Eigen::VectorXd scores = (eta - mu).cwiseQuotient(dvec);
    Structure s = call_oracle(scores);
    if (s.score <= st.tau + cfg.support_tolerance) {
      sol.converged = true;
      break;
    }
    bool known = std::any_of(st.active.begin(), st.active.end(),
                             [&](const Structure& a) { return same_structure(a, s); });
    if (known) {
      sol.converged = true;
      break;
    }
    if (!enter_structure(st, std::move(s), delta)) break;
  }
  sol.iterations = it;

  Eigen::VectorXd mu = st.mbar * st.p;
  Eigen::VectorXd nu = st.nbar * st.p;
  sol.mu.assign(mu.data(), mu.data() + mu.size());
  sol.nu.assign(nu.data(), nu.data() + nu.size());
  return sol;
}

std::pair<std::vector<double>, std::vector<double>> jvp_sparsemap(
    const SparseMapSolution& sol, std::span<const double> d) {
  const ActiveSetState& st = sol.state;
  if (static_cast<Eigen::Index>(d.size()) != st.mbar.rows()) {
    throw InvalidArgument("jvp_sparsemap: direction has " + std::to_string(d.size()) +
                          " entries, expected " + std::to_string(st.mbar.rows()));
  }
  const Eigen::Map<const Eigen::VectorXd> dv(d.data(), static_cast<Eigen::Index>(d.size()));
  Eigen::VectorXd w = st.q() * (st.mbar.transpose() * dv);
  Eigen::VectorXd dm = st.mbar * w;
  Eigen::VectorXd dn = st.nbar * w;
  return {std::vector<double>(dm.data(), dm.data() + dm.size()),
          std::vector<double>(dn.data(), dn.data() + dn.size())};
}

double sparsemap_objective(std::span<const double> eta_m,
                           std::span<const double> eta_n,
                           std::span<const double> mu,
                           std::span<const double> nu) {
  double value = 0.0;
  for (std::size_t i = 0; i < eta_m.size(); ++i) {
    double r = eta_m[i] - mu[i];
    value += 0.5 * r * r;
  }
  for (std::size_t i = 0; i < eta_n.size(); ++i) value -= eta_n[i] * nu[i];
  return value;
}

}  // namespace structura
