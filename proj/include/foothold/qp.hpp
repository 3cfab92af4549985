#pragma once

#include "foothold/common.hpp"

#include <Eigen/Cholesky>
#include <optional>

namespace foothold {

// Bounds at or beyond this magnitude are treated as infinite, in memory and on disk.
inline constexpr double kQpInfinity = 1e30;

/// min 1/2 x'Px + q'x  subject to  l <= Ax <= u.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index n() const { return q.size(); }
  Eigen::Index m() const { return l.size(); }

  void validate() const {
    const auto nv = n(), mc = m();
    if (P.rows() != nv || P.cols() != nv) throw InvalidArgument("QP: P must be n x n");
    if (A.rows() != mc || (mc > 0 && A.cols() != nv) || u.size() != mc)
      throw InvalidArgument("QP: A, l, u dimensions disagree");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()))
      throw InvalidArgument("QP: P must be symmetric");
    for (Eigen::Index i = 0; i < mc; ++i)
      if (l[i] > u[i]) throw InvalidArgument("QP: l must not exceed u");
    if (!P.allFinite() || !q.allFinite() || !A.allFinite()) throw InvalidArgument("QP: data must be finite");
  }

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

enum class QpStatus { solved, max_iters, primal_infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::solved: return "solved";
    case QpStatus::max_iters: return "max_iters";
    case QpStatus::primal_infeasible: return "primal_infeasible";
  }
  return "unknown";
}

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_pri = 1e-4;
  double eps_dua = 1e-4;
  int max_iters = 4000;
  int check_every = 5;
  double eps_pinf = 1e-6;
  int scaling_iters = 10;  // Ruiz equilibration passes, 0 disables
  bool adaptive_rho = true;  // rebalance rho from the residual ratio, refactorizing on large changes
  int adapt_every = 25;
  bool polish = true;      // try an active-set KKT solve from the ADMM iterate
  int polish_every = 50;
  bool polish_converged = true;  // also polish once the ADMM tolerances are met
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  QpStatus status = QpStatus::max_iters;
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
};

struct KktResiduals {
  double primal = 0.0;  // ||clip(Ax, l, u) - Ax||_inf
  double dual = 0.0;    // ||Px + q + A'y||_inf
};

inline KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != qp.n() || y.size() != qp.m()) throw InvalidArgument("kkt_residuals: dimension mismatch");
  KktResiduals r;
  if (qp.m() > 0) {
    const Eigen::VectorXd ax = qp.A * x;
    r.primal = (ax.cwiseMax(qp.l).cwiseMin(qp.u) - ax).cwiseAbs().maxCoeff();
  }
  Eigen::VectorXd g = qp.P * x + qp.q;
  if (qp.m() > 0) g += qp.A.transpose() * y;
  r.dual = qp.n() > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

/// Operator-splitting (ADMM) QP solver with over-relaxation. The data is
/// Ruiz-equilibrated first; one dense Cholesky factorization of
/// P + sigma I + A' diag(rho) A per solve. Equality rows (l == u) use
/// 1e3 * rho, free rows 1e-6. rho starts at the configured value and is
/// rebalanced from the primal/dual residual ratio. Termination is judged on
/// the unscaled residuals.
class AdmmSolver {
 public:
  explicit AdmmSolver(QpSettings settings = {}) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }

  void set_warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    warm_x_ = x;
    warm_y_ = y;
  }
  void clear_warm_start() {
    warm_x_.reset();
    warm_y_.reset();
  }

  QpSolution solve(const QpProblem& qp) {
    qp.validate();
    const auto n = qp.n(), m = qp.m();
    const QpSettings& s = settings_;

    // A non-PSD P shows up as a failed factorization of P plus a tiny shift.
    {
      const double shift = 1e-9 * std::max(1.0, n > 0 ? qp.P.cwiseAbs().maxCoeff() : 0.0);
      Eigen::LLT<Eigen::MatrixXd> check(qp.P + shift * Eigen::MatrixXd::Identity(n, n));
      if (check.info() != Eigen::Success) throw InvalidArgument("QP: P is not positive semidefinite");
    }

    const Scaling sc = equilibrate(qp, s.scaling_iters);
    QpProblem sq;
    sq.P = sc.cost * (sc.D.asDiagonal() * qp.P * sc.D.asDiagonal());
    sq.q = sc.cost * sc.D.cwiseProduct(qp.q);
    sq.A = sc.E.asDiagonal() * qp.A * sc.D.asDiagonal();
    sq.l = qp.l;
    sq.u = qp.u;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (sq.l[i] > -kQpInfinity) sq.l[i] *= sc.E[i];
      if (sq.u[i] < kQpInfinity) sq.u[i] *= sc.E[i];
    }

    double rho_bar = s.rho;
    Eigen::VectorXd rho(m);
    auto set_rho = [&] {
      for (Eigen::Index i = 0; i < m; ++i) {
        const bool lo_inf = qp.l[i] <= -kQpInfinity, hi_inf = qp.u[i] >= kQpInfinity;
        if (lo_inf && hi_inf)
          rho[i] = 1e-6;
        else if (qp.u[i] - qp.l[i] < 1e-9)
          rho[i] = 1e3 * rho_bar;
        else
          rho[i] = rho_bar;
      }
    };
    Eigen::LLT<Eigen::MatrixXd> llt;
    auto factorize = [&] {
      Eigen::MatrixXd K = sq.P + s.sigma * Eigen::MatrixXd::Identity(n, n);
      if (m > 0) K.noalias() += sq.A.transpose() * rho.asDiagonal() * sq.A;
      llt.compute(K);
      if (llt.info() != Eigen::Success) throw InvalidArgument("QP: KKT factorization failed");
    };
    set_rho();
    factorize();

    // Iterates live in the scaled space.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    if (warm_x_ && warm_x_->size() == n) x = warm_x_->cwiseQuotient(sc.D);
    if (warm_y_ && warm_y_->size() == m) y = sc.cost * warm_y_->cwiseQuotient(sc.E);
    Eigen::VectorXd z = m > 0 ? Eigen::VectorXd((sq.A * x).cwiseMax(sq.l).cwiseMin(sq.u)) : Eigen::VectorXd(0);

    QpSolution sol;
    Eigen::VectorXd xt(n), zt(m), z_relax(m), y_prev(m), rhs(n);
    Eigen::VectorXd x_out(n), y_out(m);
    auto unscale = [&] {
      x_out = sc.D.cwiseProduct(x);
      y_out = sc.E.cwiseProduct(y) / sc.cost;
    };
    for (int it = 1; it <= s.max_iters; ++it) {
      rhs = s.sigma * x - sq.q;
      if (m > 0) rhs.noalias() += sq.A.transpose() * (rho.cwiseProduct(z) - y);
      xt = llt.solve(rhs);
      x = s.alpha * xt + (1.0 - s.alpha) * x;
      if (m > 0) {
        zt.noalias() = sq.A * xt;
        z_relax = s.alpha * zt + (1.0 - s.alpha) * z;
        y_prev = y;
        z = (z_relax + y.cwiseQuotient(rho)).cwiseMax(sq.l).cwiseMin(sq.u);
        y += rho.cwiseProduct(z_relax - z);
      }
      sol.iterations = it;

      if (it % s.check_every != 0 && it != s.max_iters) continue;
      unscale();
      const KktResiduals r = kkt_residuals(qp, x_out, y_out);
      sol.primal_res = r.primal;
      sol.dual_res = r.dual;
      // The box residual alone lets inactive rows keep multipliers when the dual is
      // degenerate; requiring Ax ~ z (with y in the normal cone at z) restores complementarity.
      const double gap = m > 0 ? (qp.A * x_out - z.cwiseQuotient(sc.E)).cwiseAbs().maxCoeff() : 0.0;
      if (r.primal <= s.eps_pri && r.dual <= s.eps_dua && gap <= s.eps_pri) {
        sol.status = QpStatus::solved;
        // Refine the converged iterate when the active-set solve is at least as accurate.
        QpSolution polished = sol;
        if (s.polish && s.polish_converged && try_polish(qp, sq, sc, z, y, polished) &&
            std::max(polished.primal_res, polished.dual_res) <= std::max(r.primal, r.dual)) {
          polished.objective = qp.objective(polished.x);
          return polished;
        }
        break;
      }
      if (s.polish && (it % s.polish_every == 0 || it == s.max_iters) && try_polish(qp, sq, sc, z, y, sol)) {
        sol.status = QpStatus::solved;
        sol.objective = qp.objective(sol.x);
        return sol;
      }
      if (m > 0 && primal_infeasible(sq, y - y_prev)) {
        sol.status = QpStatus::primal_infeasible;
        break;
      }
      if (s.adaptive_rho && m > 0 && it % s.adapt_every == 0) {
        const Eigen::VectorXd ax = sq.A * x;
        const Eigen::VectorXd px = sq.P * x;
        const Eigen::VectorXd aty = sq.A.transpose() * y;
        const double pri = (ax - z).cwiseAbs().maxCoeff() /
                           std::max({ax.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff(), 1e-12});
        const double dua = (px + sq.q + aty).cwiseAbs().maxCoeff() /
                           std::max({px.cwiseAbs().maxCoeff(), aty.cwiseAbs().maxCoeff(),
                                     sq.q.cwiseAbs().maxCoeff(), 1e-12});
        const double proposed = std::clamp(rho_bar * std::sqrt(pri / std::max(dua, 1e-12)), 1e-6, 1e6);
        if (proposed > 5.0 * rho_bar || proposed < 0.2 * rho_bar) {
          rho_bar = proposed;
          set_rho();
          factorize();
        }
      }
    }
    unscale();
    sol.x = x_out;
    sol.y = y_out;
    sol.z = m > 0 ? Eigen::VectorXd(z.cwiseQuotient(sc.E)) : Eigen::VectorXd(0);
    sol.objective = qp.objective(sol.x);
    return sol;
  }

 private:
  struct Scaling {
    Eigen::VectorXd D;  // variables
    Eigen::VectorXd E;  // constraint rows
    double cost = 1.0;
  };

  // Ruiz equilibration of the KKT matrix [P A'; A 0] plus a cost scale.
  static Scaling equilibrate(const QpProblem& qp, int passes) {
    const auto n = qp.n(), m = qp.m();
    Scaling sc{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(m), 1.0};
    if (passes <= 0) return sc;
    auto bound = [](double v) { return std::clamp(v, 1e-4, 1e4); };
    Eigen::MatrixXd P = qp.P, A = qp.A;
    Eigen::VectorXd q = qp.q;
    for (int pass = 0; pass < passes; ++pass) {
      Eigen::VectorXd dn(n), em(m);
      for (Eigen::Index j = 0; j < n; ++j) {
        double norm = P.col(j).cwiseAbs().maxCoeff();
        if (m > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
        dn[j] = norm < 1e-12 ? 1.0 : bound(1.0 / std::sqrt(norm));
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        const double norm = n > 0 ? A.row(i).cwiseAbs().maxCoeff() : 0.0;
        em[i] = norm < 1e-12 ? 1.0 : bound(1.0 / std::sqrt(norm));
      }
      P = dn.asDiagonal() * P * dn.asDiagonal();
      q = dn.cwiseProduct(q);
      A = em.asDiagonal() * A * dn.asDiagonal();
      sc.D = sc.D.cwiseProduct(dn);
      sc.E = sc.E.cwiseProduct(em);
    }
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += P.col(j).cwiseAbs().maxCoeff();
    mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
    const double qn = n > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
    const double denom = std::max(mean_col, qn);
    sc.cost = denom < 1e-12 ? 1.0 : bound(1.0 / denom);
    return sc;
  }

  // Guess the active set from the iterate, solve the equality-constrained KKT
  // system with a small regularization plus iterative refinement, and keep the
  // result only if it passes the termination test with consistent dual signs.
  bool try_polish(const QpProblem& qp, const QpProblem& sq, const Scaling& sc, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& y, QpSolution& sol) const {
    const auto n = qp.n(), m = qp.m();
    std::vector<Eigen::Index> act;
    std::vector<double> bound;
    std::vector<int> side;  // -1 lower, +1 upper, 0 both (equality)
    for (Eigen::Index i = 0; i < m; ++i) {
      const bool lo = sq.l[i] > -kQpInfinity && z[i] - sq.l[i] < -y[i];
      const bool hi = sq.u[i] < kQpInfinity && sq.u[i] - z[i] < y[i];
      if (!lo && !hi) continue;
      act.push_back(i);
      const bool eq = sq.u[i] - sq.l[i] < 1e-12;
      bound.push_back(lo ? sq.l[i] : sq.u[i]);
      side.push_back(eq ? 0 : (lo ? -1 : 1));
    }
    const auto na = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Aa(na, n);
    for (Eigen::Index k = 0; k < na; ++k) Aa.row(k) = sq.A.row(act[k]);
    const double delta = 1e-9;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
    K.topLeftCorner(n, n) = sq.P;
    K.topRightCorner(n, na) = Aa.transpose();
    K.bottomLeftCorner(na, n) = Aa;
    Eigen::MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += delta;
    Kreg.bottomRightCorner(na, na).diagonal().array() -= delta;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
    Eigen::VectorXd rhs(n + na);
    rhs.head(n) = -sq.q;
    for (Eigen::Index k = 0; k < na; ++k) rhs[n + k] = bound[static_cast<std::size_t>(k)];
    Eigen::VectorXd sol_k = lu.solve(rhs);
    for (int refine = 0; refine < 3; ++refine) sol_k += lu.solve(rhs - K * sol_k);
    if (!sol_k.allFinite()) return false;

    Eigen::VectorXd ys = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < na; ++k) {
      const double v = sol_k[n + k];
      const int sd = side[static_cast<std::size_t>(k)];
      if ((sd < 0 && v > 0.0) || (sd > 0 && v < 0.0)) return false;
      ys[act[k]] = v;
    }
    const Eigen::VectorXd xp = sc.D.cwiseProduct(sol_k.head(n));
    const Eigen::VectorXd yp = sc.E.cwiseProduct(ys) / sc.cost;
    const KktResiduals r = kkt_residuals(qp, xp, yp);
    if (!(r.primal <= settings_.eps_pri && r.dual <= settings_.eps_dua)) return false;
    sol.x = xp;
    sol.y = yp;
    sol.z = m > 0 ? Eigen::VectorXd(qp.A * xp) : Eigen::VectorXd(0);
    sol.primal_res = r.primal;
    sol.dual_res = r.dual;
    return true;
  }

  // Farkas-type certificate on the dual increment.
  bool primal_infeasible(const QpProblem& qp, const Eigen::VectorXd& dy) const {
    const double norm = dy.cwiseAbs().maxCoeff();
    if (norm < 1e-12) return false;
    const double eps = settings_.eps_pinf * norm;
    if ((qp.A.transpose() * dy).cwiseAbs().maxCoeff() > eps) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
      if (dy[i] > 0.0) {
        if (qp.u[i] >= kQpInfinity) {
          if (dy[i] > eps) return false;
          continue;
        }
        support += qp.u[i] * dy[i];
      } else if (dy[i] < 0.0) {
        if (qp.l[i] <= -kQpInfinity) {
          if (-dy[i] > eps) return false;
          continue;
        }
        support += qp.l[i] * dy[i];
      }
    }
    return support < -eps;
  }

  QpSettings settings_;
  std::optional<Eigen::VectorXd> warm_x_;
  std::optional<Eigen::VectorXd> warm_y_;
};

}  // namespace foothold
