#include "esmeta/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "esmeta/errors.hpp"

namespace esmeta {

LinearProgram LinearProgram::with_variables(int n) {
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Zero(n);
  lp.A_eq.resize(0, n);
  lp.b_eq.resize(0);
  lp.A_ub.resize(0, n);
  lp.b_ub.resize(0);
  lp.lo = Eigen::VectorXd::Zero(n);
  lp.hi = Eigen::VectorXd::Constant(n, kLpInfinity);
  return lp;
}

void LinearProgram::validate() const {
  const auto n = c.size();
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("LinearProgram: ") + what); };
  if (A_eq.cols() != n || A_ub.cols() != n) fail("constraint matrices must have one column per variable");
  if (A_eq.rows() != b_eq.size()) fail("A_eq/b_eq row mismatch");
  if (A_ub.rows() != b_ub.size()) fail("A_ub/b_ub row mismatch");
  if (lo.size() != n || hi.size() != n) fail("bounds must have one entry per variable");
  if (!c.allFinite() || !A_eq.allFinite() || !A_ub.allFinite() || !b_eq.allFinite() ||
      !b_ub.allFinite())
    fail("non-finite coefficient");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lo[j]) || std::isnan(hi[j])) fail("NaN bound");
    if (lo[j] > hi[j]) fail("lo > hi");
    if (lo[j] == kLpInfinity || hi[j] == -kLpInfinity) fail("bound sentinel on the wrong side");
  }
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

double LpSolution::bound_term(const LinearProgram& lp) const {
  double term = 0.0;
  for (Eigen::Index j = 0; j < reduced_costs.size(); ++j) {
    const double d = reduced_costs[j];
    if (d > 0.0 && std::isfinite(lp.lo[j])) term += d * lp.lo[j];
    if (d < 0.0 && std::isfinite(lp.hi[j])) term += d * lp.hi[j];
  }
  return term;
}

double LpSolution::dual_objective(const LinearProgram& lp) const {
  return lp.b_eq.dot(duals_eq) - lp.b_ub.dot(duals_ub) + bound_term(lp);
}

double lp_scale(const LinearProgram& lp) {
  double s = 0.0;
  auto upd = [&s](const auto& m) {
    if (m.size() > 0) s = std::max(s, m.cwiseAbs().maxCoeff());
  };
  upd(lp.c);
  upd(lp.A_eq);
  upd(lp.A_ub);
  upd(lp.b_eq);
  upd(lp.b_ub);
  for (Eigen::Index j = 0; j < lp.lo.size(); ++j) {
    if (std::isfinite(lp.lo[j])) s = std::max(s, std::abs(lp.lo[j]));
    if (std::isfinite(lp.hi[j])) s = std::max(s, std::abs(lp.hi[j]));
  }
  return 1.0 + s;
}

namespace {

// x_j = offset + sign * z[col]  (- z[col_neg] for free variables)
struct VarMap {
  int col = -1;
  int col_neg = -1;
  double sign = 1.0;
  double offset = 0.0;
};

enum class Pricing { Dantzig, Bland };

class Tableau {
 public:
  Tableau(int rows, int cols) : m_(rows), n_(cols), t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)) {}

  double& at(int r, int c) { return t_(r, c); }
  double rhs(int r) const { return t_(r, n_); }
  double& rhs(int r) { return t_(r, n_); }
  double reduced(int c) const { return t_(m_, c); }
  double& reduced(int c) { return t_(m_, c); }
  double value(int r, int c) const { return t_(r, c); }

  void pivot(int r, int k) {
    const double p = t_(r, k);
    t_.row(r) /= p;
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, k);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    t_(r, k) = 1.0;
  }

  int rows() const { return m_; }
  int cols() const { return n_; }

 private:
  int m_;
  int n_;
  Eigen::MatrixXd t_;
};

struct SimplexState {
  Tableau tab;
  std::vector<int> basis;
  std::vector<bool> eligible;
  std::vector<bool> dropped_row;
  int pivots = 0;
};

enum class PhaseResult { Optimal, Unbounded };

PhaseResult run_phase(SimplexState& st, const LpOptions& opt, int max_pivots) {
  Tableau& tab = st.tab;
  const double piv_tol = 1e-11;
  Pricing pricing = Pricing::Dantzig;
  int degenerate_run = 0;

  while (true) {
    int enter = -1;
    double best = -opt.tol;
    for (int j = 0; j < tab.cols(); ++j) {
      if (!st.eligible[j]) continue;
      const double d = tab.reduced(j);
      if (d < best) {
        enter = j;
        best = d;
        if (pricing == Pricing::Bland) break;
      }
    }
    if (enter < 0) return PhaseResult::Optimal;

    int leave = -1;
    double best_ratio = 0.0;
    for (int r = 0; r < tab.rows(); ++r) {
      if (st.dropped_row[r]) continue;
      const double a = tab.value(r, enter);
      if (a <= piv_tol) continue;
      const double ratio = std::max(tab.rhs(r), 0.0) / a;
      if (leave < 0 || ratio < best_ratio - 1e-12 * (1.0 + best_ratio) ||
          (ratio <= best_ratio + 1e-12 * (1.0 + best_ratio) && st.basis[r] < st.basis[leave])) {
        leave = r;
        best_ratio = ratio;
      }
    }
    if (leave < 0) return PhaseResult::Unbounded;

    degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
    if (degenerate_run >= opt.degenerate_switch) pricing = Pricing::Bland;

    tab.pivot(leave, enter);
    st.basis[leave] = enter;
    if (++st.pivots > max_pivots) throw NumericError("solve_lp: pivot limit exceeded");
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt) {
  lp.validate();
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_lp: tol must be > 0");

  const int n = lp.num_variables();
  const int m_eq = static_cast<int>(lp.A_eq.rows());
  const int m_ub = static_cast<int>(lp.A_ub.rows());
  const double scale = lp_scale(lp);

  // Column map to z >= 0.
  std::vector<VarMap> vars(n);
  std::vector<int> bounded;  // variables needing an upper-bound row
  int cols = 0;
  for (int j = 0; j < n; ++j) {
    VarMap& v = vars[j];
    const bool lo_fin = std::isfinite(lp.lo[j]);
    const bool hi_fin = std::isfinite(lp.hi[j]);
    if (lo_fin) {
      v.col = cols++;
      v.offset = lp.lo[j];
      if (hi_fin) bounded.push_back(j);
    } else if (hi_fin) {
      v.col = cols++;
      v.sign = -1.0;
      v.offset = lp.hi[j];
    } else {
      v.col = cols++;
      v.col_neg = cols++;
    }
  }
  const int structural = cols;
  const int m_bnd = static_cast<int>(bounded.size());
  const int m = m_eq + m_ub + m_bnd;
  const int n_std = structural + m_ub + m_bnd;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n_std);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_std);

  auto place_row = [&](int r, const auto& coeffs, double rhs) {
    double shifted = rhs;
    for (int j = 0; j < n; ++j) {
      const double a = coeffs[j];
      if (a == 0.0) continue;
      shifted -= a * vars[j].offset;
      A(r, vars[j].col) += a * vars[j].sign;
      if (vars[j].col_neg >= 0) A(r, vars[j].col_neg) -= a;
    }
    b[r] = shifted;
  };
  for (int i = 0; i < m_eq; ++i) place_row(i, lp.A_eq.row(i), lp.b_eq[i]);
  for (int i = 0; i < m_ub; ++i) {
    place_row(m_eq + i, lp.A_ub.row(i), lp.b_ub[i]);
    A(m_eq + i, structural + i) = 1.0;
  }
  for (int k = 0; k < m_bnd; ++k) {
    const int j = bounded[k];
    const int r = m_eq + m_ub + k;
    A(r, vars[j].col) = 1.0;
    A(r, structural + m_ub + k) = 1.0;
    b[r] = lp.hi[j] - lp.lo[j];
  }
  for (int j = 0; j < n; ++j) {
    cost[vars[j].col] += lp.c[j] * vars[j].sign;
    if (vars[j].col_neg >= 0) cost[vars[j].col_neg] -= lp.c[j];
  }

  std::vector<double> flip(m, 1.0);
  for (int r = 0; r < m; ++r) {
    if (b[r] < 0.0) {
      flip[r] = -1.0;
      A.row(r) *= -1.0;
      b[r] = -b[r];
    }
  }

  // Phase 1 with one artificial per row.
  SimplexState st{Tableau(m, n_std + m), std::vector<int>(m), std::vector<bool>(n_std + m, true),
                  std::vector<bool>(m, false)};
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n_std; ++j) st.tab.at(r, j) = A(r, j);
    st.tab.at(r, n_std + r) = 1.0;
    st.tab.rhs(r) = b[r];
    st.basis[r] = n_std + r;
  }
  for (int j = 0; j < n_std; ++j) {
    double s = 0.0;
    for (int r = 0; r < m; ++r) s -= A(r, j);
    st.tab.reduced(j) = s;
  }
  {
    double s = 0.0;
    for (int r = 0; r < m; ++r) s -= b[r];
    st.tab.rhs(m) = s;
  }
  const int max_pivots = opt.max_pivots > 0 ? opt.max_pivots : 200 * (m + n_std + 10);

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  sol.duals_eq = Eigen::VectorXd::Zero(m_eq);
  sol.duals_ub = Eigen::VectorXd::Zero(m_ub);
  sol.reduced_costs = Eigen::VectorXd::Zero(n);

  run_phase(st, opt, max_pivots);
  const double infeasibility = -st.tab.rhs(m);
  if (infeasibility > 100.0 * opt.tol * scale * (m + 1)) {
    sol.status = LpStatus::Infeasible;
    sol.pivots = st.pivots;
    return sol;
  }

  // Drive remaining artificials out; rows where that is impossible are
  // linear combinations of the others and get a zero multiplier.
  for (int r = 0; r < m; ++r) {
    if (st.basis[r] < n_std) continue;
    int best = -1;
    double best_abs = 1e-9;
    for (int j = 0; j < n_std; ++j) {
      const double a = std::abs(st.tab.value(r, j));
      if (a > best_abs) {
        best = j;
        best_abs = a;
      }
    }
    if (best >= 0) {
      st.tab.pivot(r, best);
      st.basis[r] = best;
    } else {
      st.dropped_row[r] = true;
    }
  }

  // Phase 2.
  for (int j = n_std; j < n_std + m; ++j) st.eligible[j] = false;
  for (int j = 0; j < n_std + m; ++j) {
    double d = j < n_std ? cost[j] : 0.0;
    for (int r = 0; r < m; ++r) {
      if (st.dropped_row[r]) continue;
      const int bj = st.basis[r];
      const double cb = bj < n_std ? cost[bj] : 0.0;
      d -= cb * st.tab.value(r, j);
    }
    st.tab.reduced(j) = d;
  }
  for (int r = 0; r < m; ++r) {
    if (st.basis[r] < n_std && !st.dropped_row[r]) st.tab.reduced(st.basis[r]) = 0.0;
  }

  if (run_phase(st, opt, max_pivots) == PhaseResult::Unbounded) {
    sol.status = LpStatus::Unbounded;
    sol.pivots = st.pivots;
    return sol;
  }
  sol.pivots = st.pivots;

  // Recompute the vertex and multipliers from the final basis.
  std::vector<int> kept;
  for (int r = 0; r < m; ++r)
    if (!st.dropped_row[r]) kept.push_back(r);
  const int k = static_cast<int>(kept.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n_std);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (k > 0) {
    Eigen::MatrixXd B(k, k);
    Eigen::VectorXd bk(k), cb(k);
    for (int i = 0; i < k; ++i) {
      bk[i] = b[kept[i]];
      cb[i] = cost[st.basis[kept[i]]];
      for (int jj = 0; jj < k; ++jj) B(i, jj) = A(kept[i], st.basis[kept[jj]]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const Eigen::VectorXd zb = lu.solve(bk);
    const Eigen::VectorXd yk = lu.transpose().solve(cb);
    if (!zb.allFinite() || !yk.allFinite()) throw NumericError("solve_lp: singular final basis");
    for (int i = 0; i < k; ++i) {
      z[st.basis[kept[i]]] = std::max(zb[i], 0.0);
      y[kept[i]] = yk[i] * flip[kept[i]];
    }
  }
  for (int j = 0; j < n; ++j) {
    const VarMap& v = vars[j];
    double x = v.offset + v.sign * z[v.col];
    if (v.col_neg >= 0) x -= z[v.col_neg];
    sol.x[j] = x;
  }
  for (int i = 0; i < m_eq; ++i) sol.duals_eq[i] = y[i];
  for (int i = 0; i < m_ub; ++i) sol.duals_ub[i] = -y[m_eq + i];
  sol.reduced_costs = lp.c - lp.A_eq.transpose() * sol.duals_eq + lp.A_ub.transpose() * sol.duals_ub;
  sol.objective = lp.c.dot(sol.x);

  const double check = std::max(1e3 * opt.tol, 1e-9) * scale * (1.0 + sol.x.cwiseAbs().maxCoeff());
  double viol = 0.0;
  if (m_eq > 0) viol = std::max(viol, (lp.A_eq * sol.x - lp.b_eq).cwiseAbs().maxCoeff());
  if (m_ub > 0) viol = std::max(viol, (lp.A_ub * sol.x - lp.b_ub).maxCoeff());
  for (int j = 0; j < n; ++j) {
    viol = std::max(viol, lp.lo[j] - sol.x[j]);
    viol = std::max(viol, sol.x[j] - lp.hi[j]);
  }
  if (viol > check) {
    throw NumericError("solve_lp: final basis violates constraints by " + std::to_string(viol));
  }
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace esmeta
