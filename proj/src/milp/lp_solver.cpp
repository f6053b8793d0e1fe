#include "flexsched/milp/lp_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "flexsched/errors.hpp"

namespace flexsched::milp {

const char* to_string(LpStatus status) noexcept {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

LpRelaxation::LpRelaxation(const MilpProblem& problem) {
  problem.validate_numbers();
  const std::size_t n = problem.num_variables();
  const auto& rows = problem.constraints();
  const auto& vars = problem.variables();
  lower_.resize(n);
  upper_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    lower_[j] = vars[j].lower;
    upper_[j] = vars[j].upper;
  }
  // Inequalities that hold for every point of the variable box are dropped.
  std::vector<char> keep(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.relation == Relation::Equal) continue;
    const bool le = r.relation == Relation::LessEqual;
    double extreme = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double a = r.coef[k];
      const auto j = r.index[k];
      const bool take_upper = (a > 0.0) == le;
      extreme += a * (take_upper ? upper_[j] : lower_[j]);
    }
    const double slack = 1e-12 * (1.0 + std::abs(r.rhs));
    if (std::isfinite(extreme) && (le ? extreme <= r.rhs + slack : extreme >= r.rhs - slack)) {
      keep[i] = 0;
      ++dropped_rows_;
    }
  }
  std::vector<std::size_t> count(n + 1, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!keep[i]) continue;
    for (auto j : rows[i].index) ++count[j + 1];
  }
  col_start_.assign(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) col_start_[j + 1] = col_start_[j] + count[j + 1];
  row_index_.resize(col_start_[n]);
  value_.resize(col_start_[n]);
  std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!keep[i]) continue;
    const auto& r = rows[i];
    const auto row = static_cast<std::uint32_t>(rhs_.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto at = fill[r.index[k]]++;
      row_index_[at] = row;
      value_[at] = r.coef[k];
    }
    rhs_.push_back(r.rhs);
    relation_.push_back(r.relation);
  }
  // Upper bounds implied by a kept <= row with positive coefficients over
  // variables with finite lower bounds.
  implied_upper_.assign(n, kInf);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!keep[i] || r.relation != Relation::LessEqual) continue;
    bool usable = true;
    double floor = 0.0;
    for (std::size_t k = 0; k < r.size() && usable; ++k) {
      usable = r.coef[k] > 0.0 && std::isfinite(lower_[r.index[k]]);
      floor += r.coef[k] * lower_[r.index[k]];
    }
    if (!usable) continue;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto j = r.index[k];
      const double bound = (r.rhs - floor) / r.coef[k] + lower_[j];
      implied_upper_[j] = std::min(implied_upper_[j], bound);
    }
  }
  maximize_ = problem.sense() == Sense::Maximize;
  cost_.resize(n);
  price_weight_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    cost_[j] = maximize_ ? -problem.objective()[j] : problem.objective()[j];
    double w = 1.0;
    for (auto k = col_start_[j]; k < col_start_[j + 1]; ++k) w += value_[k] * value_[k];
    price_weight_[j] = w;
  }
}

namespace {

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, Free };

struct Peel {
  std::uint32_t row;
  std::uint32_t pos;
  double pivot;
};

struct Eta {
  std::uint32_t pos;
  double pivot;
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

constexpr double kPivotTol = 1e-9;
constexpr double kPeelTol = 1e-11;
constexpr std::size_t kPriceChunk = 2048;

}  // namespace

class SimplexRun {
 public:
  SimplexRun(const LpRelaxation& lp, std::span<const double> lower,
             std::span<const double> upper, const LpOptions& options)
      : lp_(lp),
        opt_(options),
        n_(lp.cols()),
        m_(lp.rows()),
        total_(n_ + 2 * m_),
        upper_(upper) {
    lb_.resize(total_);
    ub_.resize(total_);
    bool tightened = true;
    for (std::size_t j = 0; j < n_; ++j) tightened = tightened && lower[j] >= lp.lower_[j];
    for (std::size_t j = 0; j < n_; ++j) {
      lb_[j] = lower[j];
      ub_[j] = upper[j];
      // A redundant upper bound only adds degenerate vertices.
      if (tightened && upper[j] >= lp.implied_upper_[j]) ub_[j] = kInf;
    }
    max_iter_ = opt_.max_iterations
                    ? opt_.max_iterations
                    : 50 * (m_ + 1) + 10 * n_ + 10000;
  }

  LpSolution run() {
    LpSolution sol;
    for (std::size_t j = 0; j < n_; ++j) {
      if (lb_[j] > ub_[j] + opt_.feasibility_tol) {
        sol.status = LpStatus::Infeasible;
        return sol;
      }
    }
    const bool need_phase1 = initialize();
    if (need_phase1) {
      set_phase1_costs();
      refactor();
      compute_primal();
      iterate();
      double infeas = 0.0;
      for (std::size_t i = 0; i < m_; ++i) infeas += x_[n_ + m_ + i];
      double scale = 1.0;
      for (double b : lp_.rhs_) scale = std::max(scale, std::abs(b));
      if (infeas > 1e-7 * scale) {
        sol.status = LpStatus::Infeasible;
        sol.iterations = iterations_;
        return sol;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        const auto a = n_ + m_ + i;
        ub_[a] = 0.0;
        lb_[a] = 0.0;
        if (state_[a] != VarState::Basic) {
          x_[a] = 0.0;
          state_[a] = VarState::AtLower;
        }
      }
    }
    set_phase2_costs();
    refactor();
    compute_primal();
    const bool bounded = iterate();
    sol.iterations = iterations_;
    if (!bounded) {
      sol.status = LpStatus::Unbounded;
      return sol;
    }
    sol.status = LpStatus::Optimal;
    sol.x.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      sol.x[j] = std::clamp(x_[j], lb_[j], std::min(ub_[j], upper_[j]));
    }
    double obj = 0.0;
    for (std::size_t j = 0; j < n_; ++j) obj += lp_.cost_[j] * sol.x[j];
    sol.objective = lp_.maximize_ ? -obj : obj;
    return sol;
  }

 private:
  template <class F>
  void for_column(std::size_t j, F&& f) const {
    if (j < n_) {
      for (auto k = lp_.col_start_[j]; k < lp_.col_start_[j + 1]; ++k) {
        f(static_cast<std::size_t>(lp_.row_index_[k]), lp_.value_[k]);
      }
    } else if (j < n_ + m_) {
      f(j - n_, 1.0);
    } else {
      f(j - n_ - m_, sigma_[j - n_ - m_]);
    }
  }

  double dot_column(std::size_t j, const std::vector<double>& y) const {
    double s = 0.0;
    for_column(j, [&](std::size_t r, double v) { s += v * y[r]; });
    return s;
  }

  double weight(std::size_t j) const {
    return j < n_ ? lp_.price_weight_[j] : 2.0;
  }

  // Places structurals at a bound and builds a slack/artificial basis.
  // Returns whether artificial variables were needed.
  bool initialize() {
    x_.assign(total_, 0.0);
    state_.assign(total_, VarState::AtLower);
    pos_of_.assign(total_, -1);
    sigma_.assign(m_, 1.0);
    basis_.assign(m_, 0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lb_[j])) {
        x_[j] = lb_[j];
        state_[j] = VarState::AtLower;
      } else if (std::isfinite(ub_[j])) {
        x_[j] = ub_[j];
        state_[j] = VarState::AtUpper;
      } else {
        x_[j] = 0.0;
        state_[j] = VarState::Free;
      }
    }
    std::vector<double> residual(lp_.rhs_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (x_[j] == 0.0) continue;
      for_column(j, [&](std::size_t r, double v) { residual[r] -= v * x_[j]; });
    }
    bool any_artificial = false;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto s = n_ + i;
      const auto a = n_ + m_ + i;
      switch (lp_.relation_[i]) {
        case Relation::LessEqual: lb_[s] = 0.0; ub_[s] = kInf; break;
        case Relation::GreaterEqual: lb_[s] = -kInf; ub_[s] = 0.0; break;
        case Relation::Equal: lb_[s] = 0.0; ub_[s] = 0.0; break;
      }
      const double r = residual[i];
      if (r >= lb_[s] - opt_.feasibility_tol && r <= ub_[s] + opt_.feasibility_tol) {
        make_basic(s, i, r);
        lb_[a] = 0.0;
        ub_[a] = 0.0;
        x_[a] = 0.0;
        state_[a] = VarState::AtLower;
      } else {
        const bool above = r > ub_[s];
        const double sb = above ? ub_[s] : lb_[s];
        x_[s] = sb;
        state_[s] = above ? VarState::AtUpper : VarState::AtLower;
        sigma_[i] = (r - sb) > 0.0 ? 1.0 : -1.0;
        lb_[a] = 0.0;
        ub_[a] = kInf;
        make_basic(a, i, std::abs(r - sb));
        any_artificial = true;
      }
    }
    return any_artificial;
  }

  void make_basic(std::size_t var, std::size_t pos, double value) {
    basis_[pos] = var;
    pos_of_[var] = static_cast<std::int64_t>(pos);
    state_[var] = VarState::Basic;
    x_[var] = value;
  }

  void set_phase1_costs() {
    cost_.assign(total_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) cost_[n_ + m_ + i] = 1.0;
  }

  void set_phase2_costs() {
    cost_.assign(total_, 0.0);
    std::copy(lp_.cost_.begin(), lp_.cost_.end(), cost_.begin());
  }

  // Factorizes the basis after peeling row and column singletons; the
  // remaining kernel is factorized densely.
  void refactor() {
    etas_.clear();
    fbasis_ = basis_;
    row_peels_.clear();
    col_peels_.clear();
    // Basis matrix in CSR form (row -> positions).
    std::vector<std::size_t> row_count(m_, 0), col_count(m_, 0);
    for (std::size_t p = 0; p < m_; ++p) {
      for_column(basis_[p], [&](std::size_t r, double) {
        ++row_count[r];
        ++col_count[p];
      });
    }
    auto& rstart = brow_start_;
    auto& rpos = brow_pos_;
    auto& rval = brow_val_;
    rstart.assign(m_ + 1, 0);
    for (std::size_t r = 0; r < m_; ++r) rstart[r + 1] = rstart[r] + row_count[r];
    rpos.resize(rstart[m_]);
    rval.resize(rstart[m_]);
    {
      std::vector<std::size_t> fill(rstart.begin(), rstart.end() - 1);
      for (std::size_t p = 0; p < m_; ++p) {
        for_column(basis_[p], [&](std::size_t r, double v) {
          rpos[fill[r]] = static_cast<std::uint32_t>(p);
          rval[fill[r]++] = v;
        });
      }
    }
    std::vector<char> row_alive(m_, 1), pos_alive(m_, 1);
    std::vector<std::uint32_t> col_queue, row_queue;
    for (std::size_t p = 0; p < m_; ++p) {
      if (col_count[p] == 1) col_queue.push_back(static_cast<std::uint32_t>(p));
    }
    for (std::size_t r = 0; r < m_; ++r) {
      if (row_count[r] == 1) row_queue.push_back(static_cast<std::uint32_t>(r));
    }
    auto remove_row = [&](std::size_t r) {
      row_alive[r] = 0;
      for (auto k = rstart[r]; k < rstart[r + 1]; ++k) {
        const auto p = rpos[k];
        if (pos_alive[p] && --col_count[p] == 1) col_queue.push_back(p);
      }
    };
    auto remove_pos = [&](std::size_t p) {
      pos_alive[p] = 0;
      for_column(basis_[p], [&](std::size_t r, double) {
        if (row_alive[r] && --row_count[r] == 1) {
          row_queue.push_back(static_cast<std::uint32_t>(r));
        }
      });
    };
    while (!col_queue.empty() || !row_queue.empty()) {
      if (!col_queue.empty()) {
        const auto p = col_queue.back();
        col_queue.pop_back();
        if (!pos_alive[p] || col_count[p] != 1) continue;
        std::size_t row = m_;
        double pivot = 0.0;
        for_column(basis_[p], [&](std::size_t r, double v) {
          if (row_alive[r]) {
            row = r;
            pivot = v;
          }
        });
        if (row == m_ || std::abs(pivot) < kPeelTol) continue;
        col_peels_.push_back({static_cast<std::uint32_t>(row), p, pivot});
        pos_alive[p] = 0;
        remove_row(row);
        continue;
      }
      const auto r = row_queue.back();
      row_queue.pop_back();
      if (!row_alive[r] || row_count[r] != 1) continue;
      std::size_t pos = m_;
      double pivot = 0.0;
      for (auto k = rstart[r]; k < rstart[r + 1]; ++k) {
        if (pos_alive[rpos[k]]) {
          pos = rpos[k];
          pivot = rval[k];
        }
      }
      if (pos == m_ || std::abs(pivot) < kPeelTol) continue;
      row_peels_.push_back({r, static_cast<std::uint32_t>(pos), pivot});
      row_alive[r] = 0;
      remove_pos(pos);
    }
    kernel_rows_.clear();
    kernel_pos_.clear();
    kernel_index_.assign(m_, -1);
    for (std::size_t r = 0; r < m_; ++r) {
      if (row_alive[r]) {
        kernel_index_[r] = static_cast<std::int64_t>(kernel_rows_.size());
        kernel_rows_.push_back(static_cast<std::uint32_t>(r));
      }
    }
    for (std::size_t p = 0; p < m_; ++p) {
      if (pos_alive[p]) kernel_pos_.push_back(static_cast<std::uint32_t>(p));
    }
    const std::size_t q = kernel_rows_.size();
    if (q != kernel_pos_.size()) singular("kernel is not square");
    if (q > 0) {
      Eigen::MatrixXd k = Eigen::MatrixXd::Zero(q, q);
      for (std::size_t c = 0; c < q; ++c) {
        for_column(basis_[kernel_pos_[c]], [&](std::size_t r, double v) {
          if (kernel_index_[r] >= 0) k(kernel_index_[r], c) = v;
        });
      }
      lu_.compute(k);
      const auto diag = lu_.matrixLU().diagonal().cwiseAbs();
      if (!(diag.minCoeff() > 1e-11 * std::max(1.0, diag.maxCoeff()))) {
        singular("kernel factorization lost rank");
      }
    }
    ++refactors_;
  }

  [[noreturn]] void singular(const char* what) const {
    std::ostringstream msg;
    msg << "LP basis is singular (" << what << ") after " << iterations_
        << " iterations; rows=" << m_ << " cols=" << n_;
    throw SolverError(msg.str());
  }

  // rhs indexed by row (consumed), out indexed by basis position; out_nz
  // lists the positions with nonzero entries.
  void ftran(std::vector<double>& rhs, std::vector<double>& out,
             std::vector<std::uint32_t>& out_nz) const {
    out.assign(m_, 0.0);
    for (const auto& pk : row_peels_) {
      const double xp = rhs[pk.row] / pk.pivot;
      out[pk.pos] = xp;
      if (xp != 0.0) {
        for_column(fbasis_[pk.pos], [&](std::size_t r, double v) { rhs[r] -= v * xp; });
      }
    }
    const std::size_t q = kernel_rows_.size();
    if (q > 0) {
      Eigen::VectorXd b(q);
      for (std::size_t k = 0; k < q; ++k) b(k) = rhs[kernel_rows_[k]];
      const Eigen::VectorXd s = lu_.solve(b);
      for (std::size_t k = 0; k < q; ++k) {
        const auto p = kernel_pos_[k];
        const double xp = s(k);
        out[p] = xp;
        if (xp != 0.0) {
          for_column(fbasis_[p], [&](std::size_t r, double v) { rhs[r] -= v * xp; });
        }
      }
    }
    for (auto it = col_peels_.rbegin(); it != col_peels_.rend(); ++it) {
      const double xp = rhs[it->row] / it->pivot;
      out[it->pos] = xp;
      if (xp != 0.0) {
        for_column(fbasis_[it->pos], [&](std::size_t r, double v) { rhs[r] -= v * xp; });
      }
    }
    for (const auto& e : etas_) {
      const double xp = out[e.pos] / e.pivot;
      out[e.pos] = xp;
      if (xp != 0.0) {
        for (std::size_t k = 0; k < e.index.size(); ++k) out[e.index[k]] -= e.value[k] * xp;
      }
    }
    out_nz.clear();
    for (std::size_t p = 0; p < m_; ++p) {
      if (out[p] != 0.0) out_nz.push_back(static_cast<std::uint32_t>(p));
    }
  }

  // c indexed by basis position (consumed), y indexed by row. Each solved
  // dual is scattered along its basis row, so zero duals cost nothing.
  void btran(std::vector<double>& c, std::vector<double>& y) {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = c[it->pos];
      for (std::size_t k = 0; k < it->index.size(); ++k) s -= it->value[k] * c[it->index[k]];
      c[it->pos] = s / it->pivot;
    }
    y.assign(m_, 0.0);
    auto& acc = btran_acc_;
    acc.assign(m_, 0.0);
    auto settle = [&](std::size_t row, double value) {
      y[row] = value;
      if (value == 0.0) return;
      for (auto k = brow_start_[row]; k < brow_start_[row + 1]; ++k) {
        acc[brow_pos_[k]] += brow_val_[k] * value;
      }
    };
    for (const auto& pk : col_peels_) settle(pk.row, (c[pk.pos] - acc[pk.pos]) / pk.pivot);
    const std::size_t q = kernel_rows_.size();
    if (q > 0) {
      Eigen::VectorXd b(q);
      for (std::size_t k = 0; k < q; ++k) {
        const auto p = kernel_pos_[k];
        b(k) = c[p] - acc[p];
      }
      const Eigen::VectorXd s = lu_.transpose().solve(b);
      for (std::size_t k = 0; k < q; ++k) settle(kernel_rows_[k], s(k));
    }
    for (auto it = row_peels_.rbegin(); it != row_peels_.rend(); ++it) {
      settle(it->row, (c[it->pos] - acc[it->pos]) / it->pivot);
    }
  }

  void compute_primal() {
    std::vector<double> rhs(lp_.rhs_);
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == VarState::Basic || x_[j] == 0.0) continue;
      for_column(j, [&](std::size_t r, double v) { rhs[r] -= v * x_[j]; });
    }
    ftran(rhs, work_pos_, work_nz_);
    for (std::size_t p = 0; p < m_; ++p) x_[basis_[p]] = work_pos_[p];
  }

  void compute_duals() {
    work_pos_.resize(m_);
    for (std::size_t p = 0; p < m_; ++p) work_pos_[p] = cost_[basis_[p]];
    btran(work_pos_, y_);
  }

  bool eligible(std::size_t j, double d) const {
    switch (state_[j]) {
      case VarState::Basic: return false;
      case VarState::AtLower: return d < -opt_.optimality_tol && ub_[j] > lb_[j];
      case VarState::AtUpper: return d > opt_.optimality_tol && ub_[j] > lb_[j];
      case VarState::Free: return std::abs(d) > opt_.optimality_tol;
    }
    return false;
  }

  // Returns the entering variable or total_ when none is eligible.
  std::size_t price(bool bland, double& d_out) {
    if (bland) {
      for (std::size_t j = 0; j < total_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        const double d = cost_[j] - dot_column(j, y_);
        if (eligible(j, d)) {
          d_out = d;
          return j;
        }
      }
      return total_;
    }
    std::size_t best = total_;
    double best_score = 0.0;
    std::size_t scanned = 0;
    for (std::size_t c = 0; c < total_; ++c) {
      const std::size_t j = cursor_ + c < total_ ? cursor_ + c : cursor_ + c - total_;
      if (state_[j] != VarState::Basic && ub_[j] > lb_[j]) {
        const double d = cost_[j] - dot_column(j, y_);
        if (eligible(j, d)) {
          const double score = d * d / weight(j);
          if (score > best_score) {
            best_score = score;
            best = j;
            d_out = d;
          }
        }
      }
      if (++scanned % kPriceChunk == 0 && best != total_) {
        cursor_ = j + 1 < total_ ? j + 1 : 0;
        break;
      }
    }
    return best;
  }

  // Runs simplex iterations with the current costs. Returns false when the
  // objective is unbounded.
  bool iterate() {
    std::size_t degenerate = 0;
    bool fresh = true;
    bool stale_duals = true;
    std::vector<double> column(m_), alpha(m_);
    std::vector<std::uint32_t> alpha_nz;
    while (true) {
      if (iterations_ >= max_iter_) {
        std::ostringstream msg;
        msg << "LP iteration limit " << max_iter_ << " reached; rows=" << m_
            << " cols=" << n_ << " refactorizations=" << refactors_;
        throw SolverError(msg.str());
      }
      if (etas_.size() >= opt_.refactor_interval) {
        refactor();
        compute_primal();
        fresh = true;
        stale_duals = true;
      }
      if (stale_duals) {
        compute_duals();
        stale_duals = false;
      }
      const bool bland = degenerate >= opt_.degenerate_switch;
      double dq = 0.0;
      const std::size_t q = price(bland, dq);
      if (q == total_) {
        if (fresh) return true;
        refactor();
        compute_primal();
        fresh = true;
        stale_duals = true;
        continue;
      }
      column.assign(m_, 0.0);
      for_column(q, [&](std::size_t r, double v) { column[r] = v; });
      ftran(column, alpha, alpha_nz);
      const double dir = dq < 0.0 ? 1.0 : -1.0;

      const double tol = opt_.feasibility_tol;
      const double flip = ub_[q] - lb_[q];
      std::size_t leave = m_;
      double theta = kInf;
      if (!bland) {
        double theta_max = kInf;
        for (const std::size_t p : alpha_nz) {
          const double v = dir * alpha[p];
          if (std::abs(v) < kPivotTol) continue;
          const auto j = basis_[p];
          if (v > 0.0) {
            if (std::isfinite(lb_[j])) theta_max = std::min(theta_max, (x_[j] - lb_[j] + tol) / v);
          } else if (std::isfinite(ub_[j])) {
            theta_max = std::min(theta_max, (ub_[j] + tol - x_[j]) / -v);
          }
        }
        if (theta_max == kInf && flip == kInf) return false;
        if (flip <= theta_max) {
          theta = flip;
        } else {
          double best_piv = 0.0;
          for (const std::size_t p : alpha_nz) {
            const double v = dir * alpha[p];
            if (std::abs(v) < kPivotTol) continue;
            const auto j = basis_[p];
            double ratio;
            if (v > 0.0) {
              if (!std::isfinite(lb_[j])) continue;
              ratio = (x_[j] - lb_[j]) / v;
            } else {
              if (!std::isfinite(ub_[j])) continue;
              ratio = (ub_[j] - x_[j]) / -v;
            }
            if (ratio <= theta_max && std::abs(v) > best_piv) {
              best_piv = std::abs(v);
              leave = p;
              theta = std::max(ratio, 0.0);
            }
          }
        }
      } else {
        for (const std::size_t p : alpha_nz) {
          const double v = dir * alpha[p];
          if (std::abs(v) < kPivotTol) continue;
          const auto j = basis_[p];
          double ratio;
          if (v > 0.0) {
            if (!std::isfinite(lb_[j])) continue;
            ratio = std::max((x_[j] - lb_[j]) / v, 0.0);
          } else {
            if (!std::isfinite(ub_[j])) continue;
            ratio = std::max((ub_[j] - x_[j]) / -v, 0.0);
          }
          if (ratio < theta - 1e-12 ||
              (ratio <= theta + 1e-12 && leave < m_ && j < basis_[leave])) {
            theta = std::min(theta, ratio);
            leave = p;
          }
        }
        if (leave == m_ && flip == kInf) return false;
        if (flip <= theta) {
          theta = flip;
          leave = m_;
        }
      }

      // Apply the step.
      if (theta != 0.0) {
        x_[q] += dir * theta;
        for (const std::size_t p : alpha_nz) x_[basis_[p]] -= dir * theta * alpha[p];
      }
      if (leave == m_) {
        state_[q] = dir > 0.0 ? VarState::AtUpper : VarState::AtLower;
        x_[q] = dir > 0.0 ? ub_[q] : lb_[q];
      } else {
        const auto j = basis_[leave];
        const bool to_lower = dir * alpha[leave] > 0.0;
        x_[j] = to_lower ? lb_[j] : ub_[j];
        state_[j] = to_lower ? VarState::AtLower : VarState::AtUpper;
        pos_of_[j] = -1;
        // y += (d_q / alpha_r) * row r of the old basis inverse.
        unit_.assign(m_, 0.0);
        unit_[leave] = 1.0;
        btran(unit_, rho_);
        const double step = dq / alpha[leave];
        for (std::size_t i = 0; i < m_; ++i) y_[i] += step * rho_[i];
        Eta eta;
        eta.pos = static_cast<std::uint32_t>(leave);
        eta.pivot = alpha[leave];
        for (const std::size_t p : alpha_nz) {
          if (p != leave && std::abs(alpha[p]) > 1e-14) {
            eta.index.push_back(static_cast<std::uint32_t>(p));
            eta.value.push_back(alpha[p]);
          }
        }
        etas_.push_back(std::move(eta));
        basis_[leave] = q;
        pos_of_[q] = static_cast<std::int64_t>(leave);
        state_[q] = VarState::Basic;
        fresh = false;
      }
      degenerate = theta < 1e-12 ? degenerate + 1 : 0;
      ++iterations_;
    }
  }

  const LpRelaxation& lp_;
  LpOptions opt_;
  std::size_t n_, m_, total_;
  std::span<const double> upper_;
  std::size_t max_iter_ = 0;
  std::size_t iterations_ = 0;
  std::size_t refactors_ = 0;
  std::size_t cursor_ = 0;

  std::vector<double> lb_, ub_, cost_, x_, sigma_, y_, work_pos_, unit_, rho_;
  std::vector<std::uint32_t> work_nz_;
  std::vector<VarState> state_;
  std::vector<std::int64_t> pos_of_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> fbasis_;  // basis at the last refactorization

  std::vector<Peel> row_peels_, col_peels_;
  // Row-wise copy of the factorized basis for btran.
  std::vector<std::size_t> brow_start_;
  std::vector<std::uint32_t> brow_pos_;
  std::vector<double> brow_val_;
  std::vector<double> btran_acc_;
  std::vector<std::uint32_t> kernel_rows_, kernel_pos_;
  std::vector<std::int64_t> kernel_index_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::vector<Eta> etas_;
};

LpSolution LpRelaxation::solve(const LpOptions& options) const {
  return solve(lower_, upper_, options);
}

LpSolution LpRelaxation::solve(std::span<const double> lower,
                               std::span<const double> upper,
                               const LpOptions& options) const {
  if (lower.size() != cols() || upper.size() != cols()) {
    throw InvalidArgument("LP bound vectors do not match the variable count");
  }
  if (dropped_rows_ > 0) {
    for (std::size_t j = 0; j < cols(); ++j) {
      if (lower[j] < lower_[j] || upper[j] > upper_[j]) {
        throw InvalidArgument("LP bounds must lie within the problem bounds");
      }
    }
  }
  SimplexRun run(*this, lower, upper, options);
  return run.run();
}

LpSolution solve_lp(const MilpProblem& problem, const LpOptions& options) {
  return LpRelaxation(problem).solve(options);
}

}  // namespace flexsched::milp
