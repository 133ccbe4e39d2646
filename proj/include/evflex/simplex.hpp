#pragma once

// Dense two-phase bounded-variable primal simplex with dual extraction.
//
// Sized for stage subproblems and small deterministic equivalents (up to a
// few thousand nonzeros). Each solve owns its workspace.

#include "evflex/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace evflex {

enum class Relation { LessEqual, Equal, GreaterEqual };

/// min objective . x  s.t.  rows, lower <= x <= upper.
struct LinearProgram {
    struct Row {
        std::vector<double> coeffs;
        Relation relation = Relation::LessEqual;
        double rhs = 0.0;
    };

    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<Row> rows;

    std::size_t num_vars() const noexcept { return objective.size(); }

    std::size_t add_variable(double cost, double lo, double hi) {
        objective.push_back(cost);
        lower.push_back(lo);
        upper.push_back(hi);
        for (auto& r : rows) r.coeffs.push_back(0.0);
        return objective.size() - 1;
    }

    /// Coefficients shorter than num_vars() are zero-padded.
    std::size_t add_row(std::vector<double> coeffs, Relation rel, double rhs) {
        coeffs.resize(num_vars(), 0.0);
        rows.push_back({std::move(coeffs), rel, rhs});
        return rows.size() - 1;
    }

    void validate() const {
        const std::size_t n = num_vars();
        if (lower.size() != n || upper.size() != n)
            throw Error(ErrorKind::InvalidInput, "bound vectors must match the objective length");
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(objective[j]) || std::isnan(lower[j]) || std::isnan(upper[j]))
                throw Error(ErrorKind::InvalidInput, "NaN in linear program");
            if (lower[j] > upper[j]) throw Error(ErrorKind::InvalidInput, "variable lower bound above upper bound");
        }
        for (const auto& r : rows) {
            if (r.coeffs.size() != n) throw Error(ErrorKind::InvalidInput, "row length must match variable count");
            if (!std::isfinite(r.rhs)) throw Error(ErrorKind::InvalidInput, "row rhs must be finite");
            for (double a : r.coeffs)
                if (!std::isfinite(a)) throw Error(ErrorKind::InvalidInput, "row coefficients must be finite");
        }
    }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "unknown";
}

/**
 * Duals are sensitivities of the optimal value: row_duals[i] = dz/d rhs_i,
 * reduced_costs[j] = objective[j] - row_duals . column_j.
 */
struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::vector<double> row_duals;
    std::vector<double> reduced_costs;
    std::size_t iterations = 0;
};

namespace detail {

class DenseSimplex {
public:
    static constexpr double kFeasTol = 1e-9;
    static constexpr double kOptTol = 1e-9;
    static constexpr double kPivotTol = 1e-10;
    static constexpr std::size_t kIterationCap = 1'000'000;

    explicit DenseSimplex(const LinearProgram& lp) : lp_(lp), m_(lp.rows.size()), n_(lp.num_vars()) { setup(); }

    LpSolution run() {
        LpSolution sol;
        // phase 1: minimize the sum of artificials
        std::vector<double> phase1(cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) phase1[art_col_[i]] = 1.0;
        set_costs(phase1);
        iterate(false);
        double infeas = 0.0;
        for (std::size_t i = 0; i < m_; ++i) infeas += value_[art_col_[i]];
        double scale = 1.0;
        for (const auto& r : lp_.rows) scale = std::max(scale, std::abs(r.rhs));
        if (infeas > 1e-7 * scale) {
            sol.status = LpStatus::Infeasible;
            sol.iterations = iterations_;
            return sol;
        }
        drive_out_artificials();

        std::vector<double> phase2(cols_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) phase2[j] = lp_.objective[j];
        set_costs(phase2);
        if (!iterate(true)) {
            sol.status = LpStatus::Unbounded;
            sol.iterations = iterations_;
            return sol;
        }
        polish(sol);
        sol.status = LpStatus::Optimal;
        sol.iterations = iterations_;
        return sol;
    }

private:
    enum class State { Basic, AtLower, AtUpper, FreeZero };

    void setup() {
        // columns: structurals, one slack per inequality row, one artificial per row
        slack_col_.assign(m_, npos);
        std::size_t c = n_;
        for (std::size_t i = 0; i < m_; ++i)
            if (lp_.rows[i].relation != Relation::Equal) slack_col_[i] = c++;
        art_col_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) art_col_[i] = c++;
        cols_ = c;

        lo_.assign(cols_, 0.0);
        hi_.assign(cols_, kInfty);
        for (std::size_t j = 0; j < n_; ++j) {
            lo_[j] = lp_.lower[j];
            hi_[j] = lp_.upper[j];
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (slack_col_[i] == npos) continue;
            if (lp_.rows[i].relation == Relation::LessEqual) {
                lo_[slack_col_[i]] = 0.0;
                hi_[slack_col_[i]] = kInfty;
            } else {
                lo_[slack_col_[i]] = -kInfty;
                hi_[slack_col_[i]] = 0.0;
            }
        }

        value_.assign(cols_, 0.0);
        state_.assign(cols_, State::AtLower);
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::isfinite(lo_[j])) {
                value_[j] = lo_[j];
                state_[j] = State::AtLower;
            } else if (std::isfinite(hi_[j])) {
                value_[j] = hi_[j];
                state_[j] = State::AtUpper;
            } else {
                value_[j] = 0.0;
                state_[j] = State::FreeZero;
            }
        }

        art_sign_.assign(m_, 1.0);
        basis_.assign(m_, npos);
        tab_.assign(m_ * cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& row = lp_.rows[i];
            double r = row.rhs;
            for (std::size_t j = 0; j < n_; ++j) r -= row.coeffs[j] * value_[j];
            const std::size_t s = slack_col_[i];
            if (r < 0.0) art_sign_[i] = -1.0;
            double* t = &tab_[i * cols_];
            for (std::size_t j = 0; j < n_; ++j) t[j] = row.coeffs[j];
            if (s != npos) t[s] = 1.0;
            t[art_col_[i]] = art_sign_[i];
            if (s != npos && r >= lo_[s] && r <= hi_[s]) {
                basis_[i] = s;
                state_[s] = State::Basic;
                value_[s] = r;
                state_[art_col_[i]] = State::AtLower;
                value_[art_col_[i]] = 0.0;
            } else {
                if (s != npos) {
                    state_[s] = lp_.rows[i].relation == Relation::LessEqual ? State::AtLower : State::AtUpper;
                    value_[s] = 0.0;
                }
                basis_[i] = art_col_[i];
                state_[art_col_[i]] = State::Basic;
                value_[art_col_[i]] = std::abs(r);
                // row of B^{-1} A: divide by the artificial's sign
                if (art_sign_[i] < 0.0)
                    for (std::size_t j = 0; j < cols_; ++j) t[j] = -t[j];
            }
        }
    }

    void set_costs(const std::vector<double>& cost) {
        cost_ = cost;
        reduced_.assign(cols_, 0.0);
        for (std::size_t j = 0; j < cols_; ++j) reduced_[j] = cost_[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) continue;
            const double* t = &tab_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= cb * t[j];
        }
        for (std::size_t i = 0; i < m_; ++i) reduced_[basis_[i]] = 0.0;
    }

    double objective_value() const {
        double z = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) z += cost_[j] * value_[j];
        return z;
    }

    bool is_artificial(std::size_t j) const { return j >= cols_ - m_; }

    /// Returns false when the phase is unbounded.
    bool iterate(bool phase2) {
        bool bland = false;
        std::size_t stall = 0;
        const std::size_t stall_limit = 5 * (m_ + cols_);
        double best = objective_value();
        while (true) {
            if (++iterations_ > kIterationCap)
                throw Error(ErrorKind::SolverStalled, "simplex iteration cap reached");

            // pricing
            std::size_t q = npos;
            double dir = 0.0;
            double best_score = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (state_[j] == State::Basic || lo_[j] == hi_[j]) continue;
                if (phase2 && is_artificial(j)) continue;
                const double d = reduced_[j];
                double s = 0.0;
                double dj = 0.0;
                if (d < -kOptTol && (state_[j] == State::AtLower || state_[j] == State::FreeZero)) {
                    s = -d;
                    dj = 1.0;
                } else if (d > kOptTol && (state_[j] == State::AtUpper || state_[j] == State::FreeZero)) {
                    s = d;
                    dj = -1.0;
                } else {
                    continue;
                }
                if (bland) {
                    q = j;
                    dir = dj;
                    break;
                }
                if (s > best_score) {
                    best_score = s;
                    q = j;
                    dir = dj;
                }
            }
            if (q == npos) return true;

            // ratio test
            double step = dir > 0.0 ? hi_[q] - value_[q] : value_[q] - lo_[q];
            std::size_t leave = npos;
            double leave_alpha = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = dir * tab_[i * cols_ + q];
                if (std::abs(a) <= kPivotTol) continue;
                const std::size_t b = basis_[i];
                double limit;
                if (a > 0.0) {
                    if (!std::isfinite(lo_[b])) continue;
                    limit = (value_[b] - lo_[b]) / a;
                } else {
                    if (!std::isfinite(hi_[b])) continue;
                    limit = (hi_[b] - value_[b]) / -a;
                }
                limit = std::max(limit, 0.0);
                const bool better = [&] {
                    if (leave == npos) return limit < step;
                    const double tie = 1e-12 * (1.0 + std::abs(step));
                    if (limit < step - tie) return true;
                    if (limit > step + tie) return false;
                    if (bland) return basis_[i] < basis_[leave];
                    return std::abs(a) > std::abs(leave_alpha);
                }();
                if (better) {
                    step = limit;
                    leave = i;
                    leave_alpha = a;
                }
            }
            if (!std::isfinite(step)) return false;

            // move
            value_[q] += dir * step;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = tab_[i * cols_ + q];
                if (a != 0.0) value_[basis_[i]] -= dir * step * a;
            }
            if (leave == npos) {
                state_[q] = dir > 0.0 ? State::AtUpper : State::AtLower;
                value_[q] = dir > 0.0 ? hi_[q] : lo_[q];
            } else {
                const std::size_t p = basis_[leave];
                if (leave_alpha > 0.0) {
                    state_[p] = State::AtLower;
                    value_[p] = lo_[p];
                } else {
                    state_[p] = State::AtUpper;
                    value_[p] = hi_[p];
                }
                pivot(leave, q);
            }

            const double z = objective_value();
            if (z < best - 1e-12 * (1.0 + std::abs(best))) {
                best = z;
                stall = 0;
            } else if (++stall > stall_limit) {
                bland = true;
            }
        }
    }

    void pivot(std::size_t r, std::size_t q) {
        double* pr = &tab_[r * cols_];
        const double inv = 1.0 / pr[q];
        nz_.clear();
        for (std::size_t j = 0; j < cols_; ++j) {
            if (pr[j] == 0.0) continue;
            pr[j] *= inv;
            nz_.push_back(j);
        }
        pr[q] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* pi = &tab_[i * cols_];
            const double f = pi[q];
            if (f == 0.0) continue;
            for (std::size_t j : nz_) pi[j] -= f * pr[j];
            pi[q] = 0.0;
        }
        const double dq = reduced_[q];
        if (dq != 0.0)
            for (std::size_t j : nz_) reduced_[j] -= dq * pr[j];
        reduced_[q] = 0.0;
        basis_[r] = q;
        state_[q] = State::Basic;
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!is_artificial(basis_[i])) continue;
            std::size_t best = npos;
            double best_abs = 1e-9;
            const double* t = &tab_[i * cols_];
            for (std::size_t j = 0; j < cols_ - m_; ++j) {
                if (state_[j] == State::Basic) continue;
                if (std::abs(t[j]) > best_abs) {
                    best_abs = std::abs(t[j]);
                    best = j;
                }
            }
            const std::size_t a = basis_[i];
            if (best == npos) continue;  // redundant row; the artificial stays basic at zero
            state_[a] = State::AtLower;
            value_[a] = 0.0;
            pivot(i, best);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t a = art_col_[i];
            lo_[a] = 0.0;
            hi_[a] = 0.0;
            value_[a] = 0.0;
        }
        recompute_basic_values();
    }

    /// Column j of the working constraint matrix [A | slacks | artificials].
    double column_entry(std::size_t i, std::size_t j) const {
        if (j < n_) return lp_.rows[i].coeffs[j];
        if (is_artificial(j)) return j == art_col_[i] ? art_sign_[i] : 0.0;
        return j == slack_col_[i] ? 1.0 : 0.0;
    }

    /// Re-solves B x_B = b - N x_N from the original data.
    void recompute_basic_values() {
        if (m_ == 0) return;
        Eigen::MatrixXd B(m_, m_);
        Eigen::VectorXd rhs(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            double r = lp_.rows[i].rhs;
            for (std::size_t j = 0; j < cols_; ++j)
                if (state_[j] != State::Basic && value_[j] != 0.0) r -= column_entry(i, j) * value_[j];
            rhs(static_cast<Eigen::Index>(i)) = r;
            for (std::size_t k = 0; k < m_; ++k)
                B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = column_entry(i, basis_[k]);
        }
        lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(B);
        const Eigen::VectorXd xb = lu_.solve(rhs);
        for (std::size_t k = 0; k < m_; ++k) value_[basis_[k]] = xb(static_cast<Eigen::Index>(k));
    }

    void polish(LpSolution& sol) {
        recompute_basic_values();
        sol.x.assign(value_.begin(), value_.begin() + static_cast<std::ptrdiff_t>(n_));
        sol.row_duals.assign(m_, 0.0);
        if (m_ > 0) {
            Eigen::VectorXd cb(m_);
            for (std::size_t k = 0; k < m_; ++k) cb(static_cast<Eigen::Index>(k)) = cost_[basis_[k]];
            const Eigen::VectorXd y = lu_.transpose().solve(cb);
            for (std::size_t i = 0; i < m_; ++i) sol.row_duals[i] = y(static_cast<Eigen::Index>(i));
        }
        sol.reduced_costs.assign(n_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            double d = lp_.objective[j];
            for (std::size_t i = 0; i < m_; ++i) d -= sol.row_duals[i] * lp_.rows[i].coeffs[j];
            sol.reduced_costs[j] = d;
        }
        sol.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j) sol.objective += lp_.objective[j] * sol.x[j];
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    static constexpr double kInfty = std::numeric_limits<double>::infinity();

    const LinearProgram& lp_;
    std::size_t m_;
    std::size_t n_;
    std::size_t cols_ = 0;
    std::vector<std::size_t> slack_col_;
    std::vector<std::size_t> art_col_;
    std::vector<double> art_sign_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<double> value_;
    std::vector<State> state_;
    std::vector<std::size_t> basis_;
    std::vector<double> tab_;
    std::vector<double> cost_;
    std::vector<double> reduced_;
    std::vector<std::size_t> nz_;
    std::size_t iterations_ = 0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace detail

/// Solves lp; infeasibility and unboundedness are statuses, a stall throws.
inline LpSolution solve_lp(const LinearProgram& lp) {
    lp.validate();
    return detail::DenseSimplex(lp).run();
}

}  // namespace evflex
