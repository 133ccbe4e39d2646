#pragma once

// Exact expected recourse of the aggregate charging problem.
//
// The expected cost-to-go before observing the stage-t price is linear in the
// generator entering stage t:  V_t(g) = sum_i W_t[i] g[i].  The weights come
// from one backward sweep over truncated price expectations and do not depend
// on the fleet. Stage indices are 0-based throughout.

#include "evflex/aggregate.hpp"
#include "evflex/error.hpp"
#include "evflex/flexibility.hpp"
#include "evflex/pricing.hpp"
#include "evflex/random.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace evflex {

/// Per-stage nonincreasing weights; stage t has T - t entries.
class WeightTable {
public:
    WeightTable() = default;
    explicit WeightTable(std::vector<std::vector<double>> stages) : stages_(std::move(stages)) {
        for (std::size_t t = 0; t < stages_.size(); ++t)
            if (stages_[t].size() != stages_.size() - t)
                throw Error(ErrorKind::InvalidInput, "weight vector length must equal stages remaining");
    }

    std::size_t horizon() const noexcept { return stages_.size(); }
    std::span<const double> at(std::size_t t) const { return stages_.at(t); }
    const std::vector<std::vector<double>>& stages() const noexcept { return stages_; }

private:
    std::vector<std::vector<double>> stages_;
};

/**
 * Backward recursion for the recourse weights.
 *
 * W_{T-1} = (E[c_{T-1}]) and, for earlier stages,
 * W_t[i] = E[clamp(c_t, W_{t+1}[i], W_{t+1}[i-1])] with W_{t+1}[-1] = +inf and
 * W_{t+1}[m-1] = -inf.
 */
inline WeightTable compute_weights(const PriceModel& model) {
    model.validate();
    const std::size_t T = model.horizon();
    std::vector<std::vector<double>> w(T);
    w[T - 1] = {model.stages[T - 1].mean()};
    for (std::size_t t = T - 1; t-- > 0;) {
        const auto& next = w[t + 1];
        const std::size_t m = T - t;
        auto& cur = w[t];
        cur.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double lo = i + 1 < m ? next[i] : -kInf;
            const double hi = i > 0 ? next[i - 1] : kInf;
            cur[i] = model.stages[t].expected_clamp(lo, hi);
        }
    }
    return WeightTable(std::move(w));
}

/// V_t(g) = W_t . g, the expected cost-to-go before the stage-t price is seen.
inline double expected_value(const WeightTable& table, std::size_t t, const Generator& g) {
    const auto w = table.at(t);
    require_same_length(w.size(), g.size(), "expected_value");
    double v = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * g[i];
    return v;
}

struct Action {
    double u = 0.0;      ///< aggregate energy this stage
    std::size_t j = 0;   ///< index into the generator, u = g[j]
};

/**
 * Optimal aggregate action after observing price c at stage t.
 *
 * j counts the next-stage weights strictly above c: charge g[0] when c is at
 * least every weight, g[m-1] when c is below all of them. On the final stage
 * the action is forced to g[0].
 */
inline Action optimal_action(const WeightTable& table, std::size_t t, const Generator& g, double c) {
    if (t + 1 >= table.horizon()) {
        require_same_length(1, g.size(), "optimal_action");
        return {g[0], 0};
    }
    const auto next = table.at(t + 1);
    require_same_length(next.size() + 1, g.size(), "optimal_action");
    const auto it = std::partition_point(next.begin(), next.end(), [c](double w) { return w > c; });
    const auto j = static_cast<std::size_t>(it - next.begin());
    return {g[j], j};
}

/// Realized cost-to-go V_t(g, c) under the optimal action.
inline double stage_value(const WeightTable& table, std::size_t t, const Generator& g, double c) {
    const Action a = optimal_action(table, t, g, c);
    if (t + 1 >= table.horizon()) return c * a.u;
    return c * a.u + expected_value(table, t + 1, transition(g, a.u));
}

/// Continuous convex piecewise-affine function of the aggregate action.
class PiecewiseAffine {
public:
    PiecewiseAffine() = default;

    PiecewiseAffine(std::vector<double> breakpoints, std::vector<double> slopes, std::vector<double> intercepts)
        : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)), intercepts_(std::move(intercepts)) {
        if (breakpoints_.size() < 2 || slopes_.size() + 1 != breakpoints_.size() ||
            intercepts_.size() != slopes_.size())
            throw Error(ErrorKind::InvalidInput, "piecewise-affine dimensions inconsistent");
        for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k)
            if (breakpoints_[k] > breakpoints_[k + 1])
                throw Error(ErrorKind::InvalidInput, "breakpoints must be ascending");
        for (std::size_t k = 0; k + 1 < slopes_.size(); ++k) {
            const double b = breakpoints_[k + 1];
            const double left = intercepts_[k] + slopes_[k] * b;
            const double right = intercepts_[k + 1] + slopes_[k + 1] * b;
            if (std::abs(left - right) > kRelTol * (1.0 + std::max(std::abs(left), std::abs(right))))
                throw Error(ErrorKind::InvalidInput, "piecewise-affine function is discontinuous");
            if (slopes_[k] > slopes_[k + 1] + kRelTol * (1.0 + std::abs(slopes_[k])))
                throw Error(ErrorKind::InvalidInput, "piecewise-affine function is not convex");
        }
    }

    std::size_t pieces() const noexcept { return slopes_.size(); }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }
    const std::vector<double>& intercepts() const noexcept { return intercepts_; }

    /// Pieces with lo == hi are kept so piece k always matches weight index k.
    bool zero_width(std::size_t k) const { return breakpoints_.at(k) == breakpoints_.at(k + 1); }

    /// Evaluates on the largest piece whose left breakpoint is <= u.
    double operator()(double u) const {
        const double tol = tolerance_for(breakpoints_);
        if (u < breakpoints_.front() - tol || u > breakpoints_.back() + tol)
            throw Error(ErrorKind::InfeasibleAction, "point outside the piecewise-affine domain");
        const auto head = std::span<const double>(breakpoints_).first(pieces());
        auto it = std::upper_bound(head.begin(), head.end(), u);
        const std::size_t k = it == head.begin() ? 0 : static_cast<std::size_t>(it - head.begin()) - 1;
        return intercepts_[k] + slopes_[k] * u;
    }

private:
    std::vector<double> breakpoints_;
    std::vector<double> slopes_;
    std::vector<double> intercepts_;
};

/**
 * Expected next-stage recourse V_{t+1}(transition(g, u)) as a function of the
 * stage-t aggregate action u.
 *
 * Piece k spans [g[k], g[k+1]] with slope -W_{t+1}[k] and intercept
 * sum_{i<=k} W_{t+1}[i] g[i] + sum_{i=k}^{m-2} W_{t+1}[i] g[i+1].
 */
inline PiecewiseAffine pwa(const WeightTable& table, std::size_t t, const Generator& g) {
    if (t + 1 >= table.horizon()) throw Error(ErrorKind::TerminalStage, "no recourse after the final stage");
    const auto w = table.at(t + 1);
    const std::size_t m = g.size();
    require_same_length(w.size() + 1, m, "pwa");
    // prefix[k] = sum_{i<k} w[i] g[i], suffix[k] = sum_{i>=k} w[i] g[i+1]
    std::vector<double> prefix(m, 0.0);
    std::vector<double> suffix(m, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) prefix[i + 1] = prefix[i] + w[i] * g[i];
    for (std::size_t i = m - 1; i-- > 0;) suffix[i] = suffix[i + 1] + w[i] * g[i + 1];
    std::vector<double> slopes(m - 1);
    std::vector<double> intercepts(m - 1);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        slopes[k] = -w[k];
        intercepts[k] = prefix[k + 1] + suffix[k];
    }
    return PiecewiseAffine(std::vector<double>(g.values().begin(), g.values().end()), std::move(slopes),
                           std::move(intercepts));
}

struct SolveResult {
    double expected_cost = 0.0;
    WeightTable weights;
    std::optional<PiecewiseAffine> first_stage_pwa;  ///< absent when T = 1
};

inline SolveResult solve(const FleetState& fleet, const PriceModel& model) {
    model.validate();
    if (fleet.horizon_remaining() != model.horizon())
        throw Error(ErrorKind::InvalidInput, "fleet horizon differs from price model horizon");
    const Generator g = aggregate_generator(fleet);
    SolveResult out;
    out.weights = compute_weights(model);
    out.expected_cost = expected_value(out.weights, 0, g);
    if (model.horizon() > 1) out.first_stage_pwa = pwa(out.weights, 0, g);
    return out;
}

struct SimulationResult {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Cost of one device-level rollout of the exact policy along a given price path.
inline double rollout_cost(const FleetState& fleet, const WeightTable& table, std::span<const double> prices) {
    FleetState state = fleet;
    double cost = 0.0;
    for (std::size_t t = 0; t < prices.size(); ++t) {
        const Generator g = aggregate_generator(state);
        const Action a = optimal_action(table, t, g, prices[t]);
        const auto actions = disaggregate(state, a.u);
        double total = 0.0;
        for (double x : actions) total += x;
        cost += prices[t] * total;
        state = apply_actions(state, actions);
    }
    for (double x : state.demands())
        if (x > 1e-9) throw Error(ErrorKind::InvalidInput, "rollout ended with unmet demand");
    return cost;
}

/**
 * Monte Carlo estimate of the exact policy's cost.
 *
 * Path p draws its prices from Rng(seed, p), so results do not depend on
 * evaluation order.
 */
inline SimulationResult simulate(const FleetState& fleet, const PriceModel& model, std::size_t paths,
                                 std::uint64_t seed) {
    if (paths < 1) throw Error(ErrorKind::InvalidInput, "paths must be >= 1");
    model.validate();
    if (fleet.horizon_remaining() != model.horizon())
        throw Error(ErrorKind::InvalidInput, "fleet horizon differs from price model horizon");
    const WeightTable table = compute_weights(model);
    std::vector<double> costs(paths);
    std::vector<double> prices(model.horizon());
    for (std::size_t p = 0; p < paths; ++p) {
        Rng rng(seed, p);
        for (std::size_t t = 0; t < prices.size(); ++t) prices[t] = model.stages[t].sample(rng);
        costs[p] = rollout_cost(fleet, table, prices);
    }
    double mean = 0.0;
    for (double c : costs) mean += c;
    mean /= static_cast<double>(paths);
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    SimulationResult r;
    r.mean = mean;
    r.std_error = paths > 1 ? std::sqrt(ss / static_cast<double>(paths - 1) / static_cast<double>(paths)) : 0.0;
    return r;
}

struct PricePoint {
    double price = 0.0;
    double power = 0.0;
};

/// First-stage optimal aggregate power over a grid of observed prices.
inline std::vector<PricePoint> price_response(const FleetState& fleet, const PriceModel& model,
                                              std::span<const double> grid) {
    if (grid.empty()) throw Error(ErrorKind::InvalidInput, "price grid is empty");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] <= grid[i + 1])) throw Error(ErrorKind::InvalidInput, "price grid must be ascending");
    model.validate();
    if (fleet.horizon_remaining() != model.horizon())
        throw Error(ErrorKind::InvalidInput, "fleet horizon differs from price model horizon");
    const WeightTable table = compute_weights(model);
    const Generator g = aggregate_generator(fleet);
    std::vector<PricePoint> out;
    out.reserve(grid.size());
    for (double c : grid) out.push_back({c, optimal_action(table, 0, g, c).u});
    return out;
}

}  // namespace evflex
