#pragma once

// Device-level SDDP baseline (hazard-decision) for benchmarking.
//
// State: per-device remaining demand x (length N). Cuts for stage t bound the
// expected recourse V_t(x) from below, V_t being the expected cost of stages
// t..T-1 given the state entering stage t.

#include "evflex/aggregate.hpp"
#include "evflex/error.hpp"
#include "evflex/pricing.hpp"
#include "evflex/random.hpp"
#include "evflex/simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace evflex {

struct Cut {
    std::size_t stage = 0;
    double intercept = 0.0;
    std::vector<double> gradient;

    double operator()(std::span<const double> x) const {
        double v = intercept;
        for (std::size_t l = 0; l < x.size(); ++l) v += gradient[l] * x[l];
        return v;
    }
};

/// Cut pool indexed by stage, plus the per-stage validity floor price.
class CutModel {
public:
    CutModel() = default;

    explicit CutModel(const PriceModel& model) : cuts_(model.horizon() + 1), floor_(model.horizon() + 1, 0.0) {
        // floor_[t] = lowest price that can occur in stages t..T-1
        double mu = kInf;
        for (std::size_t t = model.horizon(); t-- > 0;) {
            mu = std::min(mu, model.stages[t].min_price());
            floor_[t] = mu;
        }
    }

    std::size_t horizon() const noexcept { return cuts_.empty() ? 0 : cuts_.size() - 1; }
    const std::vector<Cut>& cuts(std::size_t t) const { return cuts_.at(t); }
    double floor_price(std::size_t t) const { return floor_.at(t); }
    void add(Cut cut) { cuts_.at(cut.stage).push_back(std::move(cut)); }

    std::size_t total_cuts() const {
        std::size_t n = 0;
        for (const auto& c : cuts_) n += c.size();
        return n;
    }

    /// max(floor * sum(x), cuts); zero past the horizon.
    double value(std::size_t t, std::span<const double> x) const {
        if (t >= horizon()) return 0.0;
        double total = 0.0;
        for (double v : x) total += v;
        double best = floor_[t] * total;
        for (const auto& c : cuts_[t]) best = std::max(best, c(x));
        return best;
    }

private:
    std::vector<std::vector<Cut>> cuts_;
    std::vector<double> floor_;
};

/**
 * Stage-t LP at incoming state x and observed price c.
 *
 * Variables (u_0..u_{N-1}, theta). Row 2l is u_l <= x_l, row 2l+1 is
 * u_l >= x_l - (m-1) u_max_l, then (for t < T-1) the floor row and one row per
 * cut on V_{t+1}. Bounds 0 <= u_l <= u_max_l. At the final stage theta is fixed
 * to zero.
 */
inline LinearProgram build_stage_lp(std::span<const DeviceSpec> specs, std::size_t horizon, std::size_t t,
                                    std::span<const double> x, double c, const CutModel& cuts) {
    const std::size_t n = specs.size();
    if (x.size() != n) throw Error(ErrorKind::InvalidInput, "state length must match device count");
    if (t >= horizon) throw Error(ErrorKind::InvalidInput, "stage out of range");
    const std::size_t m = horizon - t;
    const bool last = t + 1 == horizon;
    LinearProgram lp;
    lp.objective.assign(n + 1, c);
    lp.objective[n] = 1.0;
    lp.lower.assign(n + 1, 0.0);
    lp.upper.resize(n + 1);
    for (std::size_t l = 0; l < n; ++l) lp.upper[l] = specs[l].u_max;
    lp.lower[n] = last ? 0.0 : -kInf;
    lp.upper[n] = last ? 0.0 : kInf;

    std::vector<double> row(n + 1, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        row.assign(n + 1, 0.0);
        row[l] = 1.0;
        lp.add_row(row, Relation::LessEqual, x[l]);
        lp.add_row(row, Relation::GreaterEqual, x[l] - static_cast<double>(m - 1) * specs[l].u_max);
    }
    if (!last) {
        const double mu = cuts.floor_price(t + 1);
        double total = 0.0;
        for (double v : x) total += v;
        row.assign(n + 1, mu);
        row[n] = 1.0;
        lp.add_row(row, Relation::GreaterEqual, mu * total);
        // theta + beta.u >= alpha + beta.x
        for (const auto& cut : cuts.cuts(t + 1)) {
            for (std::size_t l = 0; l < n; ++l) row[l] = cut.gradient[l];
            row[n] = 1.0;
            lp.add_row(row, Relation::GreaterEqual, cut(x));
        }
    }
    return lp;
}

struct StageSolution {
    double value = 0.0;
    std::vector<double> u;
    std::vector<double> gradient;  ///< subgradient of the LP value in x
};

inline StageSolution solve_stage(std::span<const DeviceSpec> specs, std::size_t horizon, std::size_t t,
                                 std::span<const double> x, double c, const CutModel& cuts) {
    const LinearProgram lp = build_stage_lp(specs, horizon, t, x, c, cuts);
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal)
        throw Error(ErrorKind::SolverStalled,
                    std::string("stage ") + std::to_string(t) + " LP " + to_string(sol.status));
    const std::size_t n = specs.size();
    StageSolution out;
    out.value = sol.objective;
    out.u.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(n));
    out.gradient.assign(n, 0.0);
    // every state-dependent rhs is affine in x; chain rule through the row duals
    for (std::size_t l = 0; l < n; ++l) out.gradient[l] = sol.row_duals[2 * l] + sol.row_duals[2 * l + 1];
    if (t + 1 < horizon) {
        const double mu = cuts.floor_price(t + 1);
        const double y_floor = sol.row_duals[2 * n];
        for (std::size_t l = 0; l < n; ++l) out.gradient[l] += y_floor * mu;
        const auto& pool = cuts.cuts(t + 1);
        for (std::size_t k = 0; k < pool.size(); ++k) {
            const double y = sol.row_duals[2 * n + 1 + k];
            if (y == 0.0) continue;
            for (std::size_t l = 0; l < n; ++l) out.gradient[l] += y * pool[k].gradient[l];
        }
    }
    return out;
}

struct SddpConfig {
    std::size_t iterations = 10;
    std::size_t backward_samples = 100;  ///< full support is enumerated up to this many atoms
    std::uint64_t seed = 0;
    std::size_t simulation_paths = 0;    ///< policy-evaluation paths per iteration; 0 disables
};

struct TraceRow {
    std::size_t iteration = 0;
    double seconds = 0.0;
    double lower_bound = 0.0;
    double simulated_cost = 0.0;  ///< NaN when simulation is disabled
};

struct SddpResult {
    CutModel cuts;
    std::vector<TraceRow> trace;
};

/// Expected first-stage LP value under the current cuts.
inline double lower_bound(const CutModel& cuts, const FleetState& fleet, const PriceModel& model) {
    const std::size_t T = model.horizon();
    double lb = 0.0;
    const auto& d = model.stages[0];
    for (std::size_t j = 0; j < d.size(); ++j)
        lb += d.probs()[j] * solve_stage(fleet.specs(), T, 0, fleet.demands(), d.support()[j], cuts).value;
    return lb;
}

/// Rolls the cut-induced policy forward along one price path.
inline double policy_cost(const CutModel& cuts, const FleetState& fleet, std::span<const double> prices) {
    const std::size_t T = prices.size();
    std::vector<double> x = fleet.demands();
    double cost = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const StageSolution s = solve_stage(fleet.specs(), T, t, x, prices[t], cuts);
        for (std::size_t l = 0; l < x.size(); ++l) {
            cost += prices[t] * s.u[l];
            const double cap = static_cast<double>(T - t - 1) * fleet.specs()[l].u_max;
            x[l] = std::clamp(x[l] - s.u[l], 0.0, cap);
        }
    }
    return cost;
}

struct PolicyEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo cost of the cut policy; path p uses Rng(seed, p).
inline PolicyEstimate simulate_policy(const CutModel& cuts, const FleetState& fleet, const PriceModel& model,
                                      std::size_t paths, std::uint64_t seed) {
    if (paths < 1) throw Error(ErrorKind::InvalidInput, "paths must be >= 1");
    std::vector<double> costs(paths);
    std::vector<double> prices(model.horizon());
    for (std::size_t p = 0; p < paths; ++p) {
        Rng rng(seed, p);
        for (std::size_t t = 0; t < prices.size(); ++t) prices[t] = model.stages[t].sample(rng);
        costs[p] = policy_cost(cuts, fleet, prices);
    }
    double mean = 0.0;
    for (double c : costs) mean += c;
    mean /= static_cast<double>(paths);
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    return {mean, paths > 1 ? std::sqrt(ss / static_cast<double>(paths - 1) / static_cast<double>(paths)) : 0.0};
}

/// Atoms used in the backward pass at one stage: full support or a seeded subsample.
inline StageDistribution backward_atoms(const StageDistribution& d, std::size_t samples, Rng& rng) {
    if (d.size() <= samples) return d;
    std::vector<double> draws(samples);
    for (auto& c : draws) c = d.sample(rng);
    return StageDistribution::uniform(std::move(draws));
}

/**
 * One sampled forward path and one averaged cut per stage per iteration.
 *
 * Iteration k samples its forward path from Rng(seed, 2k) and any backward
 * subsamples from Rng(seed, 2k+1). Policy evaluation uses Rng(seed ^ const, p)
 * with the same paths every iteration.
 */
inline SddpResult run_sddp(const FleetState& fleet, const PriceModel& model, const SddpConfig& config) {
    model.validate();
    const std::size_t T = model.horizon();
    if (fleet.horizon_remaining() != T) throw Error(ErrorKind::InvalidInput, "fleet horizon differs from price model");
    if (config.backward_samples < 1) throw Error(ErrorKind::InvalidInput, "backward samples must be >= 1");
    (void)device_generators(fleet);  // feasibility check

    using clock = std::chrono::steady_clock;
    SddpResult result{CutModel(model), {}};
    double seconds = 0.0;
    const std::size_t n = fleet.size();
    std::vector<std::vector<double>> trial(T, std::vector<double>(n));

    for (std::size_t k = 1; k <= config.iterations; ++k) {
        const auto start = clock::now();
        try {
            Rng fwd(config.seed, 2 * k);
            std::vector<double> x = fleet.demands();
            for (std::size_t t = 0; t < T; ++t) {
                trial[t] = x;
                const double c = model.stages[t].sample(fwd);
                const StageSolution s = solve_stage(fleet.specs(), T, t, x, c, result.cuts);
                for (std::size_t l = 0; l < n; ++l) {
                    const double cap = static_cast<double>(T - t - 1) * fleet.specs()[l].u_max;
                    x[l] = std::clamp(x[l] - s.u[l], 0.0, cap);
                }
            }
            Rng bwd(config.seed, 2 * k + 1);
            for (std::size_t t = T; t-- > 1;) {
                const StageDistribution atoms = backward_atoms(model.stages[t], config.backward_samples, bwd);
                double value = 0.0;
                std::vector<double> grad(n, 0.0);
                for (std::size_t j = 0; j < atoms.size(); ++j) {
                    const StageSolution s =
                        solve_stage(fleet.specs(), T, t, trial[t], atoms.support()[j], result.cuts);
                    const double p = atoms.probs()[j];
                    value += p * s.value;
                    for (std::size_t l = 0; l < n; ++l) grad[l] += p * s.gradient[l];
                }
                Cut cut{t, value, grad};
                for (std::size_t l = 0; l < n; ++l) cut.intercept -= grad[l] * trial[t][l];
                result.cuts.add(std::move(cut));
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "SDDP iteration " + std::to_string(k) + ": " + e.what());
        }
        TraceRow row;
        row.iteration = k;
        row.lower_bound = lower_bound(result.cuts, fleet, model);
        seconds += std::chrono::duration<double>(clock::now() - start).count();
        row.seconds = seconds;
        row.simulated_cost = std::numeric_limits<double>::quiet_NaN();
        if (config.simulation_paths > 0)
            row.simulated_cost =
                simulate_policy(result.cuts, fleet, model, config.simulation_paths, config.seed ^ 0x5EEDCAFEULL).mean;
        result.trace.push_back(row);
    }
    return result;
}

}  // namespace evflex
