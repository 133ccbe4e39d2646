#pragma once

// Fleet aggregation, the optimal aggregate transition, and disaggregation of
// an aggregate power decision into per-device actions that realize it.

#include "evflex/error.hpp"
#include "evflex/flexibility.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace evflex {

/// Device states at a stage boundary, with m stages still to go.
class FleetState {
public:
    FleetState() = default;

    /// Fleet at the start of a horizon of `horizon` stages, demands = initial demands.
    FleetState(std::vector<DeviceSpec> specs, std::size_t horizon) : specs_(std::move(specs)), horizon_(horizon) {
        demands_.reserve(specs_.size());
        for (const auto& s : specs_) demands_.push_back(s.initial_demand);
        validate();
    }

    FleetState(std::vector<DeviceSpec> specs, std::vector<double> demands, std::size_t horizon_remaining)
        : specs_(std::move(specs)), demands_(std::move(demands)), horizon_(horizon_remaining) {
        validate();
    }

    const std::vector<DeviceSpec>& specs() const noexcept { return specs_; }
    const std::vector<double>& demands() const noexcept { return demands_; }
    std::size_t horizon_remaining() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return specs_.size(); }

private:
    void validate() const {
        if (demands_.size() != specs_.size())
            throw Error(ErrorKind::InvalidInput, "demands and device specs differ in length");
        std::string bad;
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            const double u = specs_[l].u_max;
            if (!(u > 0.0) || !std::isfinite(u))
                throw Error(ErrorKind::InvalidInput, "device " + specs_[l].id + ": u_max must be > 0");
            const double cap = static_cast<double>(horizon_) * u;
            const double tol = kRelTol * (1.0 + cap);
            if (!std::isfinite(demands_[l]) || demands_[l] < -tol)
                throw Error(ErrorKind::InvalidInput, "device " + specs_[l].id + ": demand must be nonnegative");
            if (demands_[l] > cap + tol) bad += (bad.empty() ? "" : ", ") + specs_[l].id;
        }
        if (!bad.empty()) throw Error(ErrorKind::InfeasibleFleet, "devices cannot finish charging: " + bad);
    }

    std::vector<DeviceSpec> specs_;
    std::vector<double> demands_;
    std::size_t horizon_ = 0;
};

/// Each device's own generator at the fleet's current boundary.
inline std::vector<Generator> device_generators(const FleetState& fleet) {
    const std::size_t m = fleet.horizon_remaining();
    if (m < 1) throw Error(ErrorKind::TerminalStage, "fleet has no stages remaining");
    std::vector<Generator> out;
    out.reserve(fleet.size());
    std::string bad;
    for (std::size_t l = 0; l < fleet.size(); ++l) {
        try {
            out.push_back(device_generator(fleet.demands()[l], fleet.specs()[l].u_max, m));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InfeasibleDevice) throw;
            bad += (bad.empty() ? "" : ", ") + fleet.specs()[l].id;
        }
    }
    if (!bad.empty()) throw Error(ErrorKind::InfeasibleFleet, "devices cannot finish charging: " + bad);
    return out;
}

/// Generator of the fleet's aggregate flexibility set (sum of device generators).
inline Generator aggregate_generator(const FleetState& fleet) {
    const std::size_t m = fleet.horizon_remaining();
    if (m < 1) throw Error(ErrorKind::TerminalStage, "fleet has no stages remaining");
    std::vector<double> sum(m, 0.0);
    std::string bad;
    for (std::size_t l = 0; l < fleet.size(); ++l) {
        try {
            const Generator g = device_generator(fleet.demands()[l], fleet.specs()[l].u_max, m);
            for (std::size_t i = 0; i < m; ++i) sum[i] += g[i];
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InfeasibleDevice) throw;
            bad += (bad.empty() ? "" : ", ") + fleet.specs()[l].id;
        }
    }
    if (!bad.empty()) throw Error(ErrorKind::InfeasibleFleet, "devices cannot finish charging: " + bad);
    return Generator(std::move(sum));
}

/**
 * Band [g[k], g[k+1]] containing u, 0-based.
 *
 * Returns the largest k in 0..m-2 with g[k] <= u, so a boundary value picks
 * the upper band. For m = 1 there is no band and 0 is returned.
 */
inline std::size_t band_index(const Generator& g, double u) {
    const double tol = g.tolerance();
    if (!(u >= g.front() - tol && u <= g.back() + tol))
        throw Error(ErrorKind::InfeasibleAction, "aggregate action outside admissible interval");
    if (g.size() == 1) return 0;
    auto vals = g.values().first(g.size() - 1);
    auto it = std::upper_bound(vals.begin(), vals.end(), u);
    return it == vals.begin() ? 0 : static_cast<std::size_t>(it - vals.begin()) - 1;
}

/**
 * Aggregate state after charging u this stage under the optimal disaggregation.
 *
 * Band-merge form: with u in [g[k], g[k+1]], entries k and k+1 collapse into
 * g[k] + g[k+1] - u and every other entry is kept. The result has one entry
 * fewer and sums to g.sum() - u.
 */
inline Generator transition(const Generator& g, double u) {
    if (g.size() < 2) throw Error(ErrorKind::TerminalStage, "no successor state at the final stage");
    const std::size_t k = band_index(g, u);
    const double uc = std::clamp(u, g[k], g[k + 1]);
    std::vector<double> h;
    h.reserve(g.size() - 1);
    for (std::size_t i = 0; i < k; ++i) h.push_back(g[i]);
    h.push_back(std::clamp(g[k] + g[k + 1] - uc, g[k], g[k + 1]));
    for (std::size_t i = k + 2; i < g.size(); ++i) h.push_back(g[i]);
    return Generator(std::move(h));
}

/**
 * Splits an aggregate action across devices so that the fleet lands exactly on
 * transition(aggregate_generator(fleet), u).
 *
 * Proportional within the band: theta = (u - G[k]) / (G[k+1] - G[k]) and each
 * device charges v_l[k] + theta * (v_l[k+1] - v_l[k]).
 */
inline std::vector<double> disaggregate(const FleetState& fleet, double u) {
    const auto gens = device_generators(fleet);
    const Generator agg = aggregate_generator(fleet);
    const std::size_t k = band_index(agg, u);
    std::vector<double> actions(fleet.size(), 0.0);
    if (agg.size() == 1) {
        for (std::size_t l = 0; l < gens.size(); ++l) actions[l] = gens[l][0];
        return actions;
    }
    const double width = agg[k + 1] - agg[k];
    const double theta = width > 0.0 ? std::clamp((u - agg[k]) / width, 0.0, 1.0) : 0.0;
    for (std::size_t l = 0; l < gens.size(); ++l) {
        const double lo = gens[l][k];
        const double hi = gens[l][k + 1];
        actions[l] = std::clamp(lo + theta * (hi - lo), lo, hi);
    }
    return actions;
}

/// Steps every device by its action; the horizon shrinks by one stage.
inline FleetState apply_actions(const FleetState& fleet, std::span<const double> actions) {
    if (actions.size() != fleet.size()) throw Error(ErrorKind::InvalidInput, "one action per device required");
    const std::size_t m = fleet.horizon_remaining();
    if (m < 1) throw Error(ErrorKind::TerminalStage, "fleet has no stages remaining");
    std::vector<double> next(fleet.size());
    for (std::size_t l = 0; l < fleet.size(); ++l) {
        const auto& spec = fleet.specs()[l];
        const double x = fleet.demands()[l];
        const Interval iv = admissible_interval(device_generator(x, spec.u_max, m));
        const double tol = kRelTol * (1.0 + spec.u_max);
        const double a = actions[l];
        if (!(a >= iv.lo - tol && a <= iv.hi + tol))
            throw Error(ErrorKind::InfeasibleAction, "device " + spec.id + ": action outside admissible interval");
        const double cap = static_cast<double>(m - 1) * spec.u_max;
        next[l] = std::clamp(x - a, 0.0, cap);
    }
    return FleetState(fleet.specs(), std::move(next), m - 1);
}

}  // namespace evflex
