#pragma once

// Per-device charging model and permutahedron primitives.
//
// A permutahedron Pi(v) is the convex hull of all coordinate permutations of
// an ascending vector v (its generator). The charging profiles of a single EV
// over its remaining stages form such a set, and so does any fleet's
// aggregate, since Pi(a) + Pi(b) = Pi(a + b).

#include "evflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace evflex {

/// Relative tolerance used for all floating-point comparisons on energies.
inline constexpr double kRelTol = 1e-9;

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double tolerance_for(std::span<const double> v) { return kRelTol * (1.0 + max_abs(v)); }

struct DeviceSpec {
    std::string id;
    double u_max = 0.0;           ///< energy per stage, > 0
    double initial_demand = 0.0;  ///< energy, >= 0
};

/// Ascending vector of breakpoints generating a permutahedron.
class Generator {
public:
    Generator() = default;

    /// Rejects empty, non-finite or out-of-order input (beyond tolerance).
    explicit Generator(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw Error(ErrorKind::InvalidInput, "generator must have at least one entry");
        for (double v : values_)
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "generator entries must be finite");
        const double tol = tolerance_for(values_);
        for (std::size_t i = 0; i + 1 < values_.size(); ++i)
            if (values_[i] > values_[i + 1] + tol)
                throw Error(ErrorKind::InvalidInput, "generator entries must be ascending");
        std::sort(values_.begin(), values_.end());
    }

    static Generator zeros(std::size_t m) { return Generator(std::vector<double>(m, 0.0)); }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double front() const { return values_.front(); }
    double back() const { return values_.back(); }
    double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }
    std::span<const double> values() const noexcept { return values_; }
    double tolerance() const { return tolerance_for(values_); }

    friend bool operator==(const Generator&, const Generator&) = default;

private:
    std::vector<double> values_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/**
 * Generator of a single device's remaining-profile set over m stages:
 * (0, ..., 0, x - q*u_max, u_max, ..., u_max) with q = floor(x / u_max).
 *
 * When x = m*u_max the device must charge at full rate every stage and the
 * result is (u_max, ..., u_max).
 */
inline Generator device_generator(double remaining_demand, double u_max, std::size_t m) {
    if (m < 1) throw Error(ErrorKind::InvalidInput, "stage count must be >= 1");
    if (!(u_max > 0.0) || !std::isfinite(u_max)) throw Error(ErrorKind::InvalidInput, "u_max must be > 0");
    if (!std::isfinite(remaining_demand)) throw Error(ErrorKind::InvalidInput, "demand must be finite");
    const double cap = static_cast<double>(m) * u_max;
    const double tol = kRelTol * (1.0 + cap);
    if (remaining_demand < -tol) throw Error(ErrorKind::InvalidInput, "demand must be nonnegative");
    if (remaining_demand > cap + tol)
        throw Error(ErrorKind::InfeasibleDevice, "demand exceeds what can be charged before the deadline");
    const double x = std::clamp(remaining_demand, 0.0, cap);

    std::vector<double> v(m, 0.0);
    if (x >= cap) {
        std::fill(v.begin(), v.end(), u_max);
        return Generator(std::move(v));
    }
    auto q = std::min(static_cast<std::size_t>(std::floor(x / u_max)), m - 1);
    double r = x - static_cast<double>(q) * u_max;
    // floor(x / u_max) can be off by one after rounding
    if (r < 0.0 && q > 0) {
        --q;
        r += u_max;
    } else if (r >= u_max && q + 1 < m) {
        ++q;
        r -= u_max;
    }
    r = std::clamp(r, 0.0, u_max);
    const std::size_t zeros = m - q - 1;
    v[zeros] = r;
    for (std::size_t i = zeros + 1; i < m; ++i) v[i] = u_max;
    return Generator(std::move(v));
}

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw Error(ErrorKind::InvalidInput, std::string(what) + ": length mismatch");
}

/// Generator of the Minkowski sum Pi(a) + Pi(b).
inline Generator minkowski_generator(const Generator& a, const Generator& b) {
    require_same_length(a.size(), b.size(), "minkowski_generator");
    std::vector<double> s(a.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = a[i] + b[i];
    return Generator(std::move(s));
}

/// True iff b majorizes a, i.e. Pi(a) is contained in Pi(b).
inline bool majorizes(std::span<const double> a_sorted, std::span<const double> b_sorted) {
    require_same_length(a_sorted.size(), b_sorted.size(), "majorizes");
    const double tol = kRelTol * (1.0 + std::max(max_abs(a_sorted), max_abs(b_sorted)) *
                                            static_cast<double>(a_sorted.size()));
    double sa = 0.0;
    double sb = 0.0;
    // partial sums of the k largest entries, walking from the top
    for (std::size_t k = a_sorted.size(); k-- > 0;) {
        sa += a_sorted[k];
        sb += b_sorted[k];
        if (k > 0 && sa > sb + tol) return false;
    }
    return std::abs(sa - sb) <= tol;
}

inline bool majorizes(const Generator& a, const Generator& b) { return majorizes(a.values(), b.values()); }

struct LpVertex {
    double value = 0.0;
    std::vector<double> vertex;
};

/**
 * Minimizes cost . u over Pi(g) by sorting.
 *
 * The smallest generator entries go to the positions of the largest costs.
 * Ties in cost keep their original index order.
 */
inline LpVertex min_lp(std::span<const double> cost, const Generator& g) {
    require_same_length(cost.size(), g.size(), "min_lp");
    std::vector<std::size_t> order(cost.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] > cost[b]; });
    LpVertex out;
    out.vertex.assign(cost.size(), 0.0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.vertex[order[i]] = g[i];
        out.value += cost[order[i]] * g[i];
    }
    return out;
}

/// Projection of Pi(g) onto one coordinate: the feasible power this stage.
inline Interval admissible_interval(const Generator& g) { return {g.front(), g.back()}; }

/// Membership test for Pi(g) via majorization of the sorted profile.
inline bool contains(const Generator& g, std::span<const double> profile) {
    require_same_length(g.size(), profile.size(), "contains");
    std::vector<double> sorted(profile.begin(), profile.end());
    std::sort(sorted.begin(), sorted.end());
    return majorizes(std::span<const double>(sorted), g.values());
}

}  // namespace evflex
