#pragma once

// Stage-wise independent price process with discrete per-stage marginals.

#include "evflex/error.hpp"
#include "evflex/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace evflex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Discrete price law of one stage: strictly ascending support, matching probabilities.
class StageDistribution {
public:
    StageDistribution() = default;

    /// Sorts the atoms, merges equal prices and drops zero-probability atoms.
    StageDistribution(std::vector<double> support, std::vector<double> probs) {
        if (support.size() != probs.size())
            throw Error(ErrorKind::InvalidInput, "support and probs differ in length");
        std::vector<std::pair<double, double>> atoms;
        atoms.reserve(support.size());
        double total = 0.0;
        for (std::size_t j = 0; j < support.size(); ++j) {
            if (!std::isfinite(support[j])) throw Error(ErrorKind::InvalidInput, "prices must be finite");
            if (!(probs[j] >= 0.0) || !std::isfinite(probs[j]))
                throw Error(ErrorKind::InvalidInput, "probabilities must be nonnegative");
            total += probs[j];
            if (probs[j] > 0.0) atoms.emplace_back(support[j], probs[j]);
        }
        if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::InvalidInput, "probabilities must sum to 1");
        std::stable_sort(atoms.begin(), atoms.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [c, p] : atoms) {
            if (!support_.empty() && support_.back() == c) {
                probs_.back() += p;
            } else {
                support_.push_back(c);
                probs_.push_back(p);
            }
        }
        cum_prob_.assign(support_.size() + 1, 0.0);
        cum_mass_.assign(support_.size() + 1, 0.0);
        for (std::size_t j = 0; j < support_.size(); ++j) {
            cum_prob_[j + 1] = cum_prob_[j] + probs_[j];
            cum_mass_[j + 1] = cum_mass_[j] + probs_[j] * support_[j];
        }
    }

    static StageDistribution point_mass(double c) { return StageDistribution({c}, {1.0}); }

    static StageDistribution uniform(std::vector<double> support) {
        const double p = 1.0 / static_cast<double>(support.size());
        std::vector<double> probs(support.size(), p);
        return StageDistribution(std::move(support), std::move(probs));
    }

    const std::vector<double>& support() const noexcept { return support_; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return support_.size(); }
    double min_price() const { return support_.front(); }
    double max_price() const { return support_.back(); }

    double mean() const { return cum_mass_.back(); }

    /// P(c < a).
    double prob_below(double a) const { return cum_prob_[first_at_least(a)]; }

    /**
     * E[min(max(c, lo), hi)], O(log n) via prefix sums.
     * lo may be -inf and hi may be +inf.
     */
    double expected_clamp(double lo, double hi) const {
        if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw Error(ErrorKind::InvalidInput, "clamp requires lo <= hi");
        const std::size_t i0 = first_at_least(lo);
        const std::size_t i1 = first_at_least(hi);
        const double below = cum_prob_[i0];
        const double above = cum_prob_.back() - cum_prob_[i1];
        double v = cum_mass_[i1] - cum_mass_[i0];
        if (below > 0.0) v += below * lo;
        if (above > 0.0) v += above * hi;
        return v;
    }

    /// Inverse-CDF draw.
    double sample(Rng& rng) const {
        const double u = rng.uniform() * cum_prob_.back();
        auto it = std::upper_bound(cum_prob_.begin() + 1, cum_prob_.end(), u);
        auto j = static_cast<std::size_t>(it - cum_prob_.begin()) - 1;
        return support_[std::min(j, support_.size() - 1)];
    }

    friend bool operator==(const StageDistribution& a, const StageDistribution& b) {
        return a.support_ == b.support_ && a.probs_ == b.probs_;
    }

private:
    std::size_t first_at_least(double a) const {
        return static_cast<std::size_t>(std::lower_bound(support_.begin(), support_.end(), a) - support_.begin());
    }

    std::vector<double> support_;
    std::vector<double> probs_;
    std::vector<double> cum_prob_;
    std::vector<double> cum_mass_;
};

/**
 * Truncated-expectation form of the weight update, term by term:
 * P(c < lo) lo + P(c >= hi) hi + E[c 1{lo <= c < hi}].
 *
 * Value-identical to expected_clamp; kept as an independent cross-check.
 */
inline double three_term_weight(const StageDistribution& d, double w_lo, double w_hi) {
    if (std::isnan(w_lo) || std::isnan(w_hi) || w_lo > w_hi)
        throw Error(ErrorKind::InvalidInput, "three_term_weight requires w_lo <= w_hi");
    double p_below = 0.0;
    double p_above = 0.0;
    double middle = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double c = d.support()[j];
        const double p = d.probs()[j];
        if (c < w_lo)
            p_below += p;
        else if (c >= w_hi)
            p_above += p;
        else
            middle += p * c;
    }
    double v = middle;
    if (p_below > 0.0) v += p_below * w_lo;
    if (p_above > 0.0) v += p_above * w_hi;
    return v;
}

struct PriceModel {
    std::vector<StageDistribution> stages;

    std::size_t horizon() const noexcept { return stages.size(); }

    void validate() const {
        if (stages.empty()) throw Error(ErrorKind::InvalidInput, "price model needs at least one stage");
        for (const auto& s : stages)
            if (s.size() == 0) throw Error(ErrorKind::InvalidInput, "empty stage distribution");
    }

    friend bool operator==(const PriceModel&, const PriceModel&) = default;
};

struct PriceRecord {
    std::string date;
    int period = 0;
    double price = 0.0;
};

/// Equal-weight empirical distribution per settlement period; stage t is period t+1.
inline PriceModel from_records(const std::vector<PriceRecord>& records, int periods_per_day) {
    if (periods_per_day < 1) throw Error(ErrorKind::InvalidInput, "periods per day must be >= 1");
    std::vector<std::vector<double>> prices(static_cast<std::size_t>(periods_per_day));
    for (const auto& r : records) {
        if (r.period < 1 || r.period > periods_per_day)
            throw Error(ErrorKind::InvalidInput, "period " + std::to_string(r.period) + " out of range");
        prices[static_cast<std::size_t>(r.period - 1)].push_back(r.price);
    }
    std::string missing;
    for (std::size_t p = 0; p < prices.size(); ++p)
        if (prices[p].empty()) missing += (missing.empty() ? "" : ", ") + std::to_string(p + 1);
    if (!missing.empty()) throw Error(ErrorKind::IncompleteData, "no prices for period(s) " + missing);

    PriceModel model;
    for (auto& obs : prices) {
        std::sort(obs.begin(), obs.end());
        std::vector<double> support;
        std::vector<std::size_t> counts;
        for (double c : obs) {
            if (!support.empty() && support.back() == c) {
                ++counts.back();
            } else {
                support.push_back(c);
                counts.push_back(1);
            }
        }
        std::vector<double> probs(counts.size());
        const auto n = static_cast<double>(obs.size());
        for (std::size_t j = 0; j < counts.size(); ++j) probs[j] = static_cast<double>(counts[j]) / n;
        model.stages.emplace_back(std::move(support), std::move(probs));
    }
    return model;
}

/// Normal laws discretized on `grid` equiprobable quantile midpoints (j - 0.5) / grid.
inline PriceModel synthetic_normal(const std::vector<double>& means, const std::vector<double>& stds, int grid) {
    if (means.empty() || means.size() != stds.size())
        throw Error(ErrorKind::InvalidInput, "means and stds must be nonempty and of equal length");
    if (grid < 1) throw Error(ErrorKind::InvalidInput, "grid must be >= 1");
    PriceModel model;
    const double p = 1.0 / grid;
    for (std::size_t t = 0; t < means.size(); ++t) {
        if (!std::isfinite(means[t]) || !(stds[t] >= 0.0) || !std::isfinite(stds[t]))
            throw Error(ErrorKind::InvalidInput, "invalid normal parameters");
        std::vector<double> support(static_cast<std::size_t>(grid), means[t]);
        if (stds[t] > 0.0 && grid > 1) {
            const boost::math::normal_distribution<double> law(means[t], stds[t]);
            for (int j = 0; j < grid; ++j) support[j] = boost::math::quantile(law, (j + 0.5) / grid);
        }
        model.stages.emplace_back(std::move(support), std::vector<double>(static_cast<std::size_t>(grid), p));
    }
    return model;
}

}  // namespace evflex
