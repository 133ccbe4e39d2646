#pragma once

// Brute-force reference computations used to check the fast paths.

#include "evflex/aggregate.hpp"
#include "evflex/error.hpp"
#include "evflex/flexibility.hpp"
#include "evflex/pricing.hpp"
#include "evflex/random.hpp"
#include "evflex/simplex.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace evflex::oracle {

inline constexpr std::size_t kMaxTreeNodes = 10'000;

/// Price-history tree; node 0 is the root (before stage 0, probability 1).
struct ScenarioTree {
    struct Node {
        int stage = -1;
        double price = 0.0;
        double prob = 1.0;
        std::size_t parent = 0;
        std::vector<std::size_t> children;
    };
    std::vector<Node> nodes;

    static ScenarioTree build(const PriceModel& model) {
        model.validate();
        std::size_t count = 0;
        std::size_t layer = 1;
        for (const auto& d : model.stages) {
            layer *= d.size();
            count += layer;
            if (count > kMaxTreeNodes) throw Error(ErrorKind::InstanceTooLarge, "scenario tree exceeds node limit");
        }
        ScenarioTree tree;
        tree.nodes.reserve(count + 1);
        tree.nodes.push_back(Node{});
        std::vector<std::size_t> frontier{0};
        for (std::size_t t = 0; t < model.horizon(); ++t) {
            const auto& d = model.stages[t];
            std::vector<std::size_t> next;
            for (std::size_t parent : frontier) {
                for (std::size_t j = 0; j < d.size(); ++j) {
                    Node node;
                    node.stage = static_cast<int>(t);
                    node.price = d.support()[j];
                    node.prob = tree.nodes[parent].prob * d.probs()[j];
                    node.parent = parent;
                    tree.nodes.push_back(node);
                    tree.nodes[parent].children.push_back(tree.nodes.size() - 1);
                    next.push_back(tree.nodes.size() - 1);
                }
            }
            frontier = std::move(next);
        }
        return tree;
    }

    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 1; i < nodes.size(); ++i)
            if (nodes[i].children.empty()) out.push_back(i);
        return out;
    }
};

struct TreeValue {
    double value = 0.0;
    std::vector<double> first_stage_prices;                 ///< one per stage-0 atom
    std::vector<std::vector<double>> first_stage_actions;   ///< [atom][device]
};

/**
 * Hazard-decision deterministic equivalent over the full scenario tree.
 *
 * One decision u_{node,l} in [0, u_max_l] per history node and device; along
 * every root-to-leaf path each device receives exactly its initial demand.
 */
inline TreeValue scenario_tree_value(const FleetState& fleet, const PriceModel& model) {
    if (fleet.horizon_remaining() != model.horizon())
        throw Error(ErrorKind::InvalidInput, "fleet horizon differs from price model horizon");
    (void)device_generators(fleet);  // infeasible fleets fail here
    const ScenarioTree tree = ScenarioTree::build(model);
    const std::size_t n = fleet.size();
    const std::size_t nodes = tree.nodes.size() - 1;
    auto var = [n](std::size_t node, std::size_t l) { return (node - 1) * n + l; };

    LinearProgram lp;
    lp.objective.resize(nodes * n);
    lp.lower.assign(nodes * n, 0.0);
    lp.upper.resize(nodes * n);
    for (std::size_t i = 1; i <= nodes; ++i)
        for (std::size_t l = 0; l < n; ++l) {
            lp.objective[var(i, l)] = tree.nodes[i].prob * tree.nodes[i].price;
            lp.upper[var(i, l)] = fleet.specs()[l].u_max;
        }
    for (std::size_t leaf : tree.leaves()) {
        for (std::size_t l = 0; l < n; ++l) {
            std::vector<double> row(nodes * n, 0.0);
            for (std::size_t i = leaf; i != 0; i = tree.nodes[i].parent) row[var(i, l)] = 1.0;
            lp.add_row(std::move(row), Relation::Equal, fleet.demands()[l]);
        }
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal)
        throw Error(ErrorKind::InfeasibleFleet, std::string("deterministic equivalent is ") + to_string(sol.status));

    TreeValue out;
    out.value = sol.objective;
    for (std::size_t child : tree.nodes[0].children) {
        out.first_stage_prices.push_back(tree.nodes[child].price);
        std::vector<double> a(n);
        for (std::size_t l = 0; l < n; ++l) a[l] = sol.x[var(child, l)];
        out.first_stage_actions.push_back(std::move(a));
    }
    return out;
}

/// min over all permutations pi of sum_i cost[i] g[pi(i)].
inline double perm_lp_bruteforce(std::span<const double> cost, std::span<const double> g) {
    require_same_length(cost.size(), g.size(), "perm_lp_bruteforce");
    if (g.size() > 8) throw Error(ErrorKind::InstanceTooLarge, "permutation enumeration limited to length 8");
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double v = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) v += cost[i] * g[perm[i]];
        best = std::min(best, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// All distinct coordinate permutations of g (the vertices of Pi(g)).
inline std::vector<std::vector<double>> enumerate_vertices(const Generator& g) {
    if (g.size() > 8) throw Error(ErrorKind::InstanceTooLarge, "vertex enumeration limited to length 8");
    std::vector<double> v(g.values().begin(), g.values().end());
    std::vector<std::vector<double>> out;
    do {
        out.push_back(v);
    } while (std::next_permutation(v.begin(), v.end()));
    return out;
}

/// max over Pi(g) of direction . u, pairing both in descending order.
inline double support_function(const Generator& g, std::span<const double> direction) {
    require_same_length(g.size(), direction.size(), "support_function");
    std::vector<double> d(direction.begin(), direction.end());
    std::sort(d.begin(), d.end());
    double v = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) v += d[i] * g[i];
    return v;
}

/**
 * A random feasible split of aggregate action u.
 *
 * Every device starts at its lower bound; the remainder is handed out in two
 * passes over a random device order, first a random share of what fits, then
 * whatever is still left up to each device's upper bound.
 */
inline std::vector<double> random_feasible_disaggregation(const FleetState& fleet, double u, Rng& rng) {
    const auto gens = device_generators(fleet);
    const std::size_t n = gens.size();
    std::vector<double> lo(n), hi(n);
    double sum_lo = 0.0, sum_hi = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        lo[l] = gens[l].front();
        hi[l] = gens[l].back();
        sum_lo += lo[l];
        sum_hi += hi[l];
    }
    const double tol = kRelTol * (1.0 + std::abs(sum_hi));
    if (u < sum_lo - tol || u > sum_hi + tol)
        throw Error(ErrorKind::InfeasibleAction, "aggregate action outside admissible interval");
    std::vector<double> a = lo;
    double remainder = std::clamp(u, sum_lo, sum_hi) - sum_lo;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t l : order) {
        const double add = rng.uniform() * std::min(hi[l] - a[l], remainder);
        a[l] += add;
        remainder -= add;
    }
    for (std::size_t l : order) {
        const double add = std::min(hi[l] - a[l], remainder);
        a[l] += add;
        remainder -= add;
    }
    return a;
}

}  // namespace evflex::oracle
