#include "evflex/oracle.hpp"
#include "evflex/recourse.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace evflex;
using evflex::testing::random_fleet;
using evflex::testing::random_model;
using evflex::testing::rel_err;

namespace {

// Two stages, prices uniform on {1, 3}, one device needing one unit at rate one.
PriceModel hand_model() { return {{StageDistribution::uniform({1.0, 3.0}), StageDistribution::uniform({1.0, 3.0})}}; }
FleetState hand_fleet() { return FleetState({{"ev", 1.0, 1.0}}, 2); }

}  // namespace

TEST(Weights, TerminalStageIsMean) {
    const auto w = compute_weights({{StageDistribution::uniform({1.0, 3.0})}});
    ASSERT_EQ(w.horizon(), 1u);
    EXPECT_EQ(w.stages()[0], (std::vector<double>{2.0}));
}

TEST(Weights, HandInstance) {
    const auto w = compute_weights(hand_model());
    EXPECT_EQ(w.stages()[1], (std::vector<double>{2.0}));
    EXPECT_EQ(w.stages()[0], (std::vector<double>{2.5, 1.5}));
}

TEST(Weights, MonotoneAndTelescoping) {
    Rng rng(51);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 1 + rng.index(10);
        const PriceModel model = random_model(rng, T, 6);
        const auto table = compute_weights(model);
        double tail = 0.0;
        for (std::size_t t = T; t-- > 0;) {
            tail += model.stages[t].mean();
            const auto w = table.at(t);
            ASSERT_EQ(w.size(), T - t);
            double sum = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                sum += w[i];
                if (i + 1 < w.size()) {
                    ASSERT_GE(w[i], w[i + 1]);
                }
            }
            ASSERT_LE(rel_err(sum, tail), 1e-9) << "stage " << t;
        }
    }
}

TEST(Weights, ThreeTermRecursionAgrees) {
    Rng rng(53);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t T = 2 + rng.index(6);
        const PriceModel model = random_model(rng, T, 5);
        const auto table = compute_weights(model);
        for (std::size_t t = 0; t + 1 < T; ++t) {
            const auto next = table.at(t + 1);
            for (std::size_t i = 0; i < T - t; ++i) {
                const double lo = i + 1 < T - t ? next[i] : -kInf;
                const double hi = i > 0 ? next[i - 1] : kInf;
                ASSERT_NEAR(three_term_weight(model.stages[t], lo, hi), table.at(t)[i], 1e-12 * (1.0 + std::abs(hi)));
            }
        }
    }
}

TEST(Weights, IndependentOfFleet) {
    Rng rng(55);
    const PriceModel model = random_model(rng, 5, 4);
    const auto a = solve(random_fleet(rng, 1, 5), model).weights;
    const auto b = solve(random_fleet(rng, 40, 5), model).weights;
    EXPECT_EQ(a.stages(), b.stages());
}

TEST(ExpectedValue, Examples) {
    const auto w = compute_weights(hand_model());
    EXPECT_DOUBLE_EQ(expected_value(w, 0, Generator({0, 1})), 1.5);
    EXPECT_DOUBLE_EQ(expected_value(w, 0, Generator::zeros(2)), 0.0);
    EXPECT_DOUBLE_EQ(expected_value(w, 1, Generator({0.75})), 1.5);
    EXPECT_THROW(expected_value(w, 0, Generator({1})), Error);
}

TEST(OptimalAction, HandInstance) {
    const auto w = compute_weights(hand_model());
    const Generator g({0, 1});
    auto a = optimal_action(w, 0, g, 1.0);
    EXPECT_EQ(a.u, 1.0);
    EXPECT_EQ(a.j, 1u);
    a = optimal_action(w, 0, g, 3.0);
    EXPECT_EQ(a.u, 0.0);
    EXPECT_EQ(a.j, 0u);
    // tie at the weight goes to the smaller charge
    EXPECT_EQ(optimal_action(w, 0, g, 2.0).u, 0.0);
    EXPECT_EQ(optimal_action(w, 1, Generator({0.4}), -50.0).u, 0.4);
}

TEST(OptimalAction, NonincreasingStepInPrice) {
    Rng rng(57);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 2 + rng.index(6);
        const auto table = compute_weights(random_model(rng, T, 4));
        const Generator g = aggregate_generator(random_fleet(rng, 1 + rng.index(5), T));
        EXPECT_EQ(optimal_action(table, 0, g, -1e6).u, g.back());
        EXPECT_EQ(optimal_action(table, 0, g, 1e6).u, g.front());
        double prev = kInf;
        for (double c = -30.0; c <= 110.0; c += 1.7) {
            const Action a = optimal_action(table, 0, g, c);
            ASSERT_EQ(a.u, g[a.j]);
            ASSERT_LE(a.u, prev);
            prev = a.u;
        }
    }
}

TEST(StageValue, HandInstance) {
    const auto w = compute_weights(hand_model());
    const Generator g({0, 1});
    EXPECT_DOUBLE_EQ(stage_value(w, 0, g, 3.0), 2.0);
    EXPECT_DOUBLE_EQ(stage_value(w, 0, g, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(0.5 * stage_value(w, 0, g, 1.0) + 0.5 * stage_value(w, 0, g, 3.0), 1.5);
}

TEST(StageValue, AveragesToExpectedValue) {
    Rng rng(59);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 1 + rng.index(6);
        const PriceModel model = random_model(rng, T, 5);
        const auto table = compute_weights(model);
        FleetState fleet = random_fleet(rng, 1 + rng.index(4), T);
        // move to a random later stage along a random feasible path
        const std::size_t t = rng.index(T);
        for (std::size_t s = 0; s < t; ++s) {
            const double u = evflex::testing::random_feasible_aggregate_action(rng, fleet);
            fleet = apply_actions(fleet, oracle::random_feasible_disaggregation(fleet, u, rng));
        }
        const Generator g = aggregate_generator(fleet);
        const auto& d = model.stages[t];
        double avg = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j) avg += d.probs()[j] * stage_value(table, t, g, d.support()[j]);
        ASSERT_LE(rel_err(avg, expected_value(table, t, g)), 1e-9);
    }
}

TEST(StageValue, MinimizesOverActionInterval) {
    Rng rng(61);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 2 + rng.index(5);
        const auto table = compute_weights(random_model(rng, T, 4));
        const Generator g = aggregate_generator(random_fleet(rng, 1 + rng.index(4), T));
        const auto f = pwa(table, 0, g);
        const double c = rng.uniform(-30.0, 110.0);
        const double v = stage_value(table, 0, g, c);
        double best = kInf;
        for (double b : f.breakpoints()) best = std::min(best, c * b + f(b));
        ASSERT_LE(rel_err(v, best), 1e-9);
        for (int k = 0; k < 20; ++k) {
            const double u = rng.uniform(g.front(), g.back());
            ASSERT_GE(c * u + f(u), v - 1e-9 * (1.0 + std::abs(v)));
        }
    }
}

TEST(Pwa, HandInstance) {
    const auto w = compute_weights(hand_model());
    const auto f = pwa(w, 0, Generator({0, 1}));
    ASSERT_EQ(f.pieces(), 1u);
    EXPECT_DOUBLE_EQ(f.intercepts()[0], 2.0);
    EXPECT_DOUBLE_EQ(f.slopes()[0], -2.0);
    EXPECT_THROW(pwa(w, 1, Generator({1})), Error);
}

TEST(Pwa, ZeroWidthPieceKeepsContinuity) {
    const auto w = compute_weights({{StageDistribution::uniform({1.0, 5.0}), StageDistribution::uniform({0.0, 4.0}),
                                     StageDistribution::uniform({2.0, 3.0})}});
    const auto f = pwa(w, 0, Generator({0, 2, 2}));
    ASSERT_EQ(f.pieces(), 2u);
    EXPECT_TRUE(f.zero_width(1));
    EXPECT_FALSE(f.zero_width(0));
}

TEST(Pwa, AgreesWithTransitionAndIsConvex) {
    Rng rng(63);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 2 + rng.index(7);
        const auto table = compute_weights(random_model(rng, T, 5));
        const Generator g = aggregate_generator(random_fleet(rng, 1 + rng.index(5), T));
        const auto f = pwa(table, 0, g);  // constructor enforces continuity and convexity
        for (int k = 0; k < 100; ++k) {
            const double u = k < 3 ? g[rng.index(g.size())] : rng.uniform(g.front(), g.back());
            const double expect = expected_value(table, 1, transition(g, u));
            ASSERT_NEAR(f(u), expect, 1e-9 * (1.0 + std::abs(expect)));
        }
    }
}

TEST(Solve, HandInstanceAndZeroFleet) {
    const auto r = solve(hand_fleet(), hand_model());
    EXPECT_DOUBLE_EQ(r.expected_cost, 1.5);
    ASSERT_TRUE(r.first_stage_pwa.has_value());
    EXPECT_EQ(solve(FleetState({{"z", 2.0, 0.0}}, 2), hand_model()).expected_cost, 0.0);
    EXPECT_THROW(solve(FleetState({{"z", 2.0, 0.0}}, 3), hand_model()), Error);
}

TEST(Solve, MatchesScenarioTree) {
    Rng rng(65);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t T = 2 + rng.index(3);
        const PriceModel model = random_model(rng, T, 4);
        const FleetState fleet = random_fleet(rng, 1 + rng.index(3), T);
        const double exact = solve(fleet, model).expected_cost;
        const double tree = oracle::scenario_tree_value(fleet, model).value;
        ASSERT_LE(std::abs(exact - tree), 1e-6 * (1.0 + std::abs(tree))) << "trial " << trial;
    }
}

TEST(Simulate, PointMassPricesAreDeterministic) {
    const PriceModel model{{StageDistribution::point_mass(4.0), StageDistribution::point_mass(-1.0),
                            StageDistribution::point_mass(2.0)}};
    const FleetState fleet({{"a", 2.0, 3.0}, {"b", 1.0, 2.5}}, 3);
    const auto sim = simulate(fleet, model, 50, 9);
    EXPECT_NEAR(sim.mean, solve(fleet, model).expected_cost, 1e-12);
    EXPECT_EQ(sim.std_error, 0.0);
}

TEST(Simulate, HandInstanceWithinThreeStdErrors) {
    const auto sim = simulate(hand_fleet(), hand_model(), 100000, 1);
    EXPECT_GT(sim.std_error, 0.0);
    EXPECT_LE(std::abs(sim.mean - 1.5), 3 * sim.std_error);
}

TEST(Simulate, StdErrorScalesWithPaths) {
    Rng rng(67);
    const PriceModel model = random_model(rng, 4, 4);
    const FleetState fleet = random_fleet(rng, 3, 4);
    const auto a = simulate(fleet, model, 1000, 2);
    const auto b = simulate(fleet, model, 4000, 3);
    EXPECT_NEAR(a.std_error / b.std_error, 2.0, 0.4);
}

TEST(Simulate, RandomInstancesWithinThreeStdErrors) {
    Rng rng(69);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t T = 2 + rng.index(5);
        const PriceModel model = random_model(rng, T, 5);
        const FleetState fleet = random_fleet(rng, 1 + rng.index(6), T);
        const auto sim = simulate(fleet, model, 10000, 100 + static_cast<std::uint64_t>(trial));
        const double exact = solve(fleet, model).expected_cost;
        EXPECT_LE(std::abs(sim.mean - exact), 3 * sim.std_error + 1e-9) << "trial " << trial;
    }
}

TEST(Simulate, SameSeedSameResult) {
    const auto a = simulate(hand_fleet(), hand_model(), 1000, 5);
    const auto b = simulate(hand_fleet(), hand_model(), 1000, 5);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(PriceResponse, HandInstance) {
    const std::vector<double> grid{1.0, 3.0};
    const auto r = price_response(hand_fleet(), hand_model(), grid);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].price, 1.0);
    EXPECT_EQ(r[0].power, 1.0);
    EXPECT_EQ(r[1].price, 3.0);
    EXPECT_EQ(r[1].power, 0.0);
    EXPECT_THROW(price_response(hand_fleet(), hand_model(), std::vector<double>{}), Error);
}

TEST(PriceResponse, SaturatesAtAggregateBounds) {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 2 + rng.index(6);
        const PriceModel model = random_model(rng, T, 4);
        const FleetState fleet = random_fleet(rng, 1 + rng.index(10), T);
        const Generator g = aggregate_generator(fleet);
        std::vector<double> grid;
        for (double c = -100.0; c <= 200.0; c += 3.0) grid.push_back(c);
        const auto r = price_response(fleet, model, grid);
        EXPECT_EQ(r.front().power, g.back());
        EXPECT_EQ(r.back().power, g.front());
        for (std::size_t i = 0; i + 1 < r.size(); ++i) EXPECT_GE(r[i].power, r[i + 1].power);
    }
}
