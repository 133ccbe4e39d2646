#include "evflex/oracle.hpp"
#include "evflex/recourse.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace evflex;
using evflex::testing::random_fleet;
using evflex::testing::random_model;

TEST(ScenarioTree, ProbabilitiesAreConsistent) {
    Rng rng(111);
    const auto tree = oracle::ScenarioTree::build(random_model(rng, 3, 4));
    EXPECT_EQ(tree.nodes[0].prob, 1.0);
    for (const auto& node : tree.nodes) {
        if (node.children.empty()) continue;
        double p = 0.0;
        for (std::size_t c : node.children) p += tree.nodes[c].prob;
        EXPECT_NEAR(p, node.prob, 1e-12);
    }
}

TEST(ScenarioTree, RefusesLargeTrees) {
    PriceModel model;
    for (int t = 0; t < 7; ++t) model.stages.push_back(StageDistribution::uniform({1, 2, 3, 4}));
    try {
        oracle::ScenarioTree::build(model);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InstanceTooLarge);
    }
}

TEST(ScenarioTreeValue, HandInstance) {
    const PriceModel model{{StageDistribution::uniform({1.0, 3.0}), StageDistribution::uniform({1.0, 3.0})}};
    const auto v = oracle::scenario_tree_value(FleetState({{"ev", 1.0, 1.0}}, 2), model);
    EXPECT_NEAR(v.value, 1.5, 1e-12);
    ASSERT_EQ(v.first_stage_prices, (std::vector<double>{1.0, 3.0}));
    EXPECT_NEAR(v.first_stage_actions[0][0], 1.0, 1e-12);
    EXPECT_NEAR(v.first_stage_actions[1][0], 0.0, 1e-12);
}

TEST(ScenarioTreeValue, PointMassIsDeterministicLp) {
    const PriceModel model{{StageDistribution::point_mass(4.0), StageDistribution::point_mass(1.0),
                            StageDistribution::point_mass(2.0)}};
    // cheapest stage first, then the next cheapest
    const auto v = oracle::scenario_tree_value(FleetState({{"a", 1.0, 2.5}}, 3), model);
    EXPECT_NEAR(v.value, 1.0 * 1.0 + 1.0 * 2.0 + 0.5 * 4.0, 1e-12);
}

TEST(ScenarioTreeValue, RejectsHorizonMismatch) {
    const PriceModel model{{StageDistribution::point_mass(1.0), StageDistribution::point_mass(1.0)}};
    EXPECT_THROW(oracle::scenario_tree_value(FleetState({{"a", 1.0, 2.0}}, 3), model), Error);
}

TEST(ScenarioTreeValue, InvariantUnderRelabeling) {
    Rng rng(113);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t T = 2 + rng.index(2);
        const PriceModel model = random_model(rng, T, 3);
        const FleetState fleet = random_fleet(rng, 3, T);
        auto specs = fleet.specs();
        std::reverse(specs.begin(), specs.end());
        const double a = oracle::scenario_tree_value(fleet, model).value;
        const double b = oracle::scenario_tree_value(FleetState(specs, T), model).value;
        EXPECT_NEAR(a, b, 1e-8 * (1.0 + std::abs(a)));
    }
}

TEST(ScenarioTreeValue, InvariantUnderDeviceSplit) {
    Rng rng(115);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t T = 2 + rng.index(2);
        const PriceModel model = random_model(rng, T, 3);
        const FleetState fleet = random_fleet(rng, 2, T);
        auto specs = fleet.specs();
        DeviceSpec half = specs[0];
        half.u_max /= 2;
        half.initial_demand /= 2;
        specs[0] = half;
        half.id += "b";
        specs.push_back(half);
        const FleetState split(specs, T);
        const double a = oracle::scenario_tree_value(fleet, model).value;
        const double b = oracle::scenario_tree_value(split, model).value;
        EXPECT_NEAR(a, b, 1e-8 * (1.0 + std::abs(a)));
    }
}

TEST(ScenarioTreeValue, MatchesExactSolve) {
    Rng rng(117);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t T = 2 + rng.index(3);
        const PriceModel model = random_model(rng, T, 4);
        const FleetState fleet = random_fleet(rng, 1 + rng.index(3), T);
        const double tree = oracle::scenario_tree_value(fleet, model).value;
        EXPECT_LE(std::abs(tree - solve(fleet, model).expected_cost), 1e-6 * (1.0 + std::abs(tree)));
    }
}

TEST(PermLpBruteforce, Examples) {
    EXPECT_DOUBLE_EQ(oracle::perm_lp_bruteforce(std::vector<double>{3, 1}, std::vector<double>{0, 2}), 2.0);
    EXPECT_DOUBLE_EQ(oracle::perm_lp_bruteforce(std::vector<double>{1, 3}, std::vector<double>{0, 2}), 2.0);
    EXPECT_THROW(oracle::perm_lp_bruteforce(std::vector<double>(9, 1.0), std::vector<double>(9, 1.0)), Error);
}

TEST(SupportFunction, Examples) {
    const Generator g({0, 1, 2, 5});
    EXPECT_DOUBLE_EQ(oracle::support_function(g, std::vector<double>{1, 1, 1, 1}), 8.0);
    EXPECT_DOUBLE_EQ(oracle::support_function(Generator({0, 2}), std::vector<double>{1, 0}), 2.0);
    EXPECT_THROW(oracle::support_function(g, std::vector<double>{1}), Error);
}

TEST(SupportFunction, MatchesVertexMaximum) {
    Rng rng(119);
    for (int trial = 0; trial < 1000; ++trial) {
        const Generator g = evflex::testing::random_generator(rng, 1 + rng.index(6));
        std::vector<double> d(g.size());
        for (auto& x : d) x = rng.uniform(-1.0, 1.0);
        double best = -kInf;
        for (const auto& v : oracle::enumerate_vertices(g)) {
            double s = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * v[i];
            best = std::max(best, s);
        }
        ASSERT_NEAR(oracle::support_function(g, d), best, 1e-9);
    }
}

TEST(RandomFeasibleDisaggregation, Examples) {
    Rng rng(121);
    const FleetState one({{"a", 2.0, 3.0}}, 3);
    EXPECT_NEAR(oracle::random_feasible_disaggregation(one, 0.7, rng)[0], 0.7, 1e-12);

    const FleetState fleet({{"a", 2.0, 5.0}, {"b", 1.0, 2.5}, {"c", 3.0, 0.0}}, 3);
    const auto gens = device_generators(fleet);
    double lo = 0.0;
    for (const auto& g : gens) lo += g.front();
    const auto a = oracle::random_feasible_disaggregation(fleet, lo, rng);
    for (std::size_t l = 0; l < a.size(); ++l) EXPECT_EQ(a[l], gens[l].front());
    EXPECT_THROW(oracle::random_feasible_disaggregation(fleet, lo - 1.0, rng), Error);
}

TEST(RandomFeasibleDisaggregation, FeasibleAndSumsToAction) {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 1 + rng.index(5);
        const FleetState fleet = random_fleet(rng, 1 + rng.index(6), T);
        const Generator agg = aggregate_generator(fleet);
        const auto gens = device_generators(fleet);
        for (int k = 0; k < 100; ++k) {
            const double u = rng.uniform(agg.front(), agg.back());
            const auto a = oracle::random_feasible_disaggregation(fleet, u, rng);
            double total = 0.0;
            for (std::size_t l = 0; l < a.size(); ++l) {
                ASSERT_GE(a[l], gens[l].front() - 1e-12);
                ASSERT_LE(a[l], gens[l].back() + 1e-12);
                total += a[l];
            }
            ASSERT_NEAR(total, u, 1e-9 * (1.0 + u));
        }
    }
}
