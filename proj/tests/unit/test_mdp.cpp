#include "doctest.h"

#include <random>

#include "rlchain/mdp.hpp"
#include "rlchain/mdp_library.hpp"

using namespace rlchain;

namespace {

FunctionPoint v(std::initializer_list<double> xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return FunctionPoint::state_values(out);
}

FunctionPoint q(std::initializer_list<double> xs) { return FunctionPoint::action_values(v(xs).values); }

Policy det(std::vector<int> actions, int n_actions) { return Policy::deterministic(std::move(actions), n_actions); }

bool mentions(const std::vector<Violation>& report, const std::string& text) {
    for (const auto& item : report)
        if (item.message.find(text) != std::string::npos) return true;
    return false;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = u(rng);
    return out;
}

}  // namespace

TEST_CASE("validate_mdp") {
    CHECK(validate_mdp(builtin_mdp("M1")).empty());
    for (const auto& name : builtin_names()) CHECK(validate_mdp(builtin_mdp(name)).empty());

    FiniteMdp short_row(1, 1, 0.5, 1.0, {DiscreteDistribution::dirac(1.0)}, Eigen::MatrixXd::Constant(1, 1, 0.9));
    auto report = validate_mdp(short_row);
    REQUIRE(report.size() == 1);
    CHECK(report[0].state == 0);
    CHECK(report[0].action == 0);
    CHECK(report[0].message == "row sum 0.9 != 1 at (0,0)");

    FiniteMdp big_reward(1, 1, 0.5, 1.0, {DiscreteDistribution::dirac(2.0)}, Eigen::MatrixXd::Ones(1, 1));
    CHECK(mentions(validate_mdp(big_reward), "reward atom 2 > rmax"));

    FiniteMdp bad_gamma(1, 1, 1.0, 1.0, {DiscreteDistribution::dirac(1.0)}, Eigen::MatrixXd::Ones(1, 1));
    CHECK(mentions(validate_mdp(bad_gamma), "gamma"));

    FiniteMdp bad_law(1, 1, 0.5, 1.0, {DiscreteDistribution({{0.0, 0.5}, {1.0, 0.4}})}, Eigen::MatrixXd::Ones(1, 1));
    CHECK(mentions(validate_mdp(bad_law), "reward probabilities sum"));
}

TEST_CASE("bellman backups") {
    const auto m1 = builtin_mdp("M1");
    const auto m2 = builtin_mdp("M2");
    const auto m4 = builtin_mdp("M4");
    const auto m6 = builtin_mdp("M6");
    const auto only = Policy::uniform(1, 1);

    CHECK(bellman_policy_backup(m1, only, v({0})).values(0) == doctest::Approx(1.0));
    CHECK(bellman_policy_backup(m1, only, v({2})).values(0) == doctest::Approx(2.0));
    CHECK(bellman_policy_backup(m2, only, v({4})).values(0) == doctest::Approx(3.0));

    const auto t4 = bellman_optimality_backup(m4, v({0, 0}));
    CHECK(t4.values(0) == 1.0);
    CHECK(t4.values(1) == 0.0);
    CHECK(bellman_optimality_backup(m1, v({2})).values(0) == doctest::Approx(2.0));
    const auto t6 = bellman_optimality_backup(m6, q({2, 2}));
    CHECK(t6.values(0) == doctest::Approx(2.0));
    CHECK(t6.values(1) == doctest::Approx(2.0));

    CHECK_THROWS_AS(bellman_policy_backup(m1, only, v({0, 1})), std::invalid_argument);
    CHECK_THROWS_AS(bellman_policy_backup(m1, only, v({std::nan("")})), std::invalid_argument);
}

TEST_CASE("exact policy values") {
    CHECK(exact_policy_values(builtin_mdp("M1"), Policy::uniform(1, 1)).v.values(0) == doctest::Approx(2.0));
    CHECK(exact_policy_values(builtin_mdp("M2"), Policy::uniform(1, 1)).v.values(0) == doctest::Approx(2.0));

    const auto m4 = builtin_mdp("M4");
    const auto values = exact_policy_values(m4, det({0, 0}, 2));
    CHECK(values.v.values(0) == doctest::Approx(1.0));
    CHECK(values.v.values(1) == doctest::Approx(0.0));
    CHECK(values.q.values(0) == doctest::Approx(1.0));
    CHECK(values.q.values(1) == doctest::Approx(0.0));

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto mdp = random_mdp(4, 3, 0.9, seed);
        const auto pi = Policy::uniform(4, 3);
        const auto pv = exact_policy_values(mdp, pi);
        CHECK(max_abs(bellman_policy_backup(mdp, pi, pv.v).values - pv.v.values) <= 1e-10);
        CHECK(max_abs(bellman_policy_backup(mdp, pi, pv.q).values - pv.q.values) <= 1e-9);
    }
}

TEST_CASE("greedy policy") {
    CHECK(greedy_policy(q({1, 0}), 2).action(0) == 0);
    CHECK(greedy_policy(q({1, 1}), 2).action(0) == 0);
    const auto pi = greedy_policy(q({0, 2, 5, 5}), 2);
    CHECK(pi.actions() == std::vector<int>{1, 0});
    CHECK_THROWS(greedy_policy(q({0, std::nan("")}), 2));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto values = random_vector(rng, 12, 3.0);
        const auto base = greedy_policy(FunctionPoint::action_values(values), 4);
        CHECK(greedy_policy(FunctionPoint::action_values(values.array() + 17.0), 4) == base);
        CHECK(greedy_policy(FunctionPoint::action_values(values * 2.5), 4) == base);
    }
}

TEST_CASE("policy iteration") {
    const auto m4 = builtin_mdp("M4");
    const auto path = policy_iteration(m4, det({1, 0}, 2));
    REQUIRE(path.size() == 2);
    CHECK(path.back().policy.action(0) == 0);

    CHECK(policy_iteration(builtin_mdp("M1"), det({0}, 1)).size() == 1);

    const auto m6 = builtin_mdp("M6");
    for (int start = 0; start < 2; ++start) {
        const auto final_q = policy_iteration(m6, det({start}, 2)).back().q;
        CHECK(final_q.values(0) == doctest::Approx(2.0));
        CHECK(final_q.values(1) == doctest::Approx(2.0));
    }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto mdp = random_mdp(5, 3, 0.9, seed);
        const auto steps = policy_iteration(mdp, det({2, 2, 2, 2, 2}, 3));
        CHECK(steps.size() <= 243);
        for (std::size_t k = 1; k < steps.size(); ++k)
            CHECK((steps[k].q.values - steps[k - 1].q.values).minCoeff() >= -1e-10);
        const auto& qstar = steps.back().q;
        CHECK(max_abs(bellman_optimality_backup(mdp, qstar).values - qstar.values) <= 1e-8);
        CHECK(optimal_policy(mdp).policy == steps.back().policy);
    }
}

TEST_CASE("policy transition matrices") {
    CHECK(policy_transition_matrix(builtin_mdp("M1"), Policy::uniform(1, 1))(0, 0) == 1.0);
    const auto p4 = policy_transition_matrix(builtin_mdp("M4"), det({0, 0}, 2));
    Eigen::MatrixXd expected(2, 2);
    expected << 0, 1, 0, 1;
    CHECK(p4 == expected);

    Eigen::MatrixXd sym(2, 2);
    sym << 0.7, 0.3, 0.3, 0.7;
    FiniteMdp chain(2, 1, 0.5, 1.0, {DiscreteDistribution::dirac(0.0), DiscreteDistribution::dirac(1.0)}, sym);
    CHECK(policy_transition_matrix(chain, Policy::uniform(2, 1)) == sym);

    const auto mdp = random_mdp(4, 3, 0.8, 11);
    const auto pi = Policy::uniform(4, 3);
    CHECK((policy_transition_matrix(mdp, pi).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK((policy_transition_matrix_sa(mdp, pi).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("bellman operators contract in sup norm") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto mdp = random_mdp(4, 3, 0.9, static_cast<std::uint64_t>(trial % 10));
        const auto pi = Policy::uniform(4, 3);
        const auto f = FunctionPoint::state_values(random_vector(rng, 4, 10.0));
        const auto g = FunctionPoint::state_values(random_vector(rng, 4, 10.0));
        const double gap = max_abs(f.values - g.values);
        CHECK(max_abs(bellman_policy_backup(mdp, pi, f).values - bellman_policy_backup(mdp, pi, g).values) <=
              mdp.gamma() * gap + 1e-12);
        const auto fq = FunctionPoint::action_values(random_vector(rng, 12, 10.0));
        const auto gq = FunctionPoint::action_values(random_vector(rng, 12, 10.0));
        CHECK(max_abs(bellman_optimality_backup(mdp, fq).values - bellman_optimality_backup(mdp, gq).values) <=
              mdp.gamma() * max_abs(fq.values - gq.values) + 1e-12);
    }
}

TEST_CASE("sampling follows the declared laws") {
    const DiscreteDistribution law({{0.0, 0.25}, {5.0, 0.0}, {2.0, 0.75}});
    CHECK(law.sample(0.0) == 0.0);
    CHECK(law.sample(0.2499) == 0.0);
    CHECK(law.sample(0.25) == 2.0);
    CHECK(law.sample(0.999999) == 2.0);
    CHECK(law.mean() == doctest::Approx(1.5));
    CHECK(law.variance() == doctest::Approx(0.75));

    const auto pi = Policy::stochastic((Eigen::MatrixXd(1, 3) << 0.2, 0.0, 0.8).finished());
    CHECK(pi.sample_action(0, 0.1) == 0);
    CHECK(pi.sample_action(0, 0.2) == 2);
    CHECK_THROWS(Policy::stochastic((Eigen::MatrixXd(1, 2) << 0.2, 0.7).finished()));
    CHECK_THROWS(Policy::deterministic({2}, 2));
}
