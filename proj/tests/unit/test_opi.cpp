#include "doctest.h"

#include <map>
#include <string>

#include "rlchain/mdp_library.hpp"
#include "rlchain/opi.hpp"
#include "rlchain/operators.hpp"

using namespace rlchain;

namespace {

Policy det(std::vector<int> actions, int n_actions) { return Policy::deterministic(std::move(actions), n_actions); }

FunctionPoint q(std::initializer_list<double> xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return FunctionPoint::action_values(out);
}

DiscreteDistribution coin(double lo, double hi) { return DiscreteDistribution({{lo, 0.5}, {hi, 0.5}}); }

// Decision state 0 with two arms into an absorbing zero-reward state 1.
FiniteMdp bandit(DiscreteDistribution arm0, DiscreteDistribution arm1, double rmax) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 2);
    p.col(1).setOnes();
    return FiniteMdp(2, 2, 0.5, rmax,
                     {std::move(arm0), std::move(arm1), DiscreteDistribution::dirac(0.0), DiscreteDistribution::dirac(0.0)},
                     p);
}

// Oracle for one-step bandits: the return of (s,a) is its reward, so the
// kernel row is the law of the greedy policy over the joint reward outcomes.
Eigen::MatrixXd bandit_kernel_oracle(const FiniteMdp& mdp) {
    const auto policies = enumerate_policies(mdp);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policies.size()));
    for (const auto& r0 : mdp.reward(0, 0).atoms())
        for (const auto& r1 : mdp.reward(0, 1).atoms()) {
            const auto g = greedy_policy(q({r0.value, r1.value, 0.0, 0.0}), 2);
            row(static_cast<Eigen::Index>(policy_index(g))) += r0.prob * r1.prob;
        }
    Eigen::MatrixXd k(row.size(), row.size());
    for (Eigen::Index i = 0; i < k.rows(); ++i) k.row(i) = row.transpose();
    return k;
}

}  // namespace

TEST_CASE("enumerate_policies") {
    CHECK(enumerate_policies(builtin_mdp("M1")).size() == 1);
    const auto pis = enumerate_policies(random_mdp(3, 2, 0.5, 1));
    REQUIRE(pis.size() == 8);
    for (std::size_t i = 0; i < pis.size(); ++i) {
        const int code = pis[i].action(0) * 4 + pis[i].action(1) * 2 + pis[i].action(2);
        CHECK(code == static_cast<int>(i));
        CHECK(policy_index(pis[i]) == i);
    }
    CHECK_THROWS(enumerate_policies(random_mdp(17, 2, 0.5, 1)));
}

TEST_CASE("opi_step examples") {
    const auto m4 = builtin_mdp("M4");
    const RngStream key(1, 0, 0);
    const auto step = opi_step(q({5, 0, 0, 0}), m4, 1.0, 8, key);
    CHECK(step.q.values(0) == 1.0);
    CHECK(step.q.values(1) == 0.0);
    CHECK(step.policy.action(0) == 0);

    const auto start = q({0.3, 0.7, 0.1, 0.2});
    CHECK(opi_step(start, builtin_mdp("M5"), 0.0, 8, key).q.values == start.values);

    const auto m5 = builtin_mdp("M5");
    int high = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto s = opi_step(q({0, 1, 0, 0}), m5, 1.0, 8, RngStream(2, 0, static_cast<std::uint64_t>(i)));
        CHECK(s.q.values(1) == 0.5);
        CHECK((s.q.values(0) == 0.0 || s.q.values(0) == 2.0));
        high += s.q.values(0) == 2.0;
        CHECK(s.policy.action(0) == (s.q.values(0) == 2.0 ? 0 : 1));
    }
    CHECK(std::abs(high / double(n) - 0.5) <= 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("exact kernels") {
    const auto m4 = builtin_mdp("M4");
    const auto k4 = exact_policy_kernel(m4, 4);
    const auto star4 = policy_index(det({0, 0}, 2));
    for (Eigen::Index i = 0; i < k4.k.rows(); ++i) CHECK(k4.k(i, static_cast<Eigen::Index>(star4)) == 1.0);

    const auto m5 = builtin_mdp("M5");
    const auto k5 = exact_policy_kernel(m5, 4);
    CHECK(k5.provenance == KernelProvenance::Exact);
    CHECK((k5.k - bandit_kernel_oracle(m5)).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < k5.k.rows(); ++i) CHECK(k5.k(i, 0) == 0.5);

    const auto tie = bandit(coin(0, 2), coin(0, 2), 2.0);
    const auto kt = exact_policy_kernel(tie, 4);
    CHECK((kt.k - bandit_kernel_oracle(tie)).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < kt.k.rows(); ++i) CHECK(kt.k(i, 0) == 0.75);

    CHECK(exact_policy_kernel(builtin_mdp("M3"), 4).k(0, 0) == 1.0);
    CHECK_THROWS_AS(exact_policy_kernel(builtin_mdp("M1"), 4), std::domain_error);
    CHECK_THROWS_AS(exact_policy_kernel(builtin_mdp("M2"), 4), std::domain_error);
    CHECK_THROWS(exact_policy_kernel(m5, 0));
}

TEST_CASE("exact return distribution on a two step episode") {
    // 0 -> 1 -> 2 (absorbing); rewards at 0 and 1 are coins.
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
    p(0, 1) = 1.0;
    p(1, 2) = 1.0;
    p(2, 2) = 1.0;
    const FiniteMdp chain(3, 1, 0.5, 2.0, {coin(0, 2), coin(0, 1), DiscreteDistribution::dirac(0.0)}, p);
    const auto atoms = exact_return_distribution(chain, det({0, 0, 0}, 1), 0, 0, 3);
    std::map<double, double> law;
    for (const auto& a : atoms) law[a.value] += a.prob;
    const std::map<double, double> expected{{0.0, 0.25}, {0.5, 0.25}, {2.0, 0.25}, {2.5, 0.25}};
    CHECK(law == expected);
    CHECK_THROWS_AS(exact_return_distribution(chain, det({0, 0, 0}, 1), 0, 0, 1), std::domain_error);
}

TEST_CASE("monte carlo kernels") {
    const auto k1 = estimate_policy_kernel(builtin_mdp("M1"), 100, 8, 1);
    CHECK(k1.k(0, 0) == 1.0);

    const auto m4 = builtin_mdp("M4");
    const auto k4 = estimate_policy_kernel(m4, 500, 8, 1);
    for (Eigen::Index i = 0; i < k4.k.rows(); ++i) CHECK(k4.k(i, 0) == 1.0);

    const auto m5 = builtin_mdp("M5");
    const auto k5 = estimate_policy_kernel(m5, 10000, 8, 2);
    const auto exact = exact_policy_kernel(m5, 8);
    CHECK(k5.provenance == KernelProvenance::MonteCarlo);
    for (Eigen::Index i = 0; i < k5.k.rows(); ++i) {
        CHECK(std::abs(k5.k.row(i).sum() - 1.0) <= k5.row_tolerance());
        for (Eigen::Index j = 0; j < k5.k.cols(); ++j) {
            CHECK(k5.k(i, j) >= 0.0);
            CHECK(std::abs(k5.k(i, j) - exact.k(i, j)) <= 4.0 * std::sqrt(exact.k(i, j) * (1 - exact.k(i, j)) / 1e4) + 1e-12);
            CHECK(k5.standard_error(i, j) == doctest::Approx(std::sqrt(k5.k(i, j) * (1 - k5.k(i, j)) / 1e4)));
        }
    }
    const auto again = estimate_policy_kernel(m5, 10000, 8, 2);
    CHECK(again.k == k5.k);
}

TEST_CASE("probabilistic improvement and reachability") {
    for (const char* name : {"M1", "M4", "M5"}) {
        const auto mdp = builtin_mdp(name);
        const auto kernel = std::string(name) == "M1" ? estimate_policy_kernel(mdp, 100, 8, 1) : exact_policy_kernel(mdp, 8);
        for (const auto& c : check_probabilistic_improvement(kernel, mdp)) CHECK(c.pass);
        for (const auto& r : check_reachability(kernel, mdp)) CHECK(r.pass);
    }
    const auto m5 = builtin_mdp("M5");
    const auto improvement = check_probabilistic_improvement(exact_policy_kernel(m5, 8), m5);
    for (const auto& c : improvement) {
        CHECK(c.improved == 0);
        CHECK(c.probability == 0.5);
    }

    const auto m4 = builtin_mdp("M4");
    const auto paths4 = check_reachability(exact_policy_kernel(m4, 8), m4);
    const auto arm1 = policy_index(det({1, 0}, 2));
    CHECK(paths4[arm1].length() == 1);
    CHECK(paths4[arm1].min_link == 1.0);
    const auto paths5 = check_reachability(exact_policy_kernel(m5, 8), m5);
    CHECK(paths5[arm1].length() == 1);
    CHECK(paths5[arm1].min_link == 0.5);
    const auto m1 = builtin_mdp("M1");
    CHECK(check_reachability(estimate_policy_kernel(m1, 100, 8, 1), m1)[0].length() == 0);

    // Monte Carlo links must clear 4 SE.
    for (const auto& c : check_probabilistic_improvement(estimate_policy_kernel(m5, 4000, 8, 3), m5)) CHECK(c.pass);
}

TEST_CASE("communicating classes") {
    Eigen::MatrixXd k(2, 2);
    k << 1, 0, 0.3, 0.7;
    const auto classes = communicating_classes(k);
    REQUIRE(classes.size() == 2);
    for (const auto& c : classes) {
        REQUIRE(c.members.size() == 1);
        CHECK(c.recurrent == (c.members[0] == 0));
    }

    Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(4, 4);
    cyc(0, 1) = cyc(1, 2) = cyc(2, 0) = 1.0;
    cyc(3, 0) = cyc(3, 3) = 0.5;
    const auto cc = communicating_classes(cyc);
    REQUIRE(cc.size() == 2);
    for (const auto& c : cc) CHECK(c.recurrent == (c.members.size() == 3));
}

TEST_CASE("policy chain stationary") {
    const auto m1 = builtin_mdp("M1");
    const auto r1 = policy_chain_stationary(estimate_policy_kernel(m1, 100, 8, 1), m1);
    CHECK(r1.phi1(0) == 1.0);
    CHECK(r1.identity_residual == 0.0);
    CHECK(r1.aperiodic_star);

    const auto m5 = builtin_mdp("M5");
    const auto r5 = policy_chain_stationary(exact_policy_kernel(m5, 8), m5);
    const auto arm1 = static_cast<Eigen::Index>(policy_index(det({1, 0}, 2)));
    CHECK(r5.star == 0);
    CHECK(r5.phi1(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r5.phi1(arm1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r5.phi1.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r5.phi1.minCoeff() >= 0.0);
    CHECK(r5.identity_residual <= 1e-12);
    CHECK(r5.aperiodic_star);

    // Two state chain: the second policy is transient.
    PolicyKernel two{enumerate_policies(m5), Eigen::MatrixXd::Zero(4, 4), KernelProvenance::Exact, 8, 0,
                     Eigen::MatrixXd::Zero(4, 4)};
    two.k(0, 0) = 1.0;
    two.k(arm1, 0) = 0.3;
    two.k(arm1, arm1) = 0.7;
    two.k(1, 0) = two.k(3, 0) = 1.0;
    const auto r2 = policy_chain_stationary(two, m5);
    CHECK(r2.phi1(0) == doctest::Approx(1.0));
    CHECK(r2.phi1(arm1) == 0.0);

    auto broken = two;
    broken.k(0, 0) = 0.9;
    CHECK_THROWS_AS(policy_chain_stationary(broken, m5), std::invalid_argument);
    auto stranded = two;
    stranded.k(0, 0) = 0.0;
    stranded.k(0, arm1) = 1.0;
    stranded.k(arm1, 0) = 0.0;
    stranded.k(arm1, arm1) = 1.0;
    CHECK_THROWS_AS(policy_chain_stationary(stranded, m5), std::runtime_error);
}

TEST_CASE("simulate_opi") {
    const auto m5 = builtin_mdp("M5");
    const Eigen::Index n = 20000;
    const auto sim = simulate_opi(m5, 1.0, 30, n, 8, 4);
    CHECK(sim.frequencies.rows() == 31);
    CHECK(sim.frequencies.cols() == 4);
    CHECK(sim.final_q.rows() == n);
    for (Eigen::Index t = 0; t < sim.frequencies.rows(); ++t)
        CHECK(sim.frequencies.row(t).sum() == doctest::Approx(1.0));
    const auto phi = policy_chain_stationary(exact_policy_kernel(m5, 8), m5).phi1;
    const double se = std::sqrt(0.25 / static_cast<double>(n));
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(sim.frequencies(30, j) - phi(j)) <= 4.0 * se + 1e-12);

    const auto m4 = builtin_mdp("M4");
    const auto sim4 = simulate_opi(m4, 1.0, 5, 500, 8, 5);
    CHECK(sim4.frequencies(5, 0) == 1.0);

    const auto half = simulate_opi(m5, 0.5, 10, 200, 8, 6);
    CHECK(half.frequencies.rows() == 11);
    CHECK(half.final_q.cols() == 4);

    const auto again = simulate_opi(m5, 0.5, 10, 200, 8, 6);
    CHECK(again.final_q == half.final_q);
}
