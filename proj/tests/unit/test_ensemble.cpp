#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rlchain/ensemble.hpp"
#include "rlchain/mdp_library.hpp"
#include "rlchain/parallel.hpp"
#include "rlchain/transport.hpp"

using namespace rlchain;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return out;
}

const Policy kOnly = Policy::uniform(1, 1);

double mean_of(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()); }

double se_of(const std::vector<double>& xs) {
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

std::vector<AlgorithmSpec> table_one(const FiniteMdp& mdp, double alpha) {
    const auto pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
    return {AlgorithmSpec::monte_carlo(alpha, pi), AlgorithmSpec::td_lambda(alpha, 0.5, pi), AlgorithmSpec::sarsa(alpha, 0.1, pi),
            AlgorithmSpec::expected_sarsa(alpha, 0.1, pi), AlgorithmSpec::q_learning(alpha), AlgorithmSpec::double_q_learning(alpha, 0.5),
            AlgorithmSpec::td0(alpha, pi)};
}

}  // namespace

TEST_CASE("init_ensemble") {
    const auto m1 = builtin_mdp("M1");
    const auto td = AlgorithmSpec::td0(0.5, kOnly);
    const auto e = init_ensemble(Initializer::at(vec({0})), 3, td, m1, 1);
    CHECK(e.size() == 3);
    CHECK(e.particles() == RowMatrix::Zero(3, 1));
    CHECK(e.step_index() == 0);

    const auto mdp = random_mdp(3, 2, 0.9, 1);
    const auto box = init_ensemble(Initializer::uniform_box(0, 2), 10000, AlgorithmSpec::td0(0.5, Policy::uniform(3, 2)), mdp, 4);
    CHECK(((box.mean().array() - 1.0).abs() <= 4.0 * box.standard_error().array()).all());
    CHECK(box.particles().minCoeff() >= 0.0);
    CHECK(box.particles().maxCoeff() < 2.0);

    const auto real = init_ensemble(Initializer::realizable_uniform(), 500, td, m1, 2);
    CHECK(real.particles().minCoeff() >= 0.0);
    CHECK(real.particles().maxCoeff() <= 2.0);

    CHECK(init_ensemble(Initializer::realizable_uniform(), 50, td, m1, 9).particles() ==
          init_ensemble(Initializer::realizable_uniform(), 50, td, m1, 9).particles());
    CHECK_THROWS(init_ensemble(Initializer::at(vec({0})), 0, td, m1, 1));
    CHECK_THROWS(init_ensemble(Initializer::uniform_box(2, 1), 5, td, m1, 1));
    CHECK_THROWS(init_ensemble(Initializer::at(vec({0, 1})), 5, td, m1, 1));
}

TEST_CASE("step_ensemble examples") {
    const auto td = AlgorithmSpec::td0(0.5, kOnly);
    const auto m1 = builtin_mdp("M1");
    const auto m3 = builtin_mdp("M3");
    const auto s1 = step_ensemble(init_ensemble(Initializer::at(vec({0})), 4, td, m1, 1), m1);
    CHECK(s1.step_index() == 1);
    CHECK((s1.particles().array() == 0.5).all());
    CHECK((step_ensemble(init_ensemble(Initializer::at(vec({8})), 4, td, m3, 1), m3).particles().array() == 6.0).all());

    // Fixed points stay put for every algorithm on deterministic MDPs.
    CHECK((step_ensemble(init_ensemble(Initializer::at(vec({2})), 4, td, m1, 1), m1).particles().array() == 2.0).all());
    const auto m4 = builtin_mdp("M4");
    const auto qstar = optimal_policy(m4).q.values;
    CHECK((step_ensemble(init_ensemble(Initializer::at(qstar), 3, AlgorithmSpec::q_learning(0.3), m4, 1), m4).particles().rowwise() -
           qstar.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd both(8);
    both << qstar, qstar;
    CHECK((step_ensemble(init_ensemble(Initializer::at(both), 3, AlgorithmSpec::double_q_learning(0.3, 0.5), m4, 1), m4)
               .particles()
               .rowwise() -
           both.transpose())
              .cwiseAbs()
              .maxCoeff() == 0.0);

    CHECK_THROWS(step_ensemble(init_ensemble(Initializer::at(vec({0, 0, 0, 0})), 2, AlgorithmSpec::opi(0.5), m4, 1), m4));
}

TEST_CASE("run_chain") {
    const auto td = AlgorithmSpec::td0(0.5, kOnly);
    const auto m3 = builtin_mdp("M3");
    const auto start = init_ensemble(Initializer::at(vec({8})), 2, td, m3, 1);
    const auto none = run_chain(start, m3, 0, 1);
    REQUIRE(none.size() == 1);
    CHECK(none[0].particles() == start.particles());

    const auto two = run_chain(start, m3, 2, 1);
    REQUIRE(two.size() == 3);
    CHECK(two.back().step_index() == 2);
    CHECK((two.back().particles().array() == 4.5).all());

    const auto m1 = builtin_mdp("M1");
    const auto far = run_chain(init_ensemble(Initializer::uniform_box(-50, 50), 20, td, m1, 3), m1, 200, 64);
    CHECK(far.size() == 5);
    CHECK(far.back().step_index() == 200);
    CHECK((far.back().particles().array() - 2.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("coupled_step examples") {
    const auto td = AlgorithmSpec::td0(0.5, kOnly);
    const auto m1 = builtin_mdp("M1");
    CoupledEnsemble c(init_ensemble(Initializer::at(vec({0})), 1, td, m1, 1), init_ensemble(Initializer::at(vec({4})), 1, td, m1, 1),
                      Coupling::IdenticalSamples);
    const auto next = coupled_step(c, m1);
    CHECK(next.left.particles()(0, 0) == 0.5);
    CHECK(next.right.particles()(0, 0) == 3.5);
    CHECK(coupled_distance(next) == doctest::Approx(0.75 * coupled_distance(c)));

    const auto mdp = random_mdp(4, 3, 0.9, 2);
    for (const auto& spec : table_one(mdp, 0.5)) {
        auto e = init_ensemble(Initializer::realizable_uniform(), 30, spec, mdp, 5);
        CoupledEnsemble same(e, e, Coupling::IdenticalSamples);
        advance_coupled(same, mdp, 10);
        CHECK(same.left.particles() == same.right.particles());
    }

    const auto m4 = builtin_mdp("M4");
    const auto ql = AlgorithmSpec::q_learning(0.4);
    CoupledEnsemble q(init_ensemble(Initializer::at(Eigen::VectorXd::Zero(4)), 1, ql, m4, 1),
                      init_ensemble(Initializer::at(optimal_policy(m4).q.values), 1, ql, m4, 1), Coupling::IdenticalSamples);
    CHECK(coupled_distance(coupled_step(q, m4)) <= contraction_factor(ql, 0.5) * coupled_distance(q) + 1e-15);

    CHECK_THROWS(CoupledEnsemble(init_ensemble(Initializer::at(vec({0})), 2, td, m1, 1), init_ensemble(Initializer::at(vec({0})), 3, td, m1, 1),
                                 Coupling::IdenticalSamples));
    CHECK_THROWS(CoupledEnsemble(init_ensemble(Initializer::at(vec({0})), 2, td, m1, 1), init_ensemble(Initializer::at(vec({0})), 2, td, m1, 1),
                                 Coupling::Independent));
}

TEST_CASE("independent coupling draws differently") {
    const auto m2 = builtin_mdp("M2");
    const auto td = AlgorithmSpec::td0(0.5, kOnly);
    CoupledEnsemble c(init_ensemble(Initializer::at(vec({0})), 200, td, m2, 1), init_ensemble(Initializer::at(vec({0})), 200, td, m2, 2),
                      Coupling::Independent);
    const auto next = coupled_step(c, m2);
    CHECK(coupled_distance(next) > 0.0);
    CHECK(next.left.particles() == step_ensemble(c.left, m2).particles());
    CHECK(next.right.particles() == step_ensemble(c.right, m2).particles());
}

TEST_CASE("coupled gap contracts by the table factor") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto mdp = random_mdp(5, 3, 0.9, 100 + seed);
        for (double alpha : {0.1, 0.5, 1.0})
            for (const auto& spec : table_one(mdp, alpha)) {
                CAPTURE(to_string(spec.algorithm));
                CAPTURE(alpha);
                CoupledEnsemble c(init_ensemble(Initializer::realizable_uniform(), 300, spec, mdp, seed),
                                  init_ensemble(Initializer::realizable_uniform(), 300, spec, mdp, seed + 1000),
                                  Coupling::IdenticalSamples);
                const double rho = contraction_factor(spec, mdp.gamma());
                for (int step = 0; step < 3; ++step) {
                    const double before = coupled_distance(c);
                    advance_coupled(c, mdp, 1);
                    if (before == 0.0) break;
                    const auto gaps = pair_gaps(c);
                    CHECK(mean_of(gaps) <= rho * before + 5.0 * se_of(gaps));
                }
            }
    }
}

TEST_CASE("coupled gap decays over 100 steps") {
    const auto mdp = random_mdp(5, 3, 0.9, 7);
    const auto spec = AlgorithmSpec::td0(0.2, Policy::uniform(5, 3));
    const double rho = contraction_factor(spec, mdp.gamma());
    CoupledEnsemble c(init_ensemble(Initializer::realizable_uniform(), 200, spec, mdp, 1),
                      init_ensemble(Initializer::realizable_uniform(), 200, spec, mdp, 2), Coupling::IdenticalSamples);
    for (int step = 0; step < 100; ++step) {
        const double before = coupled_distance(c);
        advance_coupled(c, mdp, 1);
        const auto gaps = pair_gaps(c);
        CHECK(mean_of(gaps) / before <= rho + 5.0 * se_of(gaps) / before);
    }
}

TEST_CASE("burn-in") {
    const auto m1 = builtin_mdp("M1");
    const auto td1 = AlgorithmSpec::td0(0.5, kOnly);
    const auto b1 = burn_in_stationary(td1, m1, 50, 1, 1e-8);
    CHECK(b1.n_steps == burn_in_steps(0.75, 2.0, 1e-8));
    CHECK((b1.ensemble.particles().array() - 2.0).abs().maxCoeff() <= 1e-8);

    CHECK(burn_in_steps(0.5, 1.0, 0.25) == 2);
    CHECK(burn_in_steps(0.0, 1.0, 1e-3) == 1);
    CHECK(burn_in_steps(0.9, 1e-4, 1e-3) == 0);
    CHECK_THROWS(burn_in_steps(1.0, 1.0, 1e-3));
    CHECK_THROWS(burn_in_stationary(AlgorithmSpec::opi(0.5), builtin_mdp("M4"), 10, 1, 1e-3));

    const auto m2 = builtin_mdp("M2");
    const auto td = burn_in_stationary(AlgorithmSpec::td0(0.1, kOnly), m2, 100000, 3, 1e-6).ensemble;
    CHECK(std::abs(td.mean()(0) - 2.0) <= 4.0 * td.standard_error()(0));

    // Var = alpha Var(G) / (2 - alpha) with Var(G) = 4/3.
    const auto mc = burn_in_stationary(AlgorithmSpec::monte_carlo(0.1, kOnly), m2, 100000, 4, 1e-6).ensemble;
    CHECK(std::abs(mc.covariance()(0, 0) / (0.1 * (4.0 / 3.0) / 1.9) - 1.0) <= 0.1);
}

TEST_CASE("replay from a snapshot is bit exact") {
    const auto mdp = random_mdp(4, 2, 0.8, 3);
    for (const auto& spec : table_one(mdp, 0.3)) {
        const auto start = init_ensemble(Initializer::realizable_uniform(), 40, spec, mdp, 11);
        const auto snaps = run_chain(start, mdp, 10, 5);
        REQUIRE(snaps.size() == 3);
        ParticleEnsemble replay = snaps[1];
        advance_ensemble(replay, mdp, 5);
        CHECK(replay.particles() == snaps[2].particles());
        CHECK(replay.step_index() == 10);
    }
}

TEST_CASE("permutation equivariance and worker independence") {
    const auto mdp = random_mdp(4, 3, 0.9, 8);
    for (const auto& spec : table_one(mdp, 0.4)) {
        const auto e = init_ensemble(Initializer::realizable_uniform(), 25, spec, mdp, 21);
        std::vector<Eigen::Index> perm(25);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
        CHECK(step_ensemble(e.permuted(perm), mdp).particles() == step_ensemble(e, mdp).permuted(perm).particles());

        const auto serial = run_chain(e, mdp, 3, 3).back();
        set_worker_count(3);
        const auto threaded = run_chain(e, mdp, 3, 3).back();
        set_worker_count(1);
        CHECK(serial.particles() == threaded.particles());
    }
    CHECK_THROWS(set_worker_count(0));
}
