#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "rlchain/mdp_library.hpp"
#include "rlchain/transport.hpp"

using namespace rlchain;

namespace {

RowMatrix rows(std::initializer_list<std::initializer_list<double>> xs) {
    RowMatrix out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : xs) {
        Eigen::Index j = 0;
        for (double x : r) out(i, j++) = x;
        ++i;
    }
    return out;
}

FunctionPoint sv(std::initializer_list<double> xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return FunctionPoint::state_values(out);
}

RowMatrix random_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g;
    RowMatrix out(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) out(i, j) = g(rng);
    return out;
}

// Minimum over all permutations, by enumeration.
double brute_force(const Eigen::MatrixXd& cost) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (Eigen::Index i = 0; i < cost.rows(); ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(cost.rows());
}

}  // namespace

TEST_CASE("sup norm and product metric") {
    CHECK(sup_norm(sv({0, 0}), sv({1, 3})) == 3.0);
    CHECK(sup_norm(sv({1.5, -2}), sv({1.5, -2})) == 0.0);
    CHECK(sup_norm(sv({2}), sv({-1})) == 3.0);
    CHECK_THROWS(sup_norm(sv({2}), sv({1, 2})));

    auto q = [](double x) { return FunctionPoint::action_values(Eigen::VectorXd::Constant(1, x)); };
    CHECK(product_metric_d1({q(0), q(0)}, {q(1), q(3)}) == 4.0);
    CHECK(product_metric_d1({q(1), q(7)}, {q(1), q(7)}) == 0.0);
    CHECK(product_metric_d1({q(2), q(0)}, {q(2), q(5)}) == 5.0);
}

TEST_CASE("wasserstein examples") {
    const auto w = wasserstein_exact(rows({{0}, {2}}), rows({{1}, {3}}));
    CHECK(w.distance == 1.0);
    CHECK(w.matching == std::vector<Eigen::Index>{0, 1});

    std::mt19937_64 rng(1);
    const auto x = random_rows(rng, 20, 3);
    const auto same = wasserstein_exact(x, x);
    CHECK(same.distance == 0.0);
    std::vector<Eigen::Index> identity(20);
    std::iota(identity.begin(), identity.end(), Eigen::Index{0});
    CHECK(same.matching == identity);

    RowMatrix dx = RowMatrix::Zero(6, 2), dy = RowMatrix::Zero(6, 2);
    dx.col(0).setConstant(1.0);
    dy.col(1).setConstant(-2.5);
    CHECK(wasserstein_exact(dx, dy).distance == 2.5);

    CHECK_THROWS(wasserstein_exact(rows({{0}, {1}}), rows({{0}})));
    CHECK_THROWS(wasserstein_exact(RowMatrix::Zero(kMaxAssignmentSize + 1, 1), RowMatrix::Zero(kMaxAssignmentSize + 1, 1)));
}

TEST_CASE("assignment agrees with brute force") {
    std::mt19937_64 rng(2);
    for (Eigen::Index n = 1; n <= 7; ++n)
        for (int trial = 0; trial < 20; ++trial) {
            const auto x = random_rows(rng, n, 3);
            const auto y = random_rows(rng, n, 3);
            const auto w = wasserstein_exact(x, y);
            CHECK(std::abs(w.distance - brute_force(cost_matrix(x, y))) <= 1e-12);
            auto sorted = w.matching;
            std::sort(sorted.begin(), sorted.end());
            for (Eigen::Index i = 0; i < n; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
        }
    // Integer costs with many ties.
    std::uniform_int_distribution<int> small(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd c(6, 6);
        for (Eigen::Index i = 0; i < 6; ++i)
            for (Eigen::Index j = 0; j < 6; ++j) c(i, j) = small(rng);
        CHECK(solve_assignment(c).distance == brute_force(c));
    }
}

TEST_CASE("wasserstein metric properties") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = random_rows(rng, 16, 4);
        const auto y = random_rows(rng, 16, 4);
        const auto z = random_rows(rng, 16, 4);
        const double xy = wasserstein_exact(x, y).distance;
        CHECK(xy >= 0.0);
        CHECK(std::abs(xy - wasserstein_exact(y, x).distance) <= 1e-12);
        CHECK(xy <= wasserstein_exact(x, z).distance + wasserstein_exact(z, y).distance + 1e-12);

        RowMatrix shuffled = x;
        std::vector<Eigen::Index> perm(16);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < 16; ++i) shuffled.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        CHECK(wasserstein_exact(x, shuffled).distance <= 1e-12);

        const Eigen::RowVectorXd shift = random_rows(rng, 1, 4);
        const RowMatrix xs = x.rowwise() + shift;
        const RowMatrix ys = y.rowwise() + shift;
        CHECK(std::abs(wasserstein_exact(xs, ys).distance - xy) <= 1e-12);
        CHECK(std::abs(wasserstein_exact(RowMatrix(2.5 * x), RowMatrix(2.5 * y)).distance - 2.5 * xy) <= 1e-12);
    }
}

TEST_CASE("coupled distance") {
    const auto td = AlgorithmSpec::td0(0.5, Policy::uniform(1, 1));
    auto ens = [&](RowMatrix r) { return ParticleEnsemble(td, 1, std::move(r)); };
    CHECK(coupled_distance(CoupledEnsemble(ens(rows({{1}, {4}})), ens(rows({{1}, {4}})), Coupling::IdenticalSamples)) == 0.0);
    CHECK(coupled_distance(CoupledEnsemble(ens(rows({{0}})), ens(rows({{3}})), Coupling::IdenticalSamples)) == 3.0);
    const CoupledEnsemble slack(ens(rows({{0}, {2}})), ens(rows({{3}, {1}})), Coupling::IdenticalSamples);
    CHECK(coupled_distance(slack) == 2.0);
    CHECK(wasserstein_exact(slack.left, slack.right).distance == 1.0);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const CoupledEnsemble c(ens(random_rows(rng, 12, 1)), ens(random_rows(rng, 12, 1)), Coupling::IdenticalSamples);
        CHECK(wasserstein_exact(c.left, c.right).distance <= coupled_distance(c) + 1e-12);
    }

    // Double Q-learning pairs are compared with d1.
    const auto dql = AlgorithmSpec::double_q_learning(0.5, 0.5);
    RowMatrix a = RowMatrix::Zero(1, 8), b = RowMatrix::Zero(1, 8);
    b(0, 1) = 1.0;
    b(0, 6) = 3.0;
    const CoupledEnsemble d(ParticleEnsemble(dql, 1, a), ParticleEnsemble(dql, 1, b), Coupling::IdenticalSamples);
    CHECK(coupled_distance(d) == 4.0);
    CHECK(wasserstein_exact(d.left, d.right).distance == 4.0);
}

TEST_CASE("total variation on atoms") {
    CHECK(tv_distance_atoms(rows({{8}}), rows({{0}})) == 1.0);
    CHECK(tv_distance_atoms(rows({{1, 2}, {3, 4}}), rows({{3, 4}, {1, 2}})) == 0.0);
    CHECK(tv_distance_atoms(rows({{0}, {0}, {1}, {1}}), rows({{0}, {1}, {1}, {1}})) == doctest::Approx(0.25));
    CHECK(tv_distance_atoms(rows({{0}}), rows({{1e-12}})) == 0.0);
    CHECK(tv_distance_atoms(rows({{0}}), rows({{1e-12}}), 0.0) == 1.0);

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        RowMatrix x(10, 2), y(7, 2);
        for (Eigen::Index i = 0; i < 10; ++i) x.row(i) << pick(rng), pick(rng);
        for (Eigen::Index i = 0; i < 7; ++i) y.row(i) << pick(rng), pick(rng);
        const double tv = tv_distance_atoms(x, y);
        CHECK(tv >= 0.0);
        CHECK(tv <= 1.0);
        // Oracle: direct comparison of the atom frequencies on the 4x4 grid.
        double total = 0.0;
        for (int u = 0; u < 4; ++u)
            for (int v = 0; v < 4; ++v) {
                double px = 0, py = 0;
                for (Eigen::Index i = 0; i < 10; ++i) px += (x(i, 0) == u && x(i, 1) == v) / 10.0;
                for (Eigen::Index i = 0; i < 7; ++i) py += (y(i, 0) == u && y(i, 1) == v) / 7.0;
                total += std::abs(px - py);
            }
        CHECK(tv == doctest::Approx(0.5 * total).epsilon(1e-12));
    }
}
