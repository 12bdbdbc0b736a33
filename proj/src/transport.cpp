#include "rlchain/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rlchain {

namespace {

Eigen::Index split_for(const AlgorithmSpec& spec, Eigen::Index width) {
    return spec.algorithm == Algorithm::DoubleQLearning ? width / 2 : 0;
}

double sup_diff(const double* x, const double* y, Eigen::Index n) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) m = std::max(m, std::abs(x[k] - y[k]));
    return m;
}

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

double sup_norm(const FunctionPoint& f, const FunctionPoint& g) {
    if (f.kind != g.kind || f.size() != g.size()) throw std::invalid_argument("sup_norm: shape mismatch");
    return sup_diff(f.values.data(), g.values.data(), f.size());
}

double product_metric_d1(const ExtendedPoint& a, const ExtendedPoint& b) {
    return sup_norm(a.qa, b.qa) + sup_norm(a.qb, b.qb);
}

double ground_cost(const double* x, const double* y, Eigen::Index width, Eigen::Index split) {
    if (split <= 0) return sup_diff(x, y, width);
    return sup_diff(x, y, split) + sup_diff(x + split, y + split, width - split);
}

Eigen::MatrixXd cost_matrix(const RowMatrix& x, const RowMatrix& y, Eigen::Index split) {
    if (x.cols() != y.cols()) throw std::invalid_argument("cost_matrix: shape mismatch");
    Eigen::MatrixXd c(x.rows(), y.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < y.rows(); ++j) c(i, j) = ground_cost(x.row(i).data(), y.row(j).data(), x.cols(), split);
    return c;
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost matrix must be square");
    if (n == 0) return {0.0, {}};
    if (n > kMaxAssignmentSize)
        throw std::invalid_argument("solve_assignment: N=" + std::to_string(n) + " exceeds " + std::to_string(kMaxAssignmentSize));

    // Rows are added one at a time; each addition runs Dijkstra over columns on
    // reduced costs. Index 0 is a sentinel column.
    const double inf = std::numeric_limits<double>::infinity();
    const auto m = static_cast<std::size_t>(n);
    std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> row_of(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (std::size_t i = 1; i <= m; ++i) {
        row_of[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment out{0.0, std::vector<Eigen::Index>(m)};
    for (std::size_t j = 1; j <= m; ++j) out.matching[row_of[j] - 1] = static_cast<Eigen::Index>(j - 1);
    // Recomputed from the matching rather than the potentials to avoid drift.
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += cost(static_cast<Eigen::Index>(i), out.matching[i]);
    out.distance = total / static_cast<double>(n);
    return out;
}

Assignment wasserstein_exact(const RowMatrix& x, const RowMatrix& y, Eigen::Index split) {
    if (x.rows() != y.rows()) throw std::invalid_argument("wasserstein_exact: ensembles differ in size");
    if (x.cols() != y.cols()) throw std::invalid_argument("wasserstein_exact: shape mismatch");
    if (x.rows() > kMaxAssignmentSize)
        throw std::invalid_argument("wasserstein_exact: N=" + std::to_string(x.rows()) + " exceeds " +
                                    std::to_string(kMaxAssignmentSize));
    return solve_assignment(cost_matrix(x, y, split));
}

Assignment wasserstein_exact(const ParticleEnsemble& x, const ParticleEnsemble& y) {
    return wasserstein_exact(x.particles(), y.particles(), split_for(x.spec(), x.width()));
}

std::vector<double> pair_gaps(const CoupledEnsemble& c) {
    const auto split = split_for(c.left.spec(), c.left.width());
    std::vector<double> gaps(static_cast<std::size_t>(c.left.size()));
    for (Eigen::Index i = 0; i < c.left.size(); ++i)
        gaps[static_cast<std::size_t>(i)] =
            ground_cost(c.left.particles().row(i).data(), c.right.particles().row(i).data(), c.left.width(), split);
    return gaps;
}

double coupled_distance(const CoupledEnsemble& c) {
    const auto gaps = pair_gaps(c);
    return std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
}

double tv_distance_atoms(const RowMatrix& x, const RowMatrix& y, double match_tol) {
    if (x.cols() != y.cols()) throw std::invalid_argument("tv_distance_atoms: shape mismatch");
    if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("tv_distance_atoms: empty ensemble");
    const auto nx = static_cast<std::size_t>(x.rows());
    const auto n = nx + static_cast<std::size_t>(y.rows());
    const auto width = x.cols();
    auto row = [&](std::size_t k) { return k < nx ? x.row(static_cast<Eigen::Index>(k)).data() : y.row(static_cast<Eigen::Index>(k - nx)).data(); };

    // Sweep in order of the first coordinate; only points within match_tol of
    // each other there can be joined.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row(a)[0] < row(b)[0]; });
    DisjointSets sets(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n && row(order[b])[0] - row(order[a])[0] <= match_tol; ++b)
            if (sup_diff(row(order[a]), row(order[b]), width) <= match_tol) sets.unite(order[a], order[b]);

    std::vector<double> mass(n, 0.0);
    const double wx = 1.0 / static_cast<double>(x.rows());
    const double wy = 1.0 / static_cast<double>(y.rows());
    for (std::size_t k = 0; k < n; ++k) mass[sets.find(k)] += k < nx ? wx : -wy;
    double total = 0.0;
    for (double m : mass) total += std::abs(m);
    return std::min(1.0, 0.5 * total);
}

}  // namespace rlchain
