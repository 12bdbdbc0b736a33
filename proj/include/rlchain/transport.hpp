#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rlchain/ensemble.hpp"
#include "rlchain/mdp.hpp"
#include "rlchain/operators.hpp"

namespace rlchain {

inline constexpr Eigen::Index kMaxAssignmentSize = 4096;
inline constexpr double kDefaultAtomTolerance = 1e-9;

double sup_norm(const FunctionPoint& f, const FunctionPoint& g);
/// ||a.qa - b.qa|| + ||a.qb - b.qb||.
double product_metric_d1(const ExtendedPoint& a, const ExtendedPoint& b);

/// Ground cost between particle rows: sup norm, or d1 when split > 0 (rows are
/// two tables of `split` entries each).
double ground_cost(const double* x, const double* y, Eigen::Index width, Eigen::Index split = 0);

/// Cost entries (i,j) = ground_cost(x_i, y_j).
Eigen::MatrixXd cost_matrix(const RowMatrix& x, const RowMatrix& y, Eigen::Index split = 0);

struct Assignment {
    double distance;                 // (1/N) sum_i cost(i, matching[i])
    std::vector<Eigen::Index> matching;
};

/// Exact minimum-cost perfect matching (shortest augmenting paths with potentials).
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Exact W1 between two uniform empirical measures of equal size.
Assignment wasserstein_exact(const RowMatrix& x, const RowMatrix& y, Eigen::Index split = 0);
/// Ground metric picked from the ensembles' algorithm (d1 for DoubleQLearning).
Assignment wasserstein_exact(const ParticleEnsemble& x, const ParticleEnsemble& y);

/// Per-pair distances left_i vs right_i.
std::vector<double> pair_gaps(const CoupledEnsemble& c);
/// Mean of pair_gaps: an upper bound on the Wasserstein distance of the marginals.
double coupled_distance(const CoupledEnsemble& c);

/// Total variation between uniform atomic measures; points within match_tol
/// in sup norm are treated as the same atom.
double tv_distance_atoms(const RowMatrix& x, const RowMatrix& y, double match_tol = kDefaultAtomTolerance);

}  // namespace rlchain
