#pragma once

#include <Eigen/Dense>

#include "rlchain/ensemble.hpp"
#include "rlchain/mdp.hpp"
#include "rlchain/operators.hpp"

namespace rlchain {

/// Largest d accepted by solve_stationary_covariance (the system is d^2 x d^2).
inline constexpr Eigen::Index kMaxCovarianceDimension = 32;

struct MeanCheck {
    Eigen::VectorXd deviation;  // mean - reference
    Eigen::VectorXd standard_error;
    double max_deviation;
    double allowance;
    bool pass;
};

/// Pass iff |mean_i - reference_i| <= 4 SE_i + allowance for every i.
MeanCheck stationary_mean_check(const ParticleEnsemble& e, const FunctionPoint& reference, double allowance = 0.0);

/// Average of the exact noise covariance C(f) over the particles.
Eigen::MatrixXd estimate_noise_integral(const ParticleEnsemble& e, const FiniteMdp& mdp);

/// Solves Sigma = B Sigma B^T + alpha^2 cbar with B = (1 - alpha) I + alpha A.
Eigen::MatrixXd solve_stationary_covariance(const Eigen::MatrixXd& a, double alpha, const Eigen::MatrixXd& cbar);

/// Induced infinity norm: largest absolute row sum.
double covariance_opnorm(const Eigen::MatrixXd& m);

double concentration_bound(double alpha, double gamma, double rmax, Eigen::Index d, double eps);

/// Fraction of particles whose smallest coordinate deviation is >= eps.
double empirical_concentration(const ParticleEnsemble& e, const FunctionPoint& reference, double eps);

struct CovarianceReport {
    Eigen::MatrixXd sigma_solved;
    Eigen::MatrixXd sigma_empirical;
    Eigen::MatrixXd cbar;
    double opnorm_solved;
    double relative_frobenius_error;
};

/// Solved covariance (affine map of the spec, C-bar from the ensemble) against the ensemble's own.
CovarianceReport covariance_report(const ParticleEnsemble& e, const FiniteMdp& mdp);

struct ControlBias {
    Eigen::VectorXd excess;  // mean - q*
    Eigen::VectorXd standard_error;
    bool dominates;          // excess_i >= -4 SE_i for all i
    bool strict;             // excess_i > 4 SE_i for some i
    double max_excess;
};

ControlBias control_bias_check(const ParticleEnsemble& e, const FunctionPoint& qstar);

}  // namespace rlchain
