#include "rlchain/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlchain {

namespace {

void require_reference(const ParticleEnsemble& e, const FunctionPoint& reference) {
    if (reference.size() != e.width()) throw std::invalid_argument("reference has the wrong dimension");
}

// Rounding residue left by a chain that has converged to a Dirac law.
Eigen::ArrayXd slack(const FunctionPoint& reference) { return 1e-12 * (1.0 + reference.values.array().abs()); }

}  // namespace

MeanCheck stationary_mean_check(const ParticleEnsemble& e, const FunctionPoint& reference, double allowance) {
    require_reference(e, reference);
    MeanCheck out;
    out.deviation = e.mean() - reference.values;
    out.standard_error = e.standard_error();
    out.max_deviation = max_abs(out.deviation);
    out.allowance = allowance;
    out.pass = (out.deviation.array().abs() - 4.0 * out.standard_error.array() <= allowance + slack(reference)).all();
    return out;
}

Eigen::MatrixXd estimate_noise_integral(const ParticleEnsemble& e, const FiniteMdp& mdp) {
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(e.width(), e.width());
    for (Eigen::Index i = 0; i < e.size(); ++i) total += noise_covariance(e.spec(), mdp, e.point(i));
    return total / static_cast<double>(e.size());
}

Eigen::MatrixXd solve_stationary_covariance(const Eigen::MatrixXd& a, double alpha, const Eigen::MatrixXd& cbar) {
    const Eigen::Index d = a.rows();
    if (a.cols() != d || cbar.rows() != d || cbar.cols() != d)
        throw std::invalid_argument("solve_stationary_covariance: A and cbar must be square of equal size");
    if (d > kMaxCovarianceDimension)
        throw std::invalid_argument("solve_stationary_covariance: d=" + std::to_string(d) + " exceeds " +
                                    std::to_string(kMaxCovarianceDimension));
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("solve_stationary_covariance: alpha must lie in (0,1]");
    const Eigen::MatrixXd b = (1.0 - alpha) * Eigen::MatrixXd::Identity(d, d) + alpha * a;
    if (covariance_opnorm(b) >= 1.0)
        throw std::domain_error("solve_stationary_covariance: ||(1-alpha)I + alpha A|| >= 1, system may be singular");

    // Column-major vec: vec(B S B^T) = (B kron B) vec(S).
    const Eigen::Index n = d * d;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            for (Eigen::Index j = 0; j < d; ++j)
                for (Eigen::Index l = 0; l < d; ++l) system(c * d + r, l * d + j) -= b(c, l) * b(r, j);
    const Eigen::VectorXd rhs = alpha * alpha * Eigen::Map<const Eigen::VectorXd>(cbar.eval().data(), n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::VectorXd x = lu.solve(rhs);
    Eigen::MatrixXd sigma = Eigen::Map<const Eigen::MatrixXd>(x.data(), d, d);
    sigma = 0.5 * (sigma + sigma.transpose()).eval();

    const Eigen::MatrixXd residual = sigma - b * sigma * b.transpose() - alpha * alpha * cbar;
    const double scale = std::max(sigma.norm(), alpha * alpha * cbar.norm());
    if (!sigma.allFinite() || residual.norm() > 1e-8 * std::max(scale, 1e-300))
        throw std::runtime_error("solve_stationary_covariance: system is singular");
    return sigma;
}

double covariance_opnorm(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("covariance_opnorm: matrix must be square");
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double concentration_bound(double alpha, double gamma, double rmax, Eigen::Index d, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("concentration_bound: eps must be > 0");
    if (d < 1) throw std::invalid_argument("concentration_bound: d must be >= 1");
    if (std::isinf(eps)) return 0.0;
    const double diameter = 2.0 * rmax / (1.0 - gamma);
    const double c = diameter * diameter;
    const double rho = 1.0 - alpha + alpha * gamma;
    const double raw = c / (static_cast<double>(d) * eps * eps) * alpha * alpha / (1.0 - rho * rho);
    return std::min(1.0, raw);
}

double empirical_concentration(const ParticleEnsemble& e, const FunctionPoint& reference, double eps) {
    require_reference(e, reference);
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double smallest = (e.particles().row(i).transpose() - reference.values).cwiseAbs().minCoeff();
        if (smallest >= eps) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(e.size());
}

CovarianceReport covariance_report(const ParticleEnsemble& e, const FiniteMdp& mdp) {
    const AffineMap map = effective_affine_map(e.spec(), mdp);
    CovarianceReport out;
    out.cbar = estimate_noise_integral(e, mdp);
    out.sigma_solved = solve_stationary_covariance(map.A, e.spec().alpha, out.cbar);
    out.sigma_empirical = e.covariance();
    out.opnorm_solved = covariance_opnorm(out.sigma_solved);
    const double norm = out.sigma_solved.norm();
    const double gap = (out.sigma_solved - out.sigma_empirical).norm();
    out.relative_frobenius_error = norm > 0.0 ? gap / norm : gap;
    return out;
}

ControlBias control_bias_check(const ParticleEnsemble& e, const FunctionPoint& qstar) {
    require_reference(e, qstar);
    ControlBias out;
    out.excess = e.mean() - qstar.values;
    out.standard_error = e.standard_error();
    const Eigen::ArrayXd margin = 4.0 * out.standard_error.array() + slack(qstar);
    out.dominates = (out.excess.array() >= -margin).all();
    out.strict = (out.excess.array() > margin).any();
    out.max_excess = out.excess.maxCoeff();
    return out;
}

}  // namespace rlchain
