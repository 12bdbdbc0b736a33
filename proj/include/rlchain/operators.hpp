#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rlchain/mdp.hpp"
#include "rlchain/rng.hpp"

namespace rlchain {

enum class Algorithm { TD0, MC, TDLambda, QLearning, Sarsa, ExpectedSarsa, DoubleQLearning, OPI };

std::string_view to_string(Algorithm algorithm);
/// Accepts the enumerator names ("TD0", "QLearning", ...); throws on anything else.
Algorithm algorithm_from_string(std::string_view name);

inline constexpr double kDefaultHorizonTolerance = 1e-6;

/**
 * Which stochastic target is applied and with which parameters.
 * Optional fields are present exactly when the algorithm uses them; see
 * validate_spec.
 */
struct AlgorithmSpec {
    Algorithm algorithm = Algorithm::TD0;
    double alpha = 0.1;
    std::optional<double> lambda;             // TDLambda
    std::optional<double> epsilon;            // Sarsa, ExpectedSarsa
    std::optional<double> p;                  // DoubleQLearning
    std::optional<Policy> base_policy;        // TD0, MC, TDLambda, Sarsa, ExpectedSarsa
    std::optional<double> horizon_tolerance;  // MC, TDLambda, OPI

    static AlgorithmSpec td0(double alpha, Policy policy);
    static AlgorithmSpec monte_carlo(double alpha, Policy policy, double tol = kDefaultHorizonTolerance);
    static AlgorithmSpec td_lambda(double alpha, double lambda, Policy policy, double tol = kDefaultHorizonTolerance);
    static AlgorithmSpec q_learning(double alpha);
    static AlgorithmSpec sarsa(double alpha, double epsilon, Policy base);
    static AlgorithmSpec expected_sarsa(double alpha, double epsilon, Policy base);
    static AlgorithmSpec double_q_learning(double alpha, double p);
    static AlgorithmSpec opi(double alpha, double tol = kDefaultHorizonTolerance);
};

/// Throws std::invalid_argument when parameters are missing, superfluous or out of range.
void validate_spec(const AlgorithmSpec& spec);
/// validate_spec plus shape checks of the base policy against the MDP.
void validate_spec(const AlgorithmSpec& spec, const FiniteMdp& mdp);

bool is_evaluation(Algorithm algorithm);
bool uses_trajectories(Algorithm algorithm);
/// Kind of point the algorithm acts on (DoubleQLearning acts on pairs of action-value tables).
ValueKind value_kind(Algorithm algorithm);
/// Number of reals per particle: d, or 2d for DoubleQLearning.
Eigen::Index point_width(const AlgorithmSpec& spec, const FiniteMdp& mdp);

/// The pair (Q^A, Q^B) tracked by double Q-learning.
struct ExtendedPoint {
    FunctionPoint qa;
    FunctionPoint qb;
};

/// Smallest H >= 1 with gamma^H * rmax / (1 - gamma) < tol.
int truncation_horizon(double gamma, double rmax, double tol);
/// Horizon used by the spec on this MDP (requires horizon_tolerance).
int spec_horizon(const AlgorithmSpec& spec, const FiniteMdp& mdp);

/// One truncated discounted return: first action a at s, then the policy.
double sample_return(const FiniteMdp& mdp, const Policy& policy, int s, int a, int horizon, Generator& gen);

/**
 * Weights of a truncated return functional along one trajectory s_0, s_1, ...:
 *   target = sum_{i<H} reward_weight[i] r_i + sum_{n=1..H} value_weight[n] f(s_n).
 * TD(0), Monte Carlo and TD(lambda) are all of this form.
 */
struct ReturnWeights {
    std::vector<double> reward_weight;  // size H
    std::vector<double> value_weight;   // size H + 1, entry 0 unused
    int horizon() const { return static_cast<int>(reward_weight.size()); }
};

ReturnWeights return_weights(const AlgorithmSpec& spec, const FiniteMdp& mdp);

/**
 * Samples full synchronous targets into caller-owned buffers. Construction
 * precomputes everything that depends only on (spec, mdp) so the per-step
 * path does no allocation. Coordinate slot c of the key drives all draws of
 * coordinate c; DoubleQLearning draws its table choice from slot d.
 */
class TargetSampler {
public:
    TargetSampler(const AlgorithmSpec& spec, const FiniteMdp& mdp);

    Eigen::Index width() const { return width_; }
    const AlgorithmSpec& spec() const { return spec_; }

    void sample(std::span<const double> f, std::span<double> out, const RngStream& key) const;
    /// Two points driven by the same draws: the identical-samples coupling.
    void sample_pair(std::span<const double> f1, std::span<double> out1, std::span<const double> f2,
                     std::span<double> out2, const RngStream& key) const;

private:
    template <int K>
    void sample_impl(const double* const* f, double* const* out, const RngStream& key) const;

    AlgorithmSpec spec_;
    const FiniteMdp* mdp_;  // must outlive the sampler
    Eigen::Index width_;
    Eigen::Index table_size_;
    ReturnWeights weights_;
};

FunctionPoint apply_empirical_operator(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f,
                                       const RngStream& key);
ExtendedPoint apply_empirical_operator(const AlgorithmSpec& spec, const FiniteMdp& mdp, const ExtendedPoint& f,
                                       const RngStream& key);

/// (1 - alpha) f + alpha target; coordinates whose target equals f are copied unchanged.
void synchronous_update(std::span<double> f, std::span<const double> target, double alpha);
FunctionPoint synchronous_update(const FunctionPoint& f, const FunctionPoint& target, double alpha);
ExtendedPoint synchronous_update(const ExtendedPoint& f, const ExtendedPoint& target, double alpha);

/// E over draws of the target at f, computed exactly from the MDP tables.
FunctionPoint expected_target(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f);

/// Exact covariance of target - expected_target at f. Diagonal for every supported algorithm.
Eigen::MatrixXd noise_covariance(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f);

/// Wasserstein contraction factor of the induced kernel.
double contraction_factor(const AlgorithmSpec& spec, double gamma);

struct AffineMap {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

/// Evaluation algorithms only: expected_target(f) = b + A f.
AffineMap effective_affine_map(const AlgorithmSpec& spec, const FiniteMdp& mdp);

/// Mixture (1 - eps) greedy(q) + eps base, as used by SARSA-type targets.
Policy epsilon_greedy_mixture(const FunctionPoint& q, const Policy& base, double epsilon);

}  // namespace rlchain
