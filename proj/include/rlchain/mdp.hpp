#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rlchain {

/// One point per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Probability rows and reward distributions are validated against this.
inline constexpr double kProbabilityTolerance = 1e-9;

struct Atom {
    double value;
    double prob;
};

/**
 * Finite-support distribution over reals. Used for reward laws R(.|s,a).
 * Sampling is inverse-CDF over the atoms in declaration order.
 */
class DiscreteDistribution {
public:
    DiscreteDistribution() = default;
    explicit DiscreteDistribution(std::vector<Atom> atoms);

    static DiscreteDistribution dirac(double value) { return DiscreteDistribution({{value, 1.0}}); }

    const std::vector<Atom>& atoms() const { return atoms_; }
    double mean() const { return mean_; }
    double second_moment() const { return second_moment_; }
    double variance() const;

    /// Maps u in [0,1) to an atom value.
    double sample(double u) const;

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double mean_ = 0.0;
    double second_moment_ = 0.0;
};

/// Index of the (s,a) coordinate in an action-value table.
inline std::size_t sa_index(int s, int a, int n_actions) {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a);
}

/**
 * Immutable finite MDP (S, A, R, P, gamma) with discrete reward laws.
 *
 * The constructor only checks shapes. Value-level invariants (row sums,
 * reward bounds, gamma < 1) are reported by validate_mdp so that an invalid
 * file can be diagnosed in full instead of failing at the first problem.
 */
class FiniteMdp {
public:
    FiniteMdp(int n_states, int n_actions, double gamma, double rmax,
              std::vector<DiscreteDistribution> rewards, Eigen::MatrixXd transitions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    double rmax() const { return rmax_; }
    /// Upper end of the realizable box [0, rmax/(1-gamma)].
    double value_bound() const { return rmax_ / (1.0 - gamma_); }

    const DiscreteDistribution& reward(int s, int a) const { return rewards_[sa_index(s, a, n_actions_)]; }
    double mean_reward(int s, int a) const { return reward(s, a).mean(); }

    /// Row P(.|s,a); (S*A) x S matrix, row sa_index(s,a).
    auto transition_row(int s, int a) const { return transitions_.row(static_cast<Eigen::Index>(sa_index(s, a, n_actions_))); }
    double transition(int s, int a, int next) const { return transitions_(static_cast<Eigen::Index>(sa_index(s, a, n_actions_)), next); }
    const Eigen::MatrixXd& transitions() const { return transitions_; }

    /// Successor draw from P(.|s,a) for u in [0,1).
    int sample_next(int s, int a, double u) const;
    double sample_reward(int s, int a, double u) const { return reward(s, a).sample(u); }

    /// True when every (s,a) has a Dirac reward and a Dirac successor.
    bool is_deterministic() const;

private:
    int n_states_;
    int n_actions_;
    double gamma_;
    double rmax_;
    std::vector<DiscreteDistribution> rewards_;
    Eigen::MatrixXd transitions_;
    // Per (s,a): successors with positive probability and their running sums.
    std::vector<std::vector<int>> support_;
    std::vector<std::vector<double>> cumulative_;
};

struct Violation {
    int state;
    int action;  // -1 when the violation is not tied to an action
    std::string message;
};

/// Lists every broken FiniteMdp invariant; empty means valid.
std::vector<Violation> validate_mdp(const FiniteMdp& mdp);

/// Deterministic (one action per state) or stochastic (row over actions per state).
class Policy {
public:
    static Policy deterministic(std::vector<int> actions, int n_actions);
    static Policy stochastic(Eigen::MatrixXd probs);
    static Policy uniform(int n_states, int n_actions);

    bool is_deterministic() const { return deterministic_; }
    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }
    double prob(int s, int a) const { return probs_(s, a); }
    const Eigen::MatrixXd& probs() const { return probs_; }
    /// Action of a deterministic policy.
    int action(int s) const;
    const std::vector<int>& actions() const { return actions_; }

    int sample_action(int s, double u) const;

    bool operator==(const Policy& other) const;

private:
    Policy() = default;
    bool deterministic_ = false;
    std::vector<int> actions_;
    Eigen::MatrixXd probs_;
    Eigen::MatrixXd cumulative_;
};

enum class ValueKind { StateValue, ActionValue };

/// A point of R^d: a value function (d = |S|) or an action-value table (d = |S||A|).
struct FunctionPoint {
    ValueKind kind = ValueKind::StateValue;
    Eigen::VectorXd values;

    static FunctionPoint state_values(Eigen::VectorXd v) { return {ValueKind::StateValue, std::move(v)}; }
    static FunctionPoint action_values(Eigen::VectorXd q) { return {ValueKind::ActionValue, std::move(q)}; }

    Eigen::Index size() const { return values.size(); }
    bool all_finite() const { return values.allFinite(); }
    bool is_realizable(const FiniteMdp& mdp) const;
};

/// Expected dimension of a point of the given kind.
Eigen::Index dimension(const FiniteMdp& mdp, ValueKind kind);

/// T^pi f for a state-value or action-value point.
FunctionPoint bellman_policy_backup(const FiniteMdp& mdp, const Policy& policy, const FunctionPoint& f);

/// T* f; the max over actions is exact.
FunctionPoint bellman_optimality_backup(const FiniteMdp& mdp, const FunctionPoint& f);

struct PolicyValues {
    FunctionPoint v;
    FunctionPoint q;
};

/// Solves (I - gamma P^pi) v = r^pi by dense LU and derives q^pi.
PolicyValues exact_policy_values(const FiniteMdp& mdp, const Policy& policy);

/// Greedy deterministic policy; ties go to the lowest action index.
Policy greedy_policy(const FunctionPoint& q, int n_actions);

struct PolicyIterationStep {
    Policy policy;
    FunctionPoint q;
};

/// Classical policy iteration from a deterministic start, ending at pi*.
std::vector<PolicyIterationStep> policy_iteration(const FiniteMdp& mdp, const Policy& pi0);

/// Canonical optimal policy greedy(q*) and q* itself.
PolicyIterationStep optimal_policy(const FiniteMdp& mdp);

/// S x S matrix P^pi(s,s').
Eigen::MatrixXd policy_transition_matrix(const FiniteMdp& mdp, const Policy& policy);
/// (S*A) x (S*A) matrix over state-action pairs: P(s'|s,a) pi(a'|s').
Eigen::MatrixXd policy_transition_matrix_sa(const FiniteMdp& mdp, const Policy& policy);
/// r^pi(s) = sum_a pi(a|s) rbar(s,a).
Eigen::VectorXd policy_reward_vector(const FiniteMdp& mdp, const Policy& policy);
/// rbar(s,a) flattened.
Eigen::VectorXd mean_reward_vector(const FiniteMdp& mdp);

inline double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace rlchain
