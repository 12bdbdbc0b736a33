#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rlchain/mdp.hpp"
#include "rlchain/rng.hpp"

namespace rlchain {

inline constexpr std::size_t kMaxPolicies = 100000;
inline constexpr std::size_t kMaxReturnAtoms = 1000000;

/// All deterministic policies, lexicographic in (a_0, ..., a_{S-1}).
std::vector<Policy> enumerate_policies(const FiniteMdp& mdp);
/// Position of a deterministic policy in enumerate_policies.
std::size_t policy_index(const Policy& policy);

/// One sampled return per (s,a), first action a then the policy; slot sa_index(s,a) of key.
Eigen::VectorXd sample_return_table(const FiniteMdp& mdp, const Policy& policy, int horizon, const RngStream& key);

struct OpiStep {
    FunctionPoint q;
    Policy policy;
};

/// q' = (1 - alpha) q + alpha G^{greedy(q)}, and the greedy policy of q'.
OpiStep opi_step(const FunctionPoint& q, const FiniteMdp& mdp, double alpha, int horizon, const RngStream& key);

enum class KernelProvenance { MonteCarlo, Exact };

struct PolicyKernel {
    std::vector<Policy> policies;
    Eigen::MatrixXd k;               // row pi, column pi'
    KernelProvenance provenance;
    int horizon;
    std::int64_t samples;            // M; 0 for exact kernels
    Eigen::MatrixXd standard_error;  // zero for exact kernels

    double row_tolerance() const { return provenance == KernelProvenance::Exact ? 1e-12 : 1e-9; }
    /// Threshold a link probability must exceed to count as positive.
    double positive_threshold(std::size_t from, std::size_t to) const;
};

PolicyKernel estimate_policy_kernel(const FiniteMdp& mdp, std::int64_t m, int horizon, std::uint64_t seed);

/// Exact distribution of the return from (s,a) under the policy; requires
/// every trajectory to sit in an absorbing zero-reward state at step horizon.
std::vector<Atom> exact_return_distribution(const FiniteMdp& mdp, const Policy& policy, int s, int a, int horizon);

PolicyKernel exact_policy_kernel(const FiniteMdp& mdp, int horizon);

struct ImprovementCheck {
    std::size_t policy;
    std::size_t improved;  // greedy(q^pi)
    double probability;    // K(policy, improved)
    bool pass;
};

std::vector<ImprovementCheck> check_probabilistic_improvement(const PolicyKernel& kernel, const FiniteMdp& mdp);

struct PolicyClass {
    std::vector<std::size_t> members;
    bool recurrent;
};

/// Strongly connected components of the positive-entry digraph; closed ones are recurrent.
std::vector<PolicyClass> communicating_classes(const Eigen::MatrixXd& k);

struct PolicyChainReport {
    Eigen::VectorXd phi1;
    std::vector<PolicyClass> classes;
    std::size_t star;
    bool aperiodic_star;
    double identity_residual;
};

PolicyChainReport policy_chain_stationary(const PolicyKernel& kernel, const FiniteMdp& mdp);

struct ReachabilityPath {
    std::size_t start;
    std::vector<std::size_t> path;  // start ... pi*
    double min_link;                // smallest K along the path; 1 for an empty path
    bool pass;

    std::size_t length() const { return path.size() - 1; }
};

/// Classical policy iteration paths from every policy, checked link by link against the kernel.
std::vector<ReachabilityPath> check_reachability(const PolicyKernel& kernel, const FiniteMdp& mdp);

struct OpiSimulation {
    std::vector<Policy> policies;
    Eigen::MatrixXd frequencies;  // (n_steps + 1) x |policies|, greedy policy of q_n
    RowMatrix final_q;            // N x (S A)
};

/// N independent OPI chains from realizable-uniform q tables.
OpiSimulation simulate_opi(const FiniteMdp& mdp, double alpha, std::uint64_t n_steps, Eigen::Index n, int horizon,
                           std::uint64_t seed);

}  // namespace rlchain
