#include "rlchain/opi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "rlchain/operators.hpp"
#include "rlchain/parallel.hpp"

namespace rlchain {

namespace {

std::size_t policy_count(const FiniteMdp& mdp) {
    std::size_t count = 1;
    for (int s = 0; s < mdp.n_states(); ++s) {
        count *= static_cast<std::size_t>(mdp.n_actions());
        if (count > kMaxPolicies)
            throw std::invalid_argument("enumerate_policies: more than " + std::to_string(kMaxPolicies) + " policies");
    }
    return count;
}

std::vector<int> actions_of_index(std::size_t index, int n_states, int n_actions) {
    std::vector<int> actions(static_cast<std::size_t>(n_states));
    for (int s = n_states - 1; s >= 0; --s) {
        actions[static_cast<std::size_t>(s)] = static_cast<int>(index % static_cast<std::size_t>(n_actions));
        index /= static_cast<std::size_t>(n_actions);
    }
    return actions;
}

bool is_terminal(const FiniteMdp& mdp, int s, int a) {
    if (mdp.transition(s, a, s) != 1.0) return false;
    for (const auto& atom : mdp.reward(s, a).atoms())
        if (atom.prob > 0.0 && atom.value != 0.0) return false;
    return true;
}

// Sorted atoms with prefix sums for P(X < g) and P(X <= g).
struct SortedLaw {
    std::vector<double> values;
    std::vector<double> probs;
    std::vector<double> prefix;  // prefix[i] = sum of probs[0..i)

    explicit SortedLaw(const std::vector<Atom>& atoms) {
        for (const auto& a : atoms) {
            values.push_back(a.value);
            probs.push_back(a.prob);
        }
        prefix.assign(values.size() + 1, 0.0);
        for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + probs[i];
    }
    double below(double g) const {
        return prefix[static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), g) - values.begin())];
    }
    double at_most(double g) const {
        return prefix[static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), g) - values.begin())];
    }
};

// P(the lowest-index argmax of independent X_0..X_{A-1} is `best`).
double greedy_probability(const std::vector<SortedLaw>& laws, int best) {
    double total = 0.0;
    const auto& own = laws[static_cast<std::size_t>(best)];
    for (std::size_t i = 0; i < own.values.size(); ++i) {
        const double g = own.values[i];
        double p = own.probs[i];
        for (int a = 0; a < static_cast<int>(laws.size()) && p > 0.0; ++a) {
            if (a == best) continue;
            p *= a < best ? laws[static_cast<std::size_t>(a)].below(g) : laws[static_cast<std::size_t>(a)].at_most(g);
        }
        total += p;
    }
    return total;
}

std::vector<std::vector<std::size_t>> positive_graph(const Eigen::MatrixXd& k, bool transpose) {
    const auto n = static_cast<std::size_t>(k.rows());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) {
                if (transpose)
                    adj[j].push_back(i);
                else
                    adj[i].push_back(j);
            }
    return adj;
}

std::size_t star_index(const FiniteMdp& mdp) { return policy_index(optimal_policy(mdp).policy); }

}  // namespace

std::vector<Policy> enumerate_policies(const FiniteMdp& mdp) {
    const auto count = policy_count(mdp);
    std::vector<Policy> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(Policy::deterministic(actions_of_index(i, mdp.n_states(), mdp.n_actions()), mdp.n_actions()));
    return out;
}

std::size_t policy_index(const Policy& policy) {
    if (!policy.is_deterministic()) throw std::invalid_argument("policy_index needs a deterministic policy");
    std::size_t index = 0;
    for (int a : policy.actions()) index = index * static_cast<std::size_t>(policy.n_actions()) + static_cast<std::size_t>(a);
    return index;
}

Eigen::VectorXd sample_return_table(const FiniteMdp& mdp, const Policy& policy, int horizon, const RngStream& key) {
    const int n_a = mdp.n_actions();
    Eigen::VectorXd g(mdp.n_states() * n_a);
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < n_a; ++a) {
            const auto c = sa_index(s, a, n_a);
            Generator gen = key.substream(c);
            g(static_cast<Eigen::Index>(c)) = sample_return(mdp, policy, s, a, horizon, gen);
        }
    return g;
}

OpiStep opi_step(const FunctionPoint& q, const FiniteMdp& mdp, double alpha, int horizon, const RngStream& key) {
    if (q.kind != ValueKind::ActionValue || q.size() != dimension(mdp, ValueKind::ActionValue))
        throw std::invalid_argument("opi_step: q must be an action-value table of the MDP");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("opi_step: alpha must lie in [0,1]");
    const Policy pi = greedy_policy(q, mdp.n_actions());
    const Eigen::VectorXd g = sample_return_table(mdp, pi, horizon, key);
    FunctionPoint next = FunctionPoint::action_values((1.0 - alpha) * q.values + alpha * g);
    Policy improved = greedy_policy(next, mdp.n_actions());
    return {std::move(next), std::move(improved)};
}

double PolicyKernel::positive_threshold(std::size_t from, std::size_t to) const {
    if (provenance == KernelProvenance::Exact) return 0.0;
    return 4.0 * standard_error(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
}

PolicyKernel estimate_policy_kernel(const FiniteMdp& mdp, std::int64_t m, int horizon, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("estimate_policy_kernel: M must be >= 1");
    if (horizon < 1) throw std::invalid_argument("estimate_policy_kernel: horizon must be >= 1");
    auto policies = enumerate_policies(mdp);
    const auto n = static_cast<Eigen::Index>(policies.size());
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
    parallel_for(policies.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::int64_t draw = 0; draw < m; ++draw) {
                const RngStream key(seed, i, static_cast<std::uint64_t>(draw));
                const auto g = FunctionPoint::action_values(sample_return_table(mdp, policies[i], horizon, key));
                counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(policy_index(greedy_policy(g, mdp.n_actions())))) += 1.0;
            }
    });
    PolicyKernel out{std::move(policies), counts / static_cast<double>(m), KernelProvenance::MonteCarlo, horizon, m, {}};
    out.standard_error = (out.k.array() * (1.0 - out.k.array()) / static_cast<double>(m)).sqrt().matrix();
    return out;
}

std::vector<Atom> exact_return_distribution(const FiniteMdp& mdp, const Policy& policy, int s, int a, int horizon) {
    if (horizon < 1) throw std::invalid_argument("exact_return_distribution: horizon must be >= 1");
    // (state, accumulated return) -> probability; returns are accumulated in the
    // same order as sample_return so equal outcomes are equal doubles.
    std::map<std::pair<int, double>, double> current{{{s, 0.0}, 1.0}};
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
        std::map<std::pair<int, double>, double> next;
        for (const auto& [key, prob] : current) {
            const int state = key.first;
            const int action = t == 0 ? a : policy.action(state);
            const auto row = mdp.transition_row(state, action);
            for (const auto& atom : mdp.reward(state, action).atoms()) {
                if (atom.prob == 0.0) continue;
                const double value = key.second + discount * atom.value;
                for (int succ = 0; succ < mdp.n_states(); ++succ)
                    if (row(succ) > 0.0) next[{succ, value}] += prob * atom.prob * row(succ);
            }
            if (next.size() > kMaxReturnAtoms)
                throw std::runtime_error("exact_return_distribution: more than " + std::to_string(kMaxReturnAtoms) + " atoms");
        }
        current = std::move(next);
        discount *= mdp.gamma();
    }
    std::map<double, double> law;
    for (const auto& [key, prob] : current) {
        if (!is_terminal(mdp, key.first, policy.action(key.first)))
            throw std::domain_error("exact_return_distribution: state " + std::to_string(key.first) +
                                    " is not absorbing with zero reward after " + std::to_string(horizon) + " steps");
        law[key.second] += prob;
    }
    std::vector<Atom> atoms;
    atoms.reserve(law.size());
    for (const auto& [value, prob] : law) atoms.push_back({value, prob});
    return atoms;
}

PolicyKernel exact_policy_kernel(const FiniteMdp& mdp, int horizon) {
    auto policies = enumerate_policies(mdp);
    const int n_s = mdp.n_states();
    const int n_a = mdp.n_actions();
    const auto n = static_cast<Eigen::Index>(policies.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Policy& pi = policies[static_cast<std::size_t>(i)];
        // Returns of different (s,a) pairs are independent, so the kernel row
        // factorizes over states.
        Eigen::MatrixXd state_probs(n_s, n_a);
        for (int s = 0; s < n_s; ++s) {
            std::vector<SortedLaw> laws;
            for (int a = 0; a < n_a; ++a) laws.emplace_back(exact_return_distribution(mdp, pi, s, a, horizon));
            for (int a = 0; a < n_a; ++a) state_probs(s, a) = greedy_probability(laws, a);
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            double p = 1.0;
            const auto& target = policies[static_cast<std::size_t>(j)].actions();
            for (int s = 0; s < n_s && p > 0.0; ++s) p *= state_probs(s, target[static_cast<std::size_t>(s)]);
            k(i, j) = p;
        }
    }
    return {std::move(policies), std::move(k), KernelProvenance::Exact, horizon, 0, Eigen::MatrixXd::Zero(n, n)};
}

std::vector<ImprovementCheck> check_probabilistic_improvement(const PolicyKernel& kernel, const FiniteMdp& mdp) {
    std::vector<ImprovementCheck> out;
    for (std::size_t i = 0; i < kernel.policies.size(); ++i) {
        const auto values = exact_policy_values(mdp, kernel.policies[i]);
        const auto j = policy_index(greedy_policy(values.q, mdp.n_actions()));
        const double p = kernel.k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out.push_back({i, j, p, p > kernel.positive_threshold(i, j)});
    }
    return out;
}

std::vector<PolicyClass> communicating_classes(const Eigen::MatrixXd& k) {
    if (k.rows() != k.cols()) throw std::invalid_argument("communicating_classes: kernel must be square");
    const auto n = static_cast<std::size_t>(k.rows());
    const auto forward = positive_graph(k, false);
    const auto backward = positive_graph(k, true);

    // Kosaraju: finishing order on the graph, then components on the transpose.
    std::vector<std::size_t> order;
    std::vector<char> seen(n, 0);
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root]) continue;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        seen[root] = 1;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < forward[node].size()) {
                const auto succ = forward[node][next++];
                if (!seen[succ]) {
                    seen[succ] = 1;
                    stack.emplace_back(succ, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }
    std::vector<std::size_t> component(n, n);
    std::vector<PolicyClass> classes;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (component[*it] != n) continue;
        PolicyClass cls{{}, true};
        std::vector<std::size_t> stack{*it};
        component[*it] = classes.size();
        while (!stack.empty()) {
            const auto node = stack.back();
            stack.pop_back();
            cls.members.push_back(node);
            for (auto pred : backward[node])
                if (component[pred] == n) {
                    component[pred] = classes.size();
                    stack.push_back(pred);
                }
        }
        std::sort(cls.members.begin(), cls.members.end());
        classes.push_back(std::move(cls));
    }
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (auto node : classes[c].members)
            for (auto succ : forward[node])
                if (component[succ] != c) classes[c].recurrent = false;
    std::sort(classes.begin(), classes.end(), [](const PolicyClass& a, const PolicyClass& b) { return a.members.front() < b.members.front(); });
    return classes;
}

PolicyChainReport policy_chain_stationary(const PolicyKernel& kernel, const FiniteMdp& mdp) {
    const Eigen::MatrixXd& k = kernel.k;
    const auto n = k.rows();
    if ((k.rowwise().sum().array() - 1.0).abs().maxCoeff() > kernel.row_tolerance() || (k.array() < 0.0).any())
        throw std::invalid_argument("policy_chain_stationary: kernel is not row-stochastic");

    PolicyChainReport out;
    out.classes = communicating_classes(k);
    out.star = star_index(mdp);
    const PolicyClass* home = nullptr;
    for (const auto& cls : out.classes)
        if (std::binary_search(cls.members.begin(), cls.members.end(), out.star)) home = &cls;
    if (home == nullptr || !home->recurrent)
        throw std::runtime_error("policy_chain_stationary: the optimal policy is not in a recurrent class of the kernel");

    // phi K_CC = phi on the closed class, with one balance equation replaced by sum(phi) = 1.
    const auto m = static_cast<Eigen::Index>(home->members.size());
    Eigen::MatrixXd system(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c)
            system(r, c) = k(static_cast<Eigen::Index>(home->members[static_cast<std::size_t>(c)]),
                             static_cast<Eigen::Index>(home->members[static_cast<std::size_t>(r)])) - (r == c ? 1.0 : 0.0);
    system.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(m - 1) = 1.0;
    const Eigen::VectorXd local = system.fullPivLu().solve(rhs).cwiseMax(0.0);
    out.phi1 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r) out.phi1(static_cast<Eigen::Index>(home->members[static_cast<std::size_t>(r)])) = local(r);
    out.phi1 /= out.phi1.sum();

    const auto star = static_cast<Eigen::Index>(out.star);
    out.aperiodic_star = k(star, star) > kernel.positive_threshold(out.star, out.star);
    double inflow = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != star) inflow += out.phi1(i) * k(i, star);
    out.identity_residual = std::abs(out.phi1(star) * (1.0 - k(star, star)) - inflow);
    return out;
}

std::vector<ReachabilityPath> check_reachability(const PolicyKernel& kernel, const FiniteMdp& mdp) {
    std::vector<ReachabilityPath> out;
    for (std::size_t i = 0; i < kernel.policies.size(); ++i) {
        ReachabilityPath rp{i, {}, 1.0, true};
        for (const auto& step : policy_iteration(mdp, kernel.policies[i])) rp.path.push_back(policy_index(step.policy));
        for (std::size_t link = 0; link + 1 < rp.path.size(); ++link) {
            const auto from = rp.path[link];
            const auto to = rp.path[link + 1];
            const double p = kernel.k(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
            rp.min_link = std::min(rp.min_link, p);
            if (!(p > kernel.positive_threshold(from, to))) rp.pass = false;
        }
        out.push_back(std::move(rp));
    }
    return out;
}

OpiSimulation simulate_opi(const FiniteMdp& mdp, double alpha, std::uint64_t n_steps, Eigen::Index n, int horizon,
                           std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("simulate_opi: N must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("simulate_opi: alpha must lie in (0,1]");
    OpiSimulation out;
    out.policies = enumerate_policies(mdp);
    const auto width = dimension(mdp, ValueKind::ActionValue);
    const auto steps = static_cast<std::size_t>(n_steps) + 1;
    std::vector<std::size_t> visits(static_cast<std::size_t>(n) * steps);
    out.final_q.resize(n, width);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
        for (std::size_t chain = begin; chain < end; ++chain) {
            const RngStream init(seed, kInitStep, chain);
            FunctionPoint q = FunctionPoint::action_values(Eigen::VectorXd(width));
            for (Eigen::Index j = 0; j < width; ++j) {
                Generator gen = init.substream(static_cast<std::uint64_t>(j));
                q.values(j) = mdp.value_bound() * gen.uniform();
            }
            visits[chain * steps] = policy_index(greedy_policy(q, mdp.n_actions()));
            for (std::uint64_t t = 0; t < n_steps; ++t) {
                auto next = opi_step(q, mdp, alpha, horizon, RngStream(seed, t, chain));
                q = std::move(next.q);
                visits[chain * steps + t + 1] = policy_index(next.policy);
            }
            out.final_q.row(static_cast<Eigen::Index>(chain)) = q.values.transpose();
        }
    });
    out.frequencies = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(out.policies.size()));
    for (std::size_t chain = 0; chain < static_cast<std::size_t>(n); ++chain)
        for (std::size_t t = 0; t < steps; ++t)
            out.frequencies(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(visits[chain * steps + t])) += 1.0;
    out.frequencies /= static_cast<double>(n);
    return out;
}

}  // namespace rlchain
