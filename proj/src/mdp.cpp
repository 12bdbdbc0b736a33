#include "rlchain/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rlchain {

namespace {

// Inverse-CDF lookup shared by rewards, transitions and policies. The last
// index is returned when rounding leaves u above the final running sum.
std::size_t find_bucket(const std::vector<double>& cumulative, double u) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) return cumulative.size() - 1;
    return static_cast<std::size_t>(it - cumulative.begin());
}

void require_kind(const FiniteMdp& mdp, const FunctionPoint& f) {
    if (f.size() != dimension(mdp, f.kind)) {
        std::ostringstream msg;
        msg << "dimension mismatch: point has " << f.size() << " entries, expected " << dimension(mdp, f.kind);
        throw std::invalid_argument(msg.str());
    }
    if (!f.all_finite()) throw std::invalid_argument("function point has non-finite entries");
}

void require_policy_shape(const FiniteMdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
}

std::string format_double(double x) {
    std::ostringstream out;
    out << x;
    return out.str();
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("distribution needs at least one atom");
    double running = 0.0;
    cumulative_.reserve(atoms_.size());
    for (const auto& atom : atoms_) {
        running += atom.prob;
        cumulative_.push_back(running);
        mean_ += atom.value * atom.prob;
        second_moment_ += atom.value * atom.value * atom.prob;
    }
}

double DiscreteDistribution::variance() const {
    double var = 0.0;
    for (const auto& atom : atoms_) var += atom.prob * (atom.value - mean_) * (atom.value - mean_);
    return var;
}

double DiscreteDistribution::sample(double u) const {
    if (atoms_.size() == 1) return atoms_.front().value;
    return atoms_[find_bucket(cumulative_, u)].value;
}

FiniteMdp::FiniteMdp(int n_states, int n_actions, double gamma, double rmax,
                     std::vector<DiscreteDistribution> rewards, Eigen::MatrixXd transitions)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      rmax_(rmax),
      rewards_(std::move(rewards)),
      transitions_(std::move(transitions)) {
    if (n_states_ < 1 || n_actions_ < 1) throw std::invalid_argument("MDP needs at least one state and one action");
    const auto pairs = static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_);
    if (rewards_.size() != pairs) throw std::invalid_argument("reward table must have one distribution per (s,a)");
    if (transitions_.rows() != static_cast<Eigen::Index>(pairs) || transitions_.cols() != n_states_)
        throw std::invalid_argument("transition table must be (S*A) x S");
    for (const auto& r : rewards_)
        if (r.atoms().empty()) throw std::invalid_argument("reward distribution without atoms");

    support_.resize(pairs);
    cumulative_.resize(pairs);
    for (std::size_t row = 0; row < pairs; ++row) {
        double running = 0.0;
        for (int next = 0; next < n_states_; ++next) {
            const double p = transitions_(static_cast<Eigen::Index>(row), next);
            if (p > 0.0) {
                running += p;
                support_[row].push_back(next);
                cumulative_[row].push_back(running);
            }
        }
        if (support_[row].empty()) {
            // Invalid row; keep sampling defined and let validate_mdp report it.
            support_[row].push_back(0);
            cumulative_[row].push_back(1.0);
        }
    }
}

int FiniteMdp::sample_next(int s, int a, double u) const {
    const auto row = sa_index(s, a, n_actions_);
    const auto& support = support_[row];
    if (support.size() == 1) return support.front();
    return support[find_bucket(cumulative_[row], u)];
}

bool FiniteMdp::is_deterministic() const {
    for (std::size_t row = 0; row < support_.size(); ++row)
        if (support_[row].size() != 1 || rewards_[row].atoms().size() != 1) return false;
    return true;
}

std::vector<Violation> validate_mdp(const FiniteMdp& mdp) {
    std::vector<Violation> report;
    if (!(mdp.gamma() >= 0.0 && mdp.gamma() < 1.0))
        report.push_back({-1, -1, "gamma " + format_double(mdp.gamma()) + " outside [0,1)"});
    if (!(mdp.rmax() >= 0.0)) report.push_back({-1, -1, "rmax " + format_double(mdp.rmax()) + " is negative"});

    for (int s = 0; s < mdp.n_states(); ++s) {
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const std::string where = " at (" + std::to_string(s) + "," + std::to_string(a) + ")";
            const auto row = mdp.transition_row(s, a);
            for (int next = 0; next < mdp.n_states(); ++next) {
                if (!(row(next) >= 0.0))
                    report.push_back({s, a, "negative transition probability " + format_double(row(next)) + " to " +
                                                std::to_string(next) + where});
            }
            const double row_sum = row.sum();
            if (!(std::abs(row_sum - 1.0) <= kProbabilityTolerance))
                report.push_back({s, a, "row sum " + format_double(row_sum) + " != 1" + where});

            double prob_sum = 0.0;
            for (const auto& atom : mdp.reward(s, a).atoms()) {
                prob_sum += atom.prob;
                if (!(atom.prob >= 0.0))
                    report.push_back({s, a, "negative reward probability " + format_double(atom.prob) + where});
                if (!std::isfinite(atom.value) || atom.value < 0.0)
                    report.push_back({s, a, "reward atom " + format_double(atom.value) + " < 0" + where});
                else if (atom.value > mdp.rmax())
                    report.push_back({s, a, "reward atom " + format_double(atom.value) + " > rmax " +
                                                format_double(mdp.rmax()) + where});
            }
            if (!(std::abs(prob_sum - 1.0) <= kProbabilityTolerance))
                report.push_back({s, a, "reward probabilities sum " + format_double(prob_sum) + " != 1" + where});
        }
    }
    return report;
}

Policy Policy::deterministic(std::vector<int> actions, int n_actions) {
    if (n_actions < 1) throw std::invalid_argument("policy needs at least one action");
    Policy p;
    p.deterministic_ = true;
    p.probs_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw std::invalid_argument("deterministic action index out of range at state " + std::to_string(s));
        p.probs_(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    p.actions_ = std::move(actions);
    return p;
}

Policy Policy::stochastic(Eigen::MatrixXd probs) {
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        if ((probs.row(s).array() < 0.0).any() || !probs.row(s).allFinite())
            throw std::invalid_argument("policy row " + std::to_string(s) + " has invalid entries");
        if (std::abs(probs.row(s).sum() - 1.0) > kProbabilityTolerance)
            throw std::invalid_argument("policy row " + std::to_string(s) + " does not sum to 1");
    }
    Policy p;
    p.deterministic_ = false;
    p.probs_ = std::move(probs);
    p.cumulative_ = p.probs_;
    for (Eigen::Index s = 0; s < p.cumulative_.rows(); ++s)
        for (Eigen::Index a = 1; a < p.cumulative_.cols(); ++a) p.cumulative_(s, a) += p.cumulative_(s, a - 1);
    return p;
}

Policy Policy::uniform(int n_states, int n_actions) {
    return stochastic(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

int Policy::action(int s) const {
    if (!deterministic_) throw std::logic_error("action() called on a stochastic policy");
    return actions_[static_cast<std::size_t>(s)];
}

int Policy::sample_action(int s, double u) const {
    if (deterministic_) return actions_[static_cast<std::size_t>(s)];
    const auto n = cumulative_.cols();
    for (Eigen::Index a = 0; a < n; ++a)
        if (u < cumulative_(s, a) && probs_(s, a) > 0.0) return static_cast<int>(a);
    for (Eigen::Index a = n - 1; a >= 0; --a)
        if (probs_(s, a) > 0.0) return static_cast<int>(a);
    return 0;
}

bool Policy::operator==(const Policy& other) const {
    if (deterministic_ && other.deterministic_) return actions_ == other.actions_;
    return probs_.rows() == other.probs_.rows() && probs_.cols() == other.probs_.cols() && probs_ == other.probs_;
}

Eigen::Index dimension(const FiniteMdp& mdp, ValueKind kind) {
    return kind == ValueKind::StateValue ? mdp.n_states()
                                         : static_cast<Eigen::Index>(mdp.n_states()) * mdp.n_actions();
}

bool FunctionPoint::is_realizable(const FiniteMdp& mdp) const {
    return all_finite() && (values.array() >= 0.0).all() && (values.array() <= mdp.value_bound()).all();
}

Eigen::VectorXd mean_reward_vector(const FiniteMdp& mdp) {
    Eigen::VectorXd r(dimension(mdp, ValueKind::ActionValue));
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) r(static_cast<Eigen::Index>(sa_index(s, a, mdp.n_actions()))) = mdp.mean_reward(s, a);
    return r;
}

Eigen::VectorXd policy_reward_vector(const FiniteMdp& mdp, const Policy& policy) {
    require_policy_shape(mdp, policy);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) r(s) += policy.prob(s, a) * mdp.mean_reward(s, a);
    return r;
}

Eigen::MatrixXd policy_transition_matrix(const FiniteMdp& mdp, const Policy& policy) {
    require_policy_shape(mdp, policy);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a)
            if (policy.prob(s, a) > 0.0) p.row(s) += policy.prob(s, a) * mdp.transition_row(s, a);
    return p;
}

Eigen::MatrixXd policy_transition_matrix_sa(const FiniteMdp& mdp, const Policy& policy) {
    require_policy_shape(mdp, policy);
    const int n_a = mdp.n_actions();
    const auto d = dimension(mdp, ValueKind::ActionValue);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < n_a; ++a)
            for (int next = 0; next < mdp.n_states(); ++next) {
                const double ps = mdp.transition(s, a, next);
                if (ps == 0.0) continue;
                for (int b = 0; b < n_a; ++b)
                    p(static_cast<Eigen::Index>(sa_index(s, a, n_a)), static_cast<Eigen::Index>(sa_index(next, b, n_a))) +=
                        ps * policy.prob(next, b);
            }
    return p;
}

FunctionPoint bellman_policy_backup(const FiniteMdp& mdp, const Policy& policy, const FunctionPoint& f) {
    require_kind(mdp, f);
    require_policy_shape(mdp, policy);
    const double gamma = mdp.gamma();
    const int n_a = mdp.n_actions();
    if (f.kind == ValueKind::StateValue) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(mdp.n_states());
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < n_a; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                out(s) += pa * (mdp.mean_reward(s, a) + gamma * mdp.transition_row(s, a).dot(f.values));
            }
        return FunctionPoint::state_values(std::move(out));
    }
    // v(s') = sum_a' pi(a'|s') q(s',a')
    Eigen::VectorXd next_value = Eigen::VectorXd::Zero(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < n_a; ++a) next_value(s) += policy.prob(s, a) * f.values(static_cast<Eigen::Index>(sa_index(s, a, n_a)));
    Eigen::VectorXd out(f.size());
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < n_a; ++a)
            out(static_cast<Eigen::Index>(sa_index(s, a, n_a))) = mdp.mean_reward(s, a) + gamma * mdp.transition_row(s, a).dot(next_value);
    return FunctionPoint::action_values(std::move(out));
}

FunctionPoint bellman_optimality_backup(const FiniteMdp& mdp, const FunctionPoint& f) {
    require_kind(mdp, f);
    const double gamma = mdp.gamma();
    const int n_a = mdp.n_actions();
    if (f.kind == ValueKind::StateValue) {
        Eigen::VectorXd out(mdp.n_states());
        for (int s = 0; s < mdp.n_states(); ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < n_a; ++a)
                best = std::max(best, mdp.mean_reward(s, a) + gamma * mdp.transition_row(s, a).dot(f.values));
            out(s) = best;
        }
        return FunctionPoint::state_values(std::move(out));
    }
    Eigen::VectorXd next_value(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) next_value(s) = f.values.segment(static_cast<Eigen::Index>(sa_index(s, 0, n_a)), n_a).maxCoeff();
    Eigen::VectorXd out(f.size());
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < n_a; ++a)
            out(static_cast<Eigen::Index>(sa_index(s, a, n_a))) = mdp.mean_reward(s, a) + gamma * mdp.transition_row(s, a).dot(next_value);
    return FunctionPoint::action_values(std::move(out));
}

PolicyValues exact_policy_values(const FiniteMdp& mdp, const Policy& policy) {
    require_policy_shape(mdp, policy);
    const auto n = mdp.n_states();
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * policy_transition_matrix(mdp, policy);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    if (std::abs(lu.determinant()) < 1e-300) throw std::runtime_error("internal fault: singular policy evaluation system");
    Eigen::VectorXd v = lu.solve(policy_reward_vector(mdp, policy));

    const int n_a = mdp.n_actions();
    Eigen::VectorXd q(dimension(mdp, ValueKind::ActionValue));
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < n_a; ++a)
            q(static_cast<Eigen::Index>(sa_index(s, a, n_a))) = mdp.mean_reward(s, a) + mdp.gamma() * mdp.transition_row(s, a).dot(v);
    return {FunctionPoint::state_values(std::move(v)), FunctionPoint::action_values(std::move(q))};
}

Policy greedy_policy(const FunctionPoint& q, int n_actions) {
    if (q.kind != ValueKind::ActionValue) throw std::invalid_argument("greedy_policy needs an action-value point");
    if (n_actions < 1 || q.size() % n_actions != 0) throw std::invalid_argument("action-value size is not a multiple of |A|");
    if (!q.all_finite()) throw std::invalid_argument("greedy_policy: non-finite q-values");
    const auto n_states = static_cast<int>(q.size() / n_actions);
    std::vector<int> actions(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s) {
        int best = 0;
        double best_value = q.values(static_cast<Eigen::Index>(sa_index(s, 0, n_actions)));
        for (int a = 1; a < n_actions; ++a) {
            const double value = q.values(static_cast<Eigen::Index>(sa_index(s, a, n_actions)));
            if (value > best_value) {
                best = a;
                best_value = value;
            }
        }
        actions[static_cast<std::size_t>(s)] = best;
    }
    return Policy::deterministic(std::move(actions), n_actions);
}

std::vector<PolicyIterationStep> policy_iteration(const FiniteMdp& mdp, const Policy& pi0) {
    if (!pi0.is_deterministic()) throw std::invalid_argument("policy_iteration starts from a deterministic policy");
    require_policy_shape(mdp, pi0);
    std::vector<PolicyIterationStep> path;
    std::set<std::vector<int>> seen;
    Policy current = pi0;
    while (true) {
        auto values = exact_policy_values(mdp, current);
        seen.insert(current.actions());
        Policy next = greedy_policy(values.q, mdp.n_actions());
        path.push_back({current, std::move(values.q)});
        if (next == current) break;
        // Strict improvement means no revisits; a revisit signals numerical trouble.
        if (seen.count(next.actions()) != 0) throw std::runtime_error("policy iteration cycled");
        current = std::move(next);
    }
    return path;
}

PolicyIterationStep optimal_policy(const FiniteMdp& mdp) {
    auto path = policy_iteration(mdp, Policy::deterministic(std::vector<int>(static_cast<std::size_t>(mdp.n_states()), 0), mdp.n_actions()));
    return path.back();
}

}  // namespace rlchain
