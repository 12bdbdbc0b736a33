#include "rlchain/operators.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rlchain {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 8> kAlgorithmNames{{
    {Algorithm::TD0, "TD0"},
    {Algorithm::MC, "MC"},
    {Algorithm::TDLambda, "TDLambda"},
    {Algorithm::QLearning, "QLearning"},
    {Algorithm::Sarsa, "Sarsa"},
    {Algorithm::ExpectedSarsa, "ExpectedSarsa"},
    {Algorithm::DoubleQLearning, "DoubleQLearning"},
    {Algorithm::OPI, "OPI"},
}};

bool needs_lambda(Algorithm a) { return a == Algorithm::TDLambda; }
bool needs_epsilon(Algorithm a) { return a == Algorithm::Sarsa || a == Algorithm::ExpectedSarsa; }
bool needs_p(Algorithm a) { return a == Algorithm::DoubleQLearning; }
bool needs_policy(Algorithm a) { return is_evaluation(a) || needs_epsilon(a); }
bool needs_horizon(Algorithm a) { return uses_trajectories(a) || a == Algorithm::OPI; }

void check_presence(bool present, bool needed, std::string_view field, Algorithm a) {
    if (present == needed) return;
    throw std::invalid_argument(std::string(field) + (needed ? " is required by " : " is not used by ") +
                                std::string(to_string(a)));
}

// Lowest index of the maximum over a contiguous block of action values.
inline int argmax_block(const double* q, int n_actions) {
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

inline double max_block(const double* q, int n_actions) { return q[argmax_block(q, n_actions)]; }

void require_width(std::span<const double> f, Eigen::Index width) {
    if (static_cast<Eigen::Index>(f.size()) != width)
        throw std::invalid_argument("point width " + std::to_string(f.size()) + " does not match " + std::to_string(width));
}

// Mean and variance of the truncated return functional, started at every state.
// Backward recursion over time with the variance split by the law of total
// variance, which avoids the cancellation of E[Y^2] - E[Y]^2.
struct FunctionalMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

FunctionalMoments functional_moments(const FiniteMdp& mdp, const Policy& policy, const ReturnWeights& w,
                                     const Eigen::VectorXd& f) {
    const int n_s = mdp.n_states();
    const int n_a = mdp.n_actions();
    Eigen::VectorXd mean_next = Eigen::VectorXd::Zero(n_s);
    Eigen::VectorXd var_next = Eigen::VectorXd::Zero(n_s);
    Eigen::VectorXd mean(n_s), var(n_s), g(n_s);
    for (int k = w.horizon() - 1; k >= 0; --k) {
        const double rho = w.reward_weight[static_cast<std::size_t>(k)];
        const double nu = w.value_weight[static_cast<std::size_t>(k + 1)];
        g = nu * f + mean_next;
        for (int s = 0; s < n_s; ++s) {
            double m = 0.0;
            for (int a = 0; a < n_a; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                m += pa * (rho * mdp.mean_reward(s, a) + mdp.transition_row(s, a).dot(g));
            }
            double v = 0.0;
            for (int a = 0; a < n_a; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                const auto row = mdp.transition_row(s, a);
                for (const auto& atom : mdp.reward(s, a).atoms()) {
                    if (atom.prob == 0.0) continue;
                    for (int next = 0; next < n_s; ++next) {
                        const double pn = row(next);
                        if (pn == 0.0) continue;
                        const double dev = rho * atom.value + g(next) - m;
                        v += pa * atom.prob * pn * dev * dev;
                    }
                }
                v += pa * row.dot(var_next);
            }
            mean(s) = m;
            var(s) = v;
        }
        mean_next = mean;
        var_next = var;
    }
    return {mean_next, var_next};
}

// Mean and variance of a finite outcome list given as (value, prob) pairs.
struct Accumulator {
    std::vector<Atom> outcomes;
    void add(double value, double prob) {
        if (prob > 0.0) outcomes.push_back({value, prob});
    }
    double mean() const {
        double m = 0.0;
        for (const auto& o : outcomes) m += o.prob * o.value;
        return m;
    }
    double variance() const {
        const double m = mean();
        double v = 0.0;
        for (const auto& o : outcomes) v += o.prob * (o.value - m) * (o.value - m);
        return v;
    }
};

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    for (const auto& [a, name] : kAlgorithmNames)
        if (a == algorithm) return name;
    return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
    for (const auto& [a, n] : kAlgorithmNames)
        if (n == name) return a;
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

bool is_evaluation(Algorithm a) { return a == Algorithm::TD0 || a == Algorithm::MC || a == Algorithm::TDLambda; }
bool uses_trajectories(Algorithm a) { return a == Algorithm::MC || a == Algorithm::TDLambda; }

ValueKind value_kind(Algorithm a) { return is_evaluation(a) ? ValueKind::StateValue : ValueKind::ActionValue; }

Eigen::Index point_width(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    const auto d = dimension(mdp, value_kind(spec.algorithm));
    return spec.algorithm == Algorithm::DoubleQLearning ? 2 * d : d;
}

AlgorithmSpec AlgorithmSpec::td0(double alpha, Policy policy) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::TD0;
    s.alpha = alpha;
    s.base_policy = std::move(policy);
    return s;
}

AlgorithmSpec AlgorithmSpec::monte_carlo(double alpha, Policy policy, double tol) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::MC;
    s.alpha = alpha;
    s.base_policy = std::move(policy);
    s.horizon_tolerance = tol;
    return s;
}

AlgorithmSpec AlgorithmSpec::td_lambda(double alpha, double lambda, Policy policy, double tol) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::TDLambda;
    s.alpha = alpha;
    s.lambda = lambda;
    s.base_policy = std::move(policy);
    s.horizon_tolerance = tol;
    return s;
}

AlgorithmSpec AlgorithmSpec::q_learning(double alpha) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::QLearning;
    s.alpha = alpha;
    return s;
}

AlgorithmSpec AlgorithmSpec::sarsa(double alpha, double epsilon, Policy base) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::Sarsa;
    s.alpha = alpha;
    s.epsilon = epsilon;
    s.base_policy = std::move(base);
    return s;
}

AlgorithmSpec AlgorithmSpec::expected_sarsa(double alpha, double epsilon, Policy base) {
    auto s = sarsa(alpha, epsilon, std::move(base));
    s.algorithm = Algorithm::ExpectedSarsa;
    return s;
}

AlgorithmSpec AlgorithmSpec::double_q_learning(double alpha, double p) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::DoubleQLearning;
    s.alpha = alpha;
    s.p = p;
    return s;
}

AlgorithmSpec AlgorithmSpec::opi(double alpha, double tol) {
    AlgorithmSpec s;
    s.algorithm = Algorithm::OPI;
    s.alpha = alpha;
    s.horizon_tolerance = tol;
    return s;
}

void validate_spec(const AlgorithmSpec& spec) {
    const auto a = spec.algorithm;
    if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
    check_presence(spec.lambda.has_value(), needs_lambda(a), "lambda", a);
    check_presence(spec.epsilon.has_value(), needs_epsilon(a), "epsilon", a);
    check_presence(spec.p.has_value(), needs_p(a), "p", a);
    check_presence(spec.base_policy.has_value(), needs_policy(a), "base_policy", a);
    check_presence(spec.horizon_tolerance.has_value(), needs_horizon(a), "horizon_tolerance", a);
    if (spec.lambda && !(*spec.lambda >= 0.0 && *spec.lambda < 1.0)) throw std::invalid_argument("lambda must lie in [0,1)");
    if (spec.epsilon && !(*spec.epsilon >= 0.0 && *spec.epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
    if (spec.p && !(*spec.p > 0.0 && *spec.p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
    if (spec.horizon_tolerance && !(*spec.horizon_tolerance > 0.0)) throw std::invalid_argument("horizon_tolerance must be > 0");
}

void validate_spec(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    validate_spec(spec);
    if (spec.base_policy && (spec.base_policy->n_states() != mdp.n_states() || spec.base_policy->n_actions() != mdp.n_actions()))
        throw std::invalid_argument("base_policy shape does not match the MDP");
}

int truncation_horizon(double gamma, double rmax, double tol) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("truncation_horizon: gamma must lie in [0,1)");
    if (!(tol > 0.0)) throw std::invalid_argument("truncation_horizon: tol must be > 0");
    if (gamma == 0.0 || rmax <= 0.0) return 1;
    const double bound = rmax / (1.0 - gamma);
    double h = std::ceil(std::log(tol * (1.0 - gamma) / rmax) / std::log(gamma));
    if (!(h >= 1.0)) h = 1.0;
    auto horizon = static_cast<int>(h);
    // The ceiling can land on equality; the bound must be strict.
    while (std::pow(gamma, horizon) * bound >= tol) ++horizon;
    return horizon;
}

int spec_horizon(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    if (!spec.horizon_tolerance) throw std::invalid_argument("spec has no horizon_tolerance");
    return truncation_horizon(mdp.gamma(), mdp.rmax(), *spec.horizon_tolerance);
}

double sample_return(const FiniteMdp& mdp, const Policy& policy, int s, int a, int horizon, Generator& gen) {
    if (horizon < 1) throw std::invalid_argument("sample_return: horizon must be >= 1");
    double total = 0.0;
    double discount = 1.0;
    int state = s;
    int action = a;
    for (int t = 0; t < horizon; ++t) {
        if (t > 0) action = policy.sample_action(state, gen.uniform());
        total += discount * mdp.sample_reward(state, action, gen.uniform());
        state = mdp.sample_next(state, action, gen.uniform());
        discount *= mdp.gamma();
    }
    return total;
}

ReturnWeights return_weights(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    const double gamma = mdp.gamma();
    ReturnWeights w;
    switch (spec.algorithm) {
        case Algorithm::TD0:
            w.reward_weight = {1.0};
            w.value_weight = {0.0, gamma};
            return w;
        case Algorithm::MC: {
            const int h = spec_horizon(spec, mdp);
            w.reward_weight.resize(static_cast<std::size_t>(h));
            w.value_weight.assign(static_cast<std::size_t>(h) + 1, 0.0);
            double discount = 1.0;
            for (int i = 0; i < h; ++i, discount *= gamma) w.reward_weight[static_cast<std::size_t>(i)] = discount;
            return w;
        }
        case Algorithm::TDLambda: {
            // n-step weights (1-l) l^{n-1} for n < H and l^{H-1} on G_H. Reward r_i
            // appears in every G_n with n > i, so its total weight is l^i gamma^i.
            const int h = spec_horizon(spec, mdp);
            const double lambda = spec.lambda.value();
            w.reward_weight.resize(static_cast<std::size_t>(h));
            w.value_weight.assign(static_cast<std::size_t>(h) + 1, 0.0);
            double lg = 1.0;
            for (int i = 0; i < h; ++i, lg *= lambda * gamma) w.reward_weight[static_cast<std::size_t>(i)] = lg;
            double lambda_pow = 1.0;  // lambda^{n-1}
            double gamma_pow = gamma; // gamma^n
            for (int n = 1; n <= h; ++n) {
                const double weight = n < h ? (1.0 - lambda) * lambda_pow : lambda_pow;
                w.value_weight[static_cast<std::size_t>(n)] = weight * gamma_pow;
                lambda_pow *= lambda;
                gamma_pow *= gamma;
            }
            return w;
        }
        default:
            throw std::invalid_argument("return_weights: " + std::string(to_string(spec.algorithm)) + " is not a return functional");
    }
}

TargetSampler::TargetSampler(const AlgorithmSpec& spec, const FiniteMdp& mdp)
    : spec_(spec), mdp_(&mdp), width_(point_width(spec, mdp)), table_size_(dimension(mdp, value_kind(spec.algorithm))) {
    validate_spec(spec_, mdp);
    if (spec_.algorithm == Algorithm::OPI) throw std::invalid_argument("OPI targets are produced by opi_step");
    if (is_evaluation(spec_.algorithm)) weights_ = return_weights(spec_, mdp);
}

template <int K>
void TargetSampler::sample_impl(const double* const* f, double* const* out, const RngStream& key) const {
    const FiniteMdp& mdp = *mdp_;
    const int n_s = mdp.n_states();
    const int n_a = mdp.n_actions();
    const double gamma = mdp.gamma();

    switch (spec_.algorithm) {
        case Algorithm::TD0:
        case Algorithm::MC:
        case Algorithm::TDLambda: {
            const Policy& policy = *spec_.base_policy;
            const int h = weights_.horizon();
            for (int s = 0; s < n_s; ++s) {
                Generator gen = key.substream(static_cast<std::uint64_t>(s));
                double reward_part = 0.0;
                std::array<double, K> value_part{};
                int state = s;
                for (int i = 0; i < h; ++i) {
                    const int a = policy.sample_action(state, gen.uniform());
                    const double r = mdp.sample_reward(state, a, gen.uniform());
                    const int next = mdp.sample_next(state, a, gen.uniform());
                    reward_part += weights_.reward_weight[static_cast<std::size_t>(i)] * r;
                    const double nu = weights_.value_weight[static_cast<std::size_t>(i + 1)];
                    if (nu != 0.0)
                        for (int k = 0; k < K; ++k) value_part[static_cast<std::size_t>(k)] += nu * f[k][next];
                    state = next;
                }
                for (int k = 0; k < K; ++k) out[k][s] = reward_part + value_part[static_cast<std::size_t>(k)];
            }
            return;
        }
        case Algorithm::QLearning:
            for (int s = 0; s < n_s; ++s)
                for (int a = 0; a < n_a; ++a) {
                    const auto c = sa_index(s, a, n_a);
                    Generator gen = key.substream(c);
                    const double r = mdp.sample_reward(s, a, gen.uniform());
                    const int next = mdp.sample_next(s, a, gen.uniform());
                    for (int k = 0; k < K; ++k) out[k][c] = r + gamma * max_block(f[k] + sa_index(next, 0, n_a), n_a);
                }
            return;
        case Algorithm::Sarsa: {
            const Policy& base = *spec_.base_policy;
            const double eps = *spec_.epsilon;
            for (int s = 0; s < n_s; ++s)
                for (int a = 0; a < n_a; ++a) {
                    const auto c = sa_index(s, a, n_a);
                    Generator gen = key.substream(c);
                    const double r = mdp.sample_reward(s, a, gen.uniform());
                    const int next = mdp.sample_next(s, a, gen.uniform());
                    const bool explore = gen.uniform() < eps;
                    const int next_action = base.sample_action(next, gen.uniform());
                    for (int k = 0; k < K; ++k) {
                        const double* row = f[k] + sa_index(next, 0, n_a);
                        out[k][c] = r + gamma * (explore ? row[next_action] : max_block(row, n_a));
                    }
                }
            return;
        }
        case Algorithm::ExpectedSarsa: {
            const Policy& base = *spec_.base_policy;
            const double eps = *spec_.epsilon;
            for (int s = 0; s < n_s; ++s)
                for (int a = 0; a < n_a; ++a) {
                    const auto c = sa_index(s, a, n_a);
                    Generator gen = key.substream(c);
                    const double r = mdp.sample_reward(s, a, gen.uniform());
                    const int next = mdp.sample_next(s, a, gen.uniform());
                    for (int k = 0; k < K; ++k) {
                        const double* row = f[k] + sa_index(next, 0, n_a);
                        double base_value = 0.0;
                        for (int b = 0; b < n_a; ++b) base_value += base.prob(next, b) * row[b];
                        out[k][c] = r + gamma * ((1.0 - eps) * max_block(row, n_a) + eps * base_value);
                    }
                }
            return;
        }
        case Algorithm::DoubleQLearning: {
            const auto d = static_cast<std::size_t>(table_size_);
            Generator selector = key.substream(d);
            const bool update_a = selector.bernoulli(*spec_.p);
            const std::size_t sel = update_a ? 0 : d;
            const std::size_t other = update_a ? d : 0;
            for (int s = 0; s < n_s; ++s)
                for (int a = 0; a < n_a; ++a) {
                    const auto c = sa_index(s, a, n_a);
                    Generator gen = key.substream(c);
                    const double r = mdp.sample_reward(s, a, gen.uniform());
                    const int next = mdp.sample_next(s, a, gen.uniform());
                    const auto next_row = sa_index(next, 0, n_a);
                    for (int k = 0; k < K; ++k) {
                        const int best = argmax_block(f[k] + sel + next_row, n_a);
                        out[k][sel + c] = r + gamma * f[k][other + next_row + static_cast<std::size_t>(best)];
                        out[k][other + c] = f[k][other + c];
                    }
                }
            return;
        }
        case Algorithm::OPI:
            break;
    }
    throw std::logic_error("unreachable algorithm in TargetSampler");
}

void TargetSampler::sample(std::span<const double> f, std::span<double> out, const RngStream& key) const {
    require_width(f, width_);
    require_width(out, width_);
    const double* fp[1] = {f.data()};
    double* op[1] = {out.data()};
    sample_impl<1>(fp, op, key);
}

void TargetSampler::sample_pair(std::span<const double> f1, std::span<double> out1, std::span<const double> f2,
                                std::span<double> out2, const RngStream& key) const {
    require_width(f1, width_);
    require_width(out1, width_);
    require_width(f2, width_);
    require_width(out2, width_);
    const double* fp[2] = {f1.data(), f2.data()};
    double* op[2] = {out1.data(), out2.data()};
    sample_impl<2>(fp, op, key);
}

FunctionPoint apply_empirical_operator(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f,
                                       const RngStream& key) {
    if (spec.algorithm == Algorithm::DoubleQLearning) throw std::invalid_argument("DoubleQLearning acts on ExtendedPoint");
    if (f.kind != value_kind(spec.algorithm))
        throw std::invalid_argument(std::string(to_string(spec.algorithm)) + ": wrong function kind");
    TargetSampler sampler(spec, mdp);
    FunctionPoint target{f.kind, Eigen::VectorXd(f.size())};
    sampler.sample({f.values.data(), static_cast<std::size_t>(f.size())},
                   {target.values.data(), static_cast<std::size_t>(target.size())}, key);
    return target;
}

ExtendedPoint apply_empirical_operator(const AlgorithmSpec& spec, const FiniteMdp& mdp, const ExtendedPoint& f,
                                       const RngStream& key) {
    if (spec.algorithm != Algorithm::DoubleQLearning) throw std::invalid_argument("ExtendedPoint is only used by DoubleQLearning");
    if (f.qa.kind != ValueKind::ActionValue || f.qb.kind != ValueKind::ActionValue || f.qa.size() != f.qb.size())
        throw std::invalid_argument("ExtendedPoint tables must be action-value tables of equal size");
    TargetSampler sampler(spec, mdp);
    const auto d = f.qa.size();
    Eigen::VectorXd packed(2 * d);
    packed << f.qa.values, f.qb.values;
    Eigen::VectorXd target(2 * d);
    sampler.sample({packed.data(), static_cast<std::size_t>(packed.size())},
                   {target.data(), static_cast<std::size_t>(target.size())}, key);
    return {FunctionPoint::action_values(target.head(d)), FunctionPoint::action_values(target.tail(d))};
}

void synchronous_update(std::span<double> f, std::span<const double> target, double alpha) {
    if (f.size() != target.size()) throw std::invalid_argument("synchronous_update: shape mismatch");
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (target[i] != f[i]) f[i] = keep * f[i] + alpha * target[i];
}

FunctionPoint synchronous_update(const FunctionPoint& f, const FunctionPoint& target, double alpha) {
    if (f.kind != target.kind) throw std::invalid_argument("synchronous_update: kind mismatch");
    FunctionPoint out = f;
    synchronous_update({out.values.data(), static_cast<std::size_t>(out.size())},
                       {target.values.data(), static_cast<std::size_t>(target.size())}, alpha);
    return out;
}

ExtendedPoint synchronous_update(const ExtendedPoint& f, const ExtendedPoint& target, double alpha) {
    return {synchronous_update(f.qa, target.qa, alpha), synchronous_update(f.qb, target.qb, alpha)};
}

Policy epsilon_greedy_mixture(const FunctionPoint& q, const Policy& base, double epsilon) {
    const Policy greedy = greedy_policy(q, base.n_actions());
    return Policy::stochastic((1.0 - epsilon) * greedy.probs() + epsilon * base.probs());
}

FunctionPoint expected_target(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f) {
    validate_spec(spec, mdp);
    if (f.kind != value_kind(spec.algorithm) || f.size() != dimension(mdp, f.kind))
        throw std::invalid_argument("expected_target: point does not match the algorithm");
    switch (spec.algorithm) {
        case Algorithm::TD0:
        case Algorithm::MC:
        case Algorithm::TDLambda:
            return FunctionPoint::state_values(functional_moments(mdp, *spec.base_policy, return_weights(spec, mdp), f.values).mean);
        case Algorithm::QLearning:
            return bellman_optimality_backup(mdp, f);
        case Algorithm::Sarsa:
        case Algorithm::ExpectedSarsa:
            return bellman_policy_backup(mdp, epsilon_greedy_mixture(f, *spec.base_policy, *spec.epsilon), f);
        default:
            throw std::invalid_argument("expected_target is not available for " + std::string(to_string(spec.algorithm)));
    }
}

Eigen::MatrixXd noise_covariance(const AlgorithmSpec& spec, const FiniteMdp& mdp, const FunctionPoint& f) {
    validate_spec(spec, mdp);
    if (f.kind != value_kind(spec.algorithm) || f.size() != dimension(mdp, f.kind))
        throw std::invalid_argument("noise_covariance: point does not match the algorithm");
    const int n_s = mdp.n_states();
    const int n_a = mdp.n_actions();
    const double gamma = mdp.gamma();
    switch (spec.algorithm) {
        case Algorithm::TD0:
        case Algorithm::MC:
        case Algorithm::TDLambda: {
            auto moments = functional_moments(mdp, *spec.base_policy, return_weights(spec, mdp), f.values);
            return moments.variance.cwiseMax(0.0).asDiagonal();
        }
        case Algorithm::QLearning:
        case Algorithm::Sarsa:
        case Algorithm::ExpectedSarsa: {
            Eigen::VectorXd var(f.size());
            const double eps = spec.epsilon.value_or(0.0);
            for (int s = 0; s < n_s; ++s)
                for (int a = 0; a < n_a; ++a) {
                    Accumulator acc;
                    for (const auto& atom : mdp.reward(s, a).atoms())
                        for (int next = 0; next < n_s; ++next) {
                            const double p = atom.prob * mdp.transition(s, a, next);
                            if (p == 0.0) continue;
                            const double* row = f.values.data() + sa_index(next, 0, n_a);
                            const double greedy_value = max_block(row, n_a);
                            if (spec.algorithm == Algorithm::QLearning) {
                                acc.add(atom.value + gamma * greedy_value, p);
                            } else if (spec.algorithm == Algorithm::ExpectedSarsa) {
                                double base_value = 0.0;
                                for (int b = 0; b < n_a; ++b) base_value += spec.base_policy->prob(next, b) * row[b];
                                acc.add(atom.value + gamma * ((1.0 - eps) * greedy_value + eps * base_value), p);
                            } else {
                                acc.add(atom.value + gamma * greedy_value, p * (1.0 - eps));
                                for (int b = 0; b < n_a; ++b)
                                    acc.add(atom.value + gamma * row[b], p * eps * spec.base_policy->prob(next, b));
                            }
                        }
                    var(static_cast<Eigen::Index>(sa_index(s, a, n_a))) = acc.variance();
                }
            return var.asDiagonal();
        }
        default:
            throw std::invalid_argument("noise_covariance is not available for " + std::string(to_string(spec.algorithm)));
    }
}

double contraction_factor(const AlgorithmSpec& spec, double gamma) {
    const double a = spec.alpha;
    switch (spec.algorithm) {
        case Algorithm::MC:
            return 1.0 - a;
        case Algorithm::TDLambda: {
            const double l = spec.lambda.value();
            return 1.0 - a + a * gamma * (1.0 - l) / (1.0 - l * gamma);
        }
        case Algorithm::TD0:
        case Algorithm::QLearning:
        case Algorithm::Sarsa:
        case Algorithm::ExpectedSarsa:
            return 1.0 - a + a * gamma;
        case Algorithm::DoubleQLearning:
            return 0.5 * (2.0 - a + a * gamma);
        case Algorithm::OPI:
            break;
    }
    throw std::invalid_argument("no contraction factor for " + std::string(to_string(spec.algorithm)));
}

AffineMap effective_affine_map(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    validate_spec(spec, mdp);
    if (!is_evaluation(spec.algorithm))
        throw std::invalid_argument("effective_affine_map: expected operator of " + std::string(to_string(spec.algorithm)) +
                                    " is not affine");
    const auto n = mdp.n_states();
    const Eigen::MatrixXd p = policy_transition_matrix(mdp, *spec.base_policy);
    const Eigen::VectorXd r = policy_reward_vector(mdp, *spec.base_policy);
    const ReturnWeights w = return_weights(spec, mdp);

    // A = sum_n value_weight[n] P^n,  b = sum_i reward_weight[i] P^i r.
    AffineMap map{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < w.horizon(); ++i) {
        map.b += w.reward_weight[static_cast<std::size_t>(i)] * (power * r);
        power = power * p;
        map.A += w.value_weight[static_cast<std::size_t>(i + 1)] * power;
    }
    return map;
}

}  // namespace rlchain
