#include "rlchain/mdp_library.hpp"

#include <cmath>
#include <stdexcept>

#include "rlchain/rng.hpp"

namespace rlchain {

namespace {

using Law = DiscreteDistribution;

Law coin(double low, double high) { return Law({{low, 0.5}, {high, 0.5}}); }

FiniteMdp single_state(int n_actions, std::vector<Law> rewards, double rmax) {
    return {1, n_actions, 0.5, rmax, std::move(rewards), Eigen::MatrixXd::Ones(n_actions, 1)};
}

// State 0 decides between two arms, state 1 absorbs.
FiniteMdp two_arm_episode(Law arm0, Law arm1, double rmax) {
    Eigen::MatrixXd p(4, 2);
    p << 0, 1,
         0, 1,
         0, 1,
         0, 1;
    return {2, 2, 0.5, rmax, {std::move(arm0), std::move(arm1), Law::dirac(0.0), Law::dirac(0.0)}, p};
}

}  // namespace

std::vector<std::string> builtin_names() { return {"M1", "M2", "M3", "M4", "M5", "M6"}; }

FiniteMdp builtin_mdp(std::string_view name) {
    if (name == "M1") return single_state(1, {Law::dirac(1.0)}, 1.0);
    if (name == "M2") return single_state(1, {coin(0.0, 2.0)}, 2.0);
    if (name == "M3") return single_state(1, {Law::dirac(0.0)}, 0.0);
    if (name == "M4") return two_arm_episode(Law::dirac(1.0), Law::dirac(0.0), 1.0);
    if (name == "M5") return two_arm_episode(coin(0.0, 2.0), Law::dirac(0.5), 2.0);
    if (name == "M6") return single_state(2, {coin(0.0, 2.0), coin(0.0, 2.0)}, 2.0);
    throw std::invalid_argument("unknown builtin MDP '" + std::string(name) + "'");
}

FiniteMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("random_mdp: sizes must be >= 1");
    const auto rows = n_states * n_actions;
    Eigen::MatrixXd p(rows, n_states);
    std::vector<Law> rewards;
    rewards.reserve(static_cast<std::size_t>(rows));
    for (int c = 0; c < rows; ++c) {
        Generator gen(derive_seed(seed, static_cast<std::uint64_t>(c)));
        for (int next = 0; next < n_states; ++next) p(c, next) = -std::log1p(-gen.uniform());
        p.row(c) /= p.row(c).sum();
        const double low = gen.uniform();
        const double high = gen.uniform();
        const double weight = 0.05 + 0.9 * gen.uniform();
        rewards.emplace_back(std::vector<Atom>{{low, weight}, {high, 1.0 - weight}});
    }
    return {n_states, n_actions, gamma, 1.0, std::move(rewards), std::move(p)};
}

}  // namespace rlchain
