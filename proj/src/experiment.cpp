#include "rlchain/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "rlchain/opi.hpp"
#include "rlchain/stationary.hpp"
#include "rlchain/transport.hpp"

namespace rlchain {

namespace fs = std::filesystem;

namespace {

// Reads experiment parameters and records the value actually used.
class Params {
public:
    Params(const Json& src, Json& echo) : src_(src), echo_(echo) {}

    bool has(const char* name) const { return src_.contains(name) && !src_.at(name).is_null(); }

    double number(const char* name, double def) { return record(name, has(name) ? read<double>(name) : def); }
    std::int64_t integer(const char* name, std::int64_t def) {
        return record(name, has(name) ? read<std::int64_t>(name) : def);
    }
    bool flag(const char* name, bool def) { return record(name, has(name) ? read<bool>(name) : def); }
    std::vector<double> numbers(const char* name, std::vector<double> def) {
        return record(name, has(name) ? read<std::vector<double>>(name) : std::move(def));
    }
    std::optional<Json> optional(const char* name) {
        if (!has(name)) return std::nullopt;
        echo_[name] = src_.at(name);
        return src_.at(name);
    }
    const Json& required(const char* name) {
        if (!has(name)) throw FormatError(std::string("config: missing field '") + name + "'");
        return src_.at(name);
    }
    Json& echo() { return echo_; }

private:
    template <class T>
    T read(const char* name) const {
        try {
            return src_.at(name).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw FormatError(std::string("config.") + name + ": wrong type");
        }
    }
    template <class T>
    T record(const char* name, T value) {
        echo_[name] = value;
        return value;
    }

    const Json& src_;
    Json& echo_;
};

bool needs_base_policy(Algorithm a) {
    return is_evaluation(a) || a == Algorithm::Sarsa || a == Algorithm::ExpectedSarsa;
}

AlgorithmSpec read_spec(Params& params, const FiniteMdp& mdp) {
    Json j = params.required("spec");
    if (!j.is_object()) throw FormatError("config.spec: expected an object");
    if (j.contains("algorithm") && j["algorithm"].is_string()) {
        try {
            const auto algorithm = algorithm_from_string(j["algorithm"].get<std::string>());
            if (needs_base_policy(algorithm) && !j.contains("base_policy")) j["base_policy"] = "uniform";
            const bool truncated = uses_trajectories(algorithm) || algorithm == Algorithm::OPI;
            if (truncated && !j.contains("horizon_tolerance")) j["horizon_tolerance"] = kDefaultHorizonTolerance;
        } catch (const std::invalid_argument&) {
            // reported by spec_from_json
        }
    }
    auto spec = spec_from_json(j, mdp);
    params.echo()["spec"] = spec_to_json(spec);
    return spec;
}

std::uint64_t count(Params& params, const char* name, std::int64_t def) {
    const auto n = params.integer(name, def);
    if (n < 1) throw FormatError(std::string("config.") + name + ": must be >= 1");
    return static_cast<std::uint64_t>(n);
}

std::string tag(const char* key, double x) { return std::string(key) + "=" + format_double(x); }

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

double mean_gap(const CoupledEnsemble& c) {
    const auto gaps = pair_gaps(c);
    double total = 0.0;
    for (double g : gaps) total += g;
    return total / static_cast<double>(gaps.size());
}

FunctionPoint evaluation_reference(const AlgorithmSpec& spec, const FiniteMdp& mdp) {
    if (!is_evaluation(spec.algorithm))
        throw std::invalid_argument("this experiment needs an evaluation algorithm (TD0, MC or TDLambda)");
    return exact_policy_values(mdp, *spec.base_policy).v;
}

void run_contract(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    auto spec = read_spec(params, mdp);
    const auto n = static_cast<Eigen::Index>(count(params, "N", 1000));
    const auto n_steps = count(params, "n_steps", 50);
    const double tolerance = params.number("tolerance", 0.02);
    const auto alphas = params.numbers("alpha_grid", {spec.alpha});

    Series gaps{"gaps", {"alpha", "step", "mean_gap", "ratio"}, {}};
    Json per_alpha = Json::array();
    for (double alpha : alphas) {
        spec.alpha = alpha;
        validate_spec(spec, mdp);
        CoupledEnsemble c(init_ensemble(Initializer::realizable_uniform(), n, spec, mdp, seed),
                          init_ensemble(Initializer::realizable_uniform(), n, spec, mdp, derive_seed(seed, 1)),
                          Coupling::IdenticalSamples);
        double before = mean_gap(c);
        gaps.add({alpha, 0.0, before, std::nan("")});
        std::vector<double> ratios;
        for (std::uint64_t t = 1; t <= n_steps; ++t) {
            c = coupled_step(c, mdp);
            const double after = mean_gap(c);
            // Once the pairs have merged there is nothing left to contract.
            const double ratio = before > 0.0 ? after / before : std::nan("");
            if (before > 0.0) ratios.push_back(ratio);
            gaps.add({alpha, static_cast<double>(t), after, ratio});
            before = after;
        }
        double mean = 0.0, sq = 0.0;
        for (double r : ratios) mean += r;
        mean = ratios.empty() ? 0.0 : mean / static_cast<double>(ratios.size());
        for (double r : ratios) sq += (r - mean) * (r - mean);
        const double se = ratios.size() > 1 ? std::sqrt(sq / static_cast<double>(ratios.size() - 1) /
                                                        static_cast<double>(ratios.size()))
                                            : 0.0;
        const double factor = contraction_factor(spec, mdp.gamma());
        out.criteria.push_back(criterion_le("ratio[" + tag("alpha", alpha) + "]", mean, factor, tolerance));
        per_alpha.push_back({{"alpha", alpha}, {"mean_ratio", mean}, {"ratio_standard_error", se},
                             {"contraction_factor", factor}, {"steps_used", ratios.size()}});
    }
    out.series.push_back(std::move(gaps));
    out.details["per_alpha"] = std::move(per_alpha);

    // Optional geometric convergence check against a long-run reference.
    if (!params.has("wasserstein_steps")) return;
    spec.alpha = alphas.front();
    std::vector<double> checkpoints = params.numbers("wasserstein_steps", {});
    std::sort(checkpoints.begin(), checkpoints.end());
    const auto reference_steps = count(params, "reference_steps", 400);
    const double fraction = params.number("allowance_fraction", 0.05);
    auto reference = init_ensemble(Initializer::realizable_uniform(), n, spec, mdp, derive_seed(seed, 2));
    advance_ensemble(reference, mdp, reference_steps);
    auto e = init_ensemble(Initializer::realizable_uniform(), n, spec, mdp, derive_seed(seed, 3));
    const double d0 = wasserstein_exact(e, reference).distance;
    const double rho = contraction_factor(spec, mdp.gamma());
    Series series{"wasserstein", {"step", "wasserstein", "bound"}, {}};
    series.add({0.0, d0, d0});
    double last = d0;
    double worst_increase = -std::numeric_limits<double>::infinity();
    for (double step : checkpoints) {
        advance_ensemble(e, mdp, static_cast<std::uint64_t>(step) - e.step_index());
        const double w = wasserstein_exact(e, reference).distance;
        const double bound = std::pow(rho, step) * d0;
        series.add({step, w, bound + fraction * d0});
        out.criteria.push_back(criterion_le("wasserstein[" + tag("n", step) + "]", w, bound, fraction * d0));
        worst_increase = std::max(worst_increase, w - last);
        last = w;
    }
    out.criteria.push_back(criterion_le("wasserstein_decreasing", worst_increase, 0.0, 0.0));
    out.series.push_back(std::move(series));
    out.details["d0"] = d0;
    out.details["rho"] = rho;
}

void run_stationary_mean(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    const auto spec = read_spec(params, mdp);
    const auto reference = evaluation_reference(spec, mdp);
    const auto n = static_cast<Eigen::Index>(count(params, "N", 10000));
    const double accuracy = params.number("burn_in_accuracy", 1e-6);
    const double allowance = params.number("allowance", 1e-5);
    const auto burn = burn_in_stationary(spec, mdp, n, seed, accuracy);
    const auto check = stationary_mean_check(burn.ensemble, reference, allowance);
    const auto mean = burn.ensemble.mean();

    Series series{"mean", {"coordinate", "mean", "reference", "standard_error"}, {}};
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        series.add({static_cast<double>(i), mean(i), reference.values(i), check.standard_error(i)});
        out.criteria.push_back(criterion_le("mean[" + std::to_string(i) + "]", std::abs(check.deviation(i)),
                                            4.0 * check.standard_error(i), allowance));
    }
    out.series.push_back(std::move(series));
    out.details["burn_in_steps"] = burn.n_steps;
    out.details["max_deviation"] = check.max_deviation;
}

void run_covariance(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    const auto spec = read_spec(params, mdp);
    evaluation_reference(spec, mdp);
    const auto n = static_cast<Eigen::Index>(count(params, "N", 100000));
    const double accuracy = params.number("burn_in_accuracy", 1e-6);
    const double tolerance = params.number("tolerance", 0.1);
    const auto burn = burn_in_stationary(spec, mdp, n, seed, accuracy);
    const auto report = covariance_report(burn.ensemble, mdp);
    const auto& sigma = report.sigma_solved;

    out.criteria.push_back(criterion_le("relative_frobenius_error", report.relative_frobenius_error, 0.0, tolerance));
    const double asymmetry = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues().minCoeff();
    out.criteria.push_back(criterion_le("sigma_symmetric_psd", std::max(asymmetry, -min_eig), 0.0, 1e-8));
    if (const auto expected = params.optional("expected_sigma")) {
        const double tol = params.number("expected_tolerance", 1e-6);
        Eigen::MatrixXd target(sigma.rows(), sigma.cols());
        try {
            if (expected->is_number()) {
                target.setConstant(expected->get<double>());
            } else {
                const auto rows = expected->get<std::vector<std::vector<double>>>();
                if (static_cast<Eigen::Index>(rows.size()) != sigma.rows()) throw FormatError("config.expected_sigma: wrong shape");
                for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
                    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != sigma.cols())
                        throw FormatError("config.expected_sigma: wrong shape");
                    for (Eigen::Index j = 0; j < sigma.cols(); ++j)
                        target(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                }
            }
        } catch (const nlohmann::json::exception&) {
            throw FormatError("config.expected_sigma: expected a number or a matrix");
        }
        out.criteria.push_back(criterion_le("expected_sigma", (sigma - target).cwiseAbs().maxCoeff(), 0.0, tol));
    }

    Series series{"covariance", {"i", "j", "sigma_solved", "sigma_empirical", "cbar"}, {}};
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        for (Eigen::Index j = 0; j < sigma.cols(); ++j)
            series.add({static_cast<double>(i), static_cast<double>(j), sigma(i, j), report.sigma_empirical(i, j),
                        report.cbar(i, j)});
    out.series.push_back(std::move(series));
    out.details["burn_in_steps"] = burn.n_steps;
    out.details["opnorm_solved"] = report.opnorm_solved;
    out.details["relative_frobenius_error"] = report.relative_frobenius_error;
}

void run_concentration(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    auto spec = read_spec(params, mdp);
    const auto reference = evaluation_reference(spec, mdp);
    const auto n = static_cast<Eigen::Index>(count(params, "N", 10000));
    const double accuracy = params.number("burn_in_accuracy", 1e-6);
    auto alphas = params.numbers("alpha_grid", {0.01, 0.02, 0.05, 0.1, 0.2, 0.5});
    const auto epsilons = params.numbers("epsilon_grid", {0.25, 0.5, 1.0});
    std::sort(alphas.begin(), alphas.end());
    const auto d = static_cast<Eigen::Index>(reference.size());

    Series series{"concentration", {"alpha", "epsilon", "opnorm_solved", "empirical_freq", "bound"}, {}};
    std::vector<double> opnorms;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        spec.alpha = alphas[k];
        validate_spec(spec, mdp);
        const auto burn = burn_in_stationary(spec, mdp, n, derive_seed(seed, k), accuracy);
        const auto cbar = estimate_noise_integral(burn.ensemble, mdp);
        const auto sigma = solve_stationary_covariance(effective_affine_map(spec, mdp).A, spec.alpha, cbar);
        opnorms.push_back(covariance_opnorm(sigma));
        for (double eps : epsilons) {
            const double freq = empirical_concentration(burn.ensemble, reference, eps);
            const double bound = concentration_bound(spec.alpha, mdp.gamma(), mdp.rmax(), d, eps);
            const double se = std::sqrt(freq * (1.0 - freq) / static_cast<double>(n));
            series.add({spec.alpha, eps, opnorms.back(), freq, bound});
            out.criteria.push_back(criterion_le("freq[" + tag("alpha", spec.alpha) + "," + tag("eps", eps) + "]", freq,
                                                bound, 4.0 * se));
        }
    }
    double worst_drop = 0.0;
    for (std::size_t k = 1; k < opnorms.size(); ++k) worst_drop = std::max(worst_drop, opnorms[k - 1] - opnorms[k]);
    out.criteria.push_back(criterion_le("opnorm_nondecreasing", worst_drop, 0.0, 0.0));
    if (params.has("opnorm_bound"))
        out.criteria.push_back(criterion_le("opnorm[" + tag("alpha", alphas.front()) + "]", opnorms.front(),
                                            params.number("opnorm_bound", 0.0), 0.0));
    out.series.push_back(std::move(series));
    out.details["opnorm_solved"] = opnorms;
}

void run_control_bias(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    const auto spec = read_spec(params, mdp);
    if (is_evaluation(spec.algorithm) || spec.algorithm == Algorithm::OPI)
        throw std::invalid_argument("control-bias needs a control algorithm");
    const auto n = static_cast<Eigen::Index>(count(params, "N", 100000));
    const double accuracy = params.number("burn_in_accuracy", 1e-6);
    const bool require_strict = params.flag("require_strict", false);

    Eigen::VectorXd qstar = optimal_policy(mdp).q.values;
    // Both Double Q tables are compared with q*.
    if (spec.algorithm == Algorithm::DoubleQLearning) qstar = Eigen::VectorXd(qstar.replicate(2, 1));
    const auto burn = burn_in_stationary(spec, mdp, n, seed, accuracy);
    const auto bias = control_bias_check(burn.ensemble, FunctionPoint::action_values(qstar));

    const Eigen::ArrayXd four_se = 4.0 * bias.standard_error.array();
    out.criteria.push_back({"dominance", (bias.excess.array() + four_se).minCoeff(), 0.0, 0.0, ">=", bias.dominates});
    if (require_strict)
        out.criteria.push_back({"strict_excess", (bias.excess.array() - four_se).maxCoeff(), 0.0, 0.0, ">", bias.strict});
    if (params.has("exact_tolerance"))
        out.criteria.push_back(criterion_le("exact", bias.excess.cwiseAbs().maxCoeff(), 0.0,
                                            params.number("exact_tolerance", 0.0)));

    const auto mean = burn.ensemble.mean();
    Series series{"bias", {"coordinate", "mean", "qstar", "excess", "standard_error"}, {}};
    for (Eigen::Index i = 0; i < mean.size(); ++i)
        series.add({static_cast<double>(i), mean(i), qstar(i), bias.excess(i), bias.standard_error(i)});
    out.series.push_back(std::move(series));
    out.details["burn_in_steps"] = burn.n_steps;
    out.details["max_excess"] = bias.max_excess;
    out.details["strict"] = bias.strict;
}

Series kernel_series(const std::string& name, const PolicyKernel& kernel) {
    Series s{name, {"policy", "actions"}, {}};
    for (std::size_t j = 0; j < kernel.policies.size(); ++j) s.columns.push_back(std::to_string(j));
    for (std::size_t i = 0; i < kernel.policies.size(); ++i) {
        std::vector<std::string> row{std::to_string(i), ""};
        for (int a : kernel.policies[i].actions()) row[1] += (row[1].empty() ? "" : " ") + std::to_string(a);
        for (std::size_t j = 0; j < kernel.policies.size(); ++j)
            row.push_back(format_double(kernel.k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        s.rows.push_back(std::move(row));
    }
    return s;
}

Series frequency_series(const OpiSimulation& sim) {
    Series s{"frequencies", {"step"}, {}};
    for (std::size_t j = 0; j < sim.policies.size(); ++j) s.columns.push_back(std::to_string(j));
    for (Eigen::Index t = 0; t < sim.frequencies.rows(); ++t) {
        std::vector<double> row{static_cast<double>(t)};
        for (Eigen::Index j = 0; j < sim.frequencies.cols(); ++j) row.push_back(sim.frequencies(t, j));
        s.add(row);
    }
    return s;
}

void run_opi(const FiniteMdp& mdp, std::uint64_t seed, Params& params, ExperimentResult& out) {
    const double alpha = params.number("alpha", 1.0);
    if (!(alpha > 0.0 && alpha <= 1.0)) throw FormatError("config.alpha: must lie in (0, 1]");
    const double tol = params.number("horizon_tolerance", kDefaultHorizonTolerance);
    const int horizon = truncation_horizon(mdp.gamma(), mdp.rmax(), tol);
    const auto chains = static_cast<Eigen::Index>(count(params, "N", 10000));
    const auto n_steps = count(params, "n_steps", 50);
    out.details["horizon"] = horizon;

    if (alpha < 1.0) {
        // No stationarity claim exists here; the run is descriptive only.
        const auto sim = simulate_opi(mdp, alpha, n_steps, chains, horizon, derive_seed(seed, 1));
        out.series.push_back(frequency_series(sim));
        out.details["diagnostic_only"] = true;
        return;
    }

    const auto m = params.integer("M", 10000);
    const bool use_exact = params.flag("exact", true);
    const auto mc = estimate_policy_kernel(mdp, m, horizon, seed);
    out.series.push_back(kernel_series("kernel_mc", mc));
    std::optional<PolicyKernel> exact;
    if (use_exact) {
        exact = exact_policy_kernel(mdp, horizon);
        out.series.push_back(kernel_series("kernel_exact", *exact));
        double worst = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < mc.k.rows(); ++i)
            for (Eigen::Index j = 0; j < mc.k.cols(); ++j) {
                const double p = exact->k(i, j);
                const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(m));
                worst = std::max(worst, std::abs(mc.k(i, j) - p) - 4.0 * se);
            }
        out.criteria.push_back(criterion_le("mc_kernel_within_4se", worst, 0.0, 1e-12));
    }
    const PolicyKernel& kernel = exact ? *exact : mc;

    const auto chain = policy_chain_stationary(kernel, mdp);
    const auto star = static_cast<Eigen::Index>(chain.star);
    if (params.has("expected_star_probability")) {
        const double expected = params.number("expected_star_probability", 0.0);
        out.criteria.push_back(criterion_le("kernel_to_star", (kernel.k.col(star).array() - expected).abs().maxCoeff(),
                                            0.0, params.number("kernel_tolerance", 1e-12)));
    }
    for (const auto& c : check_probabilistic_improvement(kernel, mdp))
        out.criteria.push_back({"improvement[" + std::to_string(c.policy) + "]", c.probability,
                                kernel.positive_threshold(c.policy, c.improved), 0.0, ">", c.pass});
    out.criteria.push_back(criterion_gt("aperiodicity", kernel.k(star, star), kernel.positive_threshold(chain.star, chain.star)));
    for (const auto& r : check_reachability(kernel, mdp))
        out.criteria.push_back({"reachability[" + std::to_string(r.start) + "]", r.min_link, 0.0, 0.0, ">", r.pass});

    double identity_tol = params.number("identity_tolerance", 1e-9);
    if (!exact) {
        // Propagated Monte Carlo error of the two sides of the identity.
        double se = chain.phi1(star) * kernel.standard_error(star, star);
        for (Eigen::Index i = 0; i < kernel.k.rows(); ++i)
            if (i != star) se += chain.phi1(i) * kernel.standard_error(i, star);
        identity_tol = std::max(identity_tol, 4.0 * se);
    }
    out.criteria.push_back(criterion_le("identity_residual", chain.identity_residual, 0.0, identity_tol));
    if (const auto expected = params.optional("expected_phi")) {
        std::vector<double> phi;
        try {
            phi = expected->get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw FormatError("config.expected_phi: expected an array of numbers");
        }
        if (static_cast<Eigen::Index>(phi.size()) != chain.phi1.size()) throw FormatError("config.expected_phi: wrong length");
        const double gap = (chain.phi1 - Eigen::Map<const Eigen::VectorXd>(phi.data(), chain.phi1.size())).cwiseAbs().maxCoeff();
        out.criteria.push_back(criterion_le("phi1", gap, 0.0, params.number("phi_tolerance", 1e-9)));
    }

    const auto sim = simulate_opi(mdp, 1.0, n_steps, chains, horizon, derive_seed(seed, 1));
    const auto last = sim.frequencies.row(sim.frequencies.rows() - 1);
    Series phi{"phi", {"policy", "phi1", "visit_frequency"}, {}};
    for (Eigen::Index j = 0; j < chain.phi1.size(); ++j) {
        const double p = chain.phi1(j);
        const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(chains));
        out.criteria.push_back(criterion_le("visits[" + std::to_string(j) + "]", std::abs(last(j) - p), 4.0 * se, 1e-12));
        phi.add({static_cast<double>(j), p, last(j)});
    }
    out.series.push_back(std::move(phi));
    out.series.push_back(frequency_series(sim));

    Json classes = Json::array();
    for (const auto& c : chain.classes) classes.push_back({{"members", c.members}, {"recurrent", c.recurrent}});
    out.details["star"] = chain.star;
    out.details["phi1"] = vector_json(chain.phi1);
    out.details["classes"] = std::move(classes);
    out.details["identity_residual"] = chain.identity_residual;
    out.details["kernel"] = exact ? "exact" : "monte-carlo";
}

void run_bandit_tv(const FiniteMdp& mdp, std::uint64_t, Params& params, ExperimentResult& out) {
    const auto spec = read_spec(params, mdp);
    const auto reference = evaluation_reference(spec, mdp);
    const double v0 = params.number("v0", 8.0);
    const auto n_steps = count(params, "n_steps", 40);
    const auto n = static_cast<Eigen::Index>(count(params, "N", 1));
    const double tolerance = params.number("tolerance", 1e-12);
    const Eigen::VectorXd start = Eigen::VectorXd::Constant(reference.size(), v0);
    if (!noise_covariance(spec, mdp, FunctionPoint::state_values(start)).isZero(0.0))
        throw std::invalid_argument("bandit-tv needs a chain without sampling noise");

    // Without noise every particle follows f_n - v = rho^n (f_0 - v).
    auto e = init_ensemble(Initializer::at(start), n, spec, mdp, 0);
    const RowMatrix dirac = reference.values.transpose().replicate(n, 1);
    const double rho = contraction_factor(spec, mdp.gamma());
    const double d0 = (start - reference.values).cwiseAbs().maxCoeff();
    const double tv_expected = d0 > 0.0 ? 1.0 : 0.0;
    Series series{"bandit_tv", {"step", "wasserstein", "closed_form", "tv"}, {}};
    double w_gap = 0.0, tv_gap = 0.0;
    for (std::uint64_t t = 0;; ++t) {
        const double w = wasserstein_exact(e.particles(), dirac).distance;
        const double tv = tv_distance_atoms(e.particles(), dirac);
        const double closed = std::pow(rho, static_cast<double>(t)) * d0;
        series.add({static_cast<double>(t), w, closed, tv});
        w_gap = std::max(w_gap, std::abs(w - closed));
        tv_gap = std::max(tv_gap, std::abs(tv - tv_expected));
        if (t == n_steps) break;
        advance_ensemble(e, mdp, 1);
    }
    out.criteria.push_back(criterion_le("wasserstein_closed_form", w_gap, 0.0, tolerance));
    out.criteria.push_back(criterion_le("tv_constant", tv_gap, 0.0, 0.0));
    out.series.push_back(std::move(series));
    out.details["rho"] = rho;
    out.details["tv_expected"] = tv_expected;
}

using Runner = void (*)(const FiniteMdp&, std::uint64_t, Params&, ExperimentResult&);

Runner runner(const std::string& name) {
    if (name == "contract") return run_contract;
    if (name == "stationary-mean") return run_stationary_mean;
    if (name == "covariance") return run_covariance;
    if (name == "concentration") return run_concentration;
    if (name == "control-bias") return run_control_bias;
    if (name == "opi") return run_opi;
    if (name == "bandit-tv") return run_bandit_tv;
    throw FormatError("unknown experiment '" + name + "'");
}

}  // namespace

Criterion criterion_le(std::string name, double value, double bound, double tolerance) {
    return {std::move(name), value, bound, tolerance, "<=", value <= bound + tolerance};
}

Criterion criterion_ge(std::string name, double value, double bound, double tolerance) {
    return {std::move(name), value, bound, tolerance, ">=", value >= bound - tolerance};
}

Criterion criterion_gt(std::string name, double value, double bound) {
    return {std::move(name), value, bound, 0.0, ">", value > bound};
}

void Series::add(const std::vector<double>& row) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double x : row) cells.push_back(std::isnan(x) ? std::string() : format_double(x));
    rows.push_back(std::move(cells));
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"contract",     "stationary-mean", "covariance", "concentration",
                                                "control-bias", "opi",             "bandit-tv"};
    return names;
}

ExperimentConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw FormatError("config: expected an object");
    ExperimentConfig c;
    auto text = [&](const char* name) {
        const auto it = j.find(name);
        if (it == j.end() || !it->is_string()) throw FormatError(std::string("config: missing field '") + name + "'");
        return it->get<std::string>();
    };
    c.experiment = text("experiment");
    c.mdp = text("mdp");
    const auto seed = j.find("seed");
    const bool valid = seed != j.end() && seed->is_number_integer() && (seed->is_number_unsigned() || seed->get<std::int64_t>() >= 0);
    if (!valid) throw FormatError("config: missing field 'seed' (non-negative integer)");
    c.seed = seed->get<std::uint64_t>();
    if (const auto dir = j.find("output_dir"); dir != j.end()) c.output_dir = dir->get<std::string>();
    c.params = Json::object();
    for (const auto& [key, value] : j.items())
        if (key != "experiment" && key != "mdp" && key != "seed" && key != "output_dir") c.params[key] = value;
    return c;
}

bool ExperimentResult::passed() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const auto run = runner(config.experiment);
    const auto mdp = resolve_mdp(config.mdp);
    ExperimentResult out;
    out.experiment = config.experiment;
    out.details = Json::object();
    Json echo = Json::object();
    echo["experiment"] = config.experiment;
    echo["mdp"] = config.mdp;
    echo["seed"] = config.seed;
    Json used = Json::object();
    Params params(config.params, used);
    run(mdp, config.seed, params, out);
    for (const auto& [key, value] : used.items()) echo[key] = value;
    out.config = std::move(echo);
    return out;
}

std::string report_json(const ExperimentResult& result) {
    Json criteria = Json::array();
    for (const auto& c : result.criteria) {
        Json item;
        item["name"] = c.name;
        item["value"] = c.value;
        item["bound"] = c.bound;
        item["tolerance"] = c.tolerance;
        item["relation"] = c.relation;
        item["pass"] = c.pass;
        criteria.push_back(std::move(item));
    }
    Json j;
    j["experiment"] = result.experiment;
    j["pass"] = result.passed();
    j["config"] = result.config;
    j["criteria"] = std::move(criteria);
    j["details"] = result.details;
    Json series = Json::array();
    for (const auto& s : result.series) series.push_back(s.name + ".csv");
    j["series"] = std::move(series);
    return j.dump(2) + "\n";
}

std::string series_csv(const Series& series) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += '\n';
    };
    line(series.columns);
    for (const auto& row : series.rows) line(row);
    return out;
}

void emit_report(const ExperimentResult& result, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    std::vector<fs::path> written;
    try {
        for (const auto& s : result.series) {
            const auto path = dir / (s.name + ".csv");
            write_file_atomic(path, series_csv(s));
            written.push_back(path);
        }
        write_file_atomic(dir / "report.json", report_json(result));
    } catch (...) {
        for (const auto& path : written) fs::remove(path, ec);
        throw;
    }
}

}  // namespace rlchain
