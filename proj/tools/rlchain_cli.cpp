#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rlchain/experiment.hpp"
#include "rlchain/parallel.hpp"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitError = 2;

rlchain::Json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw rlchain::FormatError("cannot read config " + path);
    std::stringstream text;
    text << in.rdbuf();
    try {
        return rlchain::Json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw rlchain::FormatError(path + ": " + e.what());
    }
}

struct Options {
    std::string config;
    std::string mdp;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
};

int run(const std::string& experiment, const Options& opt) {
    rlchain::Json j = opt.config.empty() ? rlchain::Json::object() : read_config(opt.config);
    if (!j.is_object()) throw rlchain::FormatError("config: expected an object");
    if (j.contains("experiment") && j["experiment"] != experiment)
        throw rlchain::FormatError("config is for " + j["experiment"].dump() + ", not " + rlchain::Json(experiment).dump());
    j["experiment"] = experiment;
    if (!opt.mdp.empty()) j["mdp"] = opt.mdp;
    if (opt.seed) j["seed"] = *opt.seed;
    if (!opt.out.empty()) j["output_dir"] = opt.out;
    const auto config = rlchain::config_from_json(j);
    if (config.output_dir.empty()) throw rlchain::FormatError("no output directory (use --out or output_dir)");

    rlchain::set_worker_count(opt.threads);
    const auto result = rlchain::run_experiment(config);
    rlchain::emit_report(result, config.output_dir);
    for (const auto& c : result.criteria)
        std::printf("%s %s: %s %s %s (tol %s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    rlchain::format_double(c.value).c_str(), c.relation.c_str(),
                    rlchain::format_double(c.bound).c_str(), rlchain::format_double(c.tolerance).c_str());
    std::printf("%s: %s, report in %s\n", experiment.c_str(), result.passed() ? "pass" : "fail",
                config.output_dir.string().c_str());
    return result.passed() ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov chain experiments for stochastic value iteration"};
    app.require_subcommand(1);
    Options opt;
    std::string chosen;
    for (const auto& name : rlchain::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--mdp", opt.mdp, "builtin:NAME, random:S,A,gamma,seed or an MDP file");
        sub->add_option("--seed", opt.seed, "RNG seed (overrides the config)");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }
    try {
        return run(chosen, opt);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
}
