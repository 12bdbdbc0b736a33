#include "rlchain/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rlchain/mdp_library.hpp"

namespace rlchain {

namespace fs = std::filesystem;

namespace {

const Json& field(const Json& j, const char* name, const std::string& where) {
    if (!j.is_object()) throw FormatError(where + ": expected an object");
    const auto it = j.find(name);
    if (it == j.end()) throw FormatError(where + ": missing field '" + name + "'");
    return *it;
}

template <class T>
T as(const Json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(where + ": wrong type (" + std::string(j.type_name()) + ")");
    }
}

template <class T>
T get(const Json& j, const char* name, const std::string& where) {
    return as<T>(field(j, name, where), where + "." + name);
}

std::optional<double> optional_number(const Json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return as<double>(*it, std::string("spec.") + name);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

FiniteMdp mdp_from_json(const Json& j) {
    const auto n_states = get<int>(j, "n_states", "mdp");
    const auto n_actions = get<int>(j, "n_actions", "mdp");
    const auto gamma = get<double>(j, "gamma", "mdp");
    const auto rmax = get<double>(j, "rmax", "mdp");
    if (n_states < 1 || n_actions < 1) throw FormatError("mdp: n_states and n_actions must be >= 1");
    const auto& rewards = field(j, "rewards", "mdp");
    const auto& transitions = field(j, "transitions", "mdp");

    std::vector<DiscreteDistribution> laws;
    Eigen::MatrixXd p(n_states * n_actions, n_states);
    auto shape = [](const Json& arr, std::size_t n, const std::string& where) -> const Json& {
        if (!arr.is_array() || arr.size() != n)
            throw FormatError(where + ": expected an array of length " + std::to_string(n));
        return arr;
    };
    shape(rewards, static_cast<std::size_t>(n_states), "mdp.rewards");
    shape(transitions, static_cast<std::size_t>(n_states), "mdp.transitions");
    for (int s = 0; s < n_states; ++s) {
        const auto ss = std::to_string(s);
        shape(rewards[static_cast<std::size_t>(s)], static_cast<std::size_t>(n_actions), "mdp.rewards[" + ss + "]");
        shape(transitions[static_cast<std::size_t>(s)], static_cast<std::size_t>(n_actions),
              "mdp.transitions[" + ss + "]");
        for (int a = 0; a < n_actions; ++a) {
            const auto where = "[" + ss + "][" + std::to_string(a) + "]";
            const auto& atoms = rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            if (!atoms.is_array() || atoms.empty()) throw FormatError("mdp.rewards" + where + ": expected [[value, prob], ...]");
            std::vector<Atom> parsed;
            for (const auto& atom : atoms) {
                if (!atom.is_array() || atom.size() != 2)
                    throw FormatError("mdp.rewards" + where + ": expected [[value, prob], ...]");
                parsed.push_back({as<double>(atom[0], "mdp.rewards" + where), as<double>(atom[1], "mdp.rewards" + where)});
            }
            laws.emplace_back(std::move(parsed));
            const auto& row = shape(transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)],
                                    static_cast<std::size_t>(n_states), "mdp.transitions" + where);
            for (int next = 0; next < n_states; ++next)
                p(s * n_actions + a, next) = as<double>(row[static_cast<std::size_t>(next)], "mdp.transitions" + where);
        }
    }
    return FiniteMdp(n_states, n_actions, gamma, rmax, std::move(laws), std::move(p));
}

Json mdp_to_json(const FiniteMdp& mdp) {
    Json rewards = Json::array(), transitions = Json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        Json rs = Json::array(), ts = Json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            Json atoms = Json::array();
            for (const auto& atom : mdp.reward(s, a).atoms()) atoms.push_back({atom.value, atom.prob});
            rs.push_back(std::move(atoms));
            Json row = Json::array();
            for (int next = 0; next < mdp.n_states(); ++next) row.push_back(mdp.transition(s, a, next));
            ts.push_back(std::move(row));
        }
        rewards.push_back(std::move(rs));
        transitions.push_back(std::move(ts));
    }
    Json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    j["rmax"] = mdp.rmax();
    j["rewards"] = std::move(rewards);
    j["transitions"] = std::move(transitions);
    return j;
}

FiniteMdp load_mdp(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    FiniteMdp mdp = [&] {
        try {
            return mdp_from_json(j);
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }();
    const auto report = validate_mdp(mdp);
    if (!report.empty()) {
        std::string msg = path.string() + ": invalid MDP";
        for (const auto& v : report) msg += "\n  " + v.message;
        throw FormatError(msg);
    }
    return mdp;
}

FiniteMdp resolve_mdp(std::string_view ref) {
    if (ref.rfind("builtin:", 0) == 0) return builtin_mdp(ref.substr(8));
    if (ref.rfind("random:", 0) == 0) {
        std::istringstream in{std::string(ref.substr(7))};
        int s = 0, a = 0;
        double gamma = 0.0;
        std::uint64_t seed = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(in >> s >> c1 >> a >> c2 >> gamma >> c3 >> seed) || c1 != ',' || c2 != ',' || c3 != ',' || !in.eof())
            throw FormatError("bad random MDP reference '" + std::string(ref) + "' (want random:S,A,gamma,seed)");
        return random_mdp(s, a, gamma, seed);
    }
    return load_mdp(fs::path(std::string(ref)));
}

Json policy_to_json(const Policy& policy) {
    if (policy.is_deterministic()) return Json(policy.actions());
    Json rows = Json::array();
    for (int s = 0; s < policy.n_states(); ++s) {
        Json row = Json::array();
        for (int a = 0; a < policy.n_actions(); ++a) row.push_back(policy.prob(s, a));
        rows.push_back(std::move(row));
    }
    return rows;
}

Policy policy_from_json(const Json& j, const FiniteMdp& mdp) {
    if (j.is_string() && j.get<std::string>() == "uniform") return Policy::uniform(mdp.n_states(), mdp.n_actions());
    if (!j.is_array() || j.empty()) throw FormatError("spec.base_policy: expected \"uniform\", actions or rows");
    try {
        if (j[0].is_array()) {
            Eigen::MatrixXd probs(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
            for (std::size_t s = 0; s < j.size(); ++s) {
                if (j[s].size() != j[0].size()) throw FormatError("spec.base_policy: ragged rows");
                for (std::size_t a = 0; a < j[s].size(); ++a)
                    probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = j[s][a].get<double>();
            }
            return Policy::stochastic(std::move(probs));
        }
        return Policy::deterministic(j.get<std::vector<int>>(), mdp.n_actions());
    } catch (const nlohmann::json::exception&) {
        throw FormatError("spec.base_policy: wrong type");
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("spec.base_policy: ") + e.what());
    }
}

Json spec_to_json(const AlgorithmSpec& spec) {
    Json j;
    j["algorithm"] = std::string(to_string(spec.algorithm));
    j["alpha"] = spec.alpha;
    if (spec.lambda) j["lambda"] = *spec.lambda;
    if (spec.epsilon) j["epsilon"] = *spec.epsilon;
    if (spec.p) j["p"] = *spec.p;
    if (spec.base_policy) j["base_policy"] = policy_to_json(*spec.base_policy);
    if (spec.horizon_tolerance) j["horizon_tolerance"] = *spec.horizon_tolerance;
    return j;
}

AlgorithmSpec spec_from_json(const Json& j, const FiniteMdp& mdp) {
    AlgorithmSpec spec;
    try {
        spec.algorithm = algorithm_from_string(get<std::string>(j, "algorithm", "spec"));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("spec.algorithm: ") + e.what());
    }
    spec.alpha = get<double>(j, "alpha", "spec");
    spec.lambda = optional_number(j, "lambda");
    spec.epsilon = optional_number(j, "epsilon");
    spec.p = optional_number(j, "p");
    spec.horizon_tolerance = optional_number(j, "horizon_tolerance");
    if (const auto it = j.find("base_policy"); it != j.end() && !it->is_null())
        spec.base_policy = policy_from_json(*it, mdp);
    try {
        validate_spec(spec, mdp);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("spec: ") + e.what());
    }
    return spec;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.close();
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw std::runtime_error("cannot write " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string snapshot_csv(const ParticleEnsemble& e) {
    std::string out;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const auto row = e.particle(i);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_double(row[k]);
        }
        out += '\n';
    }
    return out;
}

Json snapshot_sidecar(const ParticleEnsemble& e) {
    Json j;
    j["spec"] = spec_to_json(e.spec());
    j["seed"] = e.seed();
    j["step_index"] = e.step_index();
    j["ids"] = e.ids();
    return j;
}

void write_snapshot(const ParticleEnsemble& e, const fs::path& dir, const std::string& stem) {
    write_file_atomic(dir / (stem + ".csv"), snapshot_csv(e));
    write_file_atomic(dir / (stem + ".json"), snapshot_sidecar(e).dump(2) + "\n");
}

ParticleEnsemble read_snapshot(const fs::path& dir, const std::string& stem, const FiniteMdp& mdp) {
    const auto side = Json::parse(read_file(dir / (stem + ".json")));
    auto spec = spec_from_json(field(side, "spec", "snapshot"), mdp);
    const auto seed = get<std::uint64_t>(side, "seed", "snapshot");
    const auto step = get<std::uint64_t>(side, "step_index", "snapshot");
    auto ids = get<std::vector<std::uint64_t>>(side, "ids", "snapshot");

    std::vector<std::vector<double>> rows;
    std::istringstream in(read_file(dir / (stem + ".csv")));
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        for (std::string cell; std::getline(cells, cell, ',');) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    const auto width = point_width(spec, mdp);
    if (rows.size() != ids.size()) throw FormatError("snapshot: row count does not match ids");
    RowMatrix particles(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != width) throw FormatError("snapshot: wrong row width");
        for (Eigen::Index k = 0; k < width; ++k) particles(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
    }
    return ParticleEnsemble(std::move(spec), seed, std::move(particles), std::move(ids), step);
}

}  // namespace rlchain
