#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rlchain/ensemble.hpp"
#include "rlchain/mdp.hpp"
#include "rlchain/operators.hpp"

namespace rlchain {

using Json = nlohmann::ordered_json;

/// Malformed input: missing or mistyped field, bad reference string, invalid MDP.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
std::string format_double(double x);

FiniteMdp mdp_from_json(const Json& j);
Json mdp_to_json(const FiniteMdp& mdp);

/// Parses and validates; a validation failure lists every violation.
FiniteMdp load_mdp(const std::filesystem::path& path);

/// "builtin:M2", "random:S,A,gamma,seed" or a path to an MDP file.
FiniteMdp resolve_mdp(std::string_view ref);

/// Deterministic policies serialize as an action array, stochastic ones as rows.
Json policy_to_json(const Policy& policy);
/// Also accepts the string "uniform", expanded against the MDP's shape.
Policy policy_from_json(const Json& j, const FiniteMdp& mdp);

Json spec_to_json(const AlgorithmSpec& spec);
/// Field names as in AlgorithmSpec; runs validate_spec against the MDP.
AlgorithmSpec spec_from_json(const Json& j, const FiniteMdp& mdp);

/// Replaces the file through a temporary sibling; nothing is left on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// One row per particle, one column per coordinate.
std::string snapshot_csv(const ParticleEnsemble& e);
/// Spec, seed and step index needed to resume the chain.
Json snapshot_sidecar(const ParticleEnsemble& e);
/// Writes <stem>.csv and <stem>.json into dir.
void write_snapshot(const ParticleEnsemble& e, const std::filesystem::path& dir, const std::string& stem);
/// Reads a snapshot pair back into an ensemble.
ParticleEnsemble read_snapshot(const std::filesystem::path& dir, const std::string& stem, const FiniteMdp& mdp);

}  // namespace rlchain
