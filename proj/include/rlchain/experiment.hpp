#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlchain/io.hpp"

namespace rlchain {

/// One checked claim. relation is "<=", ">=" or ">" and reads
/// "value relation bound" with the tolerance added on the lenient side.
struct Criterion {
    std::string name;
    double value;
    double bound;
    double tolerance;
    std::string relation;
    bool pass;
};

Criterion criterion_le(std::string name, double value, double bound, double tolerance);
Criterion criterion_ge(std::string name, double value, double bound, double tolerance);
Criterion criterion_gt(std::string name, double value, double bound);

/// A CSV data series; cells are preformatted.
struct Series {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& row);
};

struct ExperimentConfig {
    std::string experiment;
    std::string mdp;  // resolve_mdp reference
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    Json params;      // experiment specific fields, spec included
};

const std::vector<std::string>& experiment_names();

/// Requires experiment, mdp and seed; everything else is kept in params.
ExperimentConfig config_from_json(const Json& j);

struct ExperimentResult {
    std::string experiment;
    Json config;  // echo, with every default that was used filled in
    std::vector<Criterion> criteria;
    std::vector<Series> series;
    Json details;

    bool passed() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

std::string report_json(const ExperimentResult& result);
std::string series_csv(const Series& series);

/// Writes report.json and <series>.csv; removes what it wrote if any write fails.
void emit_report(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace rlchain
