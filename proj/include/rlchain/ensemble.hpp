#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rlchain/mdp.hpp"
#include "rlchain/operators.hpp"

namespace rlchain {

/**
 * N particles of one shape, stored row-major (one row per particle).
 *
 * Each particle carries a stream id; step k of particle i draws from
 * RngStream(seed, k, id_i). Ids default to the row index and move with the
 * particle when rows are permuted.
 */
class ParticleEnsemble {
public:
    ParticleEnsemble(AlgorithmSpec spec, std::uint64_t seed, RowMatrix particles, std::uint64_t step_index = 0);
    ParticleEnsemble(AlgorithmSpec spec, std::uint64_t seed, RowMatrix particles, std::vector<std::uint64_t> ids,
                     std::uint64_t step_index);

    Eigen::Index size() const { return particles_.rows(); }
    Eigen::Index width() const { return particles_.cols(); }
    std::uint64_t step_index() const { return step_; }
    std::uint64_t seed() const { return seed_; }
    const AlgorithmSpec& spec() const { return spec_; }
    const std::vector<std::uint64_t>& ids() const { return ids_; }

    const RowMatrix& particles() const { return particles_; }
    RowMatrix& particles() { return particles_; }
    std::span<const double> particle(Eigen::Index i) const;
    std::span<double> particle(Eigen::Index i);

    FunctionPoint point(Eigen::Index i) const;
    ExtendedPoint extended(Eigen::Index i) const;

    Eigen::VectorXd mean() const;
    /// Unbiased sample covariance (divides by N - 1; zero when N = 1).
    Eigen::MatrixXd covariance() const;
    /// Standard error of each coordinate mean.
    Eigen::VectorXd standard_error() const;

    /// Rows and ids reordered by perm: new row k is old row perm[k].
    ParticleEnsemble permuted(const std::vector<Eigen::Index>& perm) const;

    void advance_step() { ++step_; }

private:
    AlgorithmSpec spec_;
    std::uint64_t seed_;
    RowMatrix particles_;
    std::vector<std::uint64_t> ids_;
    std::uint64_t step_;
};

struct Initializer {
    enum class Kind { Point, UniformBox, RealizableUniform };
    Kind kind = Kind::RealizableUniform;
    Eigen::VectorXd point;  // Point: full particle (width entries)
    double lo = 0.0;        // UniformBox
    double hi = 0.0;

    static Initializer at(Eigen::VectorXd f) { return {Kind::Point, std::move(f), 0.0, 0.0}; }
    static Initializer uniform_box(double lo, double hi) { return {Kind::UniformBox, {}, lo, hi}; }
    /// Uniform on [0, rmax/(1-gamma)]^width.
    static Initializer realizable_uniform() { return {}; }
};

ParticleEnsemble init_ensemble(const Initializer& init, Eigen::Index n, const AlgorithmSpec& spec, const FiniteMdp& mdp,
                               std::uint64_t seed);

/// One synchronous kernel step for every particle.
ParticleEnsemble step_ensemble(const ParticleEnsemble& e, const FiniteMdp& mdp);
/// In place version for long runs.
void advance_ensemble(ParticleEnsemble& e, const FiniteMdp& mdp, std::uint64_t n_steps);

/// Snapshots at steps 0, record_every, 2 record_every, ... and always the final one.
std::vector<ParticleEnsemble> run_chain(const ParticleEnsemble& e, const FiniteMdp& mdp, std::uint64_t n_steps,
                                        std::uint64_t record_every);

enum class Coupling { IdenticalSamples, Independent };

/**
 * Two ensembles evolved jointly. IdenticalSamples drives right particle i with
 * the key of left particle i; Independent uses each side's own seed, which must
 * then differ.
 */
struct CoupledEnsemble {
    ParticleEnsemble left;
    ParticleEnsemble right;
    Coupling coupling;

    CoupledEnsemble(ParticleEnsemble l, ParticleEnsemble r, Coupling c);
};

CoupledEnsemble coupled_step(const CoupledEnsemble& c, const FiniteMdp& mdp);
void advance_coupled(CoupledEnsemble& c, const FiniteMdp& mdp, std::uint64_t n_steps);

struct BurnIn {
    ParticleEnsemble ensemble;
    std::uint64_t n_steps;
    double rho;
    double d0;
};

/// Burn-in length for a geometric contraction rho from initial distance d0.
std::uint64_t burn_in_steps(double rho, double d0, double target_accuracy);

/// Runs the chain from a realizable-uniform start long enough for the
/// transport bias to drop below target_accuracy.
BurnIn burn_in_stationary(const AlgorithmSpec& spec, const FiniteMdp& mdp, Eigen::Index n, std::uint64_t seed,
                          double target_accuracy);

}  // namespace rlchain
