#include "rlchain/ensemble.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rlchain/parallel.hpp"

namespace rlchain {

namespace {

std::vector<std::uint64_t> default_ids(Eigen::Index n) {
    std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
    return ids;
}

void require_steppable(const AlgorithmSpec& spec) {
    if (spec.algorithm == Algorithm::OPI) throw std::invalid_argument("OPI ensembles are stepped by the policy chain");
}

std::span<double> row_span(RowMatrix& m, Eigen::Index i) {
    return {m.row(i).data(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

ParticleEnsemble::ParticleEnsemble(AlgorithmSpec spec, std::uint64_t seed, RowMatrix particles, std::uint64_t step_index)
    : spec_(std::move(spec)), seed_(seed), particles_(std::move(particles)), ids_(default_ids(particles_.rows())), step_(step_index) {
    if (particles_.rows() < 1) throw std::invalid_argument("ensemble needs at least one particle");
}

ParticleEnsemble::ParticleEnsemble(AlgorithmSpec spec, std::uint64_t seed, RowMatrix particles,
                                   std::vector<std::uint64_t> ids, std::uint64_t step_index)
    : spec_(std::move(spec)), seed_(seed), particles_(std::move(particles)), ids_(std::move(ids)), step_(step_index) {
    if (particles_.rows() < 1) throw std::invalid_argument("ensemble needs at least one particle");
    if (static_cast<Eigen::Index>(ids_.size()) != particles_.rows())
        throw std::invalid_argument("ensemble ids do not match the particle count");
}

std::span<const double> ParticleEnsemble::particle(Eigen::Index i) const {
    return {particles_.row(i).data(), static_cast<std::size_t>(width())};
}

std::span<double> ParticleEnsemble::particle(Eigen::Index i) { return row_span(particles_, i); }

FunctionPoint ParticleEnsemble::point(Eigen::Index i) const {
    if (spec_.algorithm == Algorithm::DoubleQLearning) throw std::invalid_argument("DoubleQLearning particles are ExtendedPoints");
    return {value_kind(spec_.algorithm), particles_.row(i).transpose()};
}

ExtendedPoint ParticleEnsemble::extended(Eigen::Index i) const {
    if (spec_.algorithm != Algorithm::DoubleQLearning) throw std::invalid_argument("only DoubleQLearning particles are ExtendedPoints");
    const auto d = width() / 2;
    return {FunctionPoint::action_values(particles_.row(i).head(d).transpose()),
            FunctionPoint::action_values(particles_.row(i).tail(d).transpose())};
}

Eigen::VectorXd ParticleEnsemble::mean() const { return particles_.colwise().mean().transpose(); }

Eigen::MatrixXd ParticleEnsemble::covariance() const {
    const auto n = size();
    if (n < 2) return Eigen::MatrixXd::Zero(width(), width());
    const RowMatrix centered = particles_.rowwise() - particles_.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

Eigen::VectorXd ParticleEnsemble::standard_error() const {
    return (covariance().diagonal() / static_cast<double>(size())).cwiseSqrt();
}

ParticleEnsemble ParticleEnsemble::permuted(const std::vector<Eigen::Index>& perm) const {
    if (static_cast<Eigen::Index>(perm.size()) != size()) throw std::invalid_argument("permutation size mismatch");
    RowMatrix rows(size(), width());
    std::vector<std::uint64_t> ids(perm.size());
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t k = 0; k < perm.size(); ++k) {
        const auto src = perm[k];
        if (src < 0 || src >= size() || seen[static_cast<std::size_t>(src)]) throw std::invalid_argument("not a permutation");
        seen[static_cast<std::size_t>(src)] = true;
        rows.row(static_cast<Eigen::Index>(k)) = particles_.row(src);
        ids[k] = ids_[static_cast<std::size_t>(src)];
    }
    return {spec_, seed_, std::move(rows), std::move(ids), step_};
}

ParticleEnsemble init_ensemble(const Initializer& init, Eigen::Index n, const AlgorithmSpec& spec, const FiniteMdp& mdp,
                               std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("init_ensemble: N must be >= 1");
    validate_spec(spec, mdp);
    const auto width = point_width(spec, mdp);
    RowMatrix rows(n, width);
    switch (init.kind) {
        case Initializer::Kind::Point:
            if (init.point.size() != width)
                throw std::invalid_argument("init_ensemble: point has " + std::to_string(init.point.size()) +
                                            " coordinates, expected " + std::to_string(width));
            rows.rowwise() = init.point.transpose();
            break;
        case Initializer::Kind::UniformBox:
        case Initializer::Kind::RealizableUniform: {
            double lo = init.lo, hi = init.hi;
            if (init.kind == Initializer::Kind::RealizableUniform) {
                lo = 0.0;
                hi = mdp.value_bound();
            }
            if (lo > hi) throw std::invalid_argument("init_ensemble: lo > hi");
            for (Eigen::Index i = 0; i < n; ++i) {
                const RngStream key(seed, kInitStep, static_cast<std::uint64_t>(i));
                for (Eigen::Index j = 0; j < width; ++j) {
                    Generator gen = key.substream(static_cast<std::uint64_t>(j));
                    rows(i, j) = lo + (hi - lo) * gen.uniform();
                }
            }
            break;
        }
    }
    return {spec, seed, std::move(rows)};
}

void advance_ensemble(ParticleEnsemble& e, const FiniteMdp& mdp, std::uint64_t n_steps) {
    require_steppable(e.spec());
    const TargetSampler sampler(e.spec(), mdp);
    if (sampler.width() != e.width()) throw std::invalid_argument("ensemble width does not match the MDP");
    const double alpha = e.spec().alpha;
    for (std::uint64_t k = 0; k < n_steps; ++k) {
        const auto step = e.step_index();
        parallel_for(static_cast<std::size_t>(e.size()), [&](std::size_t begin, std::size_t end) {
            std::vector<double> target(static_cast<std::size_t>(e.width()));
            for (std::size_t i = begin; i < end; ++i) {
                auto row = e.particle(static_cast<Eigen::Index>(i));
                sampler.sample(row, target, RngStream(e.seed(), step, e.ids()[i]));
                synchronous_update(row, target, alpha);
            }
        });
        e.advance_step();
    }
}

ParticleEnsemble step_ensemble(const ParticleEnsemble& e, const FiniteMdp& mdp) {
    ParticleEnsemble next = e;
    advance_ensemble(next, mdp, 1);
    return next;
}

std::vector<ParticleEnsemble> run_chain(const ParticleEnsemble& e, const FiniteMdp& mdp, std::uint64_t n_steps,
                                        std::uint64_t record_every) {
    if (record_every == 0) throw std::invalid_argument("run_chain: record_every must be >= 1");
    std::vector<ParticleEnsemble> snapshots{e};
    ParticleEnsemble current = e;
    std::uint64_t done = 0;
    while (done < n_steps) {
        const auto chunk = std::min(record_every, n_steps - done);
        advance_ensemble(current, mdp, chunk);
        done += chunk;
        snapshots.push_back(current);
    }
    return snapshots;
}

CoupledEnsemble::CoupledEnsemble(ParticleEnsemble l, ParticleEnsemble r, Coupling c)
    : left(std::move(l)), right(std::move(r)), coupling(c) {
    if (left.size() != right.size() || left.width() != right.width())
        throw std::invalid_argument("coupled ensembles must have equal size and shape");
    if (left.step_index() != right.step_index()) throw std::invalid_argument("coupled ensembles must share the step index");
    if (left.spec().algorithm != right.spec().algorithm || left.spec().alpha != right.spec().alpha)
        throw std::invalid_argument("coupled ensembles must share the algorithm spec");
    if (coupling == Coupling::Independent && left.seed() == right.seed())
        throw std::invalid_argument("independent coupling needs distinct seeds");
}

void advance_coupled(CoupledEnsemble& c, const FiniteMdp& mdp, std::uint64_t n_steps) {
    require_steppable(c.left.spec());
    const TargetSampler sampler(c.left.spec(), mdp);
    if (sampler.width() != c.left.width()) throw std::invalid_argument("ensemble width does not match the MDP");
    const double alpha = c.left.spec().alpha;
    for (std::uint64_t k = 0; k < n_steps; ++k) {
        const auto step = c.left.step_index();
        parallel_for(static_cast<std::size_t>(c.left.size()), [&](std::size_t begin, std::size_t end) {
            const auto w = static_cast<std::size_t>(c.left.width());
            std::vector<double> tl(w), tr(w);
            for (std::size_t i = begin; i < end; ++i) {
                auto l = c.left.particle(static_cast<Eigen::Index>(i));
                auto r = c.right.particle(static_cast<Eigen::Index>(i));
                const RngStream lkey(c.left.seed(), step, c.left.ids()[i]);
                if (c.coupling == Coupling::IdenticalSamples) {
                    sampler.sample_pair(l, tl, r, tr, lkey);
                } else {
                    sampler.sample(l, tl, lkey);
                    sampler.sample(r, tr, RngStream(c.right.seed(), step, c.right.ids()[i]));
                }
                synchronous_update(l, tl, alpha);
                synchronous_update(r, tr, alpha);
            }
        });
        c.left.advance_step();
        c.right.advance_step();
    }
}

CoupledEnsemble coupled_step(const CoupledEnsemble& c, const FiniteMdp& mdp) {
    CoupledEnsemble next = c;
    advance_coupled(next, mdp, 1);
    return next;
}

std::uint64_t burn_in_steps(double rho, double d0, double target_accuracy) {
    if (!(target_accuracy > 0.0)) throw std::invalid_argument("target_accuracy must be > 0");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("burn-in needs a contraction factor in [0,1)");
    if (d0 <= target_accuracy) return 0;
    if (rho == 0.0) return 1;
    return static_cast<std::uint64_t>(std::ceil(std::log(target_accuracy / d0) / std::log(rho)));
}

BurnIn burn_in_stationary(const AlgorithmSpec& spec, const FiniteMdp& mdp, Eigen::Index n, std::uint64_t seed,
                          double target_accuracy) {
    const double rho = contraction_factor(spec, mdp.gamma());
    // d1 on (Q^A, Q^B) adds the two table gaps.
    const double d0 = (spec.algorithm == Algorithm::DoubleQLearning ? 2.0 : 1.0) * mdp.value_bound();
    const auto steps = burn_in_steps(rho, d0, target_accuracy);
    ParticleEnsemble e = init_ensemble(Initializer::realizable_uniform(), n, spec, mdp, seed);
    advance_ensemble(e, mdp, steps);
    return {std::move(e), steps, rho, d0};
}

}  // namespace rlchain
