#pragma once

#include <cstdint>

namespace rlchain {

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Sequential generator for one substream. SplitMix64: a Weyl sequence fed
 * through mix64. Cheap to construct, which matters because every coordinate
 * of every particle of every step opens its own substream.
 */
class Generator {
public:
    explicit constexpr Generator(std::uint64_t state) : state_(state) {}

    constexpr std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }
    /// Uniform on [0,1) with 53 random bits.
    constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    constexpr bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t state_;
};

/**
 * Hierarchical random stream key (seed, step, particle). Every draw made for
 * coordinate `slot` at that step and particle comes from substream(slot), so
 * equal keys give bit-identical draws regardless of evaluation order.
 */
class RngStream {
public:
    constexpr RngStream(std::uint64_t seed, std::uint64_t step, std::uint64_t particle)
        : seed_(seed), step_(step), particle_(particle) {}

    constexpr std::uint64_t seed() const { return seed_; }
    constexpr std::uint64_t step() const { return step_; }
    constexpr std::uint64_t particle() const { return particle_; }

    constexpr Generator substream(std::uint64_t slot) const {
        std::uint64_t h = mix64(seed_ ^ 0x6a09e667f3bcc908ULL);
        h = mix64(h ^ (step_ + 0xbb67ae8584caa73bULL));
        h = mix64(h ^ (particle_ + 0x3c6ef372fe94f82bULL));
        h = mix64(h ^ (slot + 0xa54ff53a5f1d36f1ULL));
        return Generator(h);
    }

    constexpr RngStream with_step(std::uint64_t step) const { return {seed_, step, particle_}; }
    constexpr RngStream with_particle(std::uint64_t particle) const { return {seed_, step_, particle}; }

private:
    std::uint64_t seed_;
    std::uint64_t step_;
    std::uint64_t particle_;
};

/// Step index reserved for initializer draws so they never collide with kernel steps.
inline constexpr std::uint64_t kInitStep = ~std::uint64_t{0};

/// Derives an unrelated seed, e.g. for the second side of an independent coupling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag + 0x510e527fade682d1ULL));
}

}  // namespace rlchain
