#pragma once

#include "esrf/linalg.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace esrf {

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                         std::array<std::uint32_t, 2> key);

/// What a stream of random numbers is used for. Part of the stream key, so
/// e.g. the model noise of member 3 never aliases its initial-condition draw.
enum class Purpose : std::uint32_t {
    InitialState = 1,
    ModelNoise = 2,
    TruthState = 3,
    TruthObservation = 4,
    ReferenceInitial = 5,
    ReferenceNoise = 6,
    Bootstrap = 7,
    Sweep = 8,
};

/// Counter-based stream. Draws are addressed by (step, index) and do not
/// depend on how many draws were taken before, so any evaluation order or
/// thread assignment reproduces the same numbers.
class NoiseStream {
public:
    NoiseStream() = default;
    explicit NoiseStream(std::array<std::uint32_t, 2> key) : key_(key) {}

    /// Fills `out` with i.i.d. standard normals belonging to `step`.
    void normals(std::uint64_t step, std::span<double> out) const;
    Vector normals(std::uint64_t step, Eigen::Index n) const;

    /// Uniform in [0, 1) addressed by (step, index).
    double uniform(std::uint64_t step, std::uint64_t index) const;

    std::array<std::uint32_t, 2> key() const { return key_; }

private:
    std::array<std::uint32_t, 2> key_{0, 0};
};

/// Derives independent streams from one experiment seed.
class StreamFactory {
public:
    explicit StreamFactory(std::uint64_t seed) : seed_(seed) {}

    NoiseStream stream(Purpose purpose, std::uint64_t replication, std::uint64_t member) const;
    std::uint64_t seed() const { return seed_; }

    /// d x M matrix whose column i holds the `step` draws of member i.
    Matrix member_draws(Purpose purpose, std::uint64_t replication, Eigen::Index members,
                        Eigen::Index dim, std::uint64_t step) const;

private:
    std::uint64_t seed_;
};

}  // namespace esrf
