#include "esrf/rng.hpp"

#include <cmath>
#include <numbers>

namespace esrf {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key, std::uint64_t step,
                                   std::uint64_t index) {
    return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                       static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)},
                      key);
}

// 53-bit uniform in [0, 1).
double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                         std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

void NoiseStream::normals(std::uint64_t step, std::span<double> out) const {
    // Each Philox block gives two uniforms, hence two Box-Muller normals.
    for (std::size_t j = 0; j < out.size(); j += 2) {
        const auto r = block(key_, step, j / 2);
        const double u1 = 1.0 - to_unit(r[0], r[1]);  // (0, 1]
        const double u2 = to_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[j] = radius * std::cos(angle);
        if (j + 1 < out.size()) {
            out[j + 1] = radius * std::sin(angle);
        }
    }
}

Vector NoiseStream::normals(std::uint64_t step, Eigen::Index n) const {
    Vector v(n);
    normals(step, std::span<double>(v.data(), static_cast<std::size_t>(n)));
    return v;
}

double NoiseStream::uniform(std::uint64_t step, std::uint64_t index) const {
    // Offset the block index so uniforms never share blocks with normals.
    const auto r = block(key_, step, index | (1ull << 63));
    return to_unit(r[0], r[1]);
}

NoiseStream StreamFactory::stream(Purpose purpose, std::uint64_t replication,
                                  std::uint64_t member) const {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ replication);
    h = splitmix64(h ^ member);
    return NoiseStream({static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)});
}

Matrix StreamFactory::member_draws(Purpose purpose, std::uint64_t replication,
                                   Eigen::Index members, Eigen::Index dim,
                                   std::uint64_t step) const {
    Matrix draws(dim, members);
    for (Eigen::Index i = 0; i < members; ++i) {
        stream(purpose, replication, static_cast<std::uint64_t>(i))
            .normals(step, std::span<double>(draws.col(i).data(), static_cast<std::size_t>(dim)));
    }
    return draws;
}

}  // namespace esrf
