#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace retrace {

// Position grid used by the simulator: 2^-26 m (~15 nm), far below any
// tolerance in the system.  Keeping every committed world coordinate on this
// grid makes coordinate differences exact in double arithmetic, which is what
// the bit-exact translation-equivariance guarantees rest on.
inline constexpr double kPosGrid = 1.4901161193847656e-08;  // 2^-26

inline double snap_to_grid(double v) {
    return static_cast<double>(std::llround(v / kPosGrid)) * kPosGrid;
}

/// Deterministic RNG wrapper.  std::mt19937_64's output sequence is fixed by
/// the standard; the distributions are not, so we derive uniforms from raw
/// bits ourselves.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return (gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform in [-range, range], snapped to the position grid.
    double uniform_grid(double range) { return snap_to_grid(uniform(-range, range)); }

    /// Standard normal (Box-Muller, fixed consumption order).
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

    std::uint64_t next_u64() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

std::string base64_encode(const std::uint8_t* data, std::size_t n);
std::vector<std::uint8_t> base64_decode(const std::string& s);

/// Read a whole file; throws std::runtime_error when missing.
std::string read_file(const std::string& path);

/// Write atomically: temp file in the same directory, then rename.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace retrace
