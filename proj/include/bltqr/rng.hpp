#pragma once

#include <cstdint>
#include <random>

namespace bltqr {

// splitmix64 finalizer; decorrelates seeds derived from small offsets.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded random stream. Identical seeds yield identical draw sequences;
/// every random quantity in the pipeline flows from one user seed, with
/// substreams derived by fixed offsets.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Independent stream derived deterministically from this stream's seed.
    RngStream substream(std::uint64_t offset) const {
        return RngStream(mix_seed(seed_ ^ (0xd1b54a32d192ed03ULL * (offset + 1))));
    }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1]; safe as a log() argument.
    double uniform_pos() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace bltqr
