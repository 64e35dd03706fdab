#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mrm {

// Role tags used to derive independent streams from one seed.
enum class StreamRole : std::uint64_t
{
    Field = 1,
    WhiteNoise = 2,
    Brownian = 3,
    Sampling = 4,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Key of the stream for (seed, replica, layer, role). Each component is
/// folded through splitmix64 so nearby tuples give unrelated keys.
inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica,
                                          std::uint64_t layer, StreamRole role)
{
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ replica);
    k = splitmix64(k ^ (layer + 0x632BE59BD9B4E019ULL));
    k = splitmix64(k ^ static_cast<std::uint64_t>(role));
    return k;
}

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so streams can be replayed or skipped without state.
class CounterRng
{
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter)
    {
    }

    std::uint64_t next_u64()
    {
        return splitmix64(key_ + 0xD1B54A32D192ED03ULL * ++counter_);
    }

    /// Uniform on the open interval (0,1).
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mrm
