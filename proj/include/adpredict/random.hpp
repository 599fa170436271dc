#ifndef ADPREDICT_RANDOM_HPP
#define ADPREDICT_RANDOM_HPP

#include <cstdint>
#include <random>

namespace adpredict {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Substream seed for item `index` of stream `stream` under `master`.
/// Independent of evaluation order, so parallel and serial runs agree.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL)) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng{derive_seed(master, stream, index)};
}

// Stream tags so unrelated consumers of one master seed never collide.
namespace streams {
inline constexpr std::uint64_t patient = 1;
inline constexpr std::uint64_t matching = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t model = 4;
inline constexpr std::uint64_t station = 5;
inline constexpr std::uint64_t subsample = 6;
}  // namespace streams

/// Uniform double in [0, 1) using the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; stable across standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

}  // namespace adpredict

#endif  // ADPREDICT_RANDOM_HPP
