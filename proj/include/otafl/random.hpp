#ifndef OTAFL_RANDOM_HPP
#define OTAFL_RANDOM_HPP

#include "otafl/types.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace otafl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// A seeded, independently-owned random stream. Identical (seed, stream_id)
/// pairs replay identical draws. Child streams are derived by label or index
/// so every user/channel/trial owns a stream of its own.
class RandomSource {
public:
    RandomSource(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    RandomSource derive(std::string_view label) const {
        return RandomSource(seed_, detail::splitmix64(stream_id_ ^ detail::fnv1a(label)));
    }
    RandomSource derive(std::string_view label, std::uint64_t index) const {
        return RandomSource(seed_,
                            detail::splitmix64(detail::splitmix64(stream_id_ ^ detail::fnv1a(label)) + index));
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    ModelVector normal_vector(Eigen::Index d, double stddev = 1.0) {
        ModelVector v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = stddev * normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Named top-level streams for one seed. Labels must be distinct.
inline std::map<std::string, RandomSource> make_streams(std::uint64_t seed,
                                                        const std::vector<std::string>& labels) {
    std::map<std::string, RandomSource> out;
    std::set<std::uint64_t> ids;
    for (const auto& label : labels) {
        if (out.count(label)) throw ConfigError("make_streams: duplicate stream label '" + label + "'");
        const std::uint64_t id = detail::splitmix64(detail::fnv1a(label));
        if (!ids.insert(id).second) throw ConfigError("make_streams: stream id collision for '" + label + "'");
        out.emplace(label, RandomSource(seed, id));
    }
    return out;
}

}  // namespace otafl

#endif  // OTAFL_RANDOM_HPP
