#ifndef OTAFL_CHANNEL_HPP
#define OTAFL_CHANNEL_HPP

#include "otafl/random.hpp"
#include "otafl/types.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace otafl {

struct NoiselessOrthogonal {};

struct AwgnMac {
    double sigma_w2 = 0.0;
};

struct FadingMac {
    double sigma_w2 = 0.0;
    double rayleigh_scale = 1.0 / std::numbers::sqrt2;  // E[h^2] = 1
};

using ChannelKind = std::variant<NoiselessOrthogonal, AwgnMac, FadingMac>;

inline void validate(const ChannelKind& kind) {
    std::visit(
        [](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (!std::is_same_v<K, NoiselessOrthogonal>) {
                if (!(k.sigma_w2 >= 0.0)) throw ConfigError("channel: sigma_w2 must be >= 0");
            }
            if constexpr (std::is_same_v<K, FadingMac>) {
                if (!(k.rayleigh_scale > 0.0)) throw ConfigError("channel: rayleigh_scale must be > 0");
            }
        },
        kind);
}

inline double noise_variance(const ChannelKind& kind) {
    return std::visit(
        [](const auto& k) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(k)>, NoiselessOrthogonal>)
                return 0.0;
            else
                return k.sigma_w2;
        },
        kind);
}

/// Per-user block-fading coefficients h e^{j phi} for one round.
struct FadingRealization {
    std::vector<double> magnitudes;
    std::vector<double> phases;

    std::size_t size() const { return magnitudes.size(); }
};

/// d i.i.d. N(0, sigma_w2) coordinates. Always consumes d normal draws, so
/// runs that differ only in sigma_w2 stay aligned on the stream.
inline ModelVector draw_channel_noise(Eigen::Index d, double sigma_w2, RandomSource& rng) {
    if (!(sigma_w2 >= 0.0)) throw ConfigError("channel noise variance must be >= 0");
    return rng.normal_vector(d, std::sqrt(sigma_w2));
}

namespace detail {

inline void check_inputs(std::span<const ModelVector> inputs, Eigen::Index d) {
    for (const auto& x : inputs)
        if (x.size() != d)
            throw ConfigError("channel: input of length " + std::to_string(x.size()) + ", expected " +
                              std::to_string(d));
}

}  // namespace detail

/// y = sum_n x_n + w
inline ModelVector awgn_mac(std::span<const ModelVector> inputs, Eigen::Index d, double sigma_w2,
                            RandomSource& rng) {
    detail::check_inputs(inputs, d);
    ModelVector y = ModelVector::Zero(d);
    for (const auto& x : inputs) y += x;
    y += draw_channel_noise(d, sigma_w2, rng);
    return y;
}

/// y = sum_n h_n x_n + w. Inputs are assumed phase-corrected, so only the
/// magnitudes act on the real-valued signal.
inline ModelVector fading_mac(std::span<const ModelVector> inputs, const FadingRealization& fades, Eigen::Index d,
                             double sigma_w2, RandomSource& rng) {
    detail::check_inputs(inputs, d);
    if (fades.magnitudes.size() != inputs.size())
        throw ConfigError("fading_mac: one fading coefficient per input is required");
    ModelVector y = ModelVector::Zero(d);
    for (std::size_t n = 0; n < inputs.size(); ++n) y += fades.magnitudes[n] * inputs[n];
    y += draw_channel_noise(d, sigma_w2, rng);
    return y;
}

/// Rayleigh(scale) magnitudes and uniform phases on [-pi, pi).
inline FadingRealization sample_rayleigh(int N, double scale, RandomSource& rng) {
    if (N < 1) throw ConfigError("sample_rayleigh: N must be >= 1");
    if (!(scale > 0.0)) throw ConfigError("sample_rayleigh: scale must be > 0");
    FadingRealization f;
    f.magnitudes.reserve(static_cast<std::size_t>(N));
    f.phases.reserve(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        double h = 0.0;
        while (!(h > 0.0)) h = scale * std::sqrt(-2.0 * std::log1p(-rng.uniform()));
        f.magnitudes.push_back(h);
        f.phases.push_back(std::numbers::pi * (2.0 * rng.uniform() - 1.0));
    }
    return f;
}

/// Ideal per-user links: the server sees every transmission exactly.
inline std::vector<ModelVector> orthogonal_noiseless(std::span<const ModelVector> inputs) {
    return {inputs.begin(), inputs.end()};
}

}  // namespace otafl

#endif  // OTAFL_CHANNEL_HPP
