#ifndef OTAFL_TRAINER_HPP
#define OTAFL_TRAINER_HPP

#include "otafl/channel.hpp"
#include "otafl/codec.hpp"
#include "otafl/objectives.hpp"
#include "otafl/sgd.hpp"
#include "otafl/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace otafl {

enum class Scheme { cotaf, cotaf_fading, non_precoded_ota, noise_free_local_sgd };

inline Scheme parse_scheme(std::string_view s) {
    if (s == "cotaf") return Scheme::cotaf;
    if (s == "cotaf_fading") return Scheme::cotaf_fading;
    if (s == "non_precoded_ota") return Scheme::non_precoded_ota;
    if (s == "noise_free_local_sgd") return Scheme::noise_free_local_sgd;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::cotaf: return "cotaf";
        case Scheme::cotaf_fading: return "cotaf_fading";
        case Scheme::non_precoded_ota: return "non_precoded_ota";
        case Scheme::noise_free_local_sgd: return "noise_free_local_sgd";
    }
    return "?";
}

inline bool uses_alpha(Scheme s) { return s == Scheme::cotaf || s == Scheme::cotaf_fading; }

struct TrainerConfig {
    int H = 1;
    int R = 1;
    Scheme scheme = Scheme::cotaf;
    StepSchedule schedule;
    double theta0_std = std::sqrt(5.0);
    double P = 1.0;
    /// Amplitude gain of the non-precoded baseline; <= 0 selects sqrt(P).
    double non_precoded_gain = 0.0;
    FadingPolicy fading;
    /// Upper limit on consecutive "wait" outcomes in one round.
    int max_waits = 100000;

    double baseline_gain() const { return non_precoded_gain > 0.0 ? non_precoded_gain : std::sqrt(P); }

    void validate() const {
        if (H < 1) throw ConfigError("trainer: H must be >= 1");
        if (R < 0) throw ConfigError("trainer: R must be >= 0");
        if (!(theta0_std >= 0.0)) throw ConfigError("trainer: theta0_std must be >= 0");
        if (!(P > 0.0)) throw ConfigError("trainer: P must be > 0");
    }
};

/// Per-round record.
struct RoundTrace {
    int round = 0;
    long t = 0;
    ModelVector theta_global;
    double gap = std::numeric_limits<double>::quiet_NaN();
    double tx_power_max = 0.0;
    std::vector<double> tx_energy;  // ||x_t^n||^2 per user, 0 for silent users
    std::vector<int> participants;  // fading schemes only
    int wait_count = 0;
    ModelVector channel_noise;      // raw receiver noise draw; empty when no MAC is used
};

/// Random streams owned by one training run.
struct TrainingStreams {
    std::vector<RandomSource> users;  // SGD sample indices, one per user
    RandomSource noise;
    RandomSource fading;

    /// SGD and theta_0 streams depend on the trial only; noise and fading
    /// streams are keyed by scheme.
    static TrainingStreams for_trial(const RandomSource& trial, int N, Scheme scheme) {
        std::vector<RandomSource> users;
        users.reserve(static_cast<std::size_t>(N));
        for (int n = 0; n < N; ++n) users.push_back(trial.derive("sgd", static_cast<std::uint64_t>(n)));
        const std::string tag = to_string(scheme);
        return {std::move(users), trial.derive("noise/" + tag), trial.derive("fading/" + tag)};
    }
};

namespace detail {

inline double channel_sigma(const ChannelKind& channel) { return noise_variance(channel); }

inline const FadingMac& require_fading(const ChannelKind& channel, Scheme scheme) {
    if (const auto* f = std::get_if<FadingMac>(&channel)) return *f;
    throw ConfigError(std::string("scheme ") + to_string(scheme) + " requires a fading channel");
}

/// Draws fading until at least K users are eligible.
inline std::pair<FadingRealization, std::vector<int>> draw_participants(const FadingMac& fm, const TrainerConfig& cfg,
                                                                        int N, RandomSource& rng, int& waits) {
    while (true) {
        FadingRealization fades = sample_rayleigh(N, fm.rayleigh_scale, rng);
        if (auto sel = select_participants(fades, cfg.fading)) return {std::move(fades), std::move(*sel)};
        if (++waits > cfg.max_waits) throw RuntimeError("fading: too many consecutive wait rounds");
    }
}

}  // namespace detail

/// One communication round (t = (round-1) H ... round H). Every user starts
/// from the broadcast model, runs H local SGD steps and transmits its model
/// update according to the scheme; the server decodes the new global model.
/// `alpha` is ignored by schemes without time-varying precoding.
template <GradientOracle Oracle>
RoundTrace run_round(const ModelVector& global_theta, std::span<const UserShard> shards, const TrainerConfig& cfg,
                     double alpha, const ChannelKind& channel, TrainingStreams& streams, int round,
                     const Oracle& oracle) {
    const int N = static_cast<int>(shards.size());
    const Eigen::Index d = global_theta.size();
    if (streams.users.size() != shards.size()) throw ConfigError("run_round: one SGD stream per user is required");
    const long t0 = static_cast<long>(round - 1) * cfg.H;

    std::vector<ModelVector> deltas;
    deltas.reserve(shards.size());
    for (std::size_t n = 0; n < shards.size(); ++n) {
        const ModelVector local = local_sgd(global_theta, shards[n], t0, cfg.H, cfg.schedule, streams.users[n], oracle);
        deltas.push_back(local - global_theta);
    }

    RoundTrace tr;
    tr.round = round;
    tr.t = t0 + cfg.H;
    tr.tx_energy.assign(shards.size(), 0.0);
    const double sigma_w2 = detail::channel_sigma(channel);

    const auto transmit = [&](const std::vector<ModelVector>& x, const FadingRealization* fades) {
        RandomSource replay = streams.noise;
        tr.channel_noise = draw_channel_noise(d, sigma_w2, replay);
        return fades ? fading_mac(x, *fades, d, sigma_w2, streams.noise) : awgn_mac(x, d, sigma_w2, streams.noise);
    };

    switch (cfg.scheme) {
        case Scheme::noise_free_local_sgd: {
            const auto received = orthogonal_noiseless(deltas);
            ModelVector sum = ModelVector::Zero(d);
            for (std::size_t n = 0; n < received.size(); ++n) {
                sum += global_theta + received[n];
                tr.tx_energy[n] = received[n].squaredNorm();
            }
            tr.theta_global = sum / static_cast<double>(N);
            break;
        }
        case Scheme::cotaf: {
            if (std::holds_alternative<FadingMac>(channel))
                throw ConfigError("scheme cotaf runs over an additive-noise MAC; use cotaf_fading for fading");
            std::vector<ModelVector> x;
            x.reserve(deltas.size());
            for (std::size_t n = 0; n < deltas.size(); ++n) {
                x.push_back(precode(deltas[n], alpha));
                tr.tx_energy[n] = x.back().squaredNorm();
            }
            tr.theta_global = decode(transmit(x, nullptr), N, alpha, global_theta);
            break;
        }
        case Scheme::non_precoded_ota: {
            const double g = cfg.baseline_gain();
            if (const auto* fm = std::get_if<FadingMac>(&channel)) {
                auto [fades, sel] = detail::draw_participants(*fm, cfg, N, streams.fading, tr.wait_count);
                std::vector<ModelVector> x(deltas.size(), ModelVector::Zero(d));
                for (int id : sel) {
                    const auto n = static_cast<std::size_t>(id - 1);
                    x[n] = (g * cfg.fading.h_min / fades.magnitudes[n]) * deltas[n];
                    tr.tx_energy[n] = x[n].squaredNorm();
                }
                const ModelVector y = transmit(x, &fades);
                tr.theta_global =
                    y / (static_cast<double>(sel.size()) * g * cfg.fading.h_min) + global_theta;
                tr.participants = std::move(sel);
            } else {
                std::vector<ModelVector> x;
                x.reserve(deltas.size());
                for (std::size_t n = 0; n < deltas.size(); ++n) {
                    x.push_back(g * deltas[n]);
                    tr.tx_energy[n] = x.back().squaredNorm();
                }
                tr.theta_global = transmit(x, nullptr) / (static_cast<double>(N) * g) + global_theta;
            }
            break;
        }
        case Scheme::cotaf_fading: {
            const FadingMac& fm = detail::require_fading(channel, cfg.scheme);
            auto [fades, sel] = detail::draw_participants(fm, cfg, N, streams.fading, tr.wait_count);
            std::vector<ModelVector> x(deltas.size(), ModelVector::Zero(d));
            for (int id : sel) {
                const auto n = static_cast<std::size_t>(id - 1);
                if (auto sig = fading_precode(deltas[n], alpha, fades.magnitudes[n], fades.phases[n], cfg.fading.h_min)) {
                    x[n] = std::move(*sig);
                    tr.tx_energy[n] = x[n].squaredNorm();
                }
            }
            const ModelVector y = transmit(x, &fades);
            tr.theta_global = fading_decode(y, static_cast<int>(sel.size()), alpha, cfg.fading.h_min, global_theta);
            tr.participants = std::move(sel);
            break;
        }
    }
    tr.tx_power_max = *std::max_element(tr.tx_energy.begin(), tr.tx_energy.end());
    if (!all_finite(tr.theta_global))
        throw RuntimeError("round " + std::to_string(round) + ": global model became non-finite");
    return tr;
}

/// Optimality gap F(theta) - F*.
using GapFunction = std::function<double(const ModelVector&)>;

inline GapFunction ridge_gap(const Quadratic& q, double F_star) {
    return [q, F_star](const ModelVector& theta) { return q.value(theta) - F_star; };
}

struct TrainingResult {
    ModelVector theta0;
    std::vector<RoundTrace> traces;

    const ModelVector& final_theta() const { return traces.empty() ? theta0 : traces.back().theta_global; }
};

template <GradientOracle Oracle>
TrainingResult run_training(std::span<const UserShard> shards, const TrainerConfig& cfg, const AlphaSchedule& alpha,
                            const ChannelKind& channel, TrainingStreams& streams, ModelVector theta0,
                            const Oracle& oracle, const GapFunction& gap = {}) {
    cfg.validate();
    validate(channel);
    check_shards(shards);
    if (uses_alpha(cfg.scheme) && alpha.rounds() < static_cast<std::size_t>(cfg.R))
        throw ConfigError("alpha schedule covers " + std::to_string(alpha.rounds()) + " rounds, " +
                          std::to_string(cfg.R) + " required");
    if (cfg.scheme == Scheme::cotaf_fading || std::holds_alternative<FadingMac>(channel))
        cfg.fading.validate(static_cast<int>(shards.size()));

    TrainingResult res;
    res.theta0 = std::move(theta0);
    res.traces.reserve(static_cast<std::size_t>(cfg.R));
    ModelVector global = res.theta0;
    for (int r = 1; r <= cfg.R; ++r) {
        const double a = uses_alpha(cfg.scheme) ? alpha.at_round(static_cast<std::size_t>(r)) : 1.0;
        RoundTrace tr = run_round(global, shards, cfg, a, channel, streams, r, oracle);
        if (gap) tr.gap = gap(tr.theta_global);
        global = tr.theta_global;
        res.traces.push_back(std::move(tr));
    }
    return res;
}

/// Draws theta_0 ~ N(0, theta0_std^2 I) and all streams from `trial`, so
/// schemes run on the same trial share theta_0 and SGD sampling.
template <GradientOracle Oracle>
TrainingResult run_training(std::span<const UserShard> shards, const TrainerConfig& cfg, const AlphaSchedule& alpha,
                            const ChannelKind& channel, const RandomSource& trial, const Oracle& oracle,
                            const GapFunction& gap = {}) {
    check_shards(shards);
    const Eigen::Index d = shards.front().samples.front().features.size();
    RandomSource theta_rng = trial.derive("theta0");
    ModelVector theta0 = theta_rng.normal_vector(d, cfg.theta0_std);
    TrainingStreams streams = TrainingStreams::for_trial(trial, static_cast<int>(shards.size()), cfg.scheme);
    return run_training(shards, cfg, alpha, channel, streams, std::move(theta0), oracle, gap);
}

/// theta_hat = (1/S_R) sum_r beta_{rH} theta_{rH}, beta_t = (a + t)^2.
inline ModelVector weighted_average_model(std::span<const std::pair<int, ModelVector>> history, double a, int H) {
    if (history.empty()) throw ConfigError("weighted_average_model: history is empty");
    ModelVector acc = ModelVector::Zero(history.front().second.size());
    double s = 0.0;
    for (const auto& [r, theta] : history) {
        const double base = a + static_cast<double>(r) * H;
        const double beta = base * base;
        acc += beta * theta;
        s += beta;
    }
    return acc / s;
}

inline std::vector<std::pair<int, ModelVector>> model_history(const std::vector<RoundTrace>& traces) {
    std::vector<std::pair<int, ModelVector>> h;
    h.reserve(traces.size());
    for (const auto& tr : traces) h.emplace_back(tr.round, tr.theta_global);
    return h;
}

}  // namespace otafl

#endif  // OTAFL_TRAINER_HPP
