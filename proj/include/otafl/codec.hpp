#ifndef OTAFL_CODEC_HPP
#define OTAFL_CODEC_HPP

#include "otafl/channel.hpp"
#include "otafl/sgd.hpp"
#include "otafl/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace otafl {

/// Precoding coefficients alpha_t, one per communication round (index 0 is
/// round 1, i.e. t = H).
struct AlphaSchedule {
    std::vector<double> alpha;

    std::size_t rounds() const { return alpha.size(); }

    /// 1-based round.
    double at_round(std::size_t round) const {
        if (round < 1 || round > alpha.size())
            throw ConfigError("alpha schedule has no entry for round " + std::to_string(round));
        return alpha[round - 1];
    }

    void validate() const {
        for (std::size_t r = 0; r < alpha.size(); ++r)
            if (!(alpha[r] > 0.0) || !std::isfinite(alpha[r]))
                throw ConfigError("alpha schedule: entry " + std::to_string(r) + " is not a positive finite number");
    }
};

inline void to_json(nlohmann::json& j, const AlphaSchedule& s) { j = s.alpha; }

inline void from_json(const nlohmann::json& j, AlphaSchedule& s) {
    if (!j.is_array()) throw ConfigError("alpha schedule JSON must be an array of numbers");
    s.alpha.clear();
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError("alpha schedule JSON must be an array of numbers");
        s.alpha.push_back(v.get<double>());
    }
    s.validate();
}

inline void save_alpha_schedule(const AlphaSchedule& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write alpha schedule '" + path.string() + "'");
    nlohmann::json j = s;
    out << j.dump() << '\n';
}

inline AlphaSchedule load_alpha_schedule(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open alpha schedule '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("alpha schedule '" + path.string() + "': " + e.what());
    }
    return j.get<AlphaSchedule>();
}

inline void require_positive_alpha(double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("precoder alpha must be > 0");
}

/// x = sqrt(alpha) * delta
inline ModelVector precode(const ModelVector& delta, double alpha) {
    require_positive_alpha(alpha);
    return std::sqrt(alpha) * delta;
}

/// theta = y / (N sqrt(alpha)) + theta_prev
inline ModelVector decode(const ModelVector& y, int N, double alpha, const ModelVector& theta_prev) {
    require_positive_alpha(alpha);
    if (N < 1) throw ConfigError("decode: N must be >= 1");
    require_same_dim(y, theta_prev, "decode");
    return y / (static_cast<double>(N) * std::sqrt(alpha)) + theta_prev;
}

/// Threshold censoring and participant count for fading channels.
struct FadingPolicy {
    double h_min = 0.5;
    int K = 1;

    void validate(int N) const {
        if (!(h_min >= 0.0)) throw ConfigError("fading policy: h_min must be >= 0");
        if (K < 1 || K > N) throw ConfigError("fading policy: K must lie in [1, N]");
    }
};

/// Channel-inverting precoder. Returns nullopt (no transmission) when h <= h_min.
/// The phase term is removed by the transmitter, so only the magnitude
/// affects the real-valued signal; `phi` is accepted for completeness.
inline std::optional<ModelVector> fading_precode(const ModelVector& delta, double alpha, double h, double phi,
                                                 double h_min) {
    (void)phi;
    require_positive_alpha(alpha);
    if (!(h > 0.0)) throw ConfigError("fading_precode: fading magnitude must be > 0");
    if (!(h_min > 0.0)) throw ConfigError("fading_precode: h_min must be > 0");
    if (h <= h_min) return std::nullopt;
    return (std::sqrt(alpha) * h_min / h) * delta;
}

/// Opportunistic carrier sensing: among users with h > h_min the K strongest
/// (shortest backoff 1/h) transmit. nullopt means fewer than K were eligible
/// and the round has to wait. Returned ids are 1-based and ascending.
inline std::optional<std::vector<int>> select_participants(const FadingRealization& fades,
                                                           const FadingPolicy& policy) {
    policy.validate(static_cast<int>(fades.size()));
    std::vector<int> eligible;
    for (std::size_t n = 0; n < fades.size(); ++n)
        if (fades.magnitudes[n] > policy.h_min) eligible.push_back(static_cast<int>(n));
    if (eligible.size() < static_cast<std::size_t>(policy.K)) return std::nullopt;
    const auto backoff = [&](int n) { return 1.0 / fades.magnitudes[static_cast<std::size_t>(n)]; };
    std::stable_sort(eligible.begin(), eligible.end(), [&](int a, int b) { return backoff(a) < backoff(b); });
    eligible.resize(static_cast<std::size_t>(policy.K));
    for (int& n : eligible) ++n;
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

/// theta = y / (K sqrt(alpha) h_min) + theta_prev
inline ModelVector fading_decode(const ModelVector& y, int K_size, double alpha, double h_min,
                                 const ModelVector& theta_prev) {
    require_positive_alpha(alpha);
    if (K_size < 1) throw ConfigError("fading_decode: participant count must be >= 1");
    if (!(h_min > 0.0)) throw ConfigError("fading_decode: h_min must be > 0");
    require_same_dim(y, theta_prev, "fading_decode");
    return y / (static_cast<double>(K_size) * std::sqrt(alpha) * h_min) + theta_prev;
}

/// Threshold at which a Rayleigh(scale) user is eligible with probability p.
inline double rayleigh_threshold_for_eligibility(double p, double scale) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("eligibility probability must lie in (0, 1)");
    return scale * std::sqrt(-2.0 * std::log(p));
}

/// Mean squared model update per round and user from noise-free pilot runs.
/// energy(r, n) = mean over trials of ||theta^n_{rH} - theta_{(r-1)H}||^2.
struct PilotStatistics {
    Eigen::MatrixXd energy;  // rounds x users

    ModelVector max_over_users() const { return energy.rowwise().maxCoeff(); }
};

struct PilotConfig {
    int rounds = 1;
    int H = 1;
    StepSchedule schedule;
    double theta0_std = std::sqrt(5.0);
    int trials = 10;
    double sigma_w2 = 0.0;      // channel noise; 0 gives a noise-free pilot
    double receive_gain = 0.0;  // server divides by receive_gain * sqrt(alpha); <= 0 means the number of users
    double P = 1.0;
};

/// Runs local SGD from theta_0 ~ N(0, theta0_std^2 I) on the pilot shards and
/// records per-round update energies. Trials advance in lockstep; with
/// sigma_w2 > 0 each round's alpha is set from that round's energies and the
/// server model receives the matching equivalent noise, so later rounds see
/// the noise of earlier ones.
template <GradientOracle Oracle>
PilotStatistics pilot_update_energy(std::span<const UserShard> pilot_shards, const Oracle& oracle,
                                    const PilotConfig& cfg, RandomSource& rng) {
    if (cfg.trials < 1) throw ConfigError("pilot: at least one trial is required");
    if (cfg.rounds < 1 || cfg.H < 1) throw ConfigError("pilot: rounds and H must be >= 1");
    if (!(cfg.sigma_w2 >= 0.0) || !(cfg.P > 0.0)) throw ConfigError("pilot: sigma_w2 >= 0 and P > 0 required");
    check_shards(pilot_shards);
    const Eigen::Index d = pilot_shards.front().samples.front().features.size();
    const auto N = static_cast<Eigen::Index>(pilot_shards.size());
    const double gain = cfg.receive_gain > 0.0 ? cfg.receive_gain : static_cast<double>(N);
    const auto trials = static_cast<std::size_t>(cfg.trials);

    std::vector<ModelVector> global(trials);
    std::vector<std::vector<RandomSource>> user_rng(trials);
    std::vector<RandomSource> noise_rng;
    for (std::size_t k = 0; k < trials; ++k) {
        RandomSource trial_rng = rng.derive("pilot-trial", k);
        global[k] = trial_rng.derive("theta0").normal_vector(d, cfg.theta0_std);
        for (Eigen::Index n = 0; n < N; ++n) user_rng[k].push_back(trial_rng.derive("sgd", static_cast<std::uint64_t>(n)));
        noise_rng.push_back(trial_rng.derive("noise"));
    }

    PilotStatistics stats{Eigen::MatrixXd::Zero(cfg.rounds, N)};
    std::vector<ModelVector> next(trials);
    for (int r = 0; r < cfg.rounds; ++r) {
        for (std::size_t k = 0; k < trials; ++k) {
            next[k] = ModelVector::Zero(d);
            for (Eigen::Index n = 0; n < N; ++n) {
                const ModelVector local = local_sgd(global[k], pilot_shards[static_cast<std::size_t>(n)],
                                                    static_cast<long>(r) * cfg.H, cfg.H, cfg.schedule,
                                                    user_rng[k][static_cast<std::size_t>(n)], oracle);
                stats.energy(r, n) += (local - global[k]).squaredNorm();
                next[k] += local;
            }
            next[k] /= static_cast<double>(N);
        }
        stats.energy.row(r) /= static_cast<double>(cfg.trials);
        double noise_std = 0.0;
        if (cfg.sigma_w2 > 0.0) {
            const double worst = stats.energy.row(r).maxCoeff();
            if (!(worst > 0.0))
                throw RuntimeError("alpha undefined: all pilot updates are zero in round " + std::to_string(r + 1));
            const double alpha = cfg.P / worst;
            noise_std = std::sqrt(cfg.sigma_w2 / (gain * gain * alpha));
        }
        for (std::size_t k = 0; k < trials; ++k) {
            global[k] = next[k];
            if (noise_std > 0.0) global[k] += noise_rng[k].normal_vector(d, noise_std);
        }
    }
    return stats;
}

/// alpha_t = P / max_n E||theta^n_t - theta^n_{t-H}||^2 with the expectation
/// replaced by the pilot average.
inline AlphaSchedule alpha_from_pilot(const PilotStatistics& stats, double P) {
    if (!(P > 0.0)) throw ConfigError("alpha: P must be > 0");
    const ModelVector worst = stats.max_over_users();
    AlphaSchedule s;
    s.alpha.reserve(static_cast<std::size_t>(worst.size()));
    for (Eigen::Index r = 0; r < worst.size(); ++r) {
        if (!(worst[r] > 0.0))
            throw RuntimeError("alpha undefined: all pilot updates are zero in round " + std::to_string(r + 1));
        s.alpha.push_back(P / worst[r]);
    }
    return s;
}

template <GradientOracle Oracle>
AlphaSchedule estimate_alpha_mc(std::span<const UserShard> pilot_shards, const Oracle& oracle,
                                const PilotConfig& cfg, double P, RandomSource& rng) {
    return alpha_from_pilot(pilot_update_energy(pilot_shards, oracle, cfg, rng), P);
}

inline AlphaSchedule estimate_alpha_mc(std::span<const UserShard> pilot_shards, double lambda,
                                       const PilotConfig& cfg, double P, RandomSource& rng) {
    return estimate_alpha_mc(pilot_shards, RidgeObjective(lambda), cfg, P, rng);
}

/// alpha_t = P / (H^2 eta_{t-H}^2 G2), from the bounded-gradient argument.
inline AlphaSchedule alpha_upper_bound_schedule(int H, const std::function<double(double)>& step_fn, double G2,
                                                double P, int R) {
    if (H < 1 || R < 0) throw ConfigError("alpha bound: H >= 1 and R >= 0 required");
    if (!(G2 > 0.0) || !(P > 0.0)) throw ConfigError("alpha bound: G2 and P must be > 0");
    AlphaSchedule s;
    for (int r = 1; r <= R; ++r) {
        const double eta = step_fn(static_cast<double>((r - 1) * H));
        s.alpha.push_back(P / (static_cast<double>(H) * H * eta * eta * G2));
    }
    s.validate();
    return s;
}

}  // namespace otafl

#endif  // OTAFL_CODEC_HPP
