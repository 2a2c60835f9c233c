#ifndef OTAFL_SGD_HPP
#define OTAFL_SGD_HPP

#include "otafl/objectives.hpp"
#include "otafl/random.hpp"
#include "otafl/types.hpp"

#include <algorithm>
#include <string>
#include <string_view>

namespace otafl {

/// eta_t = 4 / (mu (a + t))
inline double step_thm1(double t, double mu, double a) { return 4.0 / (mu * (a + t)); }

/// eta_t = 2 / (mu (gamma + t))
inline double step_thm2(double t, double mu, double gamma) { return 2.0 / (mu * (gamma + t)); }

enum class ScheduleKind { thm1, thm2 };

inline ScheduleKind parse_schedule_kind(std::string_view s) {
    if (s == "thm1") return ScheduleKind::thm1;
    if (s == "thm2") return ScheduleKind::thm2;
    throw ConfigError("unknown step schedule '" + std::string(s) + "'");
}

inline const char* to_string(ScheduleKind k) { return k == ScheduleKind::thm1 ? "thm1" : "thm2"; }

/// Decaying step size indexed by the global SGD step counter t.
/// `shift` is a for thm1 and gamma for thm2.
struct StepSchedule {
    ScheduleKind kind = ScheduleKind::thm2;
    double mu = 1.0;
    double shift = 1.0;

    double operator()(double t) const {
        return kind == ScheduleKind::thm1 ? step_thm1(t, mu, shift) : step_thm2(t, mu, shift);
    }

    /// Smallest admissible shift: a > max(16 L/mu, H) (we add one) or
    /// gamma = max(8 L/mu, H).
    static double default_shift(ScheduleKind kind, double L, double mu, int H) {
        if (kind == ScheduleKind::thm1) return std::max(16.0 * L / mu, static_cast<double>(H)) + 1.0;
        return std::max(8.0 * L / mu, static_cast<double>(H));
    }

    void validate(double L, int H) const {
        if (!(mu > 0.0)) throw ConfigError("step schedule: mu must be > 0");
        const double lim = kind == ScheduleKind::thm1 ? std::max(16.0 * L / mu, static_cast<double>(H))
                                                      : std::max(8.0 * L / mu, static_cast<double>(H));
        const bool ok = kind == ScheduleKind::thm1 ? shift > lim : shift >= lim * (1.0 - 1e-12);
        if (!ok)
            throw ConfigError(std::string("step schedule ") + to_string(kind) + ": shift " + std::to_string(shift) +
                              " violates the lower limit " + std::to_string(lim));
    }
};

/// One SGD step on a uniformly drawn sample of the shard.
template <GradientOracle Oracle>
ModelVector sgd_step(const ModelVector& theta, const UserShard& shard, double eta, RandomSource& rng,
                     const Oracle& oracle) {
    if (!(eta > 0.0)) throw ConfigError("sgd_step: eta must be > 0");
    if (shard.samples.empty()) throw ConfigError("sgd_step: user shard " + std::to_string(shard.user_id) + " is empty");
    const auto& s = shard.samples[rng.index(shard.size())];
    return theta - eta * oracle.grad(theta, s);
}

inline ModelVector sgd_step(const ModelVector& theta, const UserShard& shard, double eta, RandomSource& rng,
                            double lambda) {
    return sgd_step(theta, shard, eta, rng, RidgeObjective(lambda));
}

/// H local steps starting at global step t_start.
template <GradientOracle Oracle>
ModelVector local_sgd(ModelVector theta, const UserShard& shard, long t_start, int H, const StepSchedule& schedule,
                      RandomSource& rng, const Oracle& oracle) {
    for (int k = 0; k < H; ++k) theta = sgd_step(theta, shard, schedule(static_cast<double>(t_start + k)), rng, oracle);
    return theta;
}

}  // namespace otafl

#endif  // OTAFL_SGD_HPP
