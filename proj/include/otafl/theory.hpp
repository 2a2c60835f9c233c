#ifndef OTAFL_THEORY_HPP
#define OTAFL_THEORY_HPP

#include "otafl/types.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace otafl {

/// Everything the three convergence bounds need.
struct BoundInputs {
    ProblemConstants constants;
    double delta0 = 0.0;  // E||theta_0 - theta*||^2
    double shift = 1.0;   // a (first bound) or gamma (second and third)
    long T = 1;           // total SGD steps, a multiple of H
    int K = 1;            // participants per round (fading)
    double h_min = 1.0;   // censoring threshold (fading)

    void validate() const {
        const int H = constants.H;
        if (H < 1) throw ConfigError("bound: H must be >= 1");
        if (T < 1 || T % H != 0) throw ConfigError("bound: T must be a positive multiple of H");
        if (!(delta0 >= 0.0)) throw ConfigError("bound: delta0 must be >= 0");
        if (!(constants.mu > 0.0) || !(constants.L >= constants.mu)) throw ConfigError("bound: require L >= mu > 0");
        if (!(constants.P > 0.0)) throw ConfigError("bound: P must be > 0");
        if (static_cast<int>(constants.Mn2.size()) != constants.N)
            throw ConfigError("bound: Mn2 must have one entry per user");
    }
};

/// B = 8 H^2 G^2 + (1/N^2) sum_n M_n^2 + 6 L Gamma
inline double constant_B(const ProblemConstants& c) {
    const double H = c.H;
    double sum_m = 0.0;
    for (double m : c.Mn2) sum_m += m;
    const double N = c.N;
    return 8.0 * H * H * c.G2 + sum_m / (N * N) + 6.0 * c.L * c.Gamma;
}

/// C = B + 4 d H^2 G^2 sigma_w^2 / (P N^2)
inline double constant_C(const ProblemConstants& c) {
    const double H = c.H, N = c.N;
    return constant_B(c) + 4.0 * c.d * H * H * c.G2 * c.sigma_w2 / (c.P * N * N);
}

/// C~ = B + 4 d H^2 G^2 sigma_w^2 / (P K^2 h_min^2)
inline double constant_C_tilde(const ProblemConstants& c, int K, double h_min) {
    if (K < 1) throw ConfigError("C~: K must be >= 1");
    if (!(h_min > 0.0)) throw ConfigError("C~: h_min must be > 0");
    const double H = c.H, k = K;
    return constant_B(c) + 4.0 * c.d * H * H * c.G2 * c.sigma_w2 / (c.P * k * k * h_min * h_min);
}

/// D = 4 (N - K) / (K (N - 1)) H^2 G^2; the single-user case is taken as 0.
inline double constant_D(const ProblemConstants& c, int K) {
    if (K < 1 || K > c.N) throw ConfigError("D: K must lie in [1, N]");
    if (c.N == 1) {
        log_note("constant D: N = 1, using the full-participation limit D = 0");
        return 0.0;
    }
    const double H = c.H, N = c.N, k = K;
    return 4.0 * (N - k) / (k * (N - 1.0)) * H * H * c.G2;
}

/// S_R = sum_{r=1}^R (a + rH)^2
inline double s_r(double a, int H, long R) {
    if (!(a > 0.0)) throw ConfigError("S_R: a must be > 0");
    double s = 0.0;
    for (long r = 1; r <= R; ++r) {
        const double b = a + static_cast<double>(r) * H;
        s += b * b;
    }
    return s;
}

/// Bound on E[F(theta_hat_T)] - F* for the weighted-average model under
/// eta_t = 4 / (mu (a + t)).
inline double bound_thm1(const BoundInputs& in) {
    in.validate();
    const auto& c = in.constants;
    const double a = in.shift;
    if (!(a > std::max(16.0 * c.L / c.mu, static_cast<double>(c.H))))
        throw ConfigError("first bound: require a > max(16 L/mu, H)");
    const double H = c.H, T = static_cast<double>(in.T), R = T / H, N = c.N;
    const double S = s_r(a, c.H, in.T / c.H);
    const double term_b = 4.0 * (T + R) / (3.0 * c.mu * S) * (2.0 * a + H + R - 1.0) * constant_B(c);
    const double term_noise =
        16.0 * c.d * T * H * c.G2 * c.sigma_w2 / (3.0 * c.mu * c.P * N * N * S) * (2.0 * a + T + H);
    const double term_init = c.mu * a * a * a / (6.0 * S) * in.delta0;
    return term_b + term_noise + term_init;
}

namespace detail {

inline void check_gamma(const BoundInputs& in, const char* which) {
    const auto& c = in.constants;
    const double lim = std::max(8.0 * c.L / c.mu, static_cast<double>(c.H));
    if (!(in.shift >= lim * (1.0 - 1e-12)))
        throw ConfigError(std::string(which) + ": require gamma >= max(8 L/mu, H)");
}

inline double instantaneous_bound(const BoundInputs& in, double constant) {
    const auto& c = in.constants;
    const double g = in.shift;
    const double mu2 = c.mu * c.mu;
    return 2.0 * c.L * std::max(4.0 * constant, mu2 * g * in.delta0) / (mu2 * (static_cast<double>(in.T) + g));
}

}  // namespace detail

/// Bound on E[F(theta_T)] - F* under eta_t = 2 / (mu (gamma + t)).
inline double bound_thm2(const BoundInputs& in) {
    in.validate();
    detail::check_gamma(in, "second bound");
    return detail::instantaneous_bound(in, constant_C(in.constants));
}

/// Fading counterpart of bound_thm2 with K participants and threshold h_min.
inline double bound_thm3(const BoundInputs& in) {
    in.validate();
    detail::check_gamma(in, "third bound");
    if (in.K < 1 || in.K > in.constants.N) throw ConfigError("third bound: K must lie in [1, N]");
    return detail::instantaneous_bound(
        in, constant_C_tilde(in.constants, in.K, in.h_min) + constant_D(in.constants, in.K));
}

struct DominanceRow {
    long t = 0;
    double mean_gap = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct DominanceReport {
    std::vector<DominanceRow> rows;
    bool pass = true;
    std::optional<long> first_violation;
};

/// Checks mean_gap(t) <= bound(t) at every transmission time. `t` must be
/// strictly increasing multiples of H and match `mean_gap` in length.
inline DominanceReport validate_dominance(const std::vector<long>& t, const std::vector<double>& mean_gap,
                                          const std::function<double(long)>& bound, int H) {
    if (t.size() != mean_gap.size()) throw ConfigError("dominance: round grid and gap series differ in length");
    DominanceReport rep;
    long prev = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] <= prev || t[i] % H != 0)
            throw ConfigError("dominance: time " + std::to_string(t[i]) + " is not on the round grid");
        prev = t[i];
        DominanceRow row{t[i], mean_gap[i], bound(t[i]), false};
        row.pass = row.mean_gap <= row.bound;
        if (!row.pass) {
            rep.pass = false;
            if (!rep.first_violation) rep.first_violation = t[i];
        }
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace otafl

#endif  // OTAFL_THEORY_HPP
