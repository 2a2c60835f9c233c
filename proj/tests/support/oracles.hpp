#ifndef OTAFL_TESTS_ORACLES_HPP
#define OTAFL_TESTS_ORACLES_HPP

// Independent reference computations for the test suites. Nothing here calls
// into the library: formulas are re-typed from their definitions, evaluated
// in long double with plain loops.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<long double>;

inline long double dot(const Vec& a, const Vec& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// 1/2 (x.theta - y)^2 + lambda/2 |theta|^2
inline long double ridge_loss(const Vec& theta, const Vec& x, long double y, long double lambda) {
    const long double r = dot(x, theta) - y;
    return 0.5L * r * r + 0.5L * lambda * dot(theta, theta);
}

/// Central finite-difference gradient of f at theta.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> theta, double h) {
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double fp = f(theta);
        theta[i] = keep - h;
        const double fm = f(theta);
        theta[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Plain gradient descent on the averaged ridge objective until the gradient
/// norm is below tol. samples[n][i] = (features, target).
struct Sample {
    Vec x;
    long double y;
};

inline Vec full_gradient(const std::vector<std::vector<Sample>>& users, const Vec& theta, long double lambda) {
    Vec g(theta.size(), 0);
    for (const auto& u : users) {
        Vec gu(theta.size(), 0);
        for (const auto& s : u) {
            const long double r = dot(s.x, theta) - s.y;
            for (std::size_t j = 0; j < theta.size(); ++j) gu[j] += r * s.x[j] + lambda * theta[j];
        }
        for (std::size_t j = 0; j < theta.size(); ++j) g[j] += gu[j] / static_cast<long double>(u.size());
    }
    for (auto& v : g) v /= static_cast<long double>(users.size());
    return g;
}

inline Vec gradient_descent(const std::vector<std::vector<Sample>>& users, std::size_t d, long double lambda,
                            long double step, long double tol, int max_iter = 1000000) {
    Vec theta(d, 0);
    for (int it = 0; it < max_iter; ++it) {
        const Vec g = full_gradient(users, theta, lambda);
        if (std::sqrt(dot(g, g)) < tol) break;
        for (std::size_t j = 0; j < d; ++j) theta[j] -= step * g[j];
    }
    return theta;
}

inline long double average_loss(const std::vector<std::vector<Sample>>& users, const Vec& theta, long double lambda) {
    long double F = 0;
    for (const auto& u : users) {
        long double f = 0;
        for (const auto& s : u) f += ridge_loss(theta, s.x, s.y, lambda);
        F += f / static_cast<long double>(u.size());
    }
    return F / static_cast<long double>(users.size());
}

/// Bound-formula inputs, spelled out as plain numbers.
struct Params {
    long double L, mu, G2, Gamma, d, N, H, P, s2;
    std::vector<long double> M2;
    long double delta0, shift;
    long double T;
    long double K, hmin;
};

inline long double B(const Params& p) {
    long double m = 0;
    for (long double v : p.M2) m += v;
    return 8 * p.H * p.H * p.G2 + m / (p.N * p.N) + 6 * p.L * p.Gamma;
}

inline long double C(const Params& p) { return B(p) + 4 * p.d * p.H * p.H * p.G2 * p.s2 / (p.P * p.N * p.N); }

inline long double Ct(const Params& p) {
    return B(p) + 4 * p.d * p.H * p.H * p.G2 * p.s2 / (p.P * p.K * p.K * p.hmin * p.hmin);
}

inline long double D(const Params& p) {
    if (p.N == 1) return 0;
    return 4 * (p.N - p.K) / (p.K * (p.N - 1)) * p.H * p.H * p.G2;
}

inline long double SR(long double a, long double H, long R) {
    long double s = 0;
    for (long r = 1; r <= R; ++r) s += (a + r * H) * (a + r * H);
    return s;
}

inline long double thm1(const Params& p) {
    const long double a = p.shift, T = p.T, H = p.H, R = T / H;
    const long double S = SR(a, H, static_cast<long>(std::llround(static_cast<double>(R))));
    const long double t1 = 4 * (T + R) * (2 * a + H + R - 1) * B(p) / (3 * p.mu * S);
    const long double t2 = 16 * p.d * T * H * p.G2 * p.s2 * (2 * a + T + H) / (3 * p.mu * p.P * p.N * p.N * S);
    const long double t3 = p.mu * a * a * a * p.delta0 / (6 * S);
    return t1 + t2 + t3;
}

inline long double inst(const Params& p, long double c) {
    const long double arm1 = 4 * c, arm2 = p.mu * p.mu * p.shift * p.delta0;
    return 2 * p.L * (arm1 > arm2 ? arm1 : arm2) / (p.mu * p.mu * (p.T + p.shift));
}

inline long double thm2(const Params& p) { return inst(p, C(p)); }
inline long double thm3(const Params& p) { return inst(p, Ct(p) + D(p)); }

/// All K-subsets of {0..N-1}, lexicographic.
inline std::vector<std::vector<int>> subsets(int N, int K) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(cur.size()) == K) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < N; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

/// Upper 1% point of the chi-square distribution with 19 degrees of freedom.
inline constexpr double kChi2_19_p01 = 36.1909;

inline double sample_variance(const std::vector<double>& v) {
    long double m = 0;
    for (double x : v) m += x;
    m /= static_cast<long double>(v.size());
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(s / static_cast<long double>(v.size() - 1));
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

}  // namespace oracle

#endif  // OTAFL_TESTS_ORACLES_HPP
