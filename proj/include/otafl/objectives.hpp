#ifndef OTAFL_OBJECTIVES_HPP
#define OTAFL_OBJECTIVES_HPP

#include "otafl/random.hpp"
#include "otafl/types.hpp"

#include <algorithm>
#include <concepts>
#include <span>
#include <vector>

namespace otafl {

/// Anything that evaluates a per-sample loss and its gradient.
template <class Oracle>
concept GradientOracle = requires(const Oracle& o, const ModelVector& theta, const RegressionSample& s) {
    { o.loss(theta, s) } -> std::convertible_to<double>;
    { o.grad(theta, s) } -> std::convertible_to<ModelVector>;
};

inline void check_sample(const ModelVector& theta, const RegressionSample& s) {
    require_same_dim(theta, s.features, "ridge objective");
}

/// l(s; theta) = 1/2 (s_s . theta - s_y)^2 + lambda/2 ||theta||^2
inline double ridge_loss(const ModelVector& theta, const RegressionSample& s, double lambda) {
    check_sample(theta, s);
    const double r = s.features.dot(theta) - s.target;
    return 0.5 * r * r + 0.5 * lambda * theta.squaredNorm();
}

inline ModelVector ridge_grad(const ModelVector& theta, const RegressionSample& s, double lambda) {
    check_sample(theta, s);
    const double r = s.features.dot(theta) - s.target;
    return r * s.features + lambda * theta;
}

struct RidgeObjective {
    double lambda = 0.5;

    explicit RidgeObjective(double lam = 0.5) : lambda(lam) {
        if (!(lambda >= 0.0)) throw ConfigError("ridge objective: lambda must be >= 0");
    }
    double loss(const ModelVector& theta, const RegressionSample& s) const { return ridge_loss(theta, s, lambda); }
    ModelVector grad(const ModelVector& theta, const RegressionSample& s) const {
        return ridge_grad(theta, s, lambda);
    }
};

static_assert(GradientOracle<RidgeObjective>);

inline void check_shards(std::span<const UserShard> shards) {
    if (shards.empty()) throw ConfigError("no user shards");
    for (const auto& sh : shards)
        if (sh.samples.empty())
            throw ConfigError("user shard " + std::to_string(sh.user_id) + " is empty");
}

/// f_n(theta): mean per-sample loss over one shard.
inline double local_loss(const ModelVector& theta, const UserShard& shard, double lambda) {
    if (shard.samples.empty()) throw ConfigError("user shard " + std::to_string(shard.user_id) + " is empty");
    double acc = 0.0;
    for (const auto& s : shard.samples) acc += ridge_loss(theta, s, lambda);
    return acc / static_cast<double>(shard.size());
}

/// F(theta) = (1/N) sum_n f_n(theta), by direct summation.
inline double global_loss(const ModelVector& theta, std::span<const UserShard> shards, double lambda) {
    check_shards(shards);
    double acc = 0.0;
    for (const auto& sh : shards) acc += local_loss(theta, sh, lambda);
    return acc / static_cast<double>(shards.size());
}

inline ModelVector local_gradient(const ModelVector& theta, const UserShard& shard, double lambda) {
    ModelVector g = ModelVector::Zero(theta.size());
    for (const auto& s : shard.samples) g += ridge_grad(theta, s, lambda);
    return g / static_cast<double>(shard.size());
}

inline ModelVector global_gradient(const ModelVector& theta, std::span<const UserShard> shards, double lambda) {
    check_shards(shards);
    ModelVector g = ModelVector::Zero(theta.size());
    for (const auto& sh : shards) g += local_gradient(theta, sh, lambda);
    return g / static_cast<double>(shards.size());
}

/// The ridge objective written as 1/2 theta' A theta - b' theta + c.
/// A is the averaged Gram matrix plus lambda I, i.e. the (constant) Hessian.
struct Quadratic {
    Eigen::MatrixXd A;
    ModelVector b;
    double c = 0.0;

    double value(const ModelVector& theta) const { return 0.5 * theta.dot(A * theta) - b.dot(theta) + c; }
    ModelVector gradient(const ModelVector& theta) const { return A * theta - b; }
};

inline Quadratic local_quadratic(const UserShard& shard, double lambda) {
    if (shard.samples.empty()) throw ConfigError("user shard " + std::to_string(shard.user_id) + " is empty");
    const Eigen::Index d = shard.samples.front().features.size();
    Quadratic q{Eigen::MatrixXd::Zero(d, d), ModelVector::Zero(d), 0.0};
    for (const auto& s : shard.samples) {
        if (s.features.size() != d) throw ConfigError("user shard has inconsistent feature dimension");
        q.A.selfadjointView<Eigen::Lower>().rankUpdate(s.features);
        q.b += s.target * s.features;
        q.c += 0.5 * s.target * s.target;
    }
    q.A = q.A.selfadjointView<Eigen::Lower>();
    const double inv = 1.0 / static_cast<double>(shard.size());
    q.A *= inv;
    q.b *= inv;
    q.c *= inv;
    q.A.diagonal().array() += lambda;
    return q;
}

inline Quadratic global_quadratic(std::span<const UserShard> shards, double lambda) {
    check_shards(shards);
    Quadratic acc = local_quadratic(shards.front(), lambda);
    for (std::size_t n = 1; n < shards.size(); ++n) {
        const Quadratic q = local_quadratic(shards[n], lambda);
        if (q.b.size() != acc.b.size()) throw ConfigError("user shards disagree on feature dimension");
        acc.A += q.A;
        acc.b += q.b;
        acc.c += q.c;
    }
    const double inv = 1.0 / static_cast<double>(shards.size());
    acc.A *= inv;
    acc.b *= inv;
    acc.c *= inv;
    return acc;
}

namespace detail {

inline ModelVector solve_normal_equations(const Quadratic& q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw RuntimeError("normal equations: eigen-solver failed");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * std::max(hi, 1.0)))
        throw RuntimeError("normal equations are singular (lambda = 0 and rank-deficient Gram matrix)");
    Eigen::LDLT<Eigen::MatrixXd> ldlt(q.A);
    ModelVector x = ldlt.solve(q.b);
    // one step of iterative refinement
    x += ldlt.solve(q.b - q.A * x);
    return x;
}

}  // namespace detail

struct Optimum {
    ModelVector theta_star;
    double F_star = 0.0;
};

/// Exact minimiser of F from the normal equations (A theta = b).
inline Optimum solve_optimum(std::span<const UserShard> shards, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("solve_optimum: lambda must be >= 0");
    const Quadratic q = global_quadratic(shards, lambda);
    Optimum opt;
    opt.theta_star = detail::solve_normal_equations(q);
    opt.F_star = global_loss(opt.theta_star, shards, lambda);
    return opt;
}

/// Minimiser of a single user's local objective.
inline Optimum solve_local_optimum(const UserShard& shard, double lambda) {
    const Quadratic q = local_quadratic(shard, lambda);
    Optimum opt;
    opt.theta_star = detail::solve_normal_equations(q);
    opt.F_star = local_loss(opt.theta_star, shard, lambda);
    return opt;
}

/// Gamma = F* - (1/N) sum_n f_n*. Non-negative up to rounding.
inline double heterogeneity(std::span<const UserShard> shards, double lambda) {
    const Optimum global = solve_optimum(shards, lambda);
    double mean_local = 0.0;
    for (const auto& sh : shards) mean_local += solve_local_optimum(sh, lambda).F_star;
    mean_local /= static_cast<double>(shards.size());
    return std::max(0.0, global.F_star - mean_local);
}

/// Points at which the gradient moments are probed: the centre, the two ends
/// of every Hessian eigen-axis at the given radius, and `random_points`
/// uniform directions on the sphere.
inline std::vector<ModelVector> make_probe_region(const ModelVector& center, double radius,
                                                  const Eigen::MatrixXd& hessian, int random_points,
                                                  RandomSource& rng) {
    std::vector<ModelVector> pts{center};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
    if (eig.info() != Eigen::Success) throw RuntimeError("probe region: eigen-solver failed");
    for (Eigen::Index k = 0; k < hessian.cols(); ++k) {
        pts.push_back(center + radius * eig.eigenvectors().col(k));
        pts.push_back(center - radius * eig.eigenvectors().col(k));
    }
    for (int k = 0; k < random_points; ++k) {
        ModelVector dir = rng.normal_vector(center.size());
        const double nrm = dir.norm();
        if (nrm > 0.0) pts.push_back(center + (radius / nrm) * dir);
    }
    return pts;
}

struct GradientMoments {
    double second_moment = 0.0;  // mean_i ||grad_i||^2
    double variance = 0.0;       // mean_i ||grad_i - grad_f_n||^2
};

inline GradientMoments local_gradient_moments(const ModelVector& theta, const UserShard& shard, double lambda) {
    GradientMoments m;
    ModelVector mean = ModelVector::Zero(theta.size());
    for (const auto& s : shard.samples) {
        const ModelVector g = ridge_grad(theta, s, lambda);
        m.second_moment += g.squaredNorm();
        mean += g;
    }
    const double n = static_cast<double>(shard.size());
    m.second_moment /= n;
    mean /= n;
    m.variance = std::max(0.0, m.second_moment - mean.squaredNorm());
    return m;
}

/// Numerical constants for the bounds. L and mu are exact Hessian eigenvalues;
/// G2 and Mn2 are maxima over the probe region, inflated by `safety`.
/// H, P and sigma_w2 are left at their defaults for the caller to fill in.
inline ProblemConstants estimate_constants(std::span<const UserShard> shards, double lambda,
                                           std::span<const ModelVector> probe_region, double safety = 1.1) {
    if (probe_region.empty()) throw ConfigError("estimate_constants: probe region is empty");
    if (!(lambda > 0.0)) throw ConfigError("estimate_constants: lambda must be > 0");
    check_shards(shards);
    const Quadratic q = global_quadratic(shards, lambda);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw RuntimeError("estimate_constants: eigen-solver failed");

    ProblemConstants c;
    c.L = eig.eigenvalues().maxCoeff();
    c.mu = eig.eigenvalues().minCoeff();
    c.d = static_cast<int>(q.b.size());
    c.N = static_cast<int>(shards.size());
    c.Mn2.assign(shards.size(), 0.0);
    double g2 = 0.0;
    for (std::size_t n = 0; n < shards.size(); ++n) {
        for (const auto& theta : probe_region) {
            const GradientMoments m = local_gradient_moments(theta, shards[n], lambda);
            g2 = std::max(g2, m.second_moment);
            c.Mn2[n] = std::max(c.Mn2[n], m.variance);
        }
        c.Mn2[n] *= safety;
    }
    c.G2 = safety * g2;
    c.Gamma = heterogeneity(shards, lambda);
    return c;
}

}  // namespace otafl

#endif  // OTAFL_OBJECTIVES_HPP
