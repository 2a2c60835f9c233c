#include "support/fixtures.hpp"

#include <gtest/gtest.h>

using namespace otafl;

namespace {

struct Instance {
    std::vector<UserShard> shards;
    Quadratic q;
    Optimum opt;
    StepSchedule sched;

    explicit Instance(int N = 4, int d = 3, int per_user = 40, std::uint64_t seed = 3)
        : shards(fixtures::synthetic_shards(d, N, per_user, seed)),
          q(global_quadratic(shards, 0.5)),
          opt(solve_optimum(shards, 0.5)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A);
        const double L = eig.eigenvalues().maxCoeff(), mu = eig.eigenvalues().minCoeff();
        sched = StepSchedule{ScheduleKind::thm2, mu, StepSchedule::default_shift(ScheduleKind::thm2, L, mu, 5)};
    }

    TrainerConfig config(Scheme s, int R = 10) const {
        TrainerConfig c;
        c.H = 5;
        c.R = R;
        c.scheme = s;
        c.schedule = sched;
        c.fading = FadingPolicy{0.4724, 3};
        return c;
    }

    GapFunction gap() const { return ridge_gap(q, opt.F_star); }
};

AlphaSchedule constant_alpha(int R, double a) { return AlphaSchedule{std::vector<double>(static_cast<std::size_t>(R), a)}; }

}  // namespace

TEST(RunRound, NoiselessCotafEqualsNoiseFree) {
    const Instance inst;
    RandomSource g(1, 1);
    const ModelVector theta = g.normal_vector(3);
    const RandomSource trial(5, 5);
    auto s1 = TrainingStreams::for_trial(trial, 4, Scheme::cotaf);
    auto s2 = TrainingStreams::for_trial(trial, 4, Scheme::noise_free_local_sgd);
    const auto a = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf), 0.37,
                             ChannelKind{AwgnMac{0.0}}, s1, 1, RidgeObjective(0.5));
    const auto b = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::noise_free_local_sgd),
                             0.37, ChannelKind{NoiselessOrthogonal{}}, s2, 1, RidgeObjective(0.5));
    EXPECT_LT((a.theta_global - b.theta_global).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RunRound, SingleUserNoiseFreeIsPlainSgd) {
    const Instance inst(1);
    RandomSource g(2, 2);
    const ModelVector theta = g.normal_vector(3);
    const RandomSource trial(6, 6);
    auto streams = TrainingStreams::for_trial(trial, 1, Scheme::noise_free_local_sgd);
    RandomSource manual_rng = streams.users[0];
    const auto tr = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::noise_free_local_sgd),
                              1.0, ChannelKind{NoiselessOrthogonal{}}, streams, 3, RidgeObjective(0.5));
    ModelVector manual = theta;
    for (long t = 10; t < 15; ++t) manual = sgd_step(manual, inst.shards[0], inst.sched(static_cast<double>(t)), manual_rng, 0.5);
    EXPECT_LT((tr.theta_global - manual).norm(), 1e-14);
    EXPECT_EQ(tr.t, 15);
    EXPECT_EQ(tr.round, 3);
}

TEST(RunRound, EveryUserStartsFromTheBroadcastModel) {
    const Instance inst;
    RandomSource g(3, 3);
    const ModelVector theta = g.normal_vector(3);
    const RandomSource trial(7, 7);
    auto streams = TrainingStreams::for_trial(trial, 4, Scheme::noise_free_local_sgd);
    auto copy = streams;
    const auto tr = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::noise_free_local_sgd),
                              1.0, ChannelKind{NoiselessOrthogonal{}}, streams, 1, RidgeObjective(0.5));
    ModelVector avg = ModelVector::Zero(3);
    for (std::size_t n = 0; n < 4; ++n) {
        const ModelVector local = local_sgd(theta, inst.shards[n], 0, 5, inst.sched, copy.users[n], RidgeObjective(0.5));
        avg += local / 4.0;
        EXPECT_NEAR(tr.tx_energy[n], (local - theta).squaredNorm(), 1e-12);
    }
    EXPECT_LT((tr.theta_global - avg).norm(), 1e-13);
}

TEST(RunRound, CotafRecordsNoiseAndPrecodedEnergy) {
    const Instance inst;
    RandomSource g(4, 4);
    const ModelVector theta = g.normal_vector(3);
    const RandomSource trial(8, 8);
    auto noisy = TrainingStreams::for_trial(trial, 4, Scheme::cotaf);
    auto clean = TrainingStreams::for_trial(trial, 4, Scheme::noise_free_local_sgd);
    const double alpha = 0.6, s2 = 2.0;
    const auto a = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf), alpha,
                             ChannelKind{AwgnMac{s2}}, noisy, 1, RidgeObjective(0.5));
    const auto b = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::noise_free_local_sgd),
                             alpha, ChannelKind{NoiselessOrthogonal{}}, clean, 1, RidgeObjective(0.5));
    ASSERT_EQ(a.channel_noise.size(), 3);
    EXPECT_LT((a.theta_global - (b.theta_global + a.channel_noise / (4.0 * std::sqrt(alpha)))).norm(), 1e-12);
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(a.tx_energy[n], alpha * b.tx_energy[n], 1e-12 * (1 + b.tx_energy[n]));
    EXPECT_DOUBLE_EQ(a.tx_power_max, *std::max_element(a.tx_energy.begin(), a.tx_energy.end()));
}

TEST(RunRound, CotafNoiseVarianceOverRepeatedDraws) {
    const Instance inst;
    const ModelVector theta = ModelVector::Ones(3);
    const double alpha = 0.25, s2 = 3.0;
    const RandomSource trial(9, 9);
    auto clean = TrainingStreams::for_trial(trial, 4, Scheme::noise_free_local_sgd);
    const ModelVector ref = run_round(theta, std::span<const UserShard>(inst.shards),
                                      inst.config(Scheme::noise_free_local_sgd), alpha,
                                      ChannelKind{NoiselessOrthogonal{}}, clean, 1, RidgeObjective(0.5))
                                .theta_global;
    std::vector<double> e;
    for (int k = 0; k < 4000; ++k) {
        auto s = TrainingStreams::for_trial(trial, 4, Scheme::cotaf);
        s.noise = RandomSource(10, static_cast<std::uint64_t>(k));
        const ModelVector out = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf),
                                          alpha, ChannelKind{AwgnMac{s2}}, s, 1, RidgeObjective(0.5))
                                    .theta_global;
        for (Eigen::Index j = 0; j < 3; ++j) e.push_back(out[j] - ref[j]);
    }
    const double expect = s2 / (16.0 * alpha);
    EXPECT_NEAR(oracle::sample_variance(e), expect, 0.05 * expect);
}

TEST(RunRound, SchemeChannelMismatchThrows) {
    const Instance inst;
    const RandomSource trial(1, 1);
    auto s = TrainingStreams::for_trial(trial, 4, Scheme::cotaf);
    EXPECT_THROW(run_round(ModelVector::Zero(3), std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf), 1.0,
                           ChannelKind{FadingMac{1.0}}, s, 1, RidgeObjective(0.5)),
                 ConfigError);
    EXPECT_THROW(run_round(ModelVector::Zero(3), std::span<const UserShard>(inst.shards),
                           inst.config(Scheme::cotaf_fading), 1.0, ChannelKind{AwgnMac{1.0}}, s, 1, RidgeObjective(0.5)),
                 ConfigError);
}

TEST(RunRound, FadingSchemesSelectKParticipants) {
    const Instance inst;
    const RandomSource trial(11, 11);
    for (Scheme sc : {Scheme::cotaf_fading, Scheme::non_precoded_ota}) {
        auto s = TrainingStreams::for_trial(trial, 4, sc);
        for (int r = 1; r <= 20; ++r) {
            const auto tr = run_round(ModelVector::Ones(3), std::span<const UserShard>(inst.shards), inst.config(sc), 0.5,
                                      ChannelKind{FadingMac{0.1}}, s, r, RidgeObjective(0.5));
            ASSERT_EQ(tr.participants.size(), 3u);
            for (std::size_t n = 0; n < 4; ++n) {
                const bool in = std::find(tr.participants.begin(), tr.participants.end(), static_cast<int>(n + 1)) !=
                                tr.participants.end();
                if (!in) {
                    EXPECT_EQ(tr.tx_energy[n], 0.0);
                }
            }
        }
    }
}

TEST(RunRound, NoiselessFadingCotafAveragesParticipants) {
    const Instance inst;
    const RandomSource trial(12, 12);
    auto s = TrainingStreams::for_trial(trial, 4, Scheme::cotaf_fading);
    auto copy = TrainingStreams::for_trial(trial, 4, Scheme::noise_free_local_sgd);
    const ModelVector theta = ModelVector::Ones(3);
    const auto tr = run_round(theta, std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf_fading), 0.8,
                              ChannelKind{FadingMac{0.0}}, s, 1, RidgeObjective(0.5));
    ModelVector avg = ModelVector::Zero(3);
    for (int id : tr.participants) {
        const auto n = static_cast<std::size_t>(id - 1);
        avg += local_sgd(theta, inst.shards[n], 0, 5, inst.sched, copy.users[n], RidgeObjective(0.5)) / 3.0;
    }
    EXPECT_LT((tr.theta_global - avg).norm(), 1e-12);
}

TEST(RunTraining, ZeroRoundsKeepsTheta0) {
    const Instance inst;
    const RandomSource trial(13, 13);
    const auto res = run_training(std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf, 0),
                                  constant_alpha(0, 1.0), ChannelKind{AwgnMac{1.0}}, trial, RidgeObjective(0.5));
    EXPECT_TRUE(res.traces.empty());
    EXPECT_EQ(res.final_theta(), res.theta0);
    EXPECT_EQ(res.theta0.size(), 3);
}

TEST(RunTraining, AlphaCancelsForAnyScheduleWithoutNoise) {
    const Instance inst;
    RandomSource g(14, 14);
    AlphaSchedule alpha;
    for (int r = 0; r < 15; ++r) alpha.alpha.push_back(std::exp(3.0 * g.normal()));
    const RandomSource trial(15, 15);
    const auto a = run_training(std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf, 15), alpha,
                                ChannelKind{AwgnMac{0.0}}, trial, RidgeObjective(0.5));
    const auto b = run_training(std::span<const UserShard>(inst.shards), inst.config(Scheme::noise_free_local_sgd, 15),
                                alpha, ChannelKind{NoiselessOrthogonal{}}, trial, RidgeObjective(0.5));
    EXPECT_EQ(a.theta0, b.theta0);
    for (std::size_t r = 0; r < 15; ++r)
        EXPECT_LT((a.traces[r].theta_global - b.traces[r].theta_global).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RunTraining, DeterministicUnderFixedSeed) {
    const Instance inst;
    const RandomSource trial(16, 16);
    const auto run = [&] {
        return run_training(std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf, 8), constant_alpha(8, 0.5),
                            ChannelKind{AwgnMac{1.0}}, trial, RidgeObjective(0.5), inst.gap());
    };
    const auto a = run(), b = run();
    for (std::size_t r = 0; r < 8; ++r) {
        EXPECT_EQ(a.traces[r].theta_global, b.traces[r].theta_global);
        EXPECT_EQ(a.traces[r].gap, b.traces[r].gap);
    }
}

TEST(RunTraining, NoiseFreeGapMostlyNonIncreasing) {
    // noiseless labels and light regularization: per-sample gradients nearly vanish at theta*
    const double lambda = 1e-4;
    const auto shards = fixtures::synthetic_shards(3, 4, 100, 21, 0.0);
    const Quadratic q = global_quadratic(shards, lambda);
    const Optimum opt = solve_optimum(shards, lambda);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A);
    const double L = eig.eigenvalues().maxCoeff(), mu = eig.eigenvalues().minCoeff();
    TrainerConfig cfg;
    cfg.H = 5;
    cfg.R = 60;
    cfg.scheme = Scheme::noise_free_local_sgd;
    cfg.schedule = StepSchedule{ScheduleKind::thm2, mu, StepSchedule::default_shift(ScheduleKind::thm2, L, mu, 5)};
    for (std::uint64_t seed : {22u, 23u, 24u}) {
        const auto res = run_training(std::span<const UserShard>(shards), cfg, AlphaSchedule{},
                                      ChannelKind{NoiselessOrthogonal{}}, RandomSource(seed, 0), RidgeObjective(lambda),
                                      ridge_gap(q, opt.F_star));
        int non_increasing = 0;
        for (int r = 1; r < cfg.R; ++r)
            non_increasing += res.traces[static_cast<std::size_t>(r)].gap <= res.traces[static_cast<std::size_t>(r - 1)].gap;
        EXPECT_GE(non_increasing, static_cast<int>(0.9 * (cfg.R - 1))) << "seed " << seed;
    }
}

TEST(RunTraining, GapIsNonNegative) {
    const Instance inst;
    for (Scheme s : {Scheme::cotaf, Scheme::non_precoded_ota, Scheme::noise_free_local_sgd}) {
        const auto res = run_training(std::span<const UserShard>(inst.shards), inst.config(s, 30), constant_alpha(30, 2.0),
                                      ChannelKind{AwgnMac{0.5}}, RandomSource(23, 0), RidgeObjective(0.5), inst.gap());
        for (const auto& tr : res.traces) EXPECT_GE(tr.gap, -1e-9);
    }
}

TEST(RunTraining, Errors) {
    const Instance inst;
    const RandomSource trial(24, 24);
    EXPECT_THROW(run_training(std::span<const UserShard>(inst.shards), inst.config(Scheme::cotaf, 5), constant_alpha(4, 1.0),
                              ChannelKind{AwgnMac{1.0}}, trial, RidgeObjective(0.5)),
                 ConfigError);
    TrainerConfig bad = inst.config(Scheme::cotaf, 2);
    bad.H = 0;
    EXPECT_THROW(run_training(std::span<const UserShard>(inst.shards), bad, constant_alpha(2, 1.0),
                              ChannelKind{AwgnMac{1.0}}, trial, RidgeObjective(0.5)),
                 ConfigError);
    TrainerConfig blowup = inst.config(Scheme::noise_free_local_sgd, 3);
    blowup.schedule.mu = 1e-300;  // enormous steps overflow to inf
    EXPECT_THROW(run_training(std::span<const UserShard>(inst.shards), blowup, AlphaSchedule{},
                              ChannelKind{NoiselessOrthogonal{}}, trial, RidgeObjective(0.5)),
                 RuntimeError);
}

TEST(RunTraining, SchemesShareThetaZeroAndSgdStreams) {
    const RandomSource trial(25, 25);
    const auto a = TrainingStreams::for_trial(trial, 3, Scheme::cotaf);
    const auto b = TrainingStreams::for_trial(trial, 3, Scheme::non_precoded_ota);
    for (std::size_t n = 0; n < 3; ++n) {
        RandomSource x = a.users[n], y = b.users[n];
        EXPECT_EQ(x.uniform(), y.uniform());
    }
    RandomSource nx = a.noise, ny = b.noise;
    EXPECT_NE(nx.uniform(), ny.uniform());
}

TEST(WeightedAverage, SingleRoundIsThatModel) {
    const ModelVector t = ModelVector::LinSpaced(3, 1, 3);
    const std::vector<std::pair<int, ModelVector>> h{{1, t}};
    EXPECT_LT((weighted_average_model(h, 20.0, 10) - t).norm(), 1e-15);
}

TEST(WeightedAverage, EqualModelsGiveTheCommonVector) {
    const ModelVector t = ModelVector::Constant(4, -0.3);
    std::vector<std::pair<int, ModelVector>> h;
    for (int r = 1; r <= 9; ++r) h.emplace_back(r, t);
    EXPECT_LT((weighted_average_model(h, 5.0, 3) - t).norm(), 1e-15);
}

TEST(WeightedAverage, WeightsMatchIndependentSummation) {
    RandomSource g(26, 26);
    const double a = 7.5;
    const int H = 4, R = 12;
    std::vector<std::pair<int, ModelVector>> h;
    std::vector<long double> acc(2, 0);
    for (int r = 1; r <= R; ++r) {
        h.emplace_back(r, g.normal_vector(2));
        const long double beta = (a + r * H) * (a + r * H);
        for (int j = 0; j < 2; ++j) acc[static_cast<std::size_t>(j)] += beta * h.back().second[j];
    }
    const long double S = oracle::SR(a, H, R);
    const ModelVector got = weighted_average_model(h, a, H);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(got[j], static_cast<double>(acc[static_cast<std::size_t>(j)] / S), 1e-12);
    EXPECT_THROW(weighted_average_model(std::vector<std::pair<int, ModelVector>>{}, a, H), ConfigError);
}

TEST(Scheme, ParseAndPrint) {
    for (Scheme s : {Scheme::cotaf, Scheme::cotaf_fading, Scheme::non_precoded_ota, Scheme::noise_free_local_sgd})
        EXPECT_EQ(parse_scheme(to_string(s)), s);
    EXPECT_THROW(parse_scheme("fedavg"), ConfigError);
}
