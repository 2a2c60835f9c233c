#ifndef OTAFL_HARNESS_HPP
#define OTAFL_HARNESS_HPP

#include "otafl/channel.hpp"
#include "otafl/codec.hpp"
#include "otafl/config.hpp"
#include "otafl/data.hpp"
#include "otafl/metrics.hpp"
#include "otafl/objectives.hpp"
#include "otafl/theory.hpp"
#include "otafl/trainer.hpp"
#include "otafl/types.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace otafl {

/// A fully prepared problem instance: data, optimum, constants, step
/// schedule and precoder schedule. Shared read-only by all trials.
struct ExperimentSetup {
    ExperimentConfig config;
    std::vector<UserShard> shards;
    Quadratic objective;
    Optimum optimum;
    ProblemConstants constants;
    StepSchedule schedule;
    ChannelKind channel;
    AlphaSchedule alpha;
    int K = 1;
    double h_min = 1.0;
    double delta0_analytic = 0.0;  // E||theta_0 - theta*||^2 = theta0_std^2 d + ||theta*||^2

    TrainerConfig trainer_config(Scheme scheme) const {
        TrainerConfig t;
        t.H = config.H;
        t.R = config.rounds;
        t.scheme = scheme;
        t.schedule = schedule;
        t.theta0_std = config.theta0_std;
        t.P = config.channel.P;
        t.non_precoded_gain = config.non_precoded_gain.value_or(0.0);
        t.fading = FadingPolicy{h_min, K};
        return t;
    }
};

inline Dataset load_dataset(const ExperimentConfig& cfg, RandomSource& rng) {
    if (cfg.dataset.kind == "csv")
        return load_csv(cfg.dataset.path, CsvOptions{cfg.dataset.header, cfg.dataset.standardize});
    return generate_synthetic(cfg.dataset.d, cfg.dataset.samples, cfg.dataset.noise_std, rng);
}

/// 10 log10(P / sigma_w^2) must equal the configured SNR.
inline void check_snr_bookkeeping(const ExperimentConfig& cfg, const ChannelKind& channel) {
    if (cfg.channel.kind == "noiseless" || !cfg.channel.snr_db) return;
    const double s2 = noise_variance(channel);
    const double snr = 10.0 * std::log10(cfg.channel.P / s2);
    if (!(std::abs(snr - *cfg.channel.snr_db) <= 1e-9 * std::max(1.0, std::abs(snr))))
        throw RuntimeError("SNR bookkeeping mismatch: configured " + std::to_string(*cfg.channel.snr_db) +
                           " dB, channel uses " + std::to_string(snr) + " dB");
}

inline ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentSetup s;
    s.config = cfg;
    const RandomSource root(cfg.seed, 0);

    RandomSource data_rng = root.derive("data");
    const Dataset ds = load_dataset(cfg, data_rng);
    RandomSource part_rng = root.derive("partition");
    s.shards = partition(ds, cfg.partition, part_rng);

    s.objective = global_quadratic(s.shards, cfg.lambda);
    s.optimum = solve_optimum(s.shards, cfg.lambda);
    const auto d = static_cast<double>(s.optimum.theta_star.size());
    s.delta0_analytic = cfg.theta0_std * cfg.theta0_std * d + s.optimum.theta_star.squaredNorm();

    RandomSource probe_rng = root.derive("probe");
    const auto probe = make_probe_region(s.optimum.theta_star, cfg.probe.radius_factor * std::sqrt(s.delta0_analytic),
                                         s.objective.A, cfg.probe.random_points, probe_rng);
    s.constants = estimate_constants(s.shards, cfg.lambda, probe, cfg.probe.safety);
    s.channel = cfg.channel_kind();
    check_snr_bookkeeping(cfg, s.channel);
    s.constants.H = cfg.H;
    s.constants.P = cfg.channel.P;
    s.constants.sigma_w2 = noise_variance(s.channel);

    s.schedule.kind = cfg.schedule;
    s.schedule.mu = s.constants.mu;
    s.schedule.shift = cfg.shift.value_or(StepSchedule::default_shift(cfg.schedule, s.constants.L, s.constants.mu, cfg.H));
    s.schedule.validate(s.constants.L, cfg.H);

    s.K = cfg.participants_K();
    s.h_min = cfg.h_min();

    if (cfg.alpha.source == "file") {
        s.alpha = load_alpha_schedule(cfg.alpha.path);
        if (s.alpha.rounds() < static_cast<std::size_t>(cfg.rounds))
            throw ConfigError("alpha schedule file covers fewer rounds than configured");
    } else if (cfg.alpha.source == "analytic_bound") {
        s.alpha = alpha_upper_bound_schedule(cfg.H, s.schedule, s.constants.G2, cfg.channel.P, cfg.rounds);
    } else {
        RandomSource pilot_rng = root.derive("pilot");
        const auto pilot_shards = subsample_shards(s.shards, cfg.alpha.pilot_fraction, pilot_rng);
        PilotConfig pc{cfg.rounds, cfg.H, s.schedule, cfg.theta0_std, cfg.alpha.pilot_trials};
        pc.P = cfg.channel.P;
        if (cfg.alpha.pilot_channel) {
            pc.sigma_w2 = s.constants.sigma_w2;
            if (std::holds_alternative<FadingMac>(s.channel)) pc.receive_gain = s.K * s.h_min;
        }
        s.alpha = estimate_alpha_mc(pilot_shards, cfg.lambda, pc, cfg.channel.P, pilot_rng);
    }
    return s;
}

/// Per-trial outcomes of one scheme.
struct SchemeRun {
    Scheme scheme = Scheme::cotaf;
    Eigen::MatrixXd gaps;          // trials x rounds
    Eigen::MatrixXd power_max;     // trials x rounds
    Eigen::MatrixXd participants;  // trials x rounds
    Eigen::MatrixXi waits;         // trials x rounds
    Eigen::MatrixXd mean_tx_energy;  // rounds x users, averaged over trials
    std::vector<double> theta_hat_gap;  // gap of the (a + rH)^2-weighted average model, per trial
};

struct ExperimentResult {
    ExperimentSetup setup;
    std::vector<SchemeRun> runs;
    MetricsTable table;
    double delta0_empirical = 0.0;

    double delta0() const { return std::max(setup.delta0_analytic, delta0_empirical); }

    const SchemeRun& run(Scheme s) const {
        for (const auto& r : runs)
            if (r.scheme == s) return r;
        throw ConfigError(std::string("scheme ") + to_string(s) + " was not part of the experiment");
    }

    std::vector<long> round_times() const {
        std::vector<long> t;
        for (int r = 1; r <= setup.config.rounds; ++r) t.push_back(static_cast<long>(r) * setup.config.H);
        return t;
    }

    std::vector<double> mean_gaps(Scheme s) const {
        const auto& g = run(s).gaps;
        std::vector<double> m(static_cast<std::size_t>(g.cols()));
        for (Eigen::Index r = 0; r < g.cols(); ++r) m[static_cast<std::size_t>(r)] = g.col(r).mean();
        return m;
    }

    /// Inputs for the bounds at horizon T with this instance's constants.
    BoundInputs bound_inputs(long T) const {
        return BoundInputs{setup.constants, delta0(), setup.schedule.shift, T, setup.K, setup.h_min};
    }
};

namespace detail {

inline double mean_of(const Eigen::VectorXd& v) { return v.mean(); }

inline double stderr_of(const Eigen::VectorXd& v) {
    const auto n = static_cast<double>(v.size());
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / (n - 1.0) / n);
}

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += threads) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

inline MetricsTable build_table(const ExperimentSetup& setup, const std::vector<SchemeRun>& runs) {
    MetricsTable table;
    const int R = setup.config.rounds;
    for (const auto& run : runs)
        for (int r = 0; r < R; ++r)
            table.rows.push_back(MetricsRow{to_string(run.scheme), r + 1, static_cast<long>(r + 1) * setup.config.H,
                                            detail::mean_of(run.gaps.col(r)), detail::stderr_of(run.gaps.col(r)),
                                            detail::mean_of(run.power_max.col(r)),
                                            detail::mean_of(run.participants.col(r)),
                                            static_cast<long>(run.waits.col(r).sum())});
    return table;
}

/// Monte Carlo over trials. Within a trial all schemes share theta_0, the
/// partition and the SGD sampling streams; channel noise and fading streams
/// are keyed by scheme. Aggregation is ordered by trial index.
inline ExperimentResult run_experiment(ExperimentSetup setup) {
    const ExperimentConfig& cfg = setup.config;
    const int trials = cfg.trials, R = cfg.rounds;
    const auto N = static_cast<Eigen::Index>(setup.shards.size());
    const RandomSource root(cfg.seed, 0);
    const RidgeObjective oracle(cfg.lambda);
    const GapFunction gap = ridge_gap(setup.objective, setup.optimum.F_star);

    std::vector<SchemeRun> runs;
    for (Scheme s : cfg.schemes) {
        SchemeRun run;
        run.scheme = s;
        run.gaps.resize(trials, R);
        run.power_max.resize(trials, R);
        run.participants.resize(trials, R);
        run.waits.resize(trials, R);
        run.mean_tx_energy = Eigen::MatrixXd::Zero(R, N);
        run.theta_hat_gap.assign(static_cast<std::size_t>(trials), 0.0);
        runs.push_back(std::move(run));
    }
    std::vector<std::vector<Eigen::MatrixXd>> energy(runs.size(), std::vector<Eigen::MatrixXd>(trials));
    std::vector<double> delta0(static_cast<std::size_t>(trials), 0.0);

    detail::parallel_for(trials, cfg.threads, [&](int k) {
        const RandomSource trial = root.derive("trial", static_cast<std::uint64_t>(k));
        for (std::size_t si = 0; si < runs.size(); ++si) {
            auto& run = runs[si];
            TrainingResult res;
            try {
                res = run_training(std::span<const UserShard>(setup.shards), setup.trainer_config(run.scheme),
                                   setup.alpha, setup.channel, trial, oracle, gap);
            } catch (const std::exception& e) {
                throw RuntimeError("trial " + std::to_string(k) + ", scheme " + to_string(run.scheme) + ": " + e.what());
            }
            if (si == 0) delta0[static_cast<std::size_t>(k)] = (res.theta0 - setup.optimum.theta_star).squaredNorm();
            Eigen::MatrixXd e(R, N);
            for (int r = 0; r < R; ++r) {
                const auto& tr = res.traces[static_cast<std::size_t>(r)];
                run.gaps(k, r) = tr.gap;
                run.power_max(k, r) = tr.tx_power_max;
                run.participants(k, r) =
                    tr.participants.empty() ? static_cast<double>(N) : static_cast<double>(tr.participants.size());
                run.waits(k, r) = tr.wait_count;
                for (Eigen::Index n = 0; n < N; ++n) e(r, n) = tr.tx_energy[static_cast<std::size_t>(n)];
            }
            energy[si][static_cast<std::size_t>(k)] = std::move(e);
            if (!res.traces.empty()) {
                const auto hist = model_history(res.traces);
                run.theta_hat_gap[static_cast<std::size_t>(k)] =
                    gap(weighted_average_model(hist, setup.schedule.shift, cfg.H));
            }
        }
    });

    for (std::size_t si = 0; si < runs.size(); ++si) {
        for (int k = 0; k < trials; ++k) runs[si].mean_tx_energy += energy[si][static_cast<std::size_t>(k)];
        runs[si].mean_tx_energy /= static_cast<double>(trials);
    }

    ExperimentResult out;
    out.table = build_table(setup, runs);
    double d0 = 0.0;
    for (double v : delta0) d0 += v;
    out.delta0_empirical = d0 / static_cast<double>(trials);
    out.runs = std::move(runs);
    out.setup = std::move(setup);
    return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(prepare_experiment(cfg)); }

struct SchemeSummary {
    Scheme scheme = Scheme::cotaf;
    double final_mean_gap = 0.0;
    double final_stderr = 0.0;
    double half_mean_gap = 0.0;  // at round R/2
    double plateau_ratio = 0.0;  // gap(R) / gap(R/2)
    bool plateau = false;        // ratio >= 0.5 flags an error floor
};

struct PairedComparison {
    Scheme lower = Scheme::noise_free_local_sgd;  // expected smaller gap
    Scheme upper = Scheme::cotaf;
    double mean_diff = 0.0;  // mean over trials of gap_upper - gap_lower at the final round
    double stderr_diff = 0.0;
    bool ordered = false;      // mean gap of lower <= mean gap of upper
    bool significant = false;  // mean_diff > 3 stderr_diff
};

struct CompareReport {
    std::vector<SchemeSummary> schemes;
    std::vector<PairedComparison> pairs;
    bool ordering_holds = true;
};

inline int canonical_rank(Scheme s) {
    switch (s) {
        case Scheme::noise_free_local_sgd: return 0;
        case Scheme::cotaf:
        case Scheme::cotaf_fading: return 1;
        case Scheme::non_precoded_ota: return 2;
    }
    return 3;
}

/// Final-round comparison with the expected ordering
/// noise-free <= COTAF <= non-precoded, paired by trial.
inline CompareReport compare_schemes(const ExperimentResult& res) {
    if (res.runs.size() < 2) throw ConfigError("compare: at least two schemes are required");
    CompareReport rep;
    const int R = res.setup.config.rounds;
    const int last = R - 1;
    const int half = std::max(1, R / 2) - 1;
    for (const auto& run : res.runs) {
        SchemeSummary s;
        s.scheme = run.scheme;
        s.final_mean_gap = run.gaps.col(last).mean();
        s.final_stderr = detail::stderr_of(run.gaps.col(last));
        s.half_mean_gap = run.gaps.col(half).mean();
        s.plateau_ratio = s.final_mean_gap / s.half_mean_gap;
        s.plateau = s.plateau_ratio >= 0.5;
        rep.schemes.push_back(s);
    }
    std::vector<const SchemeRun*> ordered;
    for (const auto& run : res.runs) ordered.push_back(&run);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const SchemeRun* a, const SchemeRun* b) { return canonical_rank(a->scheme) < canonical_rank(b->scheme); });
    for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
        if (canonical_rank(ordered[i]->scheme) == canonical_rank(ordered[i + 1]->scheme)) continue;
        const Eigen::VectorXd diff = ordered[i + 1]->gaps.col(last) - ordered[i]->gaps.col(last);
        PairedComparison p;
        p.lower = ordered[i]->scheme;
        p.upper = ordered[i + 1]->scheme;
        p.mean_diff = diff.mean();
        p.stderr_diff = detail::stderr_of(diff);
        p.ordered = p.mean_diff >= 0.0;
        p.significant = p.mean_diff > 3.0 * p.stderr_diff;
        rep.ordering_holds = rep.ordering_holds && p.ordered;
        rep.pairs.push_back(p);
    }
    return rep;
}

inline nlohmann::json to_json(const CompareReport& rep) {
    nlohmann::json j;
    j["ordering_holds"] = rep.ordering_holds;
    for (const auto& s : rep.schemes)
        j["schemes"].push_back({{"scheme", to_string(s.scheme)},
                                {"final_mean_gap", s.final_mean_gap},
                                {"final_stderr", s.final_stderr},
                                {"half_mean_gap", s.half_mean_gap},
                                {"plateau_ratio", s.plateau_ratio},
                                {"plateau", s.plateau}});
    for (const auto& p : rep.pairs)
        j["pairs"].push_back({{"lower", to_string(p.lower)},
                              {"upper", to_string(p.upper)},
                              {"mean_diff", p.mean_diff},
                              {"stderr_diff", p.stderr_diff},
                              {"ordered", p.ordered},
                              {"significant", p.significant}});
    return j;
}

}  // namespace otafl

#endif  // OTAFL_HARNESS_HPP
