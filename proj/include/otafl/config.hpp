#ifndef OTAFL_CONFIG_HPP
#define OTAFL_CONFIG_HPP

#include "otafl/channel.hpp"
#include "otafl/data.hpp"
#include "otafl/sgd.hpp"
#include "otafl/trainer.hpp"
#include "otafl/types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace otafl {

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | csv
    int d = 20;
    int samples = 10000;
    double noise_std = 0.5;
    std::string path;
    bool header = false;
    bool standardize = true;
};

struct ChannelConfig {
    std::string kind = "awgn";  // awgn | fading | noiseless
    std::optional<double> snr_db = -6.0;
    std::optional<double> sigma_w2;
    double P = 1.0;
    double rayleigh_scale = 1.0 / std::sqrt(2.0);
    std::optional<double> h_min;    // default: calibrated from eligible_fraction
    double eligible_fraction = 0.8;
    std::optional<int> K;           // default: floor(eligible_fraction * N)

    double noise_variance() const {
        if (kind == "noiseless") return 0.0;
        if (sigma_w2) return *sigma_w2;
        return P * std::pow(10.0, -*snr_db / 10.0);
    }
};

struct AlphaConfig {
    std::string source = "mc_pilot";  // mc_pilot | analytic_bound | file
    double pilot_fraction = 0.2;
    int pilot_trials = 10;
    bool pilot_channel = true;  // pilot includes the channel noise
    std::string path;
};

struct ProbeConfig {
    double radius_factor = 2.0;
    int random_points = 32;
    double safety = 1.1;
};

struct OutputConfig {
    std::string path;
    std::string format = "csv";
};

struct ExperimentConfig {
    DatasetConfig dataset;
    PartitionSpec partition{PartitionMode::iid, 20, 0.2};
    double lambda = 0.5;
    int H = 10;
    int rounds = 200;
    ScheduleKind schedule = ScheduleKind::thm2;
    std::optional<double> shift;
    double theta0_std = std::sqrt(5.0);
    ChannelConfig channel;
    std::vector<Scheme> schemes{Scheme::cotaf, Scheme::noise_free_local_sgd, Scheme::non_precoded_ota};
    std::optional<double> non_precoded_gain;
    int trials = 50;
    std::uint64_t seed = 1;
    AlphaConfig alpha;
    ProbeConfig probe;
    int threads = 0;  // 0 = hardware concurrency
    OutputConfig output;

    void validate() const {
        if (dataset.kind != "synthetic" && dataset.kind != "csv")
            throw ConfigError("dataset.kind must be 'synthetic' or 'csv'");
        if (dataset.kind == "synthetic" && (dataset.d < 1 || dataset.samples < 1 || !(dataset.noise_std >= 0.0)))
            throw ConfigError("dataset: d >= 1, samples >= 1 and noise_std >= 0 required");
        if (dataset.kind == "csv" && dataset.path.empty()) throw ConfigError("dataset.path is required for csv");
        partition.validate();
        if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
        if (H < 1 || rounds < 1) throw ConfigError("trainer: H >= 1 and rounds >= 1 required");
        if (shift && !(*shift > 0.0)) throw ConfigError("trainer.shift must be > 0");
        if (!(theta0_std >= 0.0)) throw ConfigError("trainer.theta0_std must be >= 0");
        if (channel.kind != "awgn" && channel.kind != "fading" && channel.kind != "noiseless")
            throw ConfigError("channel.kind must be 'awgn', 'fading' or 'noiseless'");
        if (!(channel.P > 0.0)) throw ConfigError("channel.P must be > 0");
        if (channel.kind != "noiseless") {
            if (channel.sigma_w2 && channel.snr_db) throw ConfigError("channel: give either snr_db or sigma_w2, not both");
            if (!channel.sigma_w2 && !channel.snr_db) throw ConfigError("channel: snr_db or sigma_w2 is required");
            if (channel.snr_db && !std::isfinite(*channel.snr_db)) throw ConfigError("channel.snr_db must be finite");
            if (channel.sigma_w2 && !(*channel.sigma_w2 >= 0.0)) throw ConfigError("channel.sigma_w2 must be >= 0");
        }
        if (!(channel.rayleigh_scale > 0.0)) throw ConfigError("channel.rayleigh_scale must be > 0");
        if (!(channel.eligible_fraction > 0.0 && channel.eligible_fraction < 1.0))
            throw ConfigError("channel.eligible_fraction must lie in (0, 1)");
        if (channel.h_min && !(*channel.h_min > 0.0)) throw ConfigError("channel.h_min must be > 0");
        if (channel.K && (*channel.K < 1 || *channel.K > partition.N))
            throw ConfigError("channel.K must lie in [1, N]");
        if (schemes.empty()) throw ConfigError("at least one scheme is required");
        for (Scheme s : schemes) {
            if (s == Scheme::cotaf_fading && channel.kind != "fading")
                throw ConfigError("scheme cotaf_fading requires channel.kind = 'fading'");
            if (s == Scheme::cotaf && channel.kind == "fading")
                throw ConfigError("scheme cotaf requires a non-fading channel; use cotaf_fading");
        }
        if (non_precoded_gain && !(*non_precoded_gain > 0.0)) throw ConfigError("non_precoded_gain must be > 0");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (alpha.source != "mc_pilot" && alpha.source != "analytic_bound" && alpha.source != "file")
            throw ConfigError("alpha.source must be 'mc_pilot', 'analytic_bound' or 'file'");
        if (alpha.source == "file" && alpha.path.empty()) throw ConfigError("alpha.path is required for source 'file'");
        if (!(alpha.pilot_fraction > 0.0 && alpha.pilot_fraction <= 1.0))
            throw ConfigError("alpha.pilot_fraction must lie in (0, 1]");
        if (alpha.pilot_trials < 1) throw ConfigError("alpha.pilot_trials must be >= 1");
        if (!(probe.radius_factor > 0.0) || probe.random_points < 0 || !(probe.safety >= 1.0))
            throw ConfigError("probe: radius_factor > 0, random_points >= 0, safety >= 1 required");
        if (threads < 0) throw ConfigError("threads must be >= 0");
        if (output.format != "csv" && output.format != "json") throw ConfigError("output.format must be csv or json");
    }

    int participants_K() const {
        if (channel.K) return *channel.K;
        return std::max(1, static_cast<int>(std::floor(channel.eligible_fraction * partition.N)));
    }

    double h_min() const {
        if (channel.h_min) return *channel.h_min;
        if (channel.kind != "fading") return 1.0;
        return rayleigh_threshold_for_eligibility(channel.eligible_fraction, channel.rayleigh_scale);
    }

    ChannelKind channel_kind() const {
        if (channel.kind == "noiseless") return NoiselessOrthogonal{};
        if (channel.kind == "fading") return FadingMac{channel.noise_variance(), channel.rayleigh_scale};
        return AwgnMac{channel.noise_variance()};
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items())
        if (!ok.count(item.key())) throw ConfigError(std::string("unknown key '") + item.key() + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <class T>
void read(const nlohmann::json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    T v{};
    read(j, key, v);
    out = v;
}

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::read;
    detail::reject_unknown_keys(j, "config",
                                {"dataset", "partition", "lambda", "trainer", "channel", "schemes",
                                 "non_precoded_gain", "trials", "seed", "alpha", "probe", "threads", "output"});
    ExperimentConfig c;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        detail::reject_unknown_keys(d, "dataset",
                                    {"kind", "d", "samples", "noise_std", "path", "header", "standardize"});
        read(d, "kind", c.dataset.kind);
        read(d, "d", c.dataset.d);
        read(d, "samples", c.dataset.samples);
        read(d, "noise_std", c.dataset.noise_std);
        read(d, "path", c.dataset.path);
        read(d, "header", c.dataset.header);
        read(d, "standardize", c.dataset.standardize);
    }
    if (j.contains("partition")) {
        const auto& p = j["partition"];
        detail::reject_unknown_keys(p, "partition", {"mode", "users", "skew_fraction"});
        std::string mode = to_string(c.partition.mode);
        read(p, "mode", mode);
        c.partition.mode = parse_partition_mode(mode);
        read(p, "users", c.partition.N);
        read(p, "skew_fraction", c.partition.skew_fraction);
    }
    read(j, "lambda", c.lambda);
    if (j.contains("trainer")) {
        const auto& t = j["trainer"];
        detail::reject_unknown_keys(t, "trainer", {"H", "rounds", "schedule", "shift", "theta0_std"});
        read(t, "H", c.H);
        read(t, "rounds", c.rounds);
        std::string sched = to_string(c.schedule);
        read(t, "schedule", sched);
        c.schedule = parse_schedule_kind(sched);
        read(t, "shift", c.shift);
        read(t, "theta0_std", c.theta0_std);
    }
    if (j.contains("channel")) {
        const auto& ch = j["channel"];
        detail::reject_unknown_keys(ch, "channel",
                                    {"kind", "snr_db", "sigma_w2", "P", "rayleigh_scale", "h_min",
                                     "eligible_fraction", "K"});
        read(ch, "kind", c.channel.kind);
        if (ch.contains("sigma_w2") && !ch.contains("snr_db")) c.channel.snr_db.reset();
        read(ch, "snr_db", c.channel.snr_db);
        read(ch, "sigma_w2", c.channel.sigma_w2);
        read(ch, "P", c.channel.P);
        read(ch, "rayleigh_scale", c.channel.rayleigh_scale);
        read(ch, "h_min", c.channel.h_min);
        read(ch, "eligible_fraction", c.channel.eligible_fraction);
        read(ch, "K", c.channel.K);
    }
    if (j.contains("schemes")) {
        std::vector<std::string> names;
        read(j, "schemes", names);
        c.schemes.clear();
        for (const auto& n : names) c.schemes.push_back(parse_scheme(n));
    }
    read(j, "non_precoded_gain", c.non_precoded_gain);
    read(j, "trials", c.trials);
    read(j, "seed", c.seed);
    if (j.contains("alpha")) {
        const auto& a = j["alpha"];
        detail::reject_unknown_keys(a, "alpha", {"source", "pilot_fraction", "pilot_trials", "pilot_channel", "path"});
        read(a, "source", c.alpha.source);
        read(a, "pilot_fraction", c.alpha.pilot_fraction);
        read(a, "pilot_trials", c.alpha.pilot_trials);
        read(a, "pilot_channel", c.alpha.pilot_channel);
        read(a, "path", c.alpha.path);
    }
    if (j.contains("probe")) {
        const auto& p = j["probe"];
        detail::reject_unknown_keys(p, "probe", {"radius_factor", "random_points", "safety"});
        read(p, "radius_factor", c.probe.radius_factor);
        read(p, "random_points", c.probe.random_points);
        read(p, "safety", c.probe.safety);
    }
    read(j, "threads", c.threads);
    if (j.contains("output")) {
        const auto& o = j["output"];
        detail::reject_unknown_keys(o, "output", {"path", "format"});
        read(o, "path", c.output.path);
        read(o, "format", c.output.format);
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json schemes = nlohmann::json::array();
    for (Scheme s : c.schemes) schemes.push_back(to_string(s));
    return {
        {"dataset",
         {{"kind", c.dataset.kind}, {"d", c.dataset.d}, {"samples", c.dataset.samples},
          {"noise_std", c.dataset.noise_std}, {"path", c.dataset.path}, {"header", c.dataset.header},
          {"standardize", c.dataset.standardize}}},
        {"partition",
         {{"mode", to_string(c.partition.mode)}, {"users", c.partition.N}, {"skew_fraction", c.partition.skew_fraction}}},
        {"lambda", c.lambda},
        {"trainer",
         {{"H", c.H}, {"rounds", c.rounds}, {"schedule", to_string(c.schedule)}, {"shift", detail::opt(c.shift)},
          {"theta0_std", c.theta0_std}}},
        {"channel",
         {{"kind", c.channel.kind}, {"snr_db", detail::opt(c.channel.snr_db)},
          {"sigma_w2", detail::opt(c.channel.sigma_w2)}, {"P", c.channel.P},
          {"rayleigh_scale", c.channel.rayleigh_scale}, {"h_min", detail::opt(c.channel.h_min)},
          {"eligible_fraction", c.channel.eligible_fraction}, {"K", detail::opt(c.channel.K)}}},
        {"schemes", schemes},
        {"non_precoded_gain", detail::opt(c.non_precoded_gain)},
        {"trials", c.trials},
        {"seed", c.seed},
        {"alpha",
         {{"source", c.alpha.source}, {"pilot_fraction", c.alpha.pilot_fraction},
          {"pilot_trials", c.alpha.pilot_trials}, {"pilot_channel", c.alpha.pilot_channel}, {"path", c.alpha.path}}},
        {"probe",
         {{"radius_factor", c.probe.radius_factor}, {"random_points", c.probe.random_points},
          {"safety", c.probe.safety}}},
        {"threads", c.threads},
        {"output", {{"path", c.output.path}, {"format", c.output.format}}},
    };
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return parse_config(j);
}

}  // namespace otafl

#endif  // OTAFL_CONFIG_HPP
