// otafl: command-line driver for over-the-air federated learning experiments.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime or I/O failure,
// 3 a requested check did not hold.

#include "otafl/otafl.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace otafl;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheck = 3;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = detail::trim(item);
        if (!v.empty()) out.emplace_back(v);
    }
    return out;
}

std::vector<long> parse_times(const std::vector<std::string>& items) {
    std::vector<long> t;
    for (const auto& raw : split_list([&] {
             std::string joined;
             for (const auto& i : items) joined += i + ",";
             return joined;
         }())) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            t.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--t: '" + raw + "' is not an integer");
        }
    }
    if (t.empty()) throw ConfigError("--t: at least one time is required");
    return t;
}

ExperimentConfig load_with_overrides(const std::string& path, int trials, long long seed, int threads) {
    ExperimentConfig cfg = load_config(path);
    if (trials > 0) cfg.trials = trials;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads >= 0) cfg.threads = threads;
    cfg.validate();
    return cfg;
}

int cmd_simulate(const std::string& config, const std::string& out, const std::string& format, int trials,
                 long long seed, int threads) {
    const ExperimentConfig cfg = load_with_overrides(config, trials, seed, threads);
    const std::string path = out.empty() ? cfg.output.path : out;
    const ExportFormat fmt = parse_export_format(format.empty() ? cfg.output.format : format);
    const ExperimentResult res = run_experiment(cfg);
    if (path.empty() || path == "-")
        write_table(res.table, std::cout, fmt);
    else
        export_table(res.table, path, fmt);
    return kExitOk;
}

int cmd_bound(const std::string& config, int theorem, const std::vector<std::string>& times) {
    const ExperimentConfig cfg = load_config(config);
    const std::vector<long> t = parse_times(times);
    const ExperimentSetup s = prepare_experiment(cfg);
    const auto& c = s.constants;
    const ScheduleKind kind = theorem == 1 ? ScheduleKind::thm1 : ScheduleKind::thm2;
    const double shift = cfg.shift.value_or(StepSchedule::default_shift(kind, c.L, c.mu, c.H));

    nlohmann::json j;
    j["theorem"] = theorem;
    j["constants"] = {{"L", c.L},         {"mu", c.mu},     {"G2", c.G2}, {"Gamma", c.Gamma},
                      {"d", c.d},         {"N", c.N},       {"H", c.H},   {"P", c.P},
                      {"sigma_w2", c.sigma_w2}, {"Mn2", c.Mn2}};
    j["shift"] = shift;
    j["delta0"] = s.delta0_analytic;
    j["B"] = constant_B(c);
    j["C"] = constant_C(c);
    if (theorem == 3) {
        j["K"] = s.K;
        j["h_min"] = s.h_min;
        j["C_tilde"] = constant_C_tilde(c, s.K, s.h_min);
        j["D"] = constant_D(c, s.K);
    }
    for (long T : t) {
        BoundInputs in{c, s.delta0_analytic, shift, T, s.K, s.h_min};
        nlohmann::json row{{"t", T}};
        if (theorem == 1) {
            row["S_R"] = s_r(in.shift, c.H, T / std::max(1, c.H));
            row["bound"] = bound_thm1(in);
        } else if (theorem == 2) {
            row["bound"] = bound_thm2(in);
        } else {
            row["bound"] = bound_thm3(in);
        }
        j["bounds"].push_back(row);
    }
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_estimate_alpha(const std::string& config, const std::string& out) {
    ExperimentConfig cfg = load_config(config);
    if (cfg.alpha.source == "file") throw ConfigError("estimate-alpha: alpha.source must not be 'file'");
    const ExperimentSetup s = prepare_experiment(cfg);
    save_alpha_schedule(s.alpha, out);
    return kExitOk;
}

int cmd_compare(const std::string& config, const std::string& schemes, bool assert_ordering, int trials,
                long long seed, int threads) {
    ExperimentConfig cfg = load_with_overrides(config, trials, seed, threads);
    if (!schemes.empty()) {
        cfg.schemes.clear();
        for (const auto& s : split_list(schemes)) cfg.schemes.push_back(parse_scheme(s));
        cfg.validate();
    }
    const ExperimentResult res = run_experiment(cfg);
    const CompareReport rep = compare_schemes(res);
    std::cout << to_json(rep).dump(2) << '\n';
    if (assert_ordering && !rep.ordering_holds) {
        std::cerr << "ordering check failed\n";
        return kExitCheck;
    }
    return kExitOk;
}

int cmd_partition(const std::string& csv, bool header, bool no_standardize, const std::string& mode, int n,
                  double skew, std::uint64_t seed, const std::string& out_dir) {
    const PartitionSpec spec{parse_partition_mode(mode), n, skew};
    spec.validate();
    const Dataset ds = load_csv(csv, CsvOptions{header, !no_standardize});
    RandomSource rng = RandomSource(seed, 0).derive("partition");
    const auto shards = partition(ds, spec, rng);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw RuntimeError("cannot create '" + out_dir + "': " + ec.message());
    for (const auto& sh : shards)
        write_csv(sh.samples, std::filesystem::path(out_dir) / ("user_" + std::to_string(sh.user_id) + ".csv"));
    std::cout << shards.size() << " shards of " << shards.front().size() << " samples written to " << out_dir
              << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Over-the-air federated learning simulator"};
    app.require_subcommand(1);
    int verbose = 0;
    app.add_flag("-v,--verbose", verbose, "Print diagnostic notes to stderr");

    std::string config, out, format, schemes, t_mode = "iid", csv;
    std::vector<std::string> times;
    int theorem = 2, trials = 0, threads = -1, n_users = 0;
    long long seed = -1;
    bool assert_ordering = false, header = false, no_standardize = false;
    double skew = 0.2;
    std::uint64_t part_seed = 1;

    auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo experiment and export per-round metrics");
    sim->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "Output file (default: config output.path, or stdout)");
    sim->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sim->add_option("--trials", trials, "Override number of trials");
    sim->add_option("--seed", seed, "Override master seed");
    sim->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto* bnd = app.add_subcommand("bound", "Evaluate a convergence bound at given times");
    bnd->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    bnd->add_option("--theorem", theorem, "1, 2 or 3")->required()->check(CLI::IsMember({1, 2, 3}));
    bnd->add_option("--t", times, "Times (multiples of H), comma separated")->required()->delimiter(',');

    auto* est = app.add_subcommand("estimate-alpha", "Estimate the precoder schedule and save it as JSON");
    est->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    est->add_option("--out", out, "Output JSON")->required();

    auto* cmp = app.add_subcommand("compare", "Compare schemes at the final round");
    cmp->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    cmp->add_option("--schemes", schemes, "Comma separated scheme list");
    cmp->add_flag("--assert-ordering", assert_ordering, "Exit 3 unless noise-free <= cotaf <= non-precoded");
    cmp->add_option("--trials", trials, "Override number of trials");
    cmp->add_option("--seed", seed, "Override master seed");
    cmp->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto* part = app.add_subcommand("partition", "Split a CSV dataset into per-user shards");
    part->add_option("--csv", csv, "Input CSV (features..., target)")->required()->check(CLI::ExistingFile);
    part->add_flag("--header", header, "First line is a header");
    part->add_flag("--no-standardize", no_standardize, "Keep raw feature scales");
    part->add_option("--mode", t_mode, "iid or heterogeneous")->check(CLI::IsMember({"iid", "heterogeneous"}));
    part->add_option("--n", n_users, "Number of users")->required();
    part->add_option("--skew", skew, "Skewed fraction per user (heterogeneous)");
    part->add_option("--seed", part_seed, "Seed");
    part->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    log_level() = verbose;

    try {
        if (*sim) return cmd_simulate(config, out, format, trials, seed, threads);
        if (*bnd) return cmd_bound(config, theorem, times);
        if (*est) return cmd_estimate_alpha(config, out);
        if (*cmp) return cmd_compare(config, schemes, assert_ordering, trials, seed, threads);
        if (*part) return cmd_partition(csv, header, no_standardize, t_mode, n_users, skew, part_seed, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}
