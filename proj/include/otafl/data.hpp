#ifndef OTAFL_DATA_HPP
#define OTAFL_DATA_HPP

#include "otafl/random.hpp"
#include "otafl/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace otafl {

struct Dataset {
    std::vector<RegressionSample> samples;
    int feature_dim = 0;
    ModelVector true_theta;  // generating parameter for synthetic data; empty otherwise

    std::size_t size() const { return samples.size(); }
};

enum class PartitionMode { iid, heterogeneous };

struct PartitionSpec {
    PartitionMode mode = PartitionMode::iid;
    int N = 1;
    double skew_fraction = 0.2;  // heterogeneous only

    void validate() const {
        if (N < 1) throw ConfigError("partition: N must be >= 1");
        if (mode == PartitionMode::heterogeneous && !(skew_fraction >= 0.0 && skew_fraction < 1.0))
            throw ConfigError("partition: skew_fraction must lie in [0, 1)");
    }
};

inline PartitionMode parse_partition_mode(std::string_view s) {
    if (s == "iid") return PartitionMode::iid;
    if (s == "heterogeneous") return PartitionMode::heterogeneous;
    throw ConfigError("unknown partition mode '" + std::string(s) + "'");
}

inline const char* to_string(PartitionMode m) { return m == PartitionMode::iid ? "iid" : "heterogeneous"; }

/// Gaussian features, linear targets s_s . theta_true + N(0, noise_std^2),
/// theta_true ~ N(0, I) drawn once.
inline Dataset generate_synthetic(int d, int D_total, double noise_std, RandomSource& rng) {
    if (d < 1) throw ConfigError("generate_synthetic: d must be >= 1");
    if (D_total < 1) throw ConfigError("generate_synthetic: D_total must be >= 1");
    if (!(noise_std >= 0.0)) throw ConfigError("generate_synthetic: noise_std must be >= 0");
    Dataset ds;
    ds.feature_dim = d;
    ds.true_theta = rng.normal_vector(d);
    ds.samples.reserve(static_cast<std::size_t>(D_total));
    for (int i = 0; i < D_total; ++i) {
        RegressionSample s;
        s.features = rng.normal_vector(d);
        s.target = s.features.dot(ds.true_theta) + noise_std * rng.normal();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

/// Per-feature zero mean, unit variance. Constant columns are only centred.
inline void standardize(Dataset& ds) {
    if (ds.samples.empty()) return;
    const Eigen::Index d = ds.feature_dim;
    ModelVector mean = ModelVector::Zero(d), sq = ModelVector::Zero(d);
    for (const auto& s : ds.samples) mean += s.features;
    mean /= static_cast<double>(ds.size());
    for (const auto& s : ds.samples) sq += (s.features - mean).cwiseAbs2();
    ModelVector scale = (sq / static_cast<double>(ds.size())).cwiseSqrt();
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(scale[j] > 0.0)) scale[j] = 1.0;
    for (auto& s : ds.samples) s.features = (s.features - mean).cwiseQuotient(scale);
}

struct CsvOptions {
    bool header = false;       // skip the first line
    bool standardize = true;   // per-feature standardisation after loading
};

namespace detail {

inline std::string_view trim(std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    return v;
}

inline bool parse_double(std::string_view v, double& out) {
    v = trim(v);
    if (!v.empty() && v.front() == '+') v.remove_prefix(1);
    if (v.empty()) return false;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    return res.ec == std::errc() && res.ptr == v.data() + v.size() && std::isfinite(out);
}

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// Million-Song layout: column 0 is the target, the rest are features.
inline Dataset load_csv(const std::filesystem::path& path, const CsvOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open CSV file '" + path.string() + "'");
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    std::size_t columns = 0;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && opts.header) continue;
        if (detail::trim(line).empty()) continue;
        row.clear();
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            double v = 0.0;
            if (!detail::parse_double(rest.substr(0, comma), v))
                throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
            row.push_back(v);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (row.size() < 2)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": row needs a target and at least one feature");
        if (columns == 0) columns = row.size();
        if (row.size() != columns)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(columns) + " columns, found " + std::to_string(row.size()));
        RegressionSample s;
        s.target = row[0];
        s.features = Eigen::Map<const ModelVector>(row.data() + 1, static_cast<Eigen::Index>(row.size() - 1));
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw ConfigError("CSV file '" + path.string() + "' contains no samples");
    ds.feature_dim = static_cast<int>(columns - 1);
    if (opts.standardize) standardize(ds);
    return ds;
}

/// Writes target-first rows with 17 significant digits (lossless for doubles).
inline void write_csv(const std::vector<RegressionSample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write CSV file '" + path.string() + "'");
    for (const auto& s : samples) {
        out << detail::format_double(s.target);
        for (Eigen::Index j = 0; j < s.features.size(); ++j) out << ',' << detail::format_double(s.features[j]);
        out << '\n';
    }
    if (!out) throw RuntimeError("write failed for '" + path.string() + "'");
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) { write_csv(ds.samples, path); }

/// Splits a dataset into N equally sized, disjoint user shards. The
/// remainder of a non-divisible split is dropped. In heterogeneous mode each
/// user draws skew_fraction of its shard from its own contiguous bin of the
/// target-sorted data and the rest uniformly from what is left.
inline std::vector<UserShard> partition(const Dataset& ds, const PartitionSpec& spec, RandomSource& rng) {
    spec.validate();
    const std::size_t D = ds.size();
    const auto N = static_cast<std::size_t>(spec.N);
    if (N > D)
        throw ConfigError("partition: " + std::to_string(N) + " users but only " + std::to_string(D) + " samples");
    const std::size_t shard_size = D / N;
    const std::size_t dropped = D - N * shard_size;
    if (dropped > 0) log_note("partition: dropping " + std::to_string(dropped) + " remainder samples");

    std::vector<std::vector<std::size_t>> assignment(N);
    if (spec.mode == PartitionMode::iid) {
        std::vector<std::size_t> perm(D);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        for (std::size_t n = 0; n < N; ++n)
            assignment[n].assign(perm.begin() + static_cast<std::ptrdiff_t>(n * shard_size),
                                 perm.begin() + static_cast<std::ptrdiff_t>((n + 1) * shard_size));
    } else {
        std::vector<std::size_t> order(D);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ds.samples[a].target < ds.samples[b].target;
        });
        const auto n_skew = static_cast<std::size_t>(std::llround(spec.skew_fraction * static_cast<double>(shard_size)));
        std::vector<char> used(D, 0);
        for (std::size_t n = 0; n < N; ++n) {
            std::vector<std::size_t> bin(order.begin() + static_cast<std::ptrdiff_t>(n * D / N),
                                         order.begin() + static_cast<std::ptrdiff_t>((n + 1) * D / N));
            std::shuffle(bin.begin(), bin.end(), rng.engine());
            for (std::size_t k = 0; k < n_skew; ++k) {
                assignment[n].push_back(bin[k]);
                used[bin[k]] = 1;
            }
        }
        std::vector<std::size_t> pool;
        pool.reserve(D);
        for (std::size_t i = 0; i < D; ++i)
            if (!used[i]) pool.push_back(i);
        std::shuffle(pool.begin(), pool.end(), rng.engine());
        auto next = pool.begin();
        for (std::size_t n = 0; n < N; ++n) {
            const auto need = static_cast<std::ptrdiff_t>(shard_size - n_skew);
            assignment[n].insert(assignment[n].end(), next, next + need);
            next += need;
        }
    }

    std::vector<UserShard> shards(N);
    for (std::size_t n = 0; n < N; ++n) {
        shards[n].user_id = static_cast<int>(n + 1);
        shards[n].origin = assignment[n];
        shards[n].samples.reserve(shard_size);
        for (std::size_t i : assignment[n]) shards[n].samples.push_back(ds.samples[i]);
    }
    return shards;
}

/// A fixed fraction of every shard (at least one sample), chosen at random.
inline std::vector<UserShard> subsample_shards(const std::vector<UserShard>& shards, double fraction,
                                               RandomSource& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must lie in (0, 1]");
    std::vector<UserShard> out;
    out.reserve(shards.size());
    for (const auto& sh : shards) {
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(sh.size()))));
        std::vector<std::size_t> perm(sh.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        UserShard sub;
        sub.user_id = sh.user_id;
        for (std::size_t k = 0; k < keep && k < perm.size(); ++k) {
            sub.samples.push_back(sh.samples[perm[k]]);
            if (!sh.origin.empty()) sub.origin.push_back(sh.origin[perm[k]]);
        }
        out.push_back(std::move(sub));
    }
    return out;
}

}  // namespace otafl

#endif  // OTAFL_DATA_HPP
