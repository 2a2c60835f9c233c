#ifndef OTAFL_TESTS_FIXTURES_HPP
#define OTAFL_TESTS_FIXTURES_HPP

#include "otafl/otafl.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

inline std::vector<otafl::UserShard> synthetic_shards(int d, int N, int per_user, std::uint64_t seed,
                                                      double noise = 0.5,
                                                      otafl::PartitionMode mode = otafl::PartitionMode::iid) {
    otafl::RandomSource rng(seed, 7);
    const otafl::Dataset ds = otafl::generate_synthetic(d, N * per_user, noise, rng);
    otafl::RandomSource part(seed, 8);
    return otafl::partition(ds, otafl::PartitionSpec{mode, N, 0.2}, part);
}

inline std::vector<std::vector<oracle::Sample>> to_oracle(const std::vector<otafl::UserShard>& shards) {
    std::vector<std::vector<oracle::Sample>> out;
    for (const auto& sh : shards) {
        std::vector<oracle::Sample> u;
        for (const auto& s : sh.samples) {
            oracle::Sample o;
            for (Eigen::Index j = 0; j < s.features.size(); ++j) o.x.push_back(s.features[j]);
            o.y = s.target;
            u.push_back(std::move(o));
        }
        out.push_back(std::move(u));
    }
    return out;
}

inline std::vector<double> to_std(const otafl::ModelVector& v) { return {v.data(), v.data() + v.size()}; }

inline otafl::ModelVector from_std(const std::vector<double>& v) {
    return Eigen::Map<const otafl::ModelVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("otafl_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Small, fast experiment for harness-level tests.
inline otafl::ExperimentConfig small_config() {
    otafl::ExperimentConfig c;
    c.dataset.d = 5;
    c.dataset.samples = 400;
    c.partition.N = 4;
    c.H = 5;
    c.rounds = 20;
    c.trials = 4;
    c.alpha.pilot_trials = 3;
    c.probe.random_points = 4;
    c.threads = 1;
    return c;
}

}  // namespace fixtures

#endif  // OTAFL_TESTS_FIXTURES_HPP
