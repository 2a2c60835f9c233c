#ifndef OTAFL_TYPES_HPP
#define OTAFL_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace otafl {

/// Model parameters. Length is fixed for the lifetime of a simulation.
using ModelVector = Eigen::VectorXd;

/// Invalid configuration or violated precondition (CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while running a well-formed computation (CLI exit code 2).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegressionSample {
    ModelVector features;
    double target = 0.0;
};

struct UserShard {
    int user_id = 0;  // 1-based
    std::vector<RegressionSample> samples;
    std::vector<std::size_t> origin;  // row index in the source dataset, when known

    std::size_t size() const { return samples.size(); }
};

/// Inputs of the convergence bounds: objective constants, channel constants
/// and the round structure.
struct ProblemConstants {
    double L = 1.0;
    double mu = 1.0;
    double G2 = 1.0;
    std::vector<double> Mn2;  // one entry per user
    double Gamma = 0.0;
    int d = 1;
    int N = 1;
    int H = 1;
    double P = 1.0;
    double sigma_w2 = 0.0;

    void validate() const {
        if (!(mu > 0.0) || !(L >= mu)) throw ConfigError("constants: require L >= mu > 0");
        if (!(G2 > 0.0)) throw ConfigError("constants: require G2 > 0");
        if (N < 1 || H < 1 || d < 1) throw ConfigError("constants: require N, H, d >= 1");
        if (Mn2.size() != static_cast<std::size_t>(N))
            throw ConfigError("constants: Mn2 must have one entry per user");
        for (double m : Mn2)
            if (!(m > 0.0)) throw ConfigError("constants: every Mn2 entry must be > 0");
        if (!(Gamma >= 0.0)) throw ConfigError("constants: require Gamma >= 0");
        if (!(P > 0.0)) throw ConfigError("constants: require P > 0");
        if (!(sigma_w2 >= 0.0)) throw ConfigError("constants: require sigma_w2 >= 0");
    }
};

/// 0 = silent, 1 = informational notes on stderr.
inline int& log_level() {
    static int level = 0;
    return level;
}

inline void log_note(const std::string& msg) {
    if (log_level() > 0) std::clog << "[otafl] " << msg << '\n';
}

inline bool all_finite(const ModelVector& v) { return v.allFinite(); }

inline void require_same_dim(const ModelVector& a, const ModelVector& b, const char* what) {
    if (a.size() != b.size())
        throw ConfigError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
}

}  // namespace otafl

#endif  // OTAFL_TYPES_HPP
