#include "support/fixtures.hpp"

#include <gtest/gtest.h>

using namespace otafl;

TEST(MakeStreams, SameSeedReplaysFirstHundredDraws) {
    auto a = make_streams(42, {"noise"});
    auto b = make_streams(42, {"noise"});
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.at("noise").normal(), b.at("noise").normal());
}

TEST(MakeStreams, DistinctLabelsAreUncorrelated) {
    auto s = make_streams(42, {"noise", "fading"});
    std::vector<double> x, y;
    for (int i = 0; i < 10000; ++i) {
        x.push_back(s.at("noise").normal());
        y.push_back(s.at("fading").normal());
    }
    EXPECT_LT(std::abs(oracle::correlation(x, y)), 0.05);
}

TEST(MakeStreams, DuplicateLabelIsConfigError) {
    EXPECT_THROW(make_streams(42, {"a", "a"}), ConfigError);
}

TEST(MakeStreams, DifferentSeedsDiffer) {
    auto a = make_streams(1, {"x"});
    auto b = make_streams(2, {"x"});
    EXPECT_NE(a.at("x").normal(), b.at("x").normal());
}

TEST(RandomSource, DerivedStreamsAreDeterministicAndDistinct) {
    const RandomSource root(9, 0);
    RandomSource a1 = root.derive("sgd", 3), a2 = root.derive("sgd", 3), b = root.derive("sgd", 4),
                 c = root.derive("noise");
    const double va = a1.uniform();
    EXPECT_EQ(va, a2.uniform());
    EXPECT_NE(va, b.uniform());
    EXPECT_NE(va, c.uniform());
}

TEST(RandomSource, IndexStaysInRange) {
    RandomSource r(3, 1);
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.index(7), 7u);
}

TEST(RandomSource, NormalVectorHasRequestedLengthAndScale) {
    RandomSource r(5, 5);
    std::vector<double> v;
    for (int i = 0; i < 2000; ++i) {
        const ModelVector x = r.normal_vector(10, 3.0);
        ASSERT_EQ(x.size(), 10);
        for (Eigen::Index j = 0; j < x.size(); ++j) v.push_back(x[j]);
    }
    EXPECT_NEAR(oracle::sample_variance(v), 9.0, 9.0 * 0.05);
}

TEST(Types, RequireSameDimRejectsMismatch) {
    EXPECT_THROW(require_same_dim(ModelVector::Zero(2), ModelVector::Zero(3), "x"), ConfigError);
    EXPECT_NO_THROW(require_same_dim(ModelVector::Zero(2), ModelVector::Zero(2), "x"));
}

TEST(Types, ProblemConstantsValidation) {
    ProblemConstants c;
    c.Mn2 = {1.0};
    EXPECT_NO_THROW(c.validate());
    c.mu = 2.0;  // L < mu
    EXPECT_THROW(c.validate(), ConfigError);
    c.mu = 1.0;
    c.sigma_w2 = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}
