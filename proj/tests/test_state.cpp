#include <gtest/gtest.h>

#include <cstring>

#include "vpsim/state.hpp"

using namespace vpsim;

TEST(InitState, ZeroNoiseIsHomogeneous) {
    auto g = make_grid(16, 16, 16.0, 16.0);
    const State s = init_state(g, {0.3, 0.0, 5});
    for (double v : s.phi.data) EXPECT_EQ(v, 0.3);
    for (double v : s.q.data) EXPECT_EQ(v, 0.0);
    for (double v : s.v.x.data) EXPECT_EQ(v, 0.0);
    for (std::size_t n = 0; n < g->size(); ++n) {
        EXPECT_EQ(s.C.c11.data[n], kPeterlinLambda);
        EXPECT_EQ(s.C.c12.data[n], 0.0);
        EXPECT_EQ(s.C.c22.data[n], kPeterlinLambda);
    }
}

TEST(InitState, SameSeedIsBitIdentical) {
    auto g = make_grid(32, 32, 32.0, 32.0);
    const State a = init_state(g, {0.5, 0.01, 42});
    const State b = init_state(g, {0.5, 0.01, 42});
    const State c = init_state(g, {0.5, 0.01, 43});
    EXPECT_EQ(std::memcmp(a.phi.data.data(), b.phi.data.data(), g->size() * sizeof(double)), 0);
    EXPECT_NE(std::memcmp(a.phi.data.data(), c.phi.data.data(), g->size() * sizeof(double)), 0);
}

TEST(InitState, MeanIsCorrectedExactly) {
    auto g = make_grid(64, 64, 64.0, 64.0);
    const State s = init_state(g, {0.5, 0.01, 9});
    long double sum = 0.0L;
    for (double v : s.phi.data) sum += v;
    EXPECT_NEAR(static_cast<double>(sum / g->size()), 0.5, 1e-14);
    double lo = 1.0, hi = 0.0;
    for (double v : s.phi.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.5 - 0.0101);
    EXPECT_LE(hi, 0.5 + 0.0101);
    EXPECT_GT(hi - lo, 0.015);
}

TEST(InitState, RejectsInvalidCondition) {
    auto g = make_grid(8, 8, 8.0, 8.0);
    EXPECT_THROW(init_state(g, {0.0, 0.0, 1}), Error);
    EXPECT_THROW(init_state(g, {1.2, 0.0, 1}), Error);
    EXPECT_THROW(init_state(g, {0.1, 0.1, 1}), Error);
}

TEST(Conformation, MinimumEigenvalue) {
    auto g = make_grid(8, 8, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(min_eigenvalue_C(ConformationField(g, 1.0, 0.0)), 1.0);
    ConformationField d(g, 1.0, 0.0);
    for (double& v : d.c11.data) v = 2.0;
    for (double& v : d.c22.data) v = 0.5;
    EXPECT_DOUBLE_EQ(min_eigenvalue_C(d), 0.5);
    // c11 = c22 = 1, c12 = 1/2: eigenvalues 1 +- 1/2
    EXPECT_DOUBLE_EQ(min_eigenvalue_C(ConformationField(g, 1.0, 0.5)), 0.5);
    ConformationField local(g, 1.0, 0.0);
    local.c12(3, 5) = 0.9;
    EXPECT_NEAR(min_eigenvalue_C(local), 0.1, 1e-15);
}
