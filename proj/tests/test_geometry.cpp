#include <chrono>
#include <random>

#include <gtest/gtest.h>

#include "kge/geometry.hpp"
#include "oracle.hpp"

using namespace kge::geometry;
using oracle::V;

namespace {

V scaled(V x, double s) {
    for (auto& v : x) v *= s;
    return x;
}

void expect_near(const V& a, const V& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

// --- examples --------------------------------------------------------------

TEST(MobiusAdd, ZeroIsIdentity) {
    const V y{0.2, -0.1, 0.3, 0.05};
    expect_near(mobius_add(V(4, 0.0), y, 1.7), y, 1e-15);
}

TEST(MobiusAdd, ParallelExample) {
    // numerator 2.18 * 0.3, denominator 1.1881
    const V r = mobius_add(V{0.3, 0}, V{0.3, 0}, 1.0);
    EXPECT_NEAR(r[0], 2.18 * 0.3 / 1.1881, 1e-12);
    EXPECT_NEAR(r[0], 0.550459, 1e-6);
    EXPECT_EQ(r[1], 0.0);
}

TEST(MobiusAdd, InverseGivesZero) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const V x = oracle::random_vec(8, 0.2, rng);
        expect_near(mobius_add(x, oracle::neg(x), 1.0), V(8, 0.0), 1e-14);
    }
}

TEST(MobiusAdd, MatchesNaiveFormula) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const double c = 0.3 + std::uniform_real_distribution<double>(0, 2)(rng);
        const V x = oracle::project(oracle::random_vec(6, 0.4, rng), c);
        const V y = oracle::project(oracle::random_vec(6, 0.4, rng), c);
        expect_near(mobius_add(x, y, c), oracle::mobius_add(x, y, c), 1e-12);
    }
}

TEST(ExpLog, Examples) {
    expect_near(exp_map0(V{0, 0}, 1.0), V{0, 0}, 0);
    expect_near(log_map0(V{0, 0}, 1.0), V{0, 0}, 0);
    const V e = exp_map0(V{1, 0}, 1.0);
    EXPECT_NEAR(e[0], std::tanh(1.0), 1e-15);
    EXPECT_NEAR(e[0], 0.761594, 1e-6);
    EXPECT_EQ(e[1], 0.0);
    const V l = log_map0(V{std::tanh(1.0), 0}, 1.0);
    EXPECT_NEAR(l[0], 1.0, 1e-12);
    EXPECT_EQ(l[1], 0.0);
}

TEST(ExpLog, TinyNormsUseTheLimit) {
    const V x{1e-17, 0, 0, 0};
    expect_near(exp_map0(x, 2.0), x, 0);
    expect_near(log_map0(x, 2.0), x, 0);
    const V y{3e-9, -1e-9};
    expect_near(exp_map0(y, 1.0), y, 1e-24);
}

TEST(ExpLog, LogOfExpRoundTrip) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        // |x| <= 3 with c = 1: tanh(3) stays well inside the clamp
        V x = oracle::random_vec(4, 1, rng);
        x = scaled(x, 3.0 * u(rng) / oracle::norm(x));
        expect_near(log_map0(exp_map0(x, 1.0), 1.0), x, 1e-6);
    }
}

TEST(ExpLog, ExpOfLogRoundTrip) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const double c = 0.1 + 3 * u(rng);
        V x = oracle::random_vec(6, 1, rng);
        x = scaled(x, 0.9 * u(rng) / std::sqrt(c) / oracle::norm(x));
        expect_near(exp_map0(log_map0(x, c), c), x, 1e-6);
    }
}

TEST(ExpLog, LogClampsAtTheBoundary) {
    const V l = log_map0(V{1.5, 0}, 1.0);
    EXPECT_TRUE(std::isfinite(l[0]));
    EXPECT_NEAR(l[0], std::atanh(1.0 - 1e-10) / 1.0, 1e-6);
}

TEST(Givens, Examples) {
    const V x{0.3, -0.7, 1.2, 0.4};
    expect_near(givens_rotate(V{1, 0, 1, 0}, x), x, 0);
    expect_near(givens_rotate(V{0, 1}, V{1, 0}), V{0, 1}, 1e-16);
}

TEST(Givens, PairsAreNormalisedAndZeroPairIsIdentity) {
    const V x{0.5, 0.25, -1, 2};
    expect_near(givens_rotate(V{0, 7.5, 0, 0}, x), V{-0.25, 0.5, -1, 2}, 1e-15);
    expect_near(givens_rotate(V{3, 4, 1, 0}, x), oracle::rotate(V{3, 4, 1, 0}, x), 1e-15);
}

TEST(Givens, PreservesNorm) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const V r = oracle::random_vec(32, 1, rng), x = oracle::random_vec(32, 1, rng);
        EXPECT_NEAR(oracle::norm(givens_rotate(r, x)), oracle::norm(x), 1e-9);
        expect_near(givens_rotate(r, x), oracle::rotate(r, x), 1e-12);
    }
}

TEST(Givens, InPlaceMatchesOutOfPlace) {
    std::mt19937_64 rng(8);
    const V r = oracle::random_vec(8, 1, rng);
    V x = oracle::random_vec(8, 1, rng);
    const V expected = givens_rotate(r, x);
    givens_rotate(r, x, x);
    expect_near(x, expected, 0);
}

TEST(MobiusMatvec, Examples) {
    std::mt19937_64 rng(9);
    const V x{0.1, 0.2, -0.3, 0.05};
    expect_near(mobius_matvec_rot(V{1, 0, 1, 0}, x, 1.0), x, 1e-14);
    expect_near(mobius_matvec_rot(oracle::random_vec(4, 1, rng), V(4, 0.0), 1.0), V(4, 0.0), 0);
}

TEST(MobiusMatvec, EqualsPlainRotationInsideTheBall) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const double c = 0.2 + 2 * u(rng);
        const V r = oracle::random_vec(16, 1, rng);
        V x = oracle::random_vec(16, 1, rng);
        x = scaled(x, 0.9 * u(rng) / std::sqrt(c) / oracle::norm(x));
        expect_near(mobius_matvec_rot(r, x, c), givens_rotate(r, x), 1e-6);
        expect_near(mobius_matvec_rot(r, x, c), oracle::exp0(oracle::rotate(r, oracle::log0(x, c)), c), 1e-12);
    }
}

TEST(FlexibleAdd, Examples) {
    const V x{0.4, -0.2, 1.5, 0.1};
    expect_near(flexible_add(x, V(4, 0.0), V(4, 1.0)), x, 0);
    expect_near(flexible_add(x, V(4, 0.0), V(4, 2.0)), scaled(x, 2), 0);
    const V r = flexible_add(V{0.3, 0}, V{0.3, 0}, V{1, 1});
    EXPECT_NEAR(r[0], 0.6 / 1.09, 1e-15);
    EXPECT_NEAR(r[0], 0.550459, 1e-6);
    EXPECT_NEAR(r[0], mobius_add(V{0.3, 0}, V{0.3, 0}, 1.0)[0], 1e-15);
}

TEST(FlexibleAdd, ScalarAlphaBroadcasts) {
    const V x{0.4, -0.2}, y{0.1, 0.3};
    expect_near(flexible_add(x, y, V{1.7}), flexible_add(x, y, V{1.7, 1.7}), 0);
}

TEST(FlexibleAdd, FusedNormMatchesNormOfSum) {
    std::mt19937_64 rng(15);
    for (int i = 0; i < 500; ++i) {
        const V x = oracle::random_vec(8, 0.4, rng), y = oracle::random_vec(8, 0.4, rng);
        const V a = oracle::random_vec(8, 1.0, rng), s = oracle::random_vec(1, 1.0, rng);
        EXPECT_NEAR(flexible_add_norm(x, y, a), norm(flexible_add(x, y, a)), 1e-12 * (1 + norm(flexible_add(x, y, a))));
        EXPECT_NEAR(flexible_add_norm(x, y, s), norm(flexible_add(x, y, s)), 1e-12 * (1 + norm(flexible_add(x, y, s))));
    }
}

TEST(FlexibleAdd, DenominatorGuardKeepsSign) {
    // <x, y> = -1 exactly: 1 + <x, y> = 0 -> +1e-6
    const V x{1, 0}, y{-1, 0.5};
    const V r = flexible_add(x, y, V{1, 1});
    EXPECT_NEAR(r[1], 0.5 / 1e-6, 1e-3);
    // slightly past -1: negative guard
    const V z{-1.0000000001, 0.5};
    EXPECT_LT(flexible_add(x, z, V{1, 1})[1], 0.0);
}

TEST(FlexibleAdd, AgreesWithMobiusForEqualArgumentsOnly) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 10000; ++i) {
        V x = oracle::random_vec(8, 1, rng);
        x = scaled(x, 0.7 * u(rng) / oracle::norm(x));  // |x ⊕ x| stays inside the projection radius
        expect_near(mobius_add(x, x, 1.0), flexible_add(x, x, V(8, 1.0)), 1e-9);
    }
    // a non-parallel pair shows the two operations differ in general
    const V x{0.3, 0}, y{0, 0.4};
    EXPECT_GT(std::abs(mobius_add(x, y, 1.0)[0] - flexible_add(x, y, V{1, 1})[0]), 1e-3);
}

TEST(HyperbolicDistance, Examples) {
    EXPECT_NEAR(hyperbolic_distance(V{0, 0}, V{0.5, 0}, 1.0), 2 * std::atanh(0.5), 1e-14);
    EXPECT_NEAR(hyperbolic_distance(V{0, 0}, V{0.5, 0}, 1.0), 1.098612, 1e-6);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const double c = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng);
        const V x = oracle::project(oracle::random_vec(6, 0.3, rng), c);
        const V y = oracle::project(oracle::random_vec(6, 0.3, rng), c);
        EXPECT_NEAR(hyperbolic_distance(x, x, c), 0.0, 1e-7);
        EXPECT_NEAR(hyperbolic_distance(x, y, c), hyperbolic_distance(y, x, c), 1e-10);
        EXPECT_GE(hyperbolic_distance(x, y, c), 0.0);
        EXPECT_NEAR(hyperbolic_distance(x, y, c), oracle::hyp_dist(x, y, c), 1e-9);
    }
}

TEST(ProjectToBall, Examples) {
    expect_near(project_to_ball(V{0.1, 0}, 1.0), V{0.1, 0}, 0);
    expect_near(project_to_ball(V{2, 0}, 1.0), V{1 - 1e-5, 0}, 1e-15);
    std::mt19937_64 rng(13);
    for (int i = 0; i < 1000; ++i) {
        const double c = 0.05 + 4 * std::uniform_real_distribution<double>(0, 1)(rng);
        const V p = project_to_ball(oracle::random_vec(8, 3, rng), c);
        EXPECT_LT(oracle::dot(p, p), 1.0 / c);
    }
}

TEST(Curvature, SoftplusIsPositiveAndInverts) {
    for (double raw : {-50.0, -3.0, 0.0, 0.5413, 4.0, 40.0}) EXPECT_GT(softplus(raw), 0.0);
    EXPECT_NEAR(softplus(softplus_inverse(1.0)), 1.0, 1e-15);
    EXPECT_NEAR(Curvature::from_value(2.5).value(), 2.5, 1e-14);
}

// --- analytic gradients vs central differences --------------------------------

class KernelGradient : public ::testing::TestWithParam<int> {};

TEST_P(KernelGradient, AllKernels) {
    std::mt19937_64 rng(100 + GetParam());
    const std::size_t d = 6;
    std::uniform_real_distribution<double> u(0, 1);
    double c = 0.5 + u(rng);
    V x = oracle::project(oracle::random_vec(d, 0.3, rng), 0.9 * c);
    V y = oracle::project(oracle::random_vec(d, 0.3, rng), 0.9 * c);
    V a = oracle::random_vec(d, 1, rng);
    const V g = oracle::random_vec(d, 1, rng);
    auto inner = [&](const V& out) { return oracle::dot(g, out); };
    constexpr double kTol = 1e-4;

    {  // mobius_add
        V gx(d, 0), gy(d, 0), scratch(g);
        const double gc = mobius_add_backward(x, y, c, scratch, gx, gy);
        auto f = [&] { return inner(mobius_add(x, y, c)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(x, f)), kTol);
        EXPECT_LT(oracle::rel_error(gy, oracle::fd_gradient(y, f)), kTol);
        V cv{c};
        auto fc = [&] { return inner(mobius_add(x, y, cv[0])); };
        EXPECT_LT(oracle::rel_error({gc}, oracle::fd_gradient(cv, fc)), kTol);
    }
    {  // mobius_add through an active projection
        V big_x = scaled(x, 0.95 / std::sqrt(c) / oracle::norm(x)), big_y = scaled(x, 0.9 / std::sqrt(c) / oracle::norm(x));
        big_y[0] += 0.01;
        V gx(d, 0), gy(d, 0), scratch(g);
        const double gc = mobius_add_backward(big_x, big_y, c, scratch, gx, gy);
        auto f = [&] { return inner(mobius_add(big_x, big_y, c)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(big_x, f)), kTol);
        EXPECT_LT(oracle::rel_error(gy, oracle::fd_gradient(big_y, f)), kTol);
        V cv{c};
        auto fc = [&] { return inner(mobius_add(big_x, big_y, cv[0])); };
        EXPECT_LT(oracle::rel_error({gc}, oracle::fd_gradient(cv, fc)), kTol);
    }
    {  // exp_map0
        V gx(d, 0), scratch(g);
        const double gc = exp_map0_backward(a, c, scratch, gx);
        auto f = [&] { return inner(exp_map0(a, c)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(a, f)), kTol);
        V cv{c};
        auto fc = [&] { return inner(exp_map0(a, cv[0])); };
        EXPECT_LT(oracle::rel_error({gc}, oracle::fd_gradient(cv, fc)), kTol);
    }
    {  // log_map0
        V gx(d, 0);
        const double gc = log_map0_backward(x, c, g, gx);
        auto f = [&] { return inner(log_map0(x, c)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(x, f)), kTol);
        V cv{c};
        auto fc = [&] { return inner(log_map0(x, cv[0])); };
        EXPECT_LT(oracle::rel_error({gc}, oracle::fd_gradient(cv, fc)), kTol);
    }
    {  // givens_rotate
        V gx(d, 0), gr(d, 0);
        givens_rotate_backward(a, x, g, gx, gr);
        auto f = [&] { return inner(givens_rotate(a, x)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(x, f)), kTol);
        EXPECT_LT(oracle::rel_error(gr, oracle::fd_gradient(a, f)), kTol);
    }
    {  // flexible_add, vector and scalar alpha
        V alpha = oracle::random_vec(d, 0.2, rng);
        for (auto& v : alpha) v += 1;
        V gx(d, 0), gy(d, 0), ga(d, 0);
        flexible_add_backward(x, y, alpha, g, gx, gy, ga);
        auto f = [&] { return inner(flexible_add(x, y, alpha)); };
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(x, f)), kTol);
        EXPECT_LT(oracle::rel_error(gy, oracle::fd_gradient(y, f)), kTol);
        EXPECT_LT(oracle::rel_error(ga, oracle::fd_gradient(alpha, f)), kTol);
        V s{1.3}, gs{0};
        std::fill(gx.begin(), gx.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
        flexible_add_backward(x, y, s, g, gx, gy, gs);
        auto fs = [&] { return inner(flexible_add(x, y, s)); };
        EXPECT_LT(oracle::rel_error(gs, oracle::fd_gradient(s, fs)), kTol);
        EXPECT_LT(oracle::rel_error(gx, oracle::fd_gradient(x, fs)), kTol);
    }
    {  // distance from residual norm
        V n{0.2 + 0.6 * u(rng) / std::sqrt(c)}, cv{c};
        const auto r = hyperbolic_distance_from_norm(n[0], c);
        EXPECT_LT(oracle::rel_error({r.d_norm}, oracle::fd_gradient(n, [&] { return hyperbolic_distance_from_norm(n[0], c).value; })), kTol);
        EXPECT_LT(oracle::rel_error({r.d_c}, oracle::fd_gradient(cv, [&] { return hyperbolic_distance_from_norm(n[0], cv[0]).value; })), kTol);
    }
    {  // projection
        V p = scaled(a, 1.5 / std::sqrt(c) / oracle::norm(a)), scratch(g);
        const double gc = project_to_ball_backward(p, c, scratch);
        auto f = [&] { return inner(project_to_ball(p, c)); };
        EXPECT_LT(oracle::rel_error(scratch, oracle::fd_gradient(p, f)), kTol);
        V cv{c};
        auto fc = [&] { return inner(project_to_ball(p, cv[0])); };
        EXPECT_LT(oracle::rel_error({gc}, oracle::fd_gradient(cv, fc)), kTol);
    }
    {  // phi
        V t{u(rng) * 2};
        EXPECT_LT(oracle::rel_error({phi_derivative(t[0])}, oracle::fd_gradient(t, [&] { return phi(t[0]); })), kTol);
    }
}

INSTANTIATE_TEST_SUITE_P(Random, KernelGradient, ::testing::Range(0, 20));

// --- operation count --------------------------------------------------------

TEST(FlexibleAdd, AtMostHalfTheCostOfMobiusAdd) {
    // 1024 pairs stay in cache, so the timing reflects arithmetic, not memory traffic.
    const std::size_t d = 32, n = 1024, passes = 500;
    std::mt19937_64 rng(14);
    std::vector<double> xs(n * d), ys(n * d), out(d);
    std::normal_distribution<double> nd(0, 0.01);
    for (auto& v : xs) v = nd(rng);
    for (auto& v : ys) v = nd(rng);
    const V alpha(d, 1.0);
    double sink = 0;
    auto time = [&](auto&& op) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t p = 0; p < passes; ++p) {
            for (std::size_t i = 0; i < n; ++i) {
                op(std::span<const double>(xs.data() + i * d, d), std::span<const double>(ys.data() + i * d, d));
                sink += out[i % d];
            }
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    // Interleaved repetitions, best of each, to damp scheduler noise.
    double t_mobius = 1e30, t_flex = 1e30;
    for (int rep = 0; rep < 15; ++rep) {
        t_mobius = std::min(t_mobius, time([&](auto x, auto y) { mobius_add(x, y, 1.0, out); }));
        t_flex = std::min(t_flex, time([&](auto x, auto y) { flexible_add(x, y, alpha, out); }));
    }
    RecordProperty("ratio", std::to_string(t_flex / t_mobius));
    std::printf("flexible_add / mobius_add time ratio: %.3f (sink %g)\n", t_flex / t_mobius, sink);
    EXPECT_LE(t_flex, 0.5 * t_mobius);
}
