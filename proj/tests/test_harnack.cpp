#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mcflab/error.hpp"
#include "mcflab/harnack.hpp"

using namespace mcf;

namespace {

HeatKernelModel torus() {
    HeatKernelModel m;
    m.surface = SurfaceKind::Torus;
    return m;
}

}  // namespace

TEST(LiYau, FlatSpecialisation) {
    LiYauParams p;
    p.alpha = 2.5;
    p.R = 0.7;
    p.C = 0.3;
    double t1 = 0.4, t2 = 1.1, d = 0.6;
    double A = 0.3 * std::pow(2.5, 3) / (1.5 * 0.49);
    EXPECT_NEAR(liyau_A(p), A, 1e-14);
    double expect = std::pow(t2 / t1, 2.5) * std::exp(A * (t2 - t1) + 2.5 * d * d / (4 * (t2 - t1)));
    double act = straight_path_action(torus(), p.alpha, Vec3(0, 0, 0), Vec3(d, 0, 0), t1, t2);
    EXPECT_NEAR(liyau_bound(p, t1, t2, act) / expect, 1.0, 1e-13);
}

TEST(LiYau, ShortTimeLimitTendsToOne) {
    LiYauParams p;
    p.alpha = 1.5;
    double prev = std::numeric_limits<double>::infinity();
    for (double dt : {1e-2, 1e-4, 1e-6}) {
        double b = liyau_bound(p, 1.0, 1.0 + dt, 0.0);
        EXPECT_GE(b, 1.0);
        EXPECT_LT(b, prev);
        prev = b;
    }
    EXPECT_NEAR(prev, 1.0, 1e-4);
}

TEST(LiYau, MonotoneInEachParameter) {
    LiYauParams base;
    base.alpha = 2;
    base.R = 0.5;
    base.K = 0.2;
    base.theta = 0.3;
    base.gamma = 0.4;
    double b0 = liyau_bound(base, 0.5, 1.0, 0.1);
    for (int k = 0; k < 3; ++k) {
        LiYauParams p = base;
        (k == 0 ? p.K : k == 1 ? p.theta : p.gamma) *= 2;
        EXPECT_GT(liyau_bound(p, 0.5, 1.0, 0.1), b0);
    }
    HeatKernelModel m = torus();
    double last = 0.0;
    for (double d : {0.0, 0.1, 0.4, 1.0}) {
        double b = liyau_bound(base, 0.5, 1.0,
                               straight_path_action(m, 2, Vec3::Zero(), Vec3(d, 0, 0), 0.5, 1.0));
        EXPECT_GT(b, last);
        last = b;
    }
    // Large alpha: A grows linearly.
    LiYauParams a = base;
    double prev = 0.0;
    for (double al : {5.0, 10.0, 20.0, 40.0}) {
        a.alpha = al;
        double b = liyau_bound(a, 0.5, 1.0, 0.0);
        EXPECT_GT(b, prev);
        prev = b;
    }
}

TEST(LiYau, RejectsBadParameters) {
    LiYauParams p;
    p.alpha = 1.0;
    EXPECT_THROW(liyau_A(p), Error);
    p.alpha = 2;
    EXPECT_THROW(liyau_bound(p, 1.0, 0.5, 0.0), Error);
    p.K = -1;
    EXPECT_THROW(liyau_A(p), Error);
}

TEST(LiYau, PathActionIncludesPotential) {
    HeatKernelModel m = torus();
    SpaceTimeField q = [](const Vec3& x, double t) { return 0.5 + x.x() + t; };
    double t1 = 0.2, t2 = 0.7;
    Vec3 x(1, 0, 0), y(0, 0, 0);
    // gamma(s) = s x from y = 0, time (1 - s) t2 + s t1: mean of q along the path.
    double mean = 0.5 + 0.5 + 0.5 * (t1 + t2);
    EXPECT_NEAR(straight_path_action(m, 2, x, y, t1, t2, q),
                2.0 / (4 * 0.5) + 0.5 * mean, 1e-13);
}

TEST(HarnackScan, ConstantSolution) {
    HarnackProblem P;
    P.model = torus();
    P.u = [](const Vec3&, double) { return 1.0; };
    P.center = Vec3(1, 1, 0);
    P.params.R = 0.5;
    P.inner_radius = 0.5;
    P.t1 = 0.3;
    P.t2 = 0.8;
    auto r = harnack_scan(P);
    EXPECT_DOUBLE_EQ(r.quotient, 1.0);
    EXPECT_TRUE(r.pass);
    EXPECT_GE(r.bound, 1.0);
}

TEST(HarnackScan, EigenfunctionClosedForm) {
    // u = e^{-2t} sin x sin y: quotient = e^{2 dt} max phi / min phi on the samples.
    HarnackProblem P;
    P.model = torus();
    P.u = [](const Vec3& x, double t) { return std::exp(-2 * t) * std::sin(x.x()) * std::sin(x.y()); };
    P.center = Vec3(kPi / 2, kPi / 2, 0);
    P.params.R = 0.7;
    P.inner_radius = 0.5;
    P.t1 = 0.2;
    P.t2 = 0.9;
    P.rings = 1;
    P.angles = 4;
    auto r = harnack_scan(P);
    // Samples: centre and four points at distance 0.5 on the diagonals.
    double lo = std::sin(kPi / 2 + 0.5 / std::sqrt(2.0));
    lo *= lo;
    EXPECT_NEAR(r.quotient, std::exp(2 * 0.7) / lo, 1e-9);
    EXPECT_TRUE(r.pass);
}

TEST(HarnackScan, TorusHeatFromMollifiedPoint) {
    HeatKernelModel m = torus();
    HarnackProblem P;
    P.model = m;
    P.u = [m](const Vec3& x, double t) { return spectral_kernel(m, x, Vec3(1, 2, 0), t + 0.1); };
    P.center = Vec3(1.3, 2.2, 0);
    P.params.R = 0.8;
    P.inner_radius = 0.6;
    P.t1 = 0.3;
    P.t2 = 0.8;
    auto r = harnack_scan(P);
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.max_residual, 1e-4);
    EXPECT_LE(r.worst_pair_ratio, 1.0);
}

TEST(HarnackScan, RejectsNonPositiveAndNonSolutions) {
    HarnackProblem P;
    P.model = torus();
    P.center = Vec3(0, 0, 0);
    P.params.R = 0.5;
    P.inner_radius = 0.5;
    P.t1 = 0.3;
    P.t2 = 0.8;
    P.u = [](const Vec3& x, double) { return x.x(); };
    EXPECT_THROW(harnack_scan(P), Error);
    P.center = Vec3(3, 3, 0);
    P.u = [](const Vec3& x, double t) { return 1 + x.x() * x.x() + t; };
    EXPECT_THROW(harnack_scan(P), Error);
}

TEST(HarnackScan, CalibratedConstantBelowFrozenValue) {
    double c = calibrate_liyau_C(harnack_calibration_set(7, 240));
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, kLiYauC);
}

TEST(HarnackScan, RandomisedSuiteHasNoViolations) {
    auto suite = harnack_suite(2024, 70);
    int chained = 0;
    for (const auto& c : suite) {
        auto r = run_case(c);
        EXPECT_TRUE(r.pass) << c.family << " quotient " << r.quotient << " bound " << r.bound;
        EXPECT_GE(r.bound, 1.0);
        chained += c.chained;
    }
    EXPECT_GE(chained, 5);
}

TEST(KSChain, WorkedExample) {
    auto c = ks_chain(Vec3(1, 0, 0), Vec3::Zero(), 1, 2, 1, 0.5);
    EXPECT_EQ(c.N, 9);
    EXPECT_EQ(c.nodes.size(), 10u);
    EXPECT_DOUBLE_EQ(c.R, 2.0 / 9);
    EXPECT_DOUBLE_EQ(c.nodes.front().t, 1.0);
    EXPECT_DOUBLE_EQ(c.nodes.back().t, 2.0);
    EXPECT_TRUE(ks_chain_valid(c, 1));
    for (int i = 0; i < c.N; ++i) {
        EXPECT_LE((c.nodes[i + 1].p - c.nodes[i].p).norm(), c.R / 2 + 1e-15);
        EXPECT_GE(c.nodes[i + 1].t - c.theta * c.R * c.R, 0.25 - 1e-15);
    }
}

TEST(KSChain, CoincidentPointsUseTimeSubdivisionOnly) {
    auto c = ks_chain(Vec3(0.3, 0.3, 0), Vec3(0.3, 0.3, 0), 0.5, 2.0, 0.0, 1.0);
    // N = floor(2 (t - s) / s) + 1.
    EXPECT_EQ(c.N, 7);
    for (const auto& nd : c.nodes) EXPECT_EQ(nd.p, Vec3(0.3, 0.3, 0));
    EXPECT_TRUE(ks_chain_valid(c, 0.5));
}

TEST(KSChain, PropertyOverRandomInputs) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 200; ++i) {
        double s = 0.05 + U(rng), t = s + 0.01 + 2 * U(rng), delta = 0.05 + U(rng);
        Vec3 y(U(rng), U(rng), 0), x = y + 2 * Vec3(U(rng) - 0.5, U(rng) - 0.5, 0);
        double l = (x - y).norm() * (1 + U(rng));
        auto c = ks_chain(x, y, s, t, l, delta);
        double need = std::max(2 * (t - s) / s, l / std::min(std::sqrt(s) / 4, delta / 4));
        EXPECT_GT(c.N, need);
        EXPECT_LE(c.N - 1, need);
        EXPECT_TRUE(ks_chain_valid(c, s));
        EXPECT_LE(c.R, delta / 2);
    }
}

TEST(KSChain, ClearanceChecked) {
    auto clearance = [](const Vec3& p) { return 1.0 - p.norm(); };
    EXPECT_NO_THROW(ks_chain(Vec3(0.3, 0, 0), Vec3(-0.3, 0, 0), 1, 2, 0.6, 0.5, clearance));
    EXPECT_THROW(ks_chain(Vec3(0.8, 0, 0), Vec3(-0.3, 0, 0), 1, 2, 1.1, 0.5, clearance), Error);
}

TEST(KSChain, ChainedBoundCoversQuotient) {
    HeatKernelModel m = torus();
    SpaceTimeField u = [m](const Vec3& x, double t) { return spectral_kernel(m, x, Vec3(0, 0, 0), t + 0.2); };
    LiYauParams p;
    auto r = harnack_chain_check(m, u, {}, p, Vec3(1.5, 0.5, 0), Vec3(0, 0, 0), 0.5, 1.5, 0.8);
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.chain.size(), 2u);
}
