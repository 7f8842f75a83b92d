#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcflab/error.hpp"
#include "mcflab/shrinker.hpp"
#include "mcflab/singular_kernel.hpp"

using namespace mcf;

namespace {

HeatKernelModel plane() { return {}; }

HeatKernelModel sphere() {
    HeatKernelModel m;
    m.surface = SurfaceKind::Sphere;
    return m;
}

HeatKernelModel torus(double a, double b) {
    HeatKernelModel m;
    m.surface = SurfaceKind::Torus;
    m.period_x = a;
    m.period_y = b;
    return m;
}

Vec3 on_sphere(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

// Exponential integral E1 through the standard library's Ei.
double E1(double x) { return -std::expint(-x); }

// Static curve at the origin with Lebesgue density from T: U = E1(r^2 / 4(t - T)) / 4 pi.
double static_U(double r, double elapsed) { return E1(r * r / (4 * elapsed)) / (4 * kPi); }

double sup_error(const HeatKernelModel& m, double t, int k) {
    double e = 0.0;
    for (int i = 0; i <= 50; ++i) {
        double d = 0.5 * i / 50;
        Vec3 y = on_sphere(d, 0.0);
        double p = spectral_kernel(m, Vec3::UnitZ(), y, t);
        e = std::max(e, std::abs(p - parametrix_eval(m, Vec3::UnitZ(), y, t, k).value));
    }
    return e;
}

// int_{S^2} f by Gauss in cos(theta) and the trapezoid rule in phi.
template <class F>
double sphere_integral(F&& f, int n_theta, int n_phi) {
    // Gauss-Legendre nodes by Newton, kept here so the oracle does not share library code.
    std::vector<double> x(n_theta), w(n_theta);
    for (int i = 0; i < n_theta; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n_theta + 0.5)), dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n_theta; ++k) {
                double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n_theta * (z * p1 - p0) / (z * z - 1);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2 / ((1 - z * z) * dp * dp);
    }
    double s = 0.0;
    for (int i = 0; i < n_theta; ++i)
        for (int j = 0; j < n_phi; ++j)
            s += w[i] * f(on_sphere(std::acos(x[i]), 2 * kPi * j / n_phi));
    return s * 2 * kPi / n_phi;
}

struct Merge {
    HeatKernelModel m = plane();
    SingularCurve c1, c2;
    MeasureSamples nu = MeasureSamples::lebesgue(0, 1);
    SpaceTimeField u;

    Merge() {
        std::vector<double> ts{0, 0.5, 1};
        c1 = SingularCurve(m, ts, {Vec3(0.25, 0, 0), Vec3::Zero(), Vec3::Zero()}, 0.5);
        c2 = SingularCurve(m, ts, {Vec3(-0.25, 0, 0), Vec3::Zero(), Vec3::Zero()}, 0.5);
        u = [this](const Vec3& x, double t) {
            return singular_potential_U(m, c1, nu, x, t, 0) + singular_potential_U(m, c2, nu, x, t, 0);
        };
    }
};

CutOptions cheap() {
    CutOptions o;
    o.angles = 4;
    return o;
}

const std::vector<double> kRhos{1e-3, 1e-6, 1e-12};

}  // namespace

TEST(Parametrix, DiagonalIsFlatKernel) {
    for (const auto& m : {plane(), sphere(), torus(3, 4)})
        for (double t : {0.01, 0.3, 1.0}) {
            Vec3 x = m.surface == SurfaceKind::Sphere ? on_sphere(0.7, 1.1) : Vec3(0.3, 0.2, 0);
            auto p = parametrix_eval(m, x, x, t, 1);
            EXPECT_NEAR(p.u0, 1.0, 1e-15);
            EXPECT_NEAR(p.value * 4 * kPi * t, 1.0 + (m.surface == SurfaceKind::Sphere ? t / 3 : 0),
                        1e-12);
        }
}

TEST(Parametrix, PlaneOrderZeroIsExact) {
    auto m = plane();
    for (double t : {0.05, 0.5})
        for (double d : {0.0, 0.4, 1.3}) {
            Vec3 y(d, 0, 0);
            EXPECT_NEAR(parametrix_eval(m, Vec3::Zero(), y, t, 0).value,
                        std::exp(-d * d / (4 * t)) / (4 * kPi * t), 1e-15);
        }
}

TEST(Parametrix, SphereU0ClosedForm) {
    auto m = sphere();
    for (double d : {1e-6, 0.1, 0.3, 0.5, 1.2}) {
        auto p = parametrix_eval(m, Vec3::UnitZ(), on_sphere(d, 0.4), 0.1, 0);
        EXPECT_NEAR(p.u0, std::sqrt(d / std::sin(d)), 1e-10);
    }
}

TEST(Parametrix, U1SolvesTransportEquation) {
    // r u1' + (1/2 + r cot r / 2) u1 = u0'' + cot r u0', all derivatives by differences.
    const double h = 1e-4;
    EXPECT_NEAR(sphere_u1(0.0), 1.0 / 3, 1e-12);
    for (double r : {0.1, 0.3, 0.6, 1.0, 1.4}) {
        double du1 = (sphere_u1(r + h) - sphere_u1(r - h)) / (2 * h);
        double du0 = (sphere_u0(r + h) - sphere_u0(r - h)) / (2 * h);
        double d2u0 = (sphere_u0(r + h) - 2 * sphere_u0(r) + sphere_u0(r - h)) / (h * h);
        double cot = 1 / std::tan(r);
        double lhs = r * du1 + (0.5 + 0.5 * r * cot) * sphere_u1(r);
        EXPECT_NEAR(lhs, d2u0 + cot * du0, 1e-6) << "r = " << r;
    }
}

TEST(Parametrix, RejectsFarPointsAndBadOrder) {
    auto m = sphere();
    EXPECT_THROW(parametrix_eval(m, Vec3::UnitZ(), on_sphere(1.7, 0), 0.1, 0), Error);
    EXPECT_THROW(parametrix_eval(m, Vec3::UnitZ(), Vec3::UnitZ(), 0.1, 2), Error);
    EXPECT_THROW(parametrix_eval(m, Vec3::UnitZ(), Vec3::UnitZ(), 1.5, 0), Error);
    m.rho0 = 0.4;
    EXPECT_THROW(parametrix_eval(m, Vec3::UnitZ(), on_sphere(0.3, 0), 0.1, 0), Error);
}

TEST(Parametrix, SphereOrderZeroErrorConstantIsStable) {
    auto m = sphere();
    std::vector<double> c;
    for (double t : {0.04, 0.02, 0.01}) c.push_back(sup_error(m, t, 0));
    for (double v : c) EXPECT_NEAR(v / c.front(), 1.0, 0.05);
}

TEST(Parametrix, SphereOrderOneErrorHalvesWithTime) {
    auto m = sphere();
    double e1 = sup_error(m, 0.04, 1), e2 = sup_error(m, 0.02, 1), e3 = sup_error(m, 0.01, 1);
    for (double q : {e2 / e1, e3 / e2}) {
        EXPECT_GE(q, 0.35);
        EXPECT_LE(q, 0.7);
    }
}

TEST(SpectralKernel, TruncationRule) {
    for (double t : {1.0, 0.1, 0.01, 1e-3}) {
        int L = sphere_truncation(t);
        EXPECT_GE(L, 8);
        EXPECT_LT((2 * L + 3) * std::exp(-L * (L + 1.0) * t), 1e-14);
        if (L > 8) EXPECT_GE((2 * L + 1) * std::exp(-(L - 1.0) * L * t), 1e-14);
    }
    EXPECT_THROW(sphere_truncation(1e-9, 4000), Error);
}

TEST(SpectralKernel, SphereSymmetric) {
    auto m = sphere();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> th(0, kPi), ph(0, 2 * kPi);
    for (int i = 0; i < 20; ++i) {
        Vec3 x = on_sphere(th(rng), ph(rng)), y = on_sphere(th(rng), ph(rng));
        EXPECT_EQ(spectral_kernel(m, x, y, 0.07), spectral_kernel(m, y, x, 0.07));
    }
}

TEST(SpectralKernel, SphereStochasticallyComplete) {
    auto m = sphere();
    Vec3 x = on_sphere(0.4, 0.9);
    for (double t : {0.05, 0.3, 2.0}) {
        double s = sphere_integral([&](const Vec3& z) { return spectral_kernel(m, x, z, t); }, 64, 128);
        EXPECT_NEAR(s, 1.0, 1e-10) << "t = " << t;
    }
}

TEST(SpectralKernel, SphereSemigroup) {
    auto m = sphere();
    m.max_truncation = 64;
    Vec3 x = on_sphere(0.2, 0.0), y = on_sphere(0.9, 2.0);
    double s = 0.1, t = 0.15;
    double conv = sphere_integral(
        [&](const Vec3& z) { return spectral_kernel(m, x, z, s) * spectral_kernel(m, z, y, t); }, 64,
        128);
    EXPECT_NEAR(conv, spectral_kernel(m, x, y, s + t), 1e-6);
}

TEST(SpectralKernel, TorusMatchesImageSumAndEquilibrates) {
    auto m = torus(2 * kPi, 3.0);
    Vec3 x(0.1, 0.2, 0), y(4.0, 2.5, 0);
    for (double t : {0.01, 0.3, 3.0}) {
        double s = 0.0;
        for (int i = -30; i <= 30; ++i)
            for (int j = -30; j <= 30; ++j) {
                double dx = x.x() - y.x() + i * m.period_x, dy = x.y() - y.y() + j * m.period_y;
                s += std::exp(-(dx * dx + dy * dy) / (4 * t));
            }
        s /= 4 * kPi * t;
        EXPECT_NEAR(spectral_kernel(m, x, y, t), s, 1e-12 * std::max(1.0, s));
    }
    EXPECT_NEAR(spectral_kernel(m, x, y, 200.0), 1 / (m.period_x * m.period_y), 1e-12);
}

TEST(SingularCurve, ValidatesSamples) {
    auto m = plane();
    EXPECT_THROW(SingularCurve(m, {0, 1}, {Vec3::Zero(), Vec3(2, 0, 0)}, 1.0), Error);
    EXPECT_THROW(SingularCurve(m, {1, 0}, {Vec3::Zero(), Vec3::Zero()}, 1.0), Error);
    SingularCurve c(m, {0, 1, 2}, {Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)}, 1.0);
    EXPECT_NEAR((c.position(1.5) - Vec3(1, 0.5, 0)).norm(), 0.0, 1e-15);
    auto r = c.reversed();
    for (double t : {0.0, 0.3, 1.2, 2.0})
        EXPECT_NEAR((r.position(t) - c.position(2 - t)).norm(), 0.0, 1e-15);
    auto s = sphere();
    EXPECT_NO_THROW(SingularCurve(s, {0, 1}, {on_sphere(0, 0), on_sphere(0.5, 0)}, 0.5));
    EXPECT_THROW(SingularCurve(s, {0, 1}, {on_sphere(0, 0), on_sphere(0.5, 0)}, 0.45), Error);
}

TEST(SingularPotential, MatchesExponentialIntegral) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto nu = MeasureSamples::lebesgue(0, 1);
    for (double r : {1.0, 0.1, 1e-3, 1e-6, 1e-10}) {
        double U = singular_potential_U(m, c, nu, Vec3(0, r, 0), 1, 0);
        EXPECT_NEAR(U / static_U(r, 1), 1.0, 1e-12) << "r = " << r;
    }
    // Lebesgue on [0.2, 0.6] seen at t = 1: difference of two such terms.
    auto part = MeasureSamples::lebesgue(0.2, 0.6);
    double r = 0.05;
    EXPECT_NEAR(singular_potential_U(m, c, part, Vec3(r, 0, 0), 1, 0),
                static_U(r, 0.8) - static_U(r, 0.4), 1e-12);
}

TEST(SingularPotential, ZeroMeasureAndFarField) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto zero = MeasureSamples::lebesgue(0, 1, 0.0);
    EXPECT_EQ(singular_potential_U(m, c, zero, Vec3(1e-3, 0, 0), 1, 0), 0.0);
    auto nu = MeasureSamples::lebesgue(0, 1);
    double t = 0.1, r = 10;
    double U = singular_potential_U(m, c, nu, Vec3(r, 0, 0), 0.9 + t, 0.9);
    EXPECT_GE(U, 0.0);
    EXPECT_LE(U, std::exp(-r * r / (4 * t)) * t / (4 * kPi * t));
    EXPECT_TRUE(std::isinf(singular_potential_U(m, c, nu, Vec3::Zero(), 1, 0)));
}

TEST(SingularPotential, MonotoneInMeasure) {
    auto m = plane();
    SingularCurve c(m, {0, 0.5, 1}, {Vec3::Zero(), Vec3(0.2, 0.1, 0), Vec3(0.3, -0.1, 0)}, 1.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U01(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        MeasureSamples a, b;
        for (int i = 0; i <= 8; ++i) a.edges.push_back(i / 8.0);
        b.edges = a.edges;
        for (int i = 0; i < 8; ++i) {
            a.density.push_back(U01(rng));
            b.density.push_back(a.density.back() + (U01(rng) < 0.5 ? 0.0 : U01(rng)));
        }
        Vec3 x(U01(rng) - 0.5, U01(rng) - 0.5, 0);
        double t = 0.5 + 0.5 * U01(rng);
        EXPECT_LE(singular_potential_U(m, c, a, x, t, 0), singular_potential_U(m, c, b, x, t, 0));
    }
}

TEST(SingularPotential, LogProfileExtrapolatesToOne) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto nu = MeasureSamples::lebesgue(0, 1);
    double h[3], y[3];
    double rs[3] = {1e-4, 1e-8, 1e-16};
    for (int i = 0; i < 3; ++i) {
        double L = std::log(1 / rs[i]);
        h[i] = 1 / L;
        y[i] = singular_potential_U(m, c, nu, Vec3(rs[i], 0, 0), 1, 0) * 2 * kPi / L;
    }
    EXPECT_GT(y[0], y[1]);
    EXPECT_GT(y[1], y[2]);
    EXPECT_NEAR(extrapolate_to_zero(h, y), 1.0, 0.03);
}

TEST(SingularPotential, SphereDiffersFromPlaneBySmoothTerm) {
    auto p = plane(), s = sphere();
    auto nu = MeasureSamples::lebesgue(0, 1);
    auto cp = SingularCurve::stationary(p, Vec3::Zero(), 0, 1);
    auto cs = SingularCurve::stationary(s, Vec3::UnitZ(), 0, 1);
    auto diff = [&](double r) {
        return singular_potential_U(s, cs, nu, on_sphere(r, 0), 1, 0) -
               singular_potential_U(p, cp, nu, Vec3(r, 0, 0), 1, 0);
    };
    EXPECT_NEAR(diff(1e-3), diff(1e-5), 1e-5);
}

TEST(SingularPotential, GradientMatchesDifferences) {
    auto m = plane();
    SingularCurve c(m, {0, 1}, {Vec3::Zero(), Vec3(0.3, 0, 0)}, 0.3);
    auto nu = MeasureSamples::lebesgue(0, 1);
    Vec3 x(0.4, 0.15, 0), g;
    singular_potential_grad(m, c, nu, x, 0.9, 0, g);
    const double h = 1e-5;
    for (int k = 0; k < 2; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        double fd = (singular_potential_U(m, c, nu, x + e, 0.9, 0) -
                     singular_potential_U(m, c, nu, x - e, 0.9, 0)) /
                    (2 * h);
        EXPECT_NEAR(g[k], fd, 1e-6);
    }
    EXPECT_THROW(singular_potential_grad(sphere(), c, nu, x, 0.9, 0, g), Error);
}

class BackwardVTest : public ::testing::Test {
protected:
    HeatKernelModel m = plane();
    SingularCurve c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    BackwardV v = backward_v(m, c, 0.2, 0.8, 0.75);
};

TEST_F(BackwardVTest, SandwichHolds) {
    EXPECT_GE(v.lower_margin, 0.0);
    EXPECT_GE(v.upper_margin, 0.0);
    EXPECT_GE(v.grad_lower_margin, 0.0);
    EXPECT_GE(v.grad_upper_margin, 0.0);
    for (double t : {0.25, 0.5, 0.75})
        for (double r : {2e-4, 3e-3, 8e-3}) {
            double q = v.value(Vec3(0, r, 0), t) / std::log(1 / r);
            EXPECT_GE(q, 0.75);
            EXPECT_LE(q, 1.0 + 1e-12);
        }
}

TEST_F(BackwardVTest, VBounds) {
    for (double t : {0.2, 0.5, 0.8}) {
        double r = 1e-2, V = v.V(Vec3(r, 0, 0), t);
        EXPECT_GE(V, r * r * (1 - 1e-12));
        EXPECT_LE(V, std::pow(r, 2 * v.gamma));
    }
}

TEST_F(BackwardVTest, SolvesBackwardHeatEquation) {
    const double h = 1e-4, k = 1e-3;
    Vec3 x(0.05, 0.02, 0);
    double t = 0.5;
    auto f = [&](const Vec3& p, double s) { return v.value(p, s); };
    double dt = (f(x, t + k) - f(x, t - k)) / (2 * k);
    double lap = (f(x + Vec3(h, 0, 0), t) + f(x - Vec3(h, 0, 0), t) + f(x + Vec3(0, h, 0), t) +
                  f(x - Vec3(0, h, 0), t) - 4 * f(x, t)) /
                 (h * h);
    EXPECT_NEAR(dt + lap, 0.0, 1e-3 * std::abs(lap));
}

TEST_F(BackwardVTest, VIsASupersolutionWithBoundedSource) {
    // (d/dt + Delta) V between 1 and 4 r^{2 gamma - 2}.
    const double h = 1e-4;
    for (double r : {3e-3, 8e-3}) {
        Vec3 x(r, 0, 0);
        double t = 0.5;
        auto V = [&](const Vec3& p, double s) { return v.V(p, s); };
        double dt = (V(x, t + h) - V(x, t - h)) / (2 * h);
        double hs = 1e-2 * r;
        double lap = (V(x + Vec3(hs, 0, 0), t) + V(x - Vec3(hs, 0, 0), t) + V(x + Vec3(0, hs, 0), t) +
                      V(x - Vec3(0, hs, 0), t) - 4 * V(x, t)) /
                     (hs * hs);
        EXPECT_GE(dt + lap, 1.0);
        EXPECT_LE(dt + lap, 4 * std::pow(r, 2 * v.gamma - 2));
    }
}

TEST(BackwardV, AggressiveAnnulusReportsAdmissibleRadius) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    BackwardVOptions o;
    o.r_max = 0.3;
    try {
        backward_v(m, c, 0.2, 0.8, 0.75, o);
        FAIL() << "expected a sandwich failure";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("admissible radius"), std::string::npos);
    }
    EXPECT_THROW(backward_v(m, c, 0.2, 0.8, 0.4), Error);
    EXPECT_THROW(backward_v(m, c, 0.0, 0.8, 0.75), Error);
}

TEST(BackwardV, SphereSandwich) {
    auto m = sphere();
    auto c = SingularCurve::stationary(m, Vec3::UnitZ(), 0, 1);
    BackwardVOptions o;
    o.radii = 5;
    o.times = 3;
    auto v = backward_v(m, c, 0.2, 0.8, 0.75, o);
    EXPECT_GE(v.lower_margin, 0.0);
    EXPECT_TRUE(std::isnan(v.grad_lower_margin));
}

TEST(Cutoffs, ZetaConstraints) {
    auto z = make_cutoffs(0.01, 0.4, 0.6, 0.1, 0.9, 0.5);
    EXPECT_EQ(z.zeta(0.4), 0.01);
    EXPECT_EQ(z.zeta(0.5), 0.01);
    EXPECT_EQ(z.zeta(0.1), 0.5);
    EXPECT_EQ(z.zeta(-3.0), 0.5);
    EXPECT_EQ(z.zeta(0.95), 0.5);
    const double h = 1e-6;
    for (int i = 1; i < 200; ++i) {
        double t = 0.1 + 0.8 * i / 200;
        if (std::abs(t - 0.4) < 2 * h || std::abs(t - 0.6) < 2 * h) continue;
        double fd = (z.zeta(t + h) - z.zeta(t - h)) / (2 * h);
        EXPECT_NEAR(z.zeta_dt(t), fd, 1e-6);
        EXPECT_LE(std::abs(z.zeta_dt(t)), z.zeta_slope_bound());
        if (t < 0.4) EXPECT_LT(z.zeta_dt(t), 0.0);
        if (t > 0.6) EXPECT_GT(z.zeta_dt(t), 0.0);
    }
    EXPECT_THROW(make_cutoffs(0.01, 0.4, 0.6, 0.5, 0.9, 0.5), Error);
    EXPECT_THROW(make_cutoffs(0.6, 0.4, 0.6, 0.1, 0.9, 0.5), Error);
}

TEST(Cutoffs, EtaAndH) {
    EXPECT_EQ(Cutoffs::H(-1.0), 0.0);
    EXPECT_EQ(Cutoffs::H(0.0), 0.0);
    for (int i = 1; i < 100; ++i) {
        double z = i / 100.0;
        EXPECT_GT(Cutoffs::eta_d(z), 0.0);
        EXPECT_LE(Cutoffs::eta_d(z), 2.0);
    }
    // H(z) = z - c beyond 1, c = int_0^1 (1 - eta) in (0, 1).
    double c = 2.0 - Cutoffs::H(2.0);
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 1.0);
    EXPECT_NEAR(Cutoffs::H(3.5), 3.5 - c, 1e-15);
    for (int i = -20; i <= 400; ++i) {
        double z = i / 100.0;
        double q = z * Cutoffs::H_d(z) - Cutoffs::H(z);
        EXPECT_GE(q, -1e-15);
        EXPECT_LE(q, Cutoffs::H_d(z) + 1e-15);
        double h = 1e-6;
        EXPECT_NEAR(Cutoffs::H_d(z), (Cutoffs::H(z + h) - Cutoffs::H(z - h)) / (2 * h), 1e-8);
    }
}

TEST(Annulus, ConstantAndZeroFields) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    SpaceTimeField one = [](const Vec3&, double) { return 1.0; };
    SpaceTimeField zero = [](const Vec3&, double) { return 0.0; };
    double delta = 1e-3, R = 0.2, t1 = 0.3, t2 = 0.7;
    auto a = annulus_integrals(m, c, one, delta, R, t1, t2);
    // 2 pi int_delta^R dr / |log r| = 2 pi (Ei(log delta) - Ei(log R)).
    double j1 = (t2 - t1) * 2 * kPi * (std::expint(std::log(delta)) - std::expint(std::log(R)));
    EXPECT_NEAR(a.J1 / j1, 1.0, 1e-9);
    EXPECT_NEAR(a.J2, 0.75 * kPi * delta * (t2 - t1), 1e-12);
    auto z = annulus_integrals(m, c, zero, delta, R, t1, t2);
    EXPECT_EQ(z.J1, 0.0);
    EXPECT_EQ(z.J2, 0.0);
    AnnulusOptions coarse;
    coarse.radial_cells = 4;
    EXPECT_THROW(annulus_integrals(m, c, one, delta, R, t1, t2, coarse), Error);
}

TEST(Annulus, LogProfileClosedForm) {
    // u = log(1/r) / 2 pi makes the J1 integrand 1, so J1 = (t2 - t1)(R - delta).
    auto m = plane();
    SingularCurve c(m, {0, 1}, {Vec3::Zero(), Vec3(0.2, 0.1, 0)}, 1.0);
    SpaceTimeField phi = [&](const Vec3& x, double t) {
        return std::log(1 / (x - c.position(t)).norm()) / (2 * kPi);
    };
    auto tr = annulus_trend(m, c, phi, {1e-2, 1e-3, 1e-4}, 0.1, 0.3, 0.7);
    for (std::size_t i = 0; i < tr.delta.size(); ++i) {
        EXPECT_NEAR(tr.J1[i], 0.4 * (0.1 - tr.delta[i]), 1e-12);
        // J2 = (t2 - t1) int_{delta/2}^{delta} r log(1/r) dr / delta.
        double d = tr.delta[i];
        auto F = [](double r) { return r * r / 2 * std::log(1 / r) + r * r / 4; };
        EXPECT_NEAR(tr.J2[i], 0.4 * (F(d) - F(d / 2)) / d, 1e-12);
    }
    EXPECT_TRUE(tr.J2_bounded);
    EXPECT_FALSE(tr.J1_decreasing);
}

TEST(IFunctional, ZeroField) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto v = backward_v(m, c, 0.2, 0.8, 0.75);
    SpaceTimeField zero = [](const Vec3&, double) { return 0.0; };
    EXPECT_EQ(i_functional({v}, zero, 1e-6, 1e-2, 0.3, 0.7, cheap()), 0.0);
}

TEST(IFunctional, BoundedForStaticCurve) {
    auto m = plane();
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto v = backward_v(m, c, 0.2, 0.8, 0.75);
    SpaceTimeField phi = [](const Vec3& x, double) { return std::log(1 / x.norm()) / (2 * kPi); };
    std::vector<double> I;
    for (double rho : {1e-6, 1e-8, 1e-12}) I.push_back(i_functional({v}, phi, rho, 1e-2, 0.3, 0.7, cheap()));
    for (double x : I) {
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    EXPECT_LT(*std::max_element(I.begin(), I.end()) / *std::min_element(I.begin(), I.end()), 1.2);
}

TEST(IFunctional, FiniteAcrossMerge) {
    Merge g;
    auto v1 = backward_v(g.m, g.c1, 0.2, 0.8, 0.75), v2 = backward_v(g.m, g.c2, 0.2, 0.8, 0.75);
    double a = i_functional({v1, v2}, g.u, 1e-8, 1e-2, 0.3, 0.7, cheap(), {0.5});
    double b = i_functional({v1, v2}, g.u, 1e-12, 1e-2, 0.3, 0.7, cheap(), {0.5});
    EXPECT_TRUE(std::isfinite(a) && std::isfinite(b));
    EXPECT_GT(a, 0.0);
    EXPECT_LT(b, 1.0);
    EXPECT_LT(std::abs(b - a), 0.25 * b);
}

class RecoveryTest : public ::testing::Test {
protected:
    HeatKernelModel m = plane();
    SingularCurve c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    MeasureSamples nu = MeasureSamples::lebesgue(0, 1);
    BackwardV v = backward_v(m, c, 0.2, 0.8, 0.75);
    SpaceTimeField U = [this](const Vec3& x, double t) { return singular_potential_U(m, c, nu, x, t, 0); };
    SpaceTimeField smooth = [](const Vec3& x, double t) { return 1.0 + t + 0.5 * x.squaredNorm(); };
    TestFunction psi = tapered_indicator(0.35, 0.65, 0.1);
};

TEST_F(RecoveryTest, RecoversLebesgueMass) {
    auto r = measure_recovery({v}, U, kRhos, psi, cheap());
    // psi integrates to (b - a) + w.
    EXPECT_NEAR(r.value, 0.4, 0.05 * 0.4);
    EXPECT_FALSE(r.flagged);
}

TEST_F(RecoveryTest, SmoothFieldCarriesNoMass) {
    auto r = measure_recovery({v}, smooth, kRhos, psi, cheap());
    EXPECT_LE(std::abs(r.value), 1e-6);
    EXPECT_GE(r.value, -1e-8);
}

TEST_F(RecoveryTest, LinearInFieldAndTestFunction) {
    SpaceTimeField sum = [&](const Vec3& x, double t) { return 2 * U(x, t) + smooth(x, t); };
    auto a = measure_recovery({v}, U, kRhos, psi, cheap());
    auto b = measure_recovery({v}, sum, kRhos, psi, cheap());
    EXPECT_NEAR(b.value, 2 * a.value, 0.05 * a.value);
    TestFunction twice{[&](double t) { return 3 * psi.psi(t); }, psi.breaks};
    auto d = measure_recovery({v}, U, kRhos, twice, cheap());
    for (std::size_t i = 0; i < kRhos.size(); ++i) EXPECT_NEAR(d.raw[i], 3 * a.raw[i], 1e-12);
    EXPECT_NEAR(d.value, 3 * a.value, 1e-10);
}

TEST_F(RecoveryTest, RejectsShortSequence) {
    EXPECT_THROW(measure_recovery({v}, U, {1e-3, 1e-6}, psi, cheap()), Error);
}

TEST(Domination, ArithmeticAndMargins) {
    auto d = domination_check({1.0, 0.5}, {{1.0, 0.5}, {3.0, 1.5}}, 0.75);
    EXPECT_TRUE(d.holds);
    EXPECT_NEAR(d.margins[0][0], 1 - std::pow(0.75, 4), 1e-15);
    auto bad = domination_check({1.0}, {{4.0}}, 0.75);
    EXPECT_FALSE(bad.holds);
    EXPECT_FALSE(domination_check({1.0}, {{-0.1}}, 0.75).holds);
    EXPECT_THROW(domination_check({1.0}, {{1.0, 2.0}}, 0.75), Error);
}

TEST(Domination, HoldsAcrossMerge) {
    Merge g;
    auto v1 = backward_v(g.m, g.c1, 0.2, 0.8, 0.75), v2 = backward_v(g.m, g.c2, 0.2, 0.8, 0.75);
    auto psi = tapered_indicator(0.45, 0.55, 0.05);
    auto m1 = measure_recovery({v1}, g.u, kRhos, psi, cheap());
    auto mm = measure_recovery({v1, v2}, g.u, kRhos, psi, cheap());
    EXPECT_FALSE(mm.flagged);
    // Each curve carries 0.15 before the merge and the pair carries 0.3 throughout.
    EXPECT_NEAR(mm.value, 0.3, 0.015);
    auto d = domination_check({mm.value}, {{m1.value}}, 0.75);
    EXPECT_TRUE(d.holds);
    EXPECT_GT(d.margins[0][0], 0.0);
}
