#include "mcflab/harnack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcflab/error.hpp"
#include "mcflab/quadrature.hpp"

#include <random>

namespace mcf {

namespace {

Vec3 tangent_frame(const Vec3& n, Vec3& e2) {
    Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 e1 = (a - a.dot(n) * n).normalized();
    e2 = n.cross(e1);
    return e1;
}

// Point at parameter s in [0, 1] on the shortest geodesic from y to x.
Vec3 geodesic_point(const HeatKernelModel& m, const Vec3& y, const Vec3& x, double s) {
    if (m.surface == SurfaceKind::Sphere) {
        Vec3 a = y.normalized(), b = x.normalized();
        double d = geodesic_distance(m, a, b);
        if (d < 1e-15) return a;
        Vec3 w = (b - a.dot(b) * a).normalized();
        return std::cos(s * d) * a + std::sin(s * d) * w;
    }
    Vec3 dx = x - y;
    if (m.surface == SurfaceKind::Torus) {
        dx.x() -= m.period_x * std::round(dx.x() / m.period_x);
        dx.y() -= m.period_y * std::round(dx.y() / m.period_y);
    }
    return y + s * dx;
}

struct Sample {
    Vec3 x;
    double u1, u2;
};

std::vector<Vec3> disk_samples(const HeatKernelModel& m, const Vec3& c, double radius, int rings,
                               int angles) {
    std::vector<Vec3> pts{c};
    for (int i = 1; i <= rings; ++i) {
        double r = radius * i / rings;
        for (int j = 0; j < angles; ++j)
            pts.push_back(geodesic_offset(m, c, r, 2 * kPi * (j + 0.5 * (i % 2)) / angles));
    }
    return pts;
}

// Smallest C keeping u(x, t1) <= u(y, t2) bound over sampled pairs: the bound is
// linear in C inside the exponent.
double required_C(const HarnackProblem& P) {
    LiYauParams p = P.params;
    p.C = 1.0;
    double a = liyau_A(p);
    auto pts = disk_samples(P.model, P.center, P.inner_radius, P.rings, P.angles);
    double need = 0.0;
    for (const Vec3& x : pts)
        for (const Vec3& y : pts) {
            double lhs = std::log(P.u(x, P.t1) / P.u(y, P.t2));
            double rhs = 0.5 * p.n * p.alpha * std::log(P.t2 / P.t1) +
                         straight_path_action(P.model, p.alpha, x, y, P.t1, P.t2, P.q);
            if (lhs > rhs) need = std::max(need, (lhs - rhs) / (a * (P.t2 - P.t1)));
        }
    return need;
}

}  // namespace

void LiYauParams::validate() const {
    require(alpha > 1, ErrorCode::InvalidArgument, "alpha must exceed 1");
    require(R > 0 && K >= 0 && theta >= 0 && gamma >= 0 && n >= 1 && C >= 0,
            ErrorCode::InvalidArgument, "need R > 0, n >= 1 and nonnegative K, theta, gamma, C");
}

double liyau_A(const LiYauParams& p) {
    p.validate();
    double a = p.alpha;
    return p.C * (a * std::sqrt(p.K) / p.R + a * a * a / ((a - 1) * p.R * p.R) +
                  std::cbrt(p.gamma * p.gamma) * std::cbrt((a - 1) / a) + std::sqrt(a * p.theta) +
                  a * p.K / (a - 1));
}

double liyau_bound(const LiYauParams& p, double t1, double t2, double path_action) {
    require(t1 > 0 && t2 > t1, ErrorCode::InvalidArgument, "need 0 < t1 < t2");
    double e = 0.5 * p.n * p.alpha * std::log(t2 / t1) + liyau_A(p) * (t2 - t1) + path_action;
    return std::exp(e);
}

double straight_path_action(const HeatKernelModel& m, double alpha, const Vec3& x, const Vec3& y,
                            double t1, double t2, const SpaceTimeField& q) {
    require(t2 > t1, ErrorCode::InvalidArgument, "need t1 < t2");
    double dt = t2 - t1, d = geodesic_distance(m, x, y);
    double act = alpha * d * d / (4 * dt);
    if (q) {
        double s = integrate(
            [&](double sig) { return q(geodesic_point(m, y, x, sig), (1 - sig) * t2 + sig * t1); },
            0.0, 1.0, 2, 8);
        act += dt * s;
    }
    return act;
}

Vec3 geodesic_offset(const HeatKernelModel& m, const Vec3& c, double r, double angle) {
    if (m.surface != SurfaceKind::Sphere) return c + r * Vec3(std::cos(angle), std::sin(angle), 0);
    Vec3 n = c.normalized(), e2;
    Vec3 e1 = tangent_frame(n, e2);
    return std::cos(r) * n + std::sin(r) * (std::cos(angle) * e1 + std::sin(angle) * e2);
}

double heat_residual(const HeatKernelModel& m, const SpaceTimeField& u, const SpaceTimeField& q,
                     const Vec3& x, double t, double h) {
    double u0 = u(x, t);
    double lap = 0.0;
    for (double ang : {0.0, kPi / 2}) {
        Vec3 a = geodesic_offset(m, x, h, ang), b = geodesic_offset(m, x, h, ang + kPi);
        lap += (u(a, t) + u(b, t) - 2 * u0) / (h * h);
    }
    double ut = (u(x, t + h) - u(x, t - h)) / (2 * h);
    double qu = q ? q(x, t) * u0 : 0.0;
    return std::abs(lap - qu - ut) / (std::abs(lap) + std::abs(qu) + std::abs(ut) + std::abs(u0));
}

HarnackReport harnack_scan(const HarnackProblem& P) {
    P.params.validate();
    require(P.u != nullptr, ErrorCode::InvalidArgument, "no solution given");
    require(P.t1 > 0 && P.t2 > P.t1, ErrorCode::InvalidArgument, "need 0 < t1 < t2");
    require(P.inner_radius > 0 && P.inner_radius <= P.params.R, ErrorCode::InvalidArgument,
            "Omega' must lie in B_R");
    require(P.rings >= 1 && P.angles >= 3, ErrorCode::InvalidArgument, "too few samples");
    HarnackReport rep;
    rep.params = P.params;
    rep.t1 = P.t1;
    rep.t2 = P.t2;
    auto pts = disk_samples(P.model, P.center, P.inner_radius, P.rings, P.angles);
    std::vector<Sample> s;
    double sup1 = 0.0, inf2 = std::numeric_limits<double>::infinity(), diam = 0.0;
    for (const Vec3& x : pts) {
        Sample a{x, P.u(x, P.t1), P.u(x, P.t2)};
        if (!(a.u1 > 0) || !(a.u2 > 0)) fail(ErrorCode::Precondition, "u is not positive on the domain");
        sup1 = std::max(sup1, a.u1);
        inf2 = std::min(inf2, a.u2);
        double h = std::min(1e-3, 0.25 * P.t1);
        for (double t : {P.t1, P.t2})
            rep.max_residual = std::max(rep.max_residual, heat_residual(P.model, P.u, P.q, x, t, h));
        s.push_back(a);
    }
    if (rep.max_residual > P.residual_tol)
        fail(ErrorCode::Precondition,
             "residual too large: " + std::to_string(rep.max_residual));
    double worst = 0.0;
    for (const Sample& a : s)
        for (const Sample& b : s) {
            double d = geodesic_distance(P.model, a.x, b.x);
            diam = std::max(diam, d);
            double bnd = liyau_bound(P.params, P.t1, P.t2,
                                     straight_path_action(P.model, P.params.alpha, a.x, b.x, P.t1,
                                                          P.t2, P.q));
            double r = a.u1 / (b.u2 * bnd);
            if (r > worst) {
                worst = r;
                rep.worst_x = a.x;
                rep.worst_y = b.x;
            }
        }
    rep.worst_pair_ratio = worst;
    rep.quotient = sup1 / inf2;
    double qmax = 0.0;
    if (P.q)
        for (const Sample& a : s) qmax = std::max({qmax, P.q(a.x, P.t1), P.q(a.x, P.t2)});
    // Uniform bound: the largest action over pairs is at most the diameter term
    // plus dt * sup q, taken over the samples.
    double act = P.params.alpha * diam * diam / (4 * (P.t2 - P.t1)) + (P.t2 - P.t1) * qmax;
    rep.bound = liyau_bound(P.params, P.t1, P.t2, act);
    rep.pass = worst <= 1 + 1e-6 && rep.quotient <= rep.bound * (1 + 1e-6);
    return rep;
}

double calibrate_liyau_C(const std::vector<HarnackProblem>& problems) {
    double c = 0.0;
    for (const HarnackProblem& P : problems) c = std::max(c, required_C(P));
    return c;
}

KSChain ks_chain(const Vec3& x, const Vec3& y, double s, double t, double l, double delta,
                 const std::function<double(const Vec3&)>& clearance) {
    require(s > 0 && t > s, ErrorCode::InvalidArgument, "need 0 < s < t");
    require(delta > 0, ErrorCode::InvalidArgument, "clearance delta must be positive");
    double len = (x - y).norm();
    require(len <= l * (1 + 1e-12), ErrorCode::InvalidArgument, "segment longer than l");
    if (clearance) {
        for (int i = 0; i <= 64; ++i) {
            Vec3 p = y + (x - y) * (i / 64.0);
            if (clearance(p) < delta)
                fail(ErrorCode::Precondition, "clearance insufficient along the segment");
        }
    }
    double m = std::min(std::sqrt(s) / 4, delta / 4);
    double bound = std::max(2 * (t - s) / s, l / m);
    KSChain c;
    c.N = static_cast<int>(std::floor(bound)) + 1;
    c.R = l > 0 ? 2 * l / c.N : m;
    c.theta = 1 + (t - s) / (c.R * c.R * c.N);
    for (int i = 0; i <= c.N; ++i) {
        ChainNode nd;
        nd.p = y + (x - y) * (static_cast<double>(i) / c.N);
        nd.t = i == c.N ? t : s + (t - s) * i / c.N;
        c.nodes.push_back(nd);
    }
    if (!ks_chain_valid(c, s)) fail(ErrorCode::Inconsistent, "chain constraints violated");
    return c;
}

bool ks_chain_valid(const KSChain& c, double s) {
    if (c.N < 1 || static_cast<int>(c.nodes.size()) != c.N + 1) return false;
    const double slack = 1e-12;
    for (int i = 0; i < c.N; ++i) {
        const ChainNode &a = c.nodes[i], &b = c.nodes[i + 1];
        if (!(b.t > a.t)) return false;
        if (b.t - c.theta * c.R * c.R < s / 4 - slack * s) return false;
        if ((b.p - a.p).norm() > c.R / 2 * (1 + slack)) return false;
    }
    return true;
}

double chained_liyau_bound(const HeatKernelModel& m, const KSChain& chain, LiYauParams p,
                           const SpaceTimeField& q) {
    p.R = chain.R;
    double log_b = 0.0;
    for (int i = 0; i < chain.N; ++i) {
        const ChainNode &a = chain.nodes[i], &b = chain.nodes[i + 1];
        log_b += std::log(
            liyau_bound(p, a.t, b.t, straight_path_action(m, p.alpha, a.p, b.p, a.t, b.t, q)));
    }
    return std::exp(log_b);
}

HarnackReport harnack_chain_check(const HeatKernelModel& m, const SpaceTimeField& u,
                                  const SpaceTimeField& q, const LiYauParams& p, const Vec3& x,
                                  const Vec3& y, double s, double t, double delta) {
    require(m.surface != SurfaceKind::Sphere, ErrorCode::Precondition,
            "chains are built on flat coordinates only");
    HarnackReport rep;
    KSChain c = ks_chain(x, y, s, t, (x - y).norm(), delta);
    rep.chain = c.nodes;
    rep.chain_R = c.R;
    rep.chain_theta = c.theta;
    rep.params = p;
    rep.params.R = c.R;
    rep.t1 = s;
    rep.t2 = t;
    double a = u(y, s), b = u(x, t);
    if (!(a > 0) || !(b > 0)) fail(ErrorCode::Precondition, "u is not positive on the chain");
    for (const ChainNode& nd : c.nodes) {
        double h = std::min(1e-3, 0.25 * s);
        rep.max_residual = std::max(rep.max_residual, heat_residual(m, u, q, nd.p, nd.t, h));
    }
    rep.quotient = a / b;
    rep.bound = chained_liyau_bound(m, c, p, q);
    rep.worst_pair_ratio = rep.quotient / rep.bound;
    rep.worst_x = y;
    rep.worst_y = x;
    rep.pass = rep.quotient <= rep.bound * (1 + 1e-6);
    return rep;
}

namespace {

HeatKernelModel flat_torus() {
    HeatKernelModel m;
    m.surface = SurfaceKind::Torus;
    return m;
}

HeatKernelModel unit_sphere() {
    HeatKernelModel m;
    m.surface = SurfaceKind::Sphere;
    return m;
}

}  // namespace

std::vector<HarnackCase> harnack_suite(unsigned seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
    const HeatKernelModel tor = flat_torus(), sph = unit_sphere();
    std::vector<HarnackCase> out;
    for (int i = 0; i < count; ++i) {
        HarnackCase c;
        HarnackProblem& P = c.problem;
        P.params.alpha = uni(1.2, 3.0);
        P.t1 = uni(0.05, 1.0);
        P.t2 = P.t1 + uni(0.05, 1.5);
        int fam = i % 7;
        if (fam == 0 || fam == 2 || fam == 6) {
            Vec3 x0(uni(0, 2 * kPi), uni(0, 2 * kPi), 0);
            double tau = uni(0.05, 0.5);
            P.model = tor;
            double qc = fam == 2 ? uni(0.1, 2.0) : 0.0;
            P.u = [tor, x0, tau, qc](const Vec3& x, double t) {
                return std::exp(-qc * t) * spectral_kernel(tor, x, x0, t + tau);
            };
            if (qc > 0) P.q = [qc](const Vec3&, double) { return qc; };
            P.center = Vec3(uni(0, 2 * kPi), uni(0, 2 * kPi), 0);
            P.params.R = uni(0.2, kPi / 2);
            c.family = fam == 0 ? "torus-heat" : fam == 2 ? "torus-potential" : "torus-chain";
            if (fam == 6) {
                c.chained = true;
                c.y = P.center;
                c.x = P.center + uni(0.2, 2.0) * Vec3(std::cos(uni(0, 2 * kPi)), std::sin(uni(0, 2 * kPi)), 0);
                c.delta = uni(0.3, 1.0);
            }
        } else if (fam == 1) {
            double kx = 1 + std::floor(3 * U(rng)), ky = 1 + std::floor(3 * U(rng));
            double lam = kx * kx + ky * ky, shift = uni(0.0, 0.5);
            P.model = tor;
            P.u = [kx, ky, lam, shift](const Vec3& x, double t) {
                return std::exp(-lam * t) * std::sin(kx * x.x()) * std::sin(ky * x.y()) + shift;
            };
            double hx = kPi / kx / 2, hy = kPi / ky / 2;
            P.params.R = std::min(hx, hy) / 2 * uni(0.3, 1.0);
            double slack = std::min(hx, hy) - 2 * P.params.R;
            P.center = Vec3(hx + 0.9 * slack * (U(rng) - 0.5), hy + 0.9 * slack * (U(rng) - 0.5), 0);
            c.family = "torus-eigen";
        } else if (fam == 3 || fam == 5) {
            double theta0 = uni(0, kPi), phi0 = uni(0, 2 * kPi);
            Vec3 x0(std::sin(theta0) * std::cos(phi0), std::sin(theta0) * std::sin(phi0), std::cos(theta0));
            double tau = uni(0.1, 0.5);
            double qc = fam == 5 ? uni(0.1, 2.0) : 0.0;
            P.model = sph;
            P.u = [sph, x0, tau, qc](const Vec3& x, double t) {
                return std::exp(-qc * t) * spectral_kernel(sph, x, x0, t + tau);
            };
            if (qc > 0) P.q = [qc](const Vec3&, double) { return qc; };
            P.center = geodesic_offset(sph, Vec3::UnitZ(), uni(0, kPi), uni(0, 2 * kPi));
            P.params.R = uni(0.2, 1.0);
            c.family = fam == 3 ? "sphere-heat" : "sphere-potential";
        } else {
            double shift = uni(0.0, 0.5);
            P.model = sph;
            P.u = [shift](const Vec3& x, double t) { return std::exp(-2 * t) * x.normalized().z() + shift; };
            P.params.R = kPi / 4 * uni(0.3, 1.0);
            double slack = kPi / 2 - 2 * P.params.R;
            P.center = geodesic_offset(sph, Vec3::UnitZ(), 0.9 * slack * U(rng), uni(0, 2 * kPi));
            c.family = "sphere-eigen";
        }
        P.inner_radius = P.params.R * uni(0.3, 1.0);
        out.push_back(std::move(c));
    }
    return out;
}

HarnackReport run_case(const HarnackCase& c) {
    const HarnackProblem& P = c.problem;
    if (c.chained)
        return harnack_chain_check(P.model, P.u, P.q, P.params, c.x, c.y, P.t1, P.t2, c.delta);
    return harnack_scan(P);
}

std::vector<HarnackProblem> harnack_calibration_set(unsigned seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
    const double alphas[] = {1.05, 1.2, 1.5, 2.0, 3.0, 5.0};
    std::vector<HarnackProblem> out;
    for (int i = 0; i < count; ++i) {
        HarnackProblem P;
        P.params.alpha = alphas[i % 6];
        if ((i / 6) % 2 == 0) {
            P.model = flat_torus();
            double kx = 1 + std::floor(3 * U(rng)), ky = 1 + std::floor(3 * U(rng));
            double lam = kx * kx + ky * ky;
            P.u = [kx, ky, lam](const Vec3& x, double t) {
                return std::exp(-lam * t) * std::sin(kx * x.x()) * std::sin(ky * x.y());
            };
            double hx = kPi / kx / 2, hy = kPi / ky / 2;
            P.params.R = std::min(hx, hy) / 2 * uni(0.3, 1.0);
            double slack = std::min(hx, hy) - 2 * P.params.R;
            P.center = Vec3(hx + 0.9 * slack * (U(rng) - 0.5), hy + 0.9 * slack * (U(rng) - 0.5), 0);
        } else {
            P.model = unit_sphere();
            P.u = [](const Vec3& x, double t) { return std::exp(-2 * t) * x.normalized().z(); };
            P.params.R = kPi / 4 * uni(0.3, 1.0);
            double slack = kPi / 2 - 2 * P.params.R;
            P.center = geodesic_offset(P.model, Vec3::UnitZ(), 0.9 * slack * U(rng), uni(0, 2 * kPi));
        }
        P.inner_radius = P.params.R;
        P.t1 = uni(0.02, 1.0);
        P.t2 = P.t1 + uni(0.01, 2.0);
        out.push_back(std::move(P));
    }
    return out;
}

}  // namespace mcf
