#include "mcflab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mcflab/decomposition.hpp"
#include "mcflab/error.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/harnack.hpp"
#include "mcflab/primitives.hpp"
#include "mcflab/sheets.hpp"
#include "mcflab/shrinker.hpp"
#include "mcflab/singular_kernel.hpp"
#include "mcflab/stability.hpp"

namespace mcf {

namespace {

const double kE = std::numbers::e;

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

// Appends "key=value" to a detail string.
void note(std::string& d, const std::string& key, double v) {
    if (!d.empty()) d += "; ";
    d += key + "=" + num(v);
}

void note(std::string& d, const std::string& key, const std::string& v) {
    if (!d.empty()) d += "; ";
    d += key + "=" + v;
}

const char* kNames[kCriteria] = {
    "sphere MCF law",     "type-I ratio",       "RMCF fixed point",     "Huisken monotonicity",
    "F and entropy oracles", "Gaussian density", "L-instability",       "cutoff capacity",
    "multiplicity",       "linearized equation", "graph geometry",      "heat kernel parametrix",
    "log profile",        "measure recovery",   "annulus integrals",    "Harnack",
    "doubling selector",  "determinism"};

CriterionResult begin(int id) {
    CriterionResult r;
    r.id = id;
    r.name = kNames[id - 1];
    return r;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// The radius-1 sphere run shared by criteria 1, 2 and 6.
struct SphereRun {
    FlowTrace trace;
    Extinction ext;
    double seconds = 0.0;
};

struct Context {
    std::uint64_t seed_harnack = 0;
    std::uint64_t seed_spikes = 0;
    std::optional<SphereRun> sphere;
    std::map<std::string, std::string> artifacts;

    const SphereRun& sphere_run() {
        if (!sphere) {
            FlowConfig c;
            c.dt = 2.5e-4;
            c.remesh = false;
            c.min_area = 4 * kPi * 0.05;
            RunOptions o;
            o.keep_every = 100;
            auto t0 = std::chrono::steady_clock::now();
            SphereRun s;
            s.trace = run_flow(icosphere(5), c, o);
            s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            s.ext = estimate_extinction(s.trace);
            artifacts["sphere_trace.csv"] = trace_csv(s.trace);
            sphere = std::move(s);
        }
        return *sphere;
    }
};

CriterionResult sphere_law(Context& ctx) {
    CriterionResult r = begin(1);
    const SphereRun& s = ctx.sphere_run();
    double T = s.ext.T, worst = 0.0;
    for (const FlowRecord& f : s.trace.records) {
        if (f.t > 0.9 * T) break;
        worst = std::max(worst, std::abs(f.area / (4 * kPi) + 4 * f.t - 1));
    }
    r.expected = 1.0;
    r.measured = 1.0 + worst;
    r.tolerance = 0.01;
    bool t_ok = rel(T, 0.25) <= 0.01, time_ok = s.seconds <= 60;
    r.pass = worst <= 0.01 && t_ok && time_ok;
    note(r.detail, "max|R^2+4t-1|", worst);
    note(r.detail, "T", T);
    note(r.detail, "nverts", s.trace.records.front().nverts);
    note(r.detail, "runtime<=60s", time_ok ? "yes" : "no");
    return r;
}

CriterionResult type_one(Context& ctx) {
    CriterionResult r = begin(2);
    const SphereRun& s = ctx.sphere_run();
    double worst = 0.0;
    for (const FlowRecord& f : s.trace.records) {
        if (f.t > 0.9 * s.ext.T) break;
        worst = std::max(worst, std::abs(f.typeI - 1));
    }
    r.expected = 1.0;
    r.measured = 1.0 + worst;
    r.tolerance = 0.05;
    r.pass = worst <= 0.05;
    note(r.detail, "max|ratio-1|", worst);
    note(r.detail, "Lambda", s.ext.Lambda);
    return r;
}

CriterionResult rmcf_fixed_point(Context&) {
    CriterionResult r = begin(3);
    TriMesh s = icosphere(4, 2.0);
    const double tol = shrinker_residual(s, compute_geometry(s)).sup;
    FlowConfig c;
    c.mode = FlowMode::RMCF;
    c.scheme = Scheme::Explicit;
    c.dt_policy = DtPolicy::Cfl;
    c.remesh = false;
    FlowStepper st(s, c);
    const double F0 = f_functional(s);
    double speed = 0.0, drift = 0.0;
    while (st.time() < 1.0 - 1e-12) {
        StepInfo info = st.step(1.0 - st.time());
        speed = std::max(speed, info.max_displacement / info.dt);
        drift = std::max(drift, rel(f_functional(st.mesh()), F0));
    }
    r.expected = 0.0;
    r.measured = speed;
    r.tolerance = 3 * tol;
    r.pass = speed <= 3 * tol && drift <= 1e-4;
    note(r.detail, "curvature_tol", tol);
    note(r.detail, "max|dF|/F", drift);
    note(r.detail, "steps", static_cast<double>(st.steps()));
    return r;
}

// (4 pi)^{-1} sum_v e^{-|x|^2/4} (H - <x,n>/2)^2 A_v.
double dissipation(const TriMesh& m) {
    MeshGeometry g = compute_geometry(m);
    Residual res = shrinker_residual(m, g);
    double s = 0.0;
    for (int v = 0; v < m.num_vertices(); ++v)
        s += std::exp(-m.position(v).squaredNorm() / 4) * sqr(res.field[v]) * g.area(v);
    return s / (4 * kPi);
}

CriterionResult huisken(Context&) {
    CriterionResult r = begin(4);
    TriMesh start = transformed(icosphere(3, 2.0), [](const Vec3& p) {
        Vec3 u = p.normalized();
        return Vec3(p * (1 + 0.15 * (u.x() * u.y() + 0.5 * u.z() * u.z() * u.z())));
    });
    FlowConfig c;
    c.mode = FlowMode::RMCF;
    c.dt = 2e-3;
    c.remesh = false;
    FlowStepper st(start, c);
    double F0 = f_functional(start), D0 = dissipation(start);
    double worst = 0.0, rise = 0.0;
    int compared = 0, steps = 200;
    for (int i = 0; i < steps; ++i) {
        StepInfo info = st.step();
        double F1 = f_functional(st.mesh()), D1 = dissipation(st.mesh());
        rise = std::max(rise, F1 - F0);
        double l2 = shrinker_residual(st.mesh(), compute_geometry(st.mesh())).l2;
        if (l2 > 0.05) {
            worst = std::max(worst, rel((F1 - F0) / info.dt, -(D0 + D1) / 2));
            ++compared;
        }
        F0 = F1;
        D0 = D1;
    }
    r.expected = 0.0;
    r.measured = worst;
    r.tolerance = 0.05;
    r.pass = rise <= 0.0 && compared > 0 && worst <= 0.05;
    note(r.detail, "max F increase", rise);
    note(r.detail, "steps compared", compared);
    return r;
}

CriterionResult f_entropy(Context&) {
    CriterionResult r = begin(5);
    double fp = f_functional(plane_patch(8.0, 64));
    double fs = f_functional(icosphere(5, 2.0));
    EntropyResult e = entropy_estimate(icosphere(4, 2.0, Vec3(5, 0, 0)));
    bool tracks = true;
    for (int k = 0; k < 3; ++k)
        tracks = tracks && std::abs(e.x0[k] - (k == 0 ? 5.0 : 0.0)) <= e.cell[k] + 1e-12;
    double err = std::max(rel(fp, 1.0), rel(fs, 4 / kE));
    r.expected = 0.0;
    r.measured = err;
    r.tolerance = 0.005;
    r.pass = err <= 0.005 && tracks;
    note(r.detail, "F(plane)", fp);
    note(r.detail, "F(sphere)", fs);
    note(r.detail, "argmax x", e.x0.x());
    note(r.detail, "cell", e.cell.x());
    return r;
}

CriterionResult density(Context& ctx) {
    CriterionResult r = begin(6);
    const SphereRun& s = ctx.sphere_run();
    std::vector<Checkpoint> kept;
    for (const Checkpoint& cp : s.trace.checkpoints)
        if (cp.t <= 0.9 * s.ext.T) kept.push_back(cp);
    DensityCurve c = gaussian_density(kept, Vec3::Zero(), s.ext.T);
    r.expected = 4 / kE;
    r.measured = c.limit;
    r.tolerance = 0.02 * 4 / kE;
    r.pass = std::abs(c.limit - 4 / kE) <= r.tolerance;
    note(r.detail, "checkpoints", static_cast<double>(kept.size()));
    note(r.detail, "monotone", c.monotone ? "yes" : "no");
    return r;
}

CriterionResult instability(Context&) {
    CriterionResult r = begin(7);
    TriMesh s = icosphere(4, 2.0);
    MeshGeometry gs = compute_geometry(s);
    double q1 = quadratic_form(s, gs, std::vector<double>(s.num_vertices(), 1.0), 10.0);
    double oracle = -16 * kPi / kE;
    double ws = instability_witness(s, gs, 10.0).Q;
    TriMesh cap = capsule(std::sqrt(2.0), 6.0, 48, 96, 8);
    double wc = instability_witness(cap, compute_geometry(cap), 8.0).Q;
    TriMesh p = plane_patch(10.0, 80);
    double wp = instability_witness(p, compute_geometry(p, {false}), 8.0).Q;
    r.expected = oracle;
    r.measured = q1;
    r.tolerance = 0.01 * std::abs(oracle);
    r.pass = std::abs(q1 - oracle) <= r.tolerance && ws < 0 && wc < 0 && wp < 0;
    note(r.detail, "Q sphere", ws);
    note(r.detail, "Q capsule", wc);
    note(r.detail, "Q plane", wp);
    return r;
}

CriterionResult cutoff_capacity(Context&) {
    CriterionResult r = begin(8);
    auto t0 = std::chrono::steady_clock::now();
    double e3 = radial_cutoff_energy(1e-3, 0.1), e9 = radial_cutoff_energy(1e-9, 0.1);
    double last = 0.0;
    for (double rho : {1e-1, 1e-2, 1e-3}) {
        last = radial_cutoff_energy(rho * rho * rho, rho);
        note(r.detail, "E(rho^3," + num(rho) + ")", last);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.expected = 3.0;
    r.measured = e3 / e9;
    r.tolerance = 0.0;
    r.pass = e3 / e9 >= 3.0 && last < 0.05 && secs <= 10;
    note(r.detail, "runtime<=10s", secs <= 10 ? "yes" : "no");
    return r;
}

CriterionResult multiplicity(Context&) {
    CriterionResult r = begin(9);
    const double gap = 1e-3;
    auto two = [gap](int n) {
        return merge({plane_patch(2.0, n, -gap / 2), plane_patch(2.0, n, gap / 2)});
    };
    const std::vector<double> radii{0.5, 0.2, 0.1};
    Multiplicity d = multiplicity_at({two(16)}, Vec3::Zero(), radii);
    Multiplicity s = multiplicity_at({plane_patch(2.0, 16)}, Vec3(0.1, -0.2, 0), radii);
    int coarse = multiplicity_at({two(8)}, Vec3::Zero(), radii).m;
    int fine = multiplicity_at({two(8), two(16)}, Vec3::Zero(), radii).m;
    double dev = std::max(std::abs(d.theta[1] - 2), std::abs(d.theta[2] - 2));
    r.expected = 2.0;
    r.measured = 2.0 + dev;
    r.tolerance = 0.05;
    r.pass = d.m == 2 && dev <= 0.05 && s.m == 1 && coarse == fine;
    note(r.detail, "m double", d.m);
    note(r.detail, "m single", s.m);
    note(r.detail, "m coarse/fine", num(coarse) + "/" + num(fine));
    return r;
}

double plane_graph_ratio(double eps) {
    const double half = 2.0, dt = 1e-3;
    const int n = 40, steps = 20;
    auto plus = rmcf_plane_graph(half, n, [eps](double x, double y) {
        return eps * (1 + 0.5 * (x * x - 2) + 0.3 * x * y);
    }, dt, steps);
    auto minus = rmcf_plane_graph(half, n, [eps](double x, double) {
        return -eps * (0.5 + 0.2 * x);
    }, dt, steps);
    TriMesh ref = plane_patch(half, n);
    std::vector<char> mask(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v)
        mask[v] = std::abs(ref.position(v).x()) <= 1.5 && std::abs(ref.position(v).y()) <= 1.5;
    return linearized_residual(ref, compute_geometry(ref), plus, minus, dt, &mask).ratio;
}

CriterionResult linearized(Context&) {
    CriterionResult r = begin(10);
    double r2 = plane_graph_ratio(1e-2), r3 = plane_graph_ratio(1e-3);
    const double eps = 1e-3, dt = 1e-3;
    auto plus = rmcf_plane_graph(1.0, 10, [eps](double, double) { return eps; }, dt, 10);
    std::vector<std::vector<double>> zero(plus.size(), std::vector<double>(plus[0].size(), 0.0));
    TriMesh ref = plane_patch(1.0, 10);
    double exact = linearized_residual(ref, compute_geometry(ref), plus, zero, dt).ratio;
    r.expected = 5.0;
    r.measured = r2 / r3;
    r.tolerance = 0.0;
    r.pass = r2 / r3 >= 5.0 && exact <= 1e-3;
    note(r.detail, "ratio(1e-2)", r2);
    note(r.detail, "ratio(1e-3)", r3);
    note(r.detail, "exact mode", exact);
    return r;
}

CriterionResult graph_geometry(Context&) {
    CriterionResult r = begin(11);
    TriMesh ref = icosphere(4, 2.0);
    MeshGeometry g = compute_geometry(ref);
    double worst = 0.0, tol = 0.0;
    for (int v = 0; v < ref.num_vertices(); ++v) tol = std::max(tol, std::abs(g.H(v) - 1.0));
    for (double s : {0.1, 0.2}) {
        std::vector<double> u(ref.num_vertices(), s);
        auto H = mean_curvature_of_graph(ref, g, u, field_derivatives(ref, g, u));
        for (double h : H) worst = std::max(worst, rel(h, 2 / (2 + s)));
    }
    std::vector<double> u0(ref.num_vertices(), 0.0);
    auto H0 = mean_curvature_of_graph(ref, g, u0, field_derivatives(ref, g, u0));
    double zero = 0.0;
    for (int v = 0; v < ref.num_vertices(); ++v) zero = std::max(zero, std::abs(H0[v] - g.H(v)));
    r.expected = 0.0;
    r.measured = worst;
    r.tolerance = 0.03;
    r.pass = worst <= 0.03 && zero <= 2 * tol;
    note(r.detail, "u=0 max|dH|", zero);
    note(r.detail, "mesh H tol", tol);
    return r;
}

double parametrix_sup_error(const HeatKernelModel& m, double t) {
    double e = 0.0;
    for (int i = 0; i <= 50; ++i) {
        double d = 0.5 * i / 50;
        Vec3 y(std::sin(d), 0.0, std::cos(d));
        double p = spectral_kernel(m, Vec3::UnitZ(), y, t);
        e = std::max(e, std::abs(p - parametrix_eval(m, Vec3::UnitZ(), y, t, 1).value));
    }
    return e;
}

CriterionResult parametrix(Context&) {
    CriterionResult r = begin(12);
    auto t0 = std::chrono::steady_clock::now();
    HeatKernelModel m;
    m.surface = SurfaceKind::Sphere;
    double e1 = parametrix_sup_error(m, 0.04), e2 = parametrix_sup_error(m, 0.02),
           e3 = parametrix_sup_error(m, 0.01);
    double u0 = 0.0;
    for (int i = 1; i <= 50; ++i) {
        double d = 0.5 * i / 50;
        Vec3 y(std::sin(d), 0.0, std::cos(d));
        u0 = std::max(u0, std::abs(parametrix_eval(m, Vec3::UnitZ(), y, 0.01, 1).u0 -
                                   std::sqrt(d / std::sin(d))));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double q1 = e2 / e1, q2 = e3 / e2;
    // Distance of the worse ratio from the centre of [0.35, 0.7].
    r.expected = 0.525;
    r.measured = std::abs(q1 - 0.525) > std::abs(q2 - 0.525) ? q1 : q2;
    r.tolerance = 0.175;
    r.pass = q1 >= 0.35 && q1 <= 0.7 && q2 >= 0.35 && q2 <= 0.7 && u0 <= 1e-10 && secs <= 30;
    note(r.detail, "e(0.02)/e(0.04)", q1);
    note(r.detail, "e(0.01)/e(0.02)", q2);
    note(r.detail, "max|u0-closed form|", u0);
    note(r.detail, "runtime<=30s", secs <= 30 ? "yes" : "no");
    return r;
}

CriterionResult log_profile(Context&) {
    CriterionResult r = begin(13);
    HeatKernelModel m;
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto nu = MeasureSamples::lebesgue(0, 1);
    auto ratio = [&](double rr) {
        return singular_potential_U(m, c, nu, Vec3(rr, 0, 0), 1, 0) * 2 * kPi / std::log(1 / rr);
    };
    double at = ratio(1e-3);
    double h[3], y[3], rs[3] = {1e-4, 1e-8, 1e-16};
    for (int i = 0; i < 3; ++i) {
        h[i] = 1 / std::log(1 / rs[i]);
        y[i] = ratio(rs[i]);
    }
    r.expected = 1.0;
    r.measured = at;
    r.tolerance = 0.03;
    r.pass = std::abs(at - 1) <= 0.03;
    note(r.detail, "extrapolated r->0", extrapolate_to_zero(h, y));
    return r;
}

CutOptions recovery_options() {
    CutOptions o;
    o.angles = 4;
    return o;
}

CriterionResult recovery(Context&) {
    CriterionResult r = begin(14);
    HeatKernelModel m;
    const std::vector<double> rhos{1e-3, 1e-6, 1e-12};
    auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
    auto nu = MeasureSamples::lebesgue(0, 1);
    BackwardV v = backward_v(m, c, 0.2, 0.8, 0.75);
    SpaceTimeField U = [&](const Vec3& x, double t) { return singular_potential_U(m, c, nu, x, t, 0); };
    SpaceTimeField smooth = [](const Vec3& x, double t) { return 1.0 + t + 0.5 * x.squaredNorm(); };
    // psi = 1 on [0.35, 0.65] with tapers of width 0.1: int psi dnu = 0.4.
    TestFunction psi = tapered_indicator(0.35, 0.65, 0.1);
    Recovery leb = measure_recovery({v}, U, rhos, psi, recovery_options());
    Recovery sm = measure_recovery({v}, smooth, rhos, psi, recovery_options());

    std::vector<double> ts{0, 0.5, 1};
    SingularCurve c1(m, ts, {Vec3(0.25, 0, 0), Vec3::Zero(), Vec3::Zero()}, 0.5);
    SingularCurve c2(m, ts, {Vec3(-0.25, 0, 0), Vec3::Zero(), Vec3::Zero()}, 0.5);
    SpaceTimeField pair = [&](const Vec3& x, double t) {
        return singular_potential_U(m, c1, nu, x, t, 0) + singular_potential_U(m, c2, nu, x, t, 0);
    };
    BackwardV v1 = backward_v(m, c1, 0.2, 0.8, 0.75), v2 = backward_v(m, c2, 0.2, 0.8, 0.75);
    TestFunction mid = tapered_indicator(0.45, 0.55, 0.05);
    Recovery mu1 = measure_recovery({v1}, pair, rhos, mid, recovery_options());
    Recovery mu = measure_recovery({v1, v2}, pair, rhos, mid, recovery_options());
    Domination dom = domination_check({mu.value}, {{mu1.value}}, 0.75);

    r.expected = 0.4;
    r.measured = leb.value;
    r.tolerance = 0.05 * 0.4;
    r.pass = std::abs(leb.value - 0.4) <= r.tolerance && std::abs(sm.value) <= 1e-6 && dom.holds;
    note(r.detail, "smooth", sm.value);
    note(r.detail, "mu_1", mu1.value);
    note(r.detail, "mu", mu.value);
    note(r.detail, "domination margin", dom.margins[0][0]);
    return r;
}

CriterionResult annulus(Context&) {
    CriterionResult r = begin(15);
    HeatKernelModel m;
    SingularCurve c(m, {0, 1}, {Vec3::Zero(), Vec3(0.2, 0.1, 0)}, 1.0);
    SpaceTimeField phi = [&](const Vec3& x, double t) {
        return std::log(1 / (x - c.position(t)).norm()) / (2 * kPi);
    };
    AnnulusTrend tr = annulus_trend(m, c, phi, {1e-2, 1e-3, 1e-4}, 0.1, 0.3, 0.7);
    double q = tr.J1.back() / tr.J1.front();
    r.expected = 0.25;
    r.measured = q;
    r.tolerance = 0.0;
    r.pass = q <= 0.25 && tr.J2_bounded;
    for (std::size_t i = 0; i < tr.delta.size(); ++i) note(r.detail, "J2(" + num(tr.delta[i]) + ")", tr.J2[i]);
    note(r.detail, "J2 bounded", tr.J2_bounded ? "yes" : "no");
    return r;
}

CriterionResult harnack(Context& ctx) {
    CriterionResult r = begin(16);
    auto suite = harnack_suite(static_cast<unsigned>(ctx.seed_harnack), 70);
    int violations = 0, chained = 0;
    double worst = 0.0;
    std::string csv = "family,chained,quotient,bound,worst_pair_ratio,pass\n";
    for (const auto& c : suite) {
        HarnackReport h = run_case(c);
        violations += !h.pass;
        chained += c.chained;
        worst = std::max(worst, h.worst_pair_ratio);
        csv += c.family + "," + (c.chained ? "1" : "0") + "," + num(h.quotient) + "," + num(h.bound) +
               "," + num(h.worst_pair_ratio) + "," + (h.pass ? "1" : "0") + "\n";
    }
    ctx.artifacts["harnack_suite.csv"] = csv;

    KSChain k = ks_chain(Vec3(1, 0, 0), Vec3::Zero(), 1, 2, 1, 0.5);
    bool chain_ok = k.N == 9 && ks_chain_valid(k, 1);
    std::mt19937_64 rng(ctx.seed_harnack + 1);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 200; ++i) {
        double s = 0.05 + U(rng), t = s + 0.01 + 2 * U(rng), delta = 0.05 + U(rng);
        Vec3 y(U(rng), U(rng), 0), x = y + 2 * Vec3(U(rng) - 0.5, U(rng) - 0.5, 0);
        double l = (x - y).norm() * (1 + U(rng));
        KSChain c = ks_chain(x, y, s, t, l, delta);
        double need = std::max(2 * (t - s) / s, l / std::min(std::sqrt(s) / 4, delta / 4));
        chain_ok = chain_ok && c.N > need && c.N - 1 <= need && ks_chain_valid(c, s);
    }
    r.expected = 0.0;
    r.measured = violations;
    r.tolerance = 0.0;
    r.pass = violations == 0 && suite.size() >= 50 && chain_ok;
    note(r.detail, "cases", static_cast<double>(suite.size()));
    note(r.detail, "chained", chained);
    note(r.detail, "worst pair ratio", worst);
    note(r.detail, "C", kLiYauC);
    note(r.detail, "ks_chain N(1,0.5,1,2)", k.N);
    note(r.detail, "chain constraints", chain_ok ? "exact" : "violated");
    return r;
}

CriterionResult doubling(Context& ctx) {
    CriterionResult r = begin(17);
    std::mt19937_64 rng(ctx.seed_spikes);
    std::uniform_real_distribution<double> u(0, 1);
    int violations = 0, selected = 0;
    for (int trial = 0; trial < 30; ++trial) {
        TimeSeries f;
        for (int i = 0; i <= 4000; ++i) {
            double t = 0.01 * i;
            double v = std::exp(-t / 8) * (1 + 0.2 * u(rng));
            if (u(rng) < 0.01) v *= 2 + 4 * u(rng);
            f.t.push_back(t);
            f.value.push_back(v);
        }
        const double l = 0.5 + u(rng);
        Selection s = select_times(f, 0.3, l, 6);
        if (s.times.empty()) ++violations;
        for (std::size_t a = 0; a < s.times.size(); ++a) {
            int i = s.indices[a];
            ++selected;
            for (std::size_t j = i; j < f.t.size() && f.t[j] <= f.t[i] + l; ++j)
                violations += f.value[j] > 2 * f.value[i];
            if (a > 0 && !(s.times[a] > s.times[a - 1] + l)) ++violations;
        }
    }
    r.expected = 0.0;
    r.measured = violations;
    r.tolerance = 0.0;
    r.pass = violations == 0;
    note(r.detail, "times checked", selected);
    return r;
}

using Criterion = std::function<CriterionResult(Context&)>;

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        sphere_law, type_one,      rmcf_fixed_point, huisken,         f_entropy,  density,
        instability, cutoff_capacity, multiplicity,  linearized,      graph_geometry, parametrix,
        log_profile, recovery,     annulus,          harnack,         doubling};
    return all;
}


std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
}

}  // namespace

AcceptanceRun run_acceptance(const AcceptanceOptions& opts) {
    Context ctx;
    std::mt19937_64 rng(opts.seed);
    ctx.seed_harnack = rng() % 1000000007;
    ctx.seed_spikes = rng();
    AcceptanceRun run;
    const auto& all = criteria();
    for (int id = 1; id <= static_cast<int>(all.size()); ++id) {
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end())
            continue;
        auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = all[id - 1](ctx);
        } catch (const std::exception& e) {
            r = begin(id);
            r.measured = std::numeric_limits<double>::quiet_NaN();
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.results.push_back(r);
    }
    run.artifacts = std::move(ctx.artifacts);
    return run;
}

std::string acceptance_csv(const std::vector<CriterionResult>& results) {
    std::string out = "id,expected,measured,tolerance,pass\n";
    for (const auto& r : results)
        out += std::to_string(r.id) + "," + num(r.expected) + "," + num(r.measured) + "," +
               num(r.tolerance) + "," + (r.pass ? "1" : "0") + "\n";
    return out;
}

std::string acceptance_json(const std::vector<CriterionResult>& results, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["results"] = nlohmann::ordered_json::array();
    int passed = 0;
    for (const auto& r : results) {
        nlohmann::ordered_json e;
        e["id"] = r.id;
        e["name"] = r.name;
        // Strings keep the on-disk digits identical to the CSV.
        e["expected"] = num(r.expected);
        e["measured"] = num(r.measured);
        e["tolerance"] = num(r.tolerance);
        e["pass"] = r.pass;
        e["detail"] = r.detail;
        j["results"].push_back(e);
        passed += r.pass;
    }
    j["passed"] = passed;
    j["failed"] = static_cast<int>(results.size()) - passed;
    return j.dump(2) + "\n";
}

std::string acceptance_table(const std::vector<CriterionResult>& results) {
    std::string out;
    char buf[512];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "[%s] %2d %-24s measured %-14s expected %-12s tol %-10s %7.1fs  %s\n",
                      r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), num(r.measured).c_str(),
                      num(r.expected).c_str(), num(r.tolerance).c_str(), r.seconds, r.detail.c_str());
        out += buf;
    }
    return out;
}

std::vector<std::filesystem::path> write_acceptance(const AcceptanceRun& run, std::uint64_t seed,
                                                    const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths{dir / "acceptance.csv", dir / "acceptance.json"};
    write_file(paths[0], acceptance_csv(run.results));
    write_file(paths[1], acceptance_json(run.results, seed));
    for (const auto& [name, text] : run.artifacts) {
        paths.push_back(dir / name);
        write_file(paths.back(), text);
    }
    return paths;
}

VerifyAll verify_all(const AcceptanceOptions& opts, const std::filesystem::path& dir,
                     bool determinism) {
    VerifyAll v;
    v.run = run_acceptance(opts);
    v.outputs = write_acceptance(v.run, opts.seed, dir);
    if (determinism) {
        auto t0 = std::chrono::steady_clock::now();
        CriterionResult r = begin(18);
        AcceptanceRun again = run_acceptance(opts);
        auto second = write_acceptance(again, opts.seed, dir / "rerun");
        int differing = 0;
        std::string which;
        if (second.size() != v.outputs.size()) ++differing;
        for (std::size_t i = 0; i < std::min(second.size(), v.outputs.size()); ++i) {
            if (read_file(v.outputs[i]) != read_file(second[i])) {
                ++differing;
                which += (which.empty() ? "" : " ") + v.outputs[i].filename().string();
            }
        }
        r.expected = 0.0;
        r.measured = differing;
        r.tolerance = 0.0;
        r.pass = differing == 0;
        note(r.detail, "files compared", static_cast<double>(second.size()));
        if (!which.empty()) note(r.detail, "differing", which);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        v.run.results.push_back(r);
        v.outputs = write_acceptance(v.run, opts.seed, dir);
        for (const auto& p : second) v.outputs.push_back(p);
    }
    v.all_pass = !v.run.results.empty() &&
                 std::all_of(v.run.results.begin(), v.run.results.end(),
                             [](const CriterionResult& r) { return r.pass; });
    return v;
}

}  // namespace mcf
