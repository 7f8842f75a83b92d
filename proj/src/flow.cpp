#include "mcflab/flow.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/IterativeLinearSolvers>

#include "mcflab/mesh_io.hpp"

namespace mcf {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

FlowStepper::FlowStepper(TriMesh mesh, FlowConfig cfg, double t0)
    : mesh_(std::move(mesh)), cfg_(std::move(cfg)), t_(t0) {
    cfg_.validate();
    h0_ = mesh_.mean_edge_length();
    require(h0_ > 0, ErrorCode::InvalidArgument, "mesh has no edges");
}

double FlowStepper::next_dt() const {
    if (cfg_.dt_policy == DtPolicy::Fixed) return cfg_.dt;
    double h = edge_length_range(mesh_).min;
    return cfg_.cfl * h * h / 4;
}

StepInfo FlowStepper::step(double dt_cap) {
    StepInfo info;
    GeometryOptions go;
    go.shape_operator = false;
    MeshGeometry g = compute_geometry(mesh_, go);
    const int nv = mesh_.num_vertices();
    const double hmin = edge_length_range(mesh_).min;
    double dt = std::min(next_dt(), dt_cap);
    require(dt > 0, ErrorCode::InvalidArgument, "step size must be positive");
    if (cfg_.scheme == Scheme::Explicit && dt > cfg_.cfl * hmin * hmin / 4 * (1 + 1e-12)) {
        fail(ErrorCode::CflViolation, "explicit step dt=" + std::to_string(dt) +
                                          " exceeds c*h_min^2/4=" +
                                          std::to_string(cfg_.cfl * hmin * hmin / 4));
    }
    const double react = cfg_.mode == FlowMode::RMCF ? 0.5 : 0.0;

    std::vector<Vec3> disp(nv, Vec3::Zero());
    if (cfg_.scheme == Scheme::Explicit) {
        for (int v = 0; v < nv; ++v) {
            if (!g.interior[v]) continue;
            const Vec3& n = g.normal(v);
            disp[v] = -dt * (g.H(v) - react * mesh_.position(v).dot(n)) * n;
        }
    } else {
        Eigen::SparseMatrix<double> L = cotan_laplacian(mesh_, g.edge_weight);
        Eigen::SparseMatrix<double> A = -dt * L;
        Eigen::MatrixX3d rhs(nv, 3), guess(nv, 3);
        for (int v = 0; v < nv; ++v) {
            A.coeffRef(v, v) += g.area(v);
            rhs.row(v) = g.area(v) * mesh_.position(v).transpose();
            guess.row(v) = (warm_.size() == static_cast<std::size_t>(nv) ? warm_[v] : mesh_.position(v))
                               .transpose();
        }
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(cfg_.solver_tol);
        cg.setMaxIterations(cfg_.solver_max_iter);
        cg.compute(A);
        Eigen::MatrixX3d x = cg.solveWithGuess(rhs, guess);
        info.solver_iterations = static_cast<int>(cg.iterations());
        if (cg.info() != Eigen::Success && !(cg.error() <= 1e3 * cfg_.solver_tol))
            fail(ErrorCode::SolverFailure, "CG did not converge, relative residual " +
                                               std::to_string(cg.error()));
        for (int v = 0; v < nv; ++v) {
            if (!g.interior[v]) continue;
            const Vec3& n = g.normal(v);
            Vec3 d = x.row(v).transpose() - mesh_.position(v);
            disp[v] = (d.dot(n) + dt * react * mesh_.position(v).dot(n)) * n;
        }
    }

    std::vector<Vec3> p = mesh_.positions();
    for (int v = 0; v < nv; ++v) {
        p[v] += disp[v];
        info.max_displacement = std::max(info.max_displacement, disp[v].norm());
    }
    mesh_.set_positions(std::move(p));
    warm_.clear();
    t_ += dt;
    ++steps_;

    if (cfg_.selfcheck_every > 0 && steps_ % cfg_.selfcheck_every == 0) {
        info.self_intersections = count_self_intersections(mesh_, 1 << 20);
        if (info.self_intersections > 0 && cfg_.selfcheck_error)
            fail(ErrorCode::SelfIntersection,
                 std::to_string(info.self_intersections) + " intersecting face pairs at t=" +
                     std::to_string(t_));
    }
    if (cfg_.remesh) {
        RemeshOptions ro;
        ro.target = h0_;
        ro.min_ratio = cfg_.remesh_min;
        ro.max_ratio = cfg_.remesh_max;
        if (needs_remesh(mesh_, ro)) {
            mesh_ = remesh(mesh_, ro, &info.remesh);
            info.remeshed = true;
        }
    }
    info.t = t_;
    info.dt = dt;
    info.area = mesh_.total_area();
    info.nverts = mesh_.num_vertices();
    return info;
}

std::pair<TriMesh, StepInfo> step_flow(const TriMesh& mesh, const FlowConfig& cfg, double t) {
    FlowStepper s(mesh, cfg, t);
    StepInfo info = s.step();
    return {s.mesh(), info};
}

FlowRecord measure(const TriMesh& mesh, double t, FlowMode mode, std::optional<double> T_hat) {
    FlowRecord r;
    MeshGeometry g = compute_geometry(mesh);
    r.t = t;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (!g.interior[v]) continue;
        r.maxH = std::max(r.maxH, std::abs(g.H(v)));
        r.maxA = std::max(r.maxA, std::sqrt(g.A2(v)));
    }
    r.area = mesh.total_area();
    r.F = f_functional(mesh);
    r.nverts = mesh.num_vertices();
    const bool have_T = T_hat && *T_hat > t;
    r.typeI = have_T ? std::sqrt(*T_hat - t) * r.maxH : kNaN;
    if (mode == FlowMode::RMCF) {
        Residual res = shrinker_residual(mesh, g);
        r.resL2 = res.l2;
        r.resSup = res.sup;
    } else if (have_T) {
        Residual res = shrinker_residual(mesh, g, *T_hat - t);
        r.resL2 = res.l2;
        r.resSup = res.sup;
    } else {
        r.resL2 = r.resSup = kNaN;
    }
    return r;
}

FlowTrace run_flow(const TriMesh& mesh, const FlowConfig& cfg, const RunOptions& opts,
                   TriMesh* final_mesh) {
    FlowStepper s(mesh, cfg);
    FlowTrace trace;
    auto running_T = [&]() -> std::optional<double> {
        if (cfg.mode != FlowMode::MCF || trace.records.size() < 10) return std::nullopt;
        try {
            return estimate_extinction(trace, cfg.fit_fraction).T;
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    auto keep = [&](long step) {
        if (opts.keep_every > 0 && step % opts.keep_every == 0)
            trace.checkpoints.push_back({s.time(), s.mesh()});
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof name, "step_%08ld.obj", step);
            std::filesystem::create_directories(cfg.checkpoint_dir);
            save_obj(s.mesh(), std::filesystem::path(cfg.checkpoint_dir) / name);
        }
    };
    trace.records.push_back(measure(s.mesh(), 0.0, cfg.mode, std::nullopt));
    keep(0);
    double F_prev = trace.records.back().F;
    for (;;) {
        if (s.time() >= cfg.max_time * (1 - 1e-12)) {
            trace.termination = "max_time";
            break;
        }
        if (s.steps() >= cfg.max_steps) {
            trace.termination = "max_steps";
            break;
        }
        StepInfo info = s.step(cfg.max_time - s.time());
        if (info.remeshed) {
            ++trace.remesh_events;
            trace.worst_remesh_area_change =
                std::max(trace.worst_remesh_area_change,
                         std::abs(info.remesh.area_after / info.remesh.area_before - 1));
        }
        if (info.self_intersections > 0) ++trace.self_intersection_events;
        if (cfg.mode == FlowMode::RMCF) {
            double F = f_functional(s.mesh());
            if (F > F_prev * (1 + 1e-6)) ++trace.monotonicity_violations;
            F_prev = F;
        }
        keep(s.steps());
        bool small = info.area <= cfg.min_area;
        if (s.steps() % cfg.trace_every == 0 || small) {
            trace.records.push_back(measure(s.mesh(), s.time(), cfg.mode, running_T()));
            if (trace.records.back().maxA > cfg.max_A) {
                trace.termination = "max_A";
                break;
            }
        }
        if (small) {
            trace.termination = "min_area";
            break;
        }
    }
    trace.steps = s.steps();
    // Backfill the type-I ratio and residuals with the final extinction estimate.
    if (auto T = running_T()) {
        for (FlowRecord& r : trace.records) r.typeI = *T > r.t ? std::sqrt(*T - r.t) * r.maxH : kNaN;
    }
    if (final_mesh) *final_mesh = s.mesh();
    return trace;
}

std::string trace_csv(const FlowTrace& trace) {
    std::string out = "t,maxH,maxA,area,F,typeI,resL2,resSup,nverts\n";
    char buf[512];
    for (const FlowRecord& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", r.t,
                      r.maxH, r.maxA, r.area, r.F, r.typeI, r.resL2, r.resSup, r.nverts);
        out += buf;
    }
    return out;
}

Extinction estimate_extinction(const std::vector<double>& t, const std::vector<double>& maxH,
                               double fraction) {
    require(t.size() == maxH.size(), ErrorCode::InvalidArgument, "trace length mismatch");
    const std::size_t n = t.size();
    if (n < 10) fail(ErrorCode::NoBlowup, "no blowup detected: fewer than 10 samples");
    std::size_t m = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(fraction * n)));
    m = std::min(m, n);
    const std::size_t b = n - m;
    for (std::size_t i = b + 1; i < n; ++i) {
        if (!(maxH[i] > maxH[i - 1]))
            fail(ErrorCode::NoBlowup, "no blowup detected: max|H| not increasing at t=" +
                                          std::to_string(t[i]));
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = b; i < n; ++i) {
        double y = 1.0 / (maxH[i] * maxH[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    const double k = static_cast<double>(m);
    const double den = k * stt - st * st;
    const double slope = (k * sty - st * sy) / den;
    const double icpt = (sy - slope * st) / k;
    if (!(slope < 0)) fail(ErrorCode::NoBlowup, "no blowup detected: 1/max|H|^2 not decreasing");
    Extinction e;
    e.T = -icpt / slope;
    e.Lambda = 1.0 / std::sqrt(-slope);
    e.samples = static_cast<int>(m);
    double ss = 0, lo = 1e300, hi = -1e300;
    for (std::size_t i = b; i < n; ++i) {
        double y = 1.0 / (maxH[i] * maxH[i]);
        ss += sqr(y - (icpt + slope * t[i]));
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    e.residual = std::sqrt(ss / k) / std::max(hi - lo, 1e-300);
    return e;
}

Extinction estimate_extinction(const FlowTrace& trace, double fraction) {
    std::vector<double> t, h;
    for (const FlowRecord& r : trace.records) {
        t.push_back(r.t);
        h.push_back(r.maxH);
    }
    return estimate_extinction(t, h, fraction);
}

TriMesh tangent_rescale(const TriMesh& mesh, const Vec3& x0, double c) {
    require(c > 0, ErrorCode::InvalidArgument, "rescale factor must be positive");
    TriMesh out = mesh;
    std::vector<Vec3> p = mesh.positions();
    for (Vec3& x : p) x = c * (x - x0);
    out.set_positions(std::move(p));
    return out;
}

TriMesh tangent_unscale(const TriMesh& mesh, const Vec3& x0, double c) {
    require(c > 0, ErrorCode::InvalidArgument, "rescale factor must be positive");
    TriMesh out = mesh;
    std::vector<Vec3> p = mesh.positions();
    for (Vec3& x : p) x = x / c + x0;
    out.set_positions(std::move(p));
    return out;
}

Reparam time_reparametrize(double t, TimeDirection dir, double t_ref) {
    if (dir == TimeDirection::McfToRmcf) {
        double s = -std::expm1(-(t - t_ref));
        return {s, std::sqrt(1 - s)};
    }
    if (!(t < 1)) fail(ErrorCode::InvalidArgument, "s must be below 1");
    return {t_ref - std::log1p(-t), 1.0 / std::sqrt(1 - t)};
}

}  // namespace mcf
