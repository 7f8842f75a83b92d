#include "mcflab/shrinker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcflab/mesh_query.hpp"

namespace mcf {

namespace {

// Gaussian weight of a flat triangle, subdividing 1:4 while its diameter exceeds h.
double tri_gauss(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x0, double inv4t,
                 double h, int depth) {
    double diam2 = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
    if (diam2 > h * h && depth < 14) {
        Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
        return tri_gauss(a, ab, ca, x0, inv4t, h, depth + 1) +
               tri_gauss(ab, b, bc, x0, inv4t, h, depth + 1) +
               tri_gauss(ca, bc, c, x0, inv4t, h, depth + 1) +
               tri_gauss(ab, bc, ca, x0, inv4t, h, depth + 1);
    }
    Vec3 m = (a + b + c) / 3.0;
    return 0.5 * (b - a).cross(c - a).norm() * std::exp(-(m - x0).squaredNorm() * inv4t);
}

}  // namespace

double f_functional(const TriMesh& mesh, const Vec3& x0, double t0) {
    require(t0 > 0, ErrorCode::InvalidArgument, "t0 must be positive");
    const double inv4t = 0.25 / t0;
    const double h = std::sqrt(t0) / 4;
    double sum = 0.0;
    for (const Face& f : mesh.faces()) {
        const Vec3& a = mesh.position(f[0]);
        const Vec3& b = mesh.position(f[1]);
        const Vec3& c = mesh.position(f[2]);
        Vec3 m = (a + b + c) / 3.0;
        double rad = std::sqrt(std::max({(a - m).squaredNorm(), (b - m).squaredNorm(),
                                         (c - m).squaredNorm()}));
        double lb = (m - x0).norm() - rad;
        // exp(-40) is far below any tolerance used downstream.
        if (lb > 0 && lb * lb * inv4t > 40.0) continue;
        sum += tri_gauss(a, b, c, x0, inv4t, h, 0);
    }
    return sum / (4 * kPi * t0);
}

EntropyResult entropy_estimate(const TriMesh& mesh, const EntropyGrid& grid) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Vec3& p : mesh.positions()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diam2 = (hi - lo).squaredNorm();
    require(diam2 > 0, ErrorCode::InvalidArgument, "mesh has zero extent");

    EntropyResult best;
    best.value = f_functional(mesh, Vec3::Zero(), 1.0);
    const int ns = std::max(grid.n_space, 1);
    const int nt = std::max(grid.n_scale, 2);
    Vec3 cell;
    for (int k = 0; k < 3; ++k) {
        double ext = hi[k] - lo[k];
        cell[k] = ns > 1 && ext > 1e-12 * std::sqrt(diam2) ? ext / (ns - 1) : 0.0;
    }
    best.cell = cell;
    const double log_lo = std::log(grid.scale_lo * diam2);
    const double log_hi = std::log(grid.scale_hi * diam2);
    double dlog = (log_hi - log_lo) / (nt - 1);

    auto consider = [&](const Vec3& x0, double t0) {
        double v = f_functional(mesh, x0, t0);
        if (v > best.value) {
            best.value = v;
            best.x0 = x0;
            best.t0 = t0;
        }
    };
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j)
            for (int k = 0; k < ns; ++k) {
                Vec3 x0(cell[0] > 0 ? lo[0] + i * cell[0] : 0.5 * (lo[0] + hi[0]),
                        cell[1] > 0 ? lo[1] + j * cell[1] : 0.5 * (lo[1] + hi[1]),
                        cell[2] > 0 ? lo[2] + k * cell[2] : 0.5 * (lo[2] + hi[2]));
                if ((cell[0] == 0 && i > 0) || (cell[1] == 0 && j > 0) || (cell[2] == 0 && k > 0))
                    continue;
                for (int s = 0; s < nt; ++s) consider(x0, std::exp(log_lo + s * dlog));
            }

    Vec3 step = cell;
    for (int round = 0; round < grid.rounds; ++round) {
        step *= 0.5;
        dlog *= 0.5;
        const Vec3 c = best.x0;
        const double lt = std::log(best.t0);
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                for (int k = -1; k < 2; ++k) {
                    if ((step[0] == 0 && i) || (step[1] == 0 && j) || (step[2] == 0 && k)) continue;
                    Vec3 x0 = c + Vec3(i * step[0], j * step[1], k * step[2]);
                    for (int s = -1; s <= 1; ++s) {
                        if (!i && !j && !k && !s) continue;
                        double l = std::clamp(lt + s * dlog, log_lo, log_hi);
                        consider(x0, std::exp(l));
                    }
                }
    }
    return best;
}

Residual shrinker_residual(const TriMesh& mesh, const MeshGeometry& g,
                           std::optional<double> T_minus_t, const std::vector<char>* mask) {
    double tau = 1.0;
    if (T_minus_t) {
        require(*T_minus_t > 0, ErrorCode::InvalidArgument, "T - t must be positive");
        tau = *T_minus_t;
    }
    Residual r;
    r.field.assign(mesh.num_vertices(), 0.0);
    double acc = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (!g.interior[v] || (mask && !(*mask)[v])) continue;
        double x = g.H(v) - mesh.position(v).dot(g.normal(v)) / (2 * tau);
        r.field[v] = x;
        acc += x * x * g.area(v);
        r.sup = std::max(r.sup, std::abs(x));
    }
    r.l2 = std::sqrt(acc);
    return r;
}

double extrapolate_to_zero(const double s[3], const double y[3]) {
    // Lagrange basis evaluated at 0.
    double out = 0.0;
    for (int i = 0; i < 3; ++i) {
        double w = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) w *= s[j] / (s[j] - s[i]);
        out += w * y[i];
    }
    return out;
}

DensityCurve gaussian_density(const std::vector<Checkpoint>& flow, const Vec3& x0, double T) {
    DensityCurve c;
    for (const Checkpoint& cp : flow) {
        require(cp.t < T, ErrorCode::InvalidArgument, "T must exceed every checkpoint time");
        c.t.push_back(cp.t);
        c.theta.push_back(f_functional(cp.mesh, x0, T - cp.t));
    }
    for (std::size_t i = 1; i < c.theta.size(); ++i)
        c.max_increase = std::max(c.max_increase, c.theta[i] - c.theta[i - 1]);
    c.monotone = c.max_increase <= 1e-3;
    const std::size_t n = c.theta.size();
    if (n >= 3) {
        double s[3], y[3];
        for (int i = 0; i < 3; ++i) {
            s[i] = T - c.t[n - 3 + i];
            y[i] = c.theta[n - 3 + i];
        }
        c.limit = extrapolate_to_zero(s, y);
    } else if (n > 0) {
        c.limit = c.theta.back();
    }
    return c;
}

IlmanenCheck ilmanen_bound_check(const TriMesh& mesh, const MeshGeometry& g, const Vec3& p,
                                 double R, double eps, int genus) {
    require(R > 1, ErrorCode::InvalidArgument, "R must exceed 1");
    require(eps > 0 && eps < 1, ErrorCode::InvalidArgument, "eps must lie in (0,1)");
    // Closed balls, with a relative guard for vertices sitting on the sphere.
    const double in1 = 1.0 + 1e-9, inR = R * (1.0 + 1e-9);
    IlmanenCheck out;
    double a2 = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        double d = (mesh.position(v) - p).norm();
        if (d <= in1) a2 += g.A2(v) * g.area(v);
        if (d <= inR) out.h2 += sqr(g.H(v)) * g.area(v);
    }
    out.lhs = (1 - eps) * a2;
    out.genus = genus >= 0 ? genus : clipped_genus(mesh, p, R);
    out.genus_term = 8 * kPi * out.genus;
    out.area_ratio = area_ratio_sup(mesh, p, 1.0, R, 16);
    out.ratio_term = 24 * kPi * R * R / (eps * sqr(R - 1)) * out.area_ratio;
    out.slack = out.h2 + out.genus_term + out.ratio_term - out.lhs;
    return out;
}

const char* to_string(ShapeClass c) {
    switch (c) {
        case ShapeClass::PlaneLike: return "plane-like";
        case ShapeClass::SphereLike: return "sphere-like";
        case ShapeClass::CylinderLike: return "cylinder-like";
        case ShapeClass::Other: return "other";
    }
    return "other";
}

Classification classify_flat(const TriMesh& mesh, const MeshGeometry& g,
                             const ClassifyOptions& opts, const std::vector<char>* mask) {
    Classification c;
    Residual r = shrinker_residual(mesh, g, std::nullopt, mask);
    c.residual_sup = r.sup;
    if (r.sup > opts.residual_sup)
        fail(ErrorCode::NotAShrinker, "not a shrinker: residual sup " + std::to_string(r.sup));
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (!g.interior[v] || (mask && !(*mask)[v])) continue;
        c.sup_H = std::max(c.sup_H, std::abs(g.H(v)));
    }
    c.entropy = entropy_estimate(mesh, opts.grid).value;
    if (c.sup_H <= opts.delta && c.entropy < 1 + opts.eps_entropy)
        c.shape = ShapeClass::PlaneLike;
    else if (std::abs(c.entropy - kSphereEntropy) <= 0.01 * kSphereEntropy)
        c.shape = ShapeClass::SphereLike;
    else if (std::abs(c.entropy - kCylinderEntropy) <= 0.01 * kCylinderEntropy)
        c.shape = ShapeClass::CylinderLike;
    return c;
}

}  // namespace mcf
