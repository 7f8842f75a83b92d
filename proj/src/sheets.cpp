#include "mcflab/sheets.hpp"

#include <algorithm>
#include <queue>
#include <random>

#include <json.hpp>

#include "mcflab/bvh.hpp"
#include "mcflab/mesh_query.hpp"

namespace mcf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double bbox_diagonal(const TriMesh& a, const TriMesh& b) {
    Box box;
    for (const Vec3& p : a.positions()) box.grow(p);
    for (const Vec3& p : b.positions()) box.grow(p);
    return (box.hi - box.lo).norm();
}

// Crossing parameters with repeats from shared edges and vertices merged.
std::vector<double> distinct_hits(const std::vector<TriangleBVH::LineHit>& hits, double tol,
                                  double min_cosine, bool& grazing) {
    std::vector<double> t;
    grazing = false;
    for (const auto& h : hits) {
        if (!t.empty() && h.t - t.back() <= tol) continue;
        if (std::abs(h.cosine) < min_cosine) grazing = true;
        t.push_back(h.t);
    }
    return t;
}

int nearest_index(const std::vector<double>& xs, double x) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(xs.size()); ++k)
        if (std::abs(xs[k] - x) < std::abs(xs[best] - x)) best = k;
    return best;
}

// Per-vertex B = Id + s S and the quantities built from it.
struct Frame {
    Mat2 S, J, J2;
    double D;
};

Frame frame_at(const Mat2& S, double s, int v) {
    Mat2 B = Mat2::Identity() + s * S;
    Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (B + B.transpose()));
    double lo = es.eigenvalues().cwiseAbs().minCoeff();
    double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(lo > 0) || hi / lo > 1e6)
        fail(ErrorCode::Precondition, "B singular at vertex " + std::to_string(v));
    Frame f;
    f.S = S;
    f.J = B.inverse();
    f.J2 = f.J * f.J;
    f.D = B.determinant();
    return f;
}

// d S / d p_alpha in the frame of v, by a linear fit over the 1-ring.
std::array<Mat2, 2> shape_gradient(const TriMesh& mesh, const MeshGeometry& g, int v) {
    Eigen::Matrix<double, 3, 2> Tv;
    Tv.col(0) = g.tangent_u[v];
    Tv.col(1) = g.tangent_v[v];
    Mat2 NtN = Mat2::Zero();
    Eigen::Matrix<double, 2, 3> NtR = Eigen::Matrix<double, 2, 3>::Zero();
    for (int w : mesh.vertex_neighbors(v)) {
        Vec2 d = Tv.transpose() * (mesh.position(w) - mesh.position(v));
        Mat2 Sw = Tv.transpose() * g.shape_ambient(w) * Tv - g.shape[v];
        NtN += d * d.transpose();
        NtR += d * Eigen::RowVector3d(Sw(0, 0), Sw(0, 1), Sw(1, 1));
    }
    std::array<Mat2, 2> out{Mat2::Zero(), Mat2::Zero()};
    if (std::abs(NtN.determinant()) < 1e-300) return out;
    Eigen::Matrix<double, 2, 3> c = NtN.inverse() * NtR;
    for (int a = 0; a < 2; ++a) out[a] << c(a, 0), c(a, 1), c(a, 1), c(a, 2);
    return out;
}

}  // namespace

std::vector<int> SheetBundle::mask_indices() const {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(mask.size()); ++v)
        if (mask[v]) out.push_back(v);
    return out;
}

SheetBundle decompose_sheets(const TriMesh& target, const TriMesh& reference, double eps,
                             double R, const std::vector<Vec3>& singular,
                             const SheetOptions& opts) {
    require(eps >= 0 && R > 0, ErrorCode::InvalidArgument, "eps >= 0 and R > 0 required");
    const int nv = reference.num_vertices();
    MeshGeometry g = compute_geometry(reference);
    SheetBundle b;
    b.reference = reference;
    b.eps = eps;
    b.R = R;
    b.singular = singular;
    b.mask.assign(nv, 0);
    double kmax = 0.0;
    for (int v = 0; v < nv; ++v) {
        const Vec3& p = reference.position(v);
        if (p.norm() >= R) continue;
        bool near = false;
        for (const Vec3& s : singular) near = near || (p - s).norm() < eps;
        if (near) continue;
        b.mask[v] = 1;
        kmax = std::max(kmax, g.principal_max(v));
    }
    double tube = opts.tube;
    if (std::isnan(tube)) {
        tube = bbox_diagonal(target, reference);
        if (kmax > 0) tube = std::min(tube, 0.5 / kmax);
    }
    const double tol = 1e-9 * std::max(tube, 1e-300);

    TriangleBVH bvh(target);
    std::vector<std::vector<double>> hits(nv);
    for (int v = 0; v < nv; ++v) {
        if (!b.mask[v]) continue;
        bool grazing = false;
        hits[v] = distinct_hits(bvh.line_hits(reference.position(v), g.normal(v), tube), tol,
                                opts.min_cosine, grazing);
        if (grazing) {
            b.mask[v] = 0;
            b.dropped.push_back(v);
        }
    }

    // Flood fill: neighbouring mask vertices must see the same sheets in the same order.
    std::vector<char> seen(nv, 0);
    b.m = -1;
    for (int seed = 0; seed < nv; ++seed) {
        if (!b.mask[seed] || seen[seed]) continue;
        if (b.m < 0) b.m = static_cast<int>(hits[seed].size());
        if (static_cast<int>(hits[seed].size()) != b.m)
            fail(ErrorCode::Inconsistent, "inconsistent sheet count at vertex " +
                                              std::to_string(seed));
        std::queue<int> q;
        q.push(seed);
        seen[seed] = 1;
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int w : reference.vertex_neighbors(v)) {
                if (!b.mask[w]) continue;
                if (hits[w].size() != hits[v].size())
                    fail(ErrorCode::Inconsistent,
                         "inconsistent sheet count at vertex " + std::to_string(w) + " (" +
                             std::to_string(hits[w].size()) + " vs " +
                             std::to_string(hits[v].size()) + ")");
                for (int k = 0; k < static_cast<int>(hits[v].size()); ++k) {
                    if (nearest_index(hits[w], hits[v][k]) != k)
                        fail(ErrorCode::Inconsistent,
                             "sheet labels cross at vertex " + std::to_string(w));
                }
                if (!seen[w]) {
                    seen[w] = 1;
                    q.push(w);
                }
            }
        }
    }
    require(b.m > 0, ErrorCode::Inconsistent, "no sheet found over the mask");
    b.heights.assign(b.m, std::vector<double>(nv, kNaN));
    for (int v = 0; v < nv; ++v) {
        if (!b.mask[v]) continue;
        for (int k = 0; k < b.m; ++k) b.heights[k][v] = hits[v][k];
    }
    return b;
}

HeightDifference height_difference(const SheetBundle& b, int normalize_at) {
    require(b.m >= 2, ErrorCode::Precondition, "height difference needs at least two sheets");
    require(normalize_at >= 0 && normalize_at < static_cast<int>(b.mask.size()) &&
                b.mask[normalize_at],
            ErrorCode::InvalidArgument, "normalisation vertex not in the mask");
    const int nv = static_cast<int>(b.mask.size());
    HeightDifference h;
    h.u.assign(nv, kNaN);
    h.w.assign(nv, kNaN);
    for (int v = 0; v < nv; ++v)
        if (b.mask[v]) h.u[v] = b.heights[b.m - 1][v] - b.heights[0][v];
    const double u0 = h.u[normalize_at];
    require(u0 > 0, ErrorCode::Precondition, "height difference not positive at normalisation");
    for (int v = 0; v < nv; ++v)
        if (b.mask[v]) h.w[v] = h.u[v] / u0;
    h.w[normalize_at] = 1.0;
    return h;
}

Multiplicity multiplicity_at(const std::vector<TriMesh>& family, const Vec3& x,
                             const std::vector<double>& radii) {
    require(!family.empty() && !radii.empty(), ErrorCode::InvalidArgument,
            "multiplicity needs meshes and radii");
    const TriMesh& mesh = family.back();
    Multiplicity out;
    out.radii = radii;
    for (double r : radii) out.theta.push_back(area_in_ball(mesh, x, r) / (kPi * r * r));
    auto smallest = std::min_element(radii.begin(), radii.end()) - radii.begin();
    double theta = out.theta[smallest];
    out.m = static_cast<int>(std::lround(theta));
    out.confidence = std::abs(theta - out.m);
    if (out.confidence > 0.25)
        fail(ErrorCode::Precondition, "multiplicity ill-defined at this resolution");
    return out;
}

GraphQuantities graph_quantities(const TriMesh& reference, const MeshGeometry& g,
                                 const std::vector<double>& u,
                                 const std::vector<ScalarQuadric>& du) {
    const int nv = reference.num_vertices();
    GraphQuantities q;
    q.w.resize(nv);
    q.nu.resize(nv);
    q.eta.resize(nv);
    for (int v = 0; v < nv; ++v) {
        Frame f = frame_at(g.shape[v], u[v], v);
        Vec2 Jy = f.J * du[v].grad;
        double w = std::sqrt(1.0 + Jy.squaredNorm());
        const Vec3& p = reference.position(v);
        Vec3 tangent = Jy[0] * g.tangent_u[v] + Jy[1] * g.tangent_v[v];
        q.w[v] = w;
        q.nu[v] = w * f.D;
        q.eta[v] = (p.dot(g.normal(v)) + u[v] - p.dot(tangent)) / w;
    }
    return q;
}

std::vector<double> mean_curvature_of_graph(const TriMesh& reference, const MeshGeometry& g,
                                            const std::vector<double>& u,
                                            const std::vector<ScalarQuadric>& du) {
    const int nv = reference.num_vertices();
    std::vector<double> H(nv);
    for (int v = 0; v < nv; ++v) {
        const double s = u[v];
        const Vec2& y = du[v].grad;
        const Mat2& Q = du[v].hess;
        Frame f = frame_at(g.shape[v], s, v);
        const Mat2& J = f.J;
        const Mat2& J2 = f.J2;
        Vec2 J2y = J2 * y;
        double w = std::sqrt(1.0 + y.dot(J2y));

        // s-derivatives: dB/ds = S, dJ/ds = -J S J.
        double dD = f.D * (J * f.S).trace();
        Mat2 dJ = -J * f.S * J;
        Mat2 dJ2 = dJ * J + J * dJ;
        double dw = y.dot(dJ2 * y) / (2 * w);
        double ds_nu = dD * w + f.D * dw;
        Vec2 ds_dy_nu = dD * J2y / w + f.D * (dJ2 * y) / w - f.D * J2y * dw / (w * w);
        Mat2 dy_dy_nu = f.D * (J2 / w - J2y * J2y.transpose() / (w * w * w));

        // p-derivatives through S(p): dB/dp_a = s dS_a.
        double dp_dy_nu = 0.0;
        if (s != 0.0 && y.squaredNorm() > 0.0) {
            auto dS = shape_gradient(reference, g, v);
            for (int a = 0; a < 2; ++a) {
                Mat2 dBa = s * dS[a];
                Mat2 dJa = -J * dBa * J;
                Mat2 dJ2a = dJa * J + J * dJa;
                double dDa = f.D * (J * dBa).trace();
                double dwa = y.dot(dJ2a * y) / (2 * w);
                dp_dy_nu += dDa * J2y[a] / w + f.D * (dJ2a * y)[a] / w -
                            f.D * J2y[a] * dwa / (w * w);
            }
        }
        double nu = w * f.D;
        H[v] = (w / nu) *
               (ds_nu - dp_dy_nu - ds_dy_nu.dot(y) - (dy_dy_nu.cwiseProduct(Q)).sum());
    }
    return H;
}

std::vector<double> shrinker_operator(const TriMesh& reference, const MeshGeometry& g,
                                      const std::vector<double>& u) {
    const int nv = reference.num_vertices();
    std::vector<double> lap = laplace_beltrami(reference, g, u);
    std::vector<ScalarQuadric> du = field_derivatives(reference, g, u);
    std::vector<double> out(nv);
    for (int v = 0; v < nv; ++v) {
        const Vec3& x = reference.position(v);
        double xgrad = du[v].grad[0] * x.dot(g.tangent_u[v]) + du[v].grad[1] * x.dot(g.tangent_v[v]);
        out[v] = lap[v] - 0.5 * xgrad + g.A2(v) * u[v] + 0.5 * u[v];
    }
    return out;
}

LinearizedResidual linearized_residual(const TriMesh& reference, const MeshGeometry& g,
                                       const std::vector<std::vector<double>>& u_plus,
                                       const std::vector<std::vector<double>>& u_minus,
                                       double dt, const std::vector<char>* mask) {
    require(u_plus.size() == u_minus.size() && u_plus.size() >= 3, ErrorCode::InvalidArgument,
            "need at least three matching time samples");
    require(dt > 0, ErrorCode::InvalidArgument, "dt must be positive");
    const int nv = reference.num_vertices();
    double kmax = 0.0;
    for (int v = 0; v < nv; ++v) kmax = std::max(kmax, g.principal_max(v));
    const int nt = static_cast<int>(u_plus.size());
    std::vector<std::vector<double>> u(nt, std::vector<double>(nv));
    for (int k = 0; k < nt; ++k) {
        require(static_cast<int>(u_plus[k].size()) == nv &&
                    static_cast<int>(u_minus[k].size()) == nv,
                ErrorCode::InvalidArgument, "field size mismatch");
        for (int v = 0; v < nv; ++v) {
            for (double h : {u_plus[k][v], u_minus[k][v]}) {
                if (!std::isfinite(h) || std::abs(h) * kmax >= 1.0)
                    fail(ErrorCode::Precondition,
                         "graph lost validity at sample " + std::to_string(k));
            }
            u[k][v] = u_plus[k][v] - u_minus[k][v];
        }
    }
    auto inside = [&](int v) { return g.interior[v] && (!mask || (*mask)[v]); };
    LinearizedResidual out;
    double rr = 0.0, uu = 0.0;
    for (int k = 1; k + 1 < nt; ++k) {
        std::vector<double> Lu = shrinker_operator(reference, g, u[k]);
        out.field.assign(nv, 0.0);
        for (int v = 0; v < nv; ++v) {
            if (!inside(v)) continue;
            double r = (u[k + 1][v] - u[k - 1][v]) / (2 * dt) - Lu[v];
            out.field[v] = r;
            rr += g.area(v) * r * r * dt;
            uu += g.area(v) * u[k][v] * u[k][v] * dt;
        }
    }
    out.r_norm = std::sqrt(rr);
    out.u_norm = std::sqrt(uu);
    out.ratio = out.u_norm > 0 ? out.r_norm / out.u_norm : 0.0;
    return out;
}

std::vector<std::vector<double>> rmcf_plane_graph(double half, int n,
                                                  const std::function<double(double, double)>& f0,
                                                  double dt, int steps) {
    require(half > 0 && n >= 4 && dt > 0 && steps >= 0, ErrorCode::InvalidArgument,
            "plane graph parameters");
    const int m = n + 1;
    const double h = 2 * half / n;
    auto id = [m](int i, int j) { return j * m + i; };
    auto coord = [&](int i) { return -half + 2 * half * i / n; };
    std::vector<double> f(m * m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) f[id(i, j)] = f0(coord(i), coord(j));

    auto rate = [&](const std::vector<double>& x) {
        std::vector<double> r(m * m, 0.0);
        for (int j = 1; j < n; ++j) {
            for (int i = 1; i < n; ++i) {
                double c = x[id(i, j)];
                double fx = (x[id(i + 1, j)] - x[id(i - 1, j)]) / (2 * h);
                double fy = (x[id(i, j + 1)] - x[id(i, j - 1)]) / (2 * h);
                double fxx = (x[id(i + 1, j)] - 2 * c + x[id(i - 1, j)]) / (h * h);
                double fyy = (x[id(i, j + 1)] - 2 * c + x[id(i, j - 1)]) / (h * h);
                double fxy = (x[id(i + 1, j + 1)] - x[id(i - 1, j + 1)] - x[id(i + 1, j - 1)] +
                              x[id(i - 1, j - 1)]) /
                             (4 * h * h);
                double W2 = 1.0 + fx * fx + fy * fy;
                double curv =
                    fxx + fyy - (fx * fx * fxx + 2 * fx * fy * fxy + fy * fy * fyy) / W2;
                r[id(i, j)] = curv + 0.5 * (c - coord(i) * fx - coord(j) * fy);
            }
        }
        // Boundary rates by linear extrapolation from the interior.
        for (int k = 1; k < n; ++k) {
            r[id(0, k)] = 2 * r[id(1, k)] - r[id(2, k)];
            r[id(n, k)] = 2 * r[id(n - 1, k)] - r[id(n - 2, k)];
            r[id(k, 0)] = 2 * r[id(k, 1)] - r[id(k, 2)];
            r[id(k, n)] = 2 * r[id(k, n - 1)] - r[id(k, n - 2)];
        }
        r[id(0, 0)] = r[id(1, 0)] + r[id(0, 1)] - r[id(1, 1)];
        r[id(n, 0)] = r[id(n - 1, 0)] + r[id(n, 1)] - r[id(n - 1, 1)];
        r[id(0, n)] = r[id(1, n)] + r[id(0, n - 1)] - r[id(1, n - 1)];
        r[id(n, n)] = r[id(n - 1, n)] + r[id(n, n - 1)] - r[id(n - 1, n - 1)];
        return r;
    };

    std::vector<std::vector<double>> out{f};
    out.reserve(steps + 1);
    std::vector<double> tmp(m * m);
    for (int s = 0; s < steps; ++s) {
        auto k1 = rate(f);
        for (int i = 0; i < m * m; ++i) tmp[i] = f[i] + 0.5 * dt * k1[i];
        auto k2 = rate(tmp);
        for (int i = 0; i < m * m; ++i) tmp[i] = f[i] + 0.5 * dt * k2[i];
        auto k3 = rate(tmp);
        for (int i = 0; i < m * m; ++i) tmp[i] = f[i] + dt * k3[i];
        auto k4 = rate(tmp);
        for (int i = 0; i < m * m; ++i) f[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        out.push_back(f);
    }
    return out;
}

ProjectionCheck projection_bound_check(const TriMesh& reference, const MeshGeometry& g,
                                       const std::vector<double>& u1,
                                       const std::vector<double>& u2,
                                       const ProjectionOptions& opts,
                                       const std::vector<char>* mask) {
    require(opts.samples > 0 && opts.theta_max >= 0 && opts.theta_max < kPi / 2,
            ErrorCode::InvalidArgument,
            "projection check parameters");
    const int nv = reference.num_vertices();
    std::vector<int> pool;
    for (int v = 0; v < nv; ++v)
        if (g.interior[v] && (!mask || (*mask)[v])) pool.push_back(v);
    require(!pool.empty(), ErrorCode::InvalidArgument, "empty sample set");

    ProjectionCheck out;
    auto d1 = field_derivatives(reference, g, u1);
    auto d2 = field_derivatives(reference, g, u2);
    double c1 = 0.0, c2 = 0.0;
    for (int v : pool) {
        c1 = std::max(c1, std::abs(u1[v]) + d1[v].grad.norm());
        c2 = std::max(c2, std::abs(u2[v]) + d2[v].grad.norm());
    }
    out.c1_norm = c1 + c2;
    if (out.c1_norm > opts.c1_bound)
        fail(ErrorCode::Precondition, "C1 norm " + std::to_string(out.c1_norm) +
                                          " exceeds the bound " + std::to_string(opts.c1_bound));

    std::vector<Vec3> lifted(nv);
    for (int v = 0; v < nv; ++v) lifted[v] = reference.position(v) + u1[v] * g.normal(v);
    TriMesh sheet = reference;
    sheet.set_positions(lifted);
    TriangleBVH bvh(sheet);
    const double h = reference.mean_edge_length();

    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < opts.samples; ++s) {
        int v = pool[pick(rng)];
        double theta = opts.fixed_angle ? opts.theta_max : opts.theta_max * unit(rng);
        double phi = 2 * kPi * unit(rng);
        const Vec3& n = g.normal(v);
        Vec3 G = lifted[v];
        Vec3 Q = reference.position(v) + u2[v] * n;
        double gq = (G - Q).norm();
        Vec3 dir = std::cos(theta) * n + std::sin(theta) * (std::cos(phi) * g.tangent_u[v] +
                                                            std::sin(phi) * g.tangent_v[v]);
        double reach = 2 * gq / std::cos(theta) + 2 * h;
        auto hits = bvh.line_hits(Q, dir, reach);
        if (hits.empty())
            fail(ErrorCode::Precondition, "intersection not found within the local chart");
        double bq = std::abs(hits.front().t);
        for (const auto& hit : hits) bq = std::min(bq, std::abs(hit.t));
        out.worst = std::max(out.worst, bq > 0 ? gq / bq : 0.0);
        ++out.samples;
    }
    return out;
}

std::string sheets_json(const SheetBundle& b) {
    nlohmann::json j;
    j["m"] = b.m;
    j["eps"] = b.eps;
    j["R"] = b.R;
    std::vector<int> idx = b.mask_indices();
    j["mask"] = idx;
    j["dropped"] = b.dropped;
    nlohmann::json sing = nlohmann::json::array();
    for (const Vec3& p : b.singular) sing.push_back({p[0], p[1], p[2]});
    j["singular"] = sing;
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& sheet : b.heights) {
        std::vector<double> vals;
        for (int v : idx) vals.push_back(sheet[v]);
        hs.push_back(vals);
    }
    j["heights"] = hs;
    return j.dump(2);
}

}  // namespace mcf
