#include "mcflab/geometry.hpp"

#include <algorithm>

#include <Eigen/Dense>

namespace mcf {

namespace {

double cot(const Vec3& a, const Vec3& b) {
    double s = a.cross(b).norm();
    return s > 0 ? a.dot(b) / s : 0.0;
}

}  // namespace

void tangent_frame(const Vec3& n, Vec3& u, Vec3& v) {
    int k = 0;
    n.cwiseAbs().minCoeff(&k);
    Vec3 axis = Vec3::Unit(k);
    u = (axis - axis.dot(n) * n).normalized();
    v = n.cross(u);
}

std::vector<double> cotan_weights(const TriMesh& mesh) {
    std::vector<double> w(mesh.num_edges(), 0.0);
    const auto& p = mesh.positions();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(f);
        for (int k = 0; k < 3; ++k) {
            int h = 3 * f + k;
            const Vec3& o = p[t[(k + 2) % 3]];
            w[mesh.edge_of(h)] += 0.5 * cot(p[t[k]] - o, p[t[(k + 1) % 3]] - o);
        }
    }
    return w;
}

std::vector<double> mixed_areas(const TriMesh& mesh) {
    std::vector<double> a(mesh.num_vertices(), 0.0);
    const auto& p = mesh.positions();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(f);
        const double area = mesh.face_area(f);
        int obtuse = -1;
        for (int k = 0; k < 3; ++k) {
            const Vec3& x = p[t[k]];
            if ((p[t[(k + 1) % 3]] - x).dot(p[t[(k + 2) % 3]] - x) < 0) obtuse = k;
        }
        if (obtuse >= 0) {
            for (int k = 0; k < 3; ++k) a[t[k]] += k == obtuse ? area / 2 : area / 4;
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            const Vec3& xi = p[t[k]];
            const Vec3& xj = p[t[(k + 1) % 3]];
            const Vec3& xk = p[t[(k + 2) % 3]];
            double cot_k = cot(xi - xk, xj - xk);
            double cot_j = cot(xi - xj, xk - xj);
            a[t[k]] += ((xj - xi).squaredNorm() * cot_k + (xk - xi).squaredNorm() * cot_j) / 8;
        }
    }
    return a;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
    std::vector<Vec3> n(mesh.num_vertices(), Vec3::Zero());
    const auto& p = mesh.positions();
    for (const Face& t : mesh.faces()) {
        Vec3 c = (p[t[1]] - p[t[0]]).cross(p[t[2]] - p[t[0]]);
        for (int v : t) n[v] += c;
    }
    for (Vec3& x : n) {
        double len = x.norm();
        if (len > 0) x /= len;
    }
    return n;
}

Eigen::SparseMatrix<double> cotan_laplacian(const TriMesh& mesh,
                                            const std::vector<double>& weights) {
    const int n = mesh.num_vertices();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * weights.size());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Edge& ed = mesh.edges()[e];
        double w = weights[e];
        trip.emplace_back(ed.v0, ed.v1, w);
        trip.emplace_back(ed.v1, ed.v0, w);
        trip.emplace_back(ed.v0, ed.v0, -w);
        trip.emplace_back(ed.v1, ed.v1, -w);
    }
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

std::vector<double> laplace_beltrami(const TriMesh& mesh, const MeshGeometry& g,
                                     const std::vector<double>& f) {
    std::vector<double> out(mesh.num_vertices(), 0.0);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Edge& ed = mesh.edges()[e];
        double d = g.edge_weight[e] * (f[ed.v1] - f[ed.v0]);
        out[ed.v0] += d;
        out[ed.v1] -= d;
    }
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (g.area(v) > 0) out[v] /= g.area(v);
    return out;
}

double angle_defect_sum(const TriMesh& mesh) {
    std::vector<double> angle(mesh.num_vertices(), 0.0);
    const auto& p = mesh.positions();
    for (const Face& t : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            Vec3 a = p[t[(k + 1) % 3]] - p[t[k]];
            Vec3 b = p[t[(k + 2) % 3]] - p[t[k]];
            angle[t[k]] += std::atan2(a.cross(b).norm(), a.dot(b));
        }
    }
    double s = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.vertex_faces(v).empty()) continue;
        s += (mesh.is_boundary_vertex(v) ? kPi : 2 * kPi) - angle[v];
    }
    return s;
}

std::vector<int> k_ring(const TriMesh& mesh, int v, int k) {
    std::vector<int> ring{v};
    std::size_t begin = 0;
    for (int level = 0; level < k; ++level) {
        std::size_t end = ring.size();
        for (std::size_t i = begin; i < end; ++i) {
            for (int w : mesh.vertex_neighbors(ring[i])) {
                if (std::find(ring.begin(), ring.end(), w) == ring.end()) ring.push_back(w);
            }
        }
        begin = end;
    }
    return ring;
}

ScalarQuadric fit_scalar_quadric(const std::vector<Vec2>& uv, const std::vector<double>& df) {
    ScalarQuadric q;
    const int m = static_cast<int>(uv.size());
    if (m < 2) return q;
    const bool full = m >= 5;
    const int cols = full ? 5 : 2;
    Eigen::MatrixXd A(m, cols);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        double u = uv[i][0], v = uv[i][1];
        A(i, 0) = u;
        A(i, 1) = v;
        if (full) {
            A(i, 2) = 0.5 * u * u;
            A(i, 3) = u * v;
            A(i, 4) = 0.5 * v * v;
        }
        b[i] = df[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    q.grad = Vec2(c[0], c[1]);
    if (full) q.hess << c[2], c[3], c[3], c[4];
    return q;
}

std::vector<ScalarQuadric> field_derivatives(const TriMesh& mesh, const MeshGeometry& g,
                                             const std::vector<double>& f) {
    std::vector<ScalarQuadric> out(mesh.num_vertices());
    std::vector<Vec2> uv;
    std::vector<double> df;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        uv.clear();
        df.clear();
        const Vec3& x = mesh.position(v);
        for (int w : k_ring(mesh, v, 2)) {
            if (w == v) continue;
            Vec3 d = mesh.position(w) - x;
            uv.emplace_back(d.dot(g.tangent_u[v]), d.dot(g.tangent_v[v]));
            df.push_back(f[w] - f[v]);
        }
        out[v] = fit_scalar_quadric(uv, df);
    }
    return out;
}

Mat3 MeshGeometry::shape_ambient(int v) const {
    Eigen::Matrix<double, 3, 2> T;
    T.col(0) = tangent_u[v];
    T.col(1) = tangent_v[v];
    return T * shape[v] * T.transpose();
}

double MeshGeometry::principal_max(int v) const {
    const Mat2& S = shape[v];
    double m = 0.5 * (S(0, 0) + S(1, 1));
    double r = std::sqrt(sqr(0.5 * (S(0, 0) - S(1, 1))) + sqr(S(0, 1)));
    return std::max(std::abs(m + r), std::abs(m - r));
}

MeshGeometry compute_geometry(const TriMesh& mesh, const GeometryOptions& opts) {
    const int nv = mesh.num_vertices();
    MeshGeometry g;
    g.vertex.resize(nv);
    g.interior.assign(nv, 1);
    g.face_area.resize(mesh.num_faces());
    g.face_normal.resize(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        g.face_area[f] = mesh.face_area(f);
        g.face_normal[f] = mesh.face_normal(f);
    }
    for (int v = 0; v < nv; ++v) {
        if (mesh.vertex_faces(v).empty())
            fail(ErrorCode::IsolatedVertex, "isolated vertex " + std::to_string(v));
        g.interior[v] = !mesh.is_boundary_vertex(v);
    }
    g.edge_weight = cotan_weights(mesh);
    std::vector<double> area = mixed_areas(mesh);
    std::vector<Vec3> normal = vertex_normals(mesh);

    // Delta x via the cotangent formula; Hn = -Delta x.
    std::vector<Vec3> lap(nv, Vec3::Zero());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Edge& ed = mesh.edges()[e];
        Vec3 d = g.edge_weight[e] * (mesh.position(ed.v1) - mesh.position(ed.v0));
        lap[ed.v0] += d;
        lap[ed.v1] -= d;
    }
    g.tangent_u.resize(nv);
    g.tangent_v.resize(nv);
    g.shape.assign(nv, Mat2::Zero());
    for (int v = 0; v < nv; ++v) {
        VertexGeometry& vg = g.vertex[v];
        vg.normal = normal[v];
        vg.area = area[v];
        vg.H = -lap[v].dot(normal[v]) / area[v];
        tangent_frame(normal[v], g.tangent_u[v], g.tangent_v[v]);
    }
    if (!opts.shape_operator) {
        for (int v = 0; v < nv; ++v) {
            g.vertex[v].A2 = 0.5 * sqr(g.vertex[v].H);
            g.shape[v] = 0.5 * g.vertex[v].H * Mat2::Identity();
        }
        return g;
    }

    std::vector<Vec2> uv;
    std::vector<double> h;
    for (int v = 0; v < nv; ++v) {
        uv.clear();
        h.clear();
        const Vec3& x = mesh.position(v);
        const Vec3& n = normal[v];
        for (int w : k_ring(mesh, v, 2)) {
            if (w == v) continue;
            Vec3 d = mesh.position(w) - x;
            uv.emplace_back(d.dot(g.tangent_u[v]), d.dot(g.tangent_v[v]));
            h.push_back(d.dot(n));
        }
        ScalarQuadric q = fit_scalar_quadric(uv, h);
        // Graph h over the tangent plane: first and second fundamental forms.
        Mat2 I = Mat2::Identity() + q.grad * q.grad.transpose();
        double W = std::sqrt(1.0 + q.grad.squaredNorm());
        Mat2 S = -(I.inverse() * q.hess) / W;
        S = 0.5 * (S + S.transpose()).eval();
        // Traceless part from the fit, trace from the cotangent H.
        double Hv = g.vertex[v].H;
        Mat2 S0 = S - 0.5 * S.trace() * Mat2::Identity();
        g.shape[v] = S0 + 0.5 * Hv * Mat2::Identity();
        g.vertex[v].A2 = 0.5 * Hv * Hv + S0.squaredNorm();
    }
    return g;
}

}  // namespace mcf
