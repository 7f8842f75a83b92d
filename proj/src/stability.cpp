#include "mcflab/stability.hpp"

#include <algorithm>

#include <Eigen/SparseCholesky>

#include "mcflab/mesh_query.hpp"

namespace mcf {

namespace {

bool face_active(const Face& t, const std::vector<char>* mask) {
    return !mask || ((*mask)[t[0]] && (*mask)[t[1]] && (*mask)[t[2]]);
}

// Gradients of the three barycentric coordinates of a face.
std::array<Vec3, 3> basis_gradients(const Vec3& a, const Vec3& b, const Vec3& c, double& area) {
    Vec3 n = (b - a).cross(c - a);
    double twice = n.norm();
    area = 0.5 * twice;
    std::array<Vec3, 3> out{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    if (twice <= 0) return out;
    n /= twice;
    out[0] = n.cross(c - b) / twice;
    out[1] = n.cross(a - c) / twice;
    out[2] = n.cross(b - a) / twice;
    return out;
}

double centroid_weight(const Vec3& a, const Vec3& b, const Vec3& c) {
    return std::exp(-((a + b + c) / 3).squaredNorm() / 4);
}

double p1_mass(const double p[3], double area) {
    return area / 6 *
           (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[0] * p[1] + p[1] * p[2] + p[2] * p[0]);
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3 - 2 * t);
}

// Composite Gauss-Legendre on [a, b].
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels) {
    static const double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                0.7966664774136267,  0.9602898564975363};
    static const double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                0.2223810344533745, 0.1012285362903763};
    double h = (b - a) / panels, s = 0.0;
    for (int p = 0; p < panels; ++p) {
        double mid = a + (p + 0.5) * h;
        for (int k = 0; k < 8; ++k) s += w[k] * f(mid + 0.5 * h * x[k]);
    }
    return 0.5 * h * s;
}

}  // namespace

double quadratic_form(const TriMesh& mesh, const MeshGeometry& g, const std::vector<double>& phi,
                      double R, const std::vector<char>* mask) {
    require(static_cast<int>(phi.size()) == mesh.num_vertices(), ErrorCode::InvalidArgument,
            "field size mismatch");
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.position(v).norm() > R && std::abs(phi[v]) > 1e-12)
            fail(ErrorCode::Precondition,
                 "support violation: phi nonzero at vertex " + std::to_string(v) + " outside B_R");
    }
    const auto& p = mesh.positions();
    double Q = 0.0;
    for (const Face& t : mesh.faces()) {
        if (!face_active(t, mask)) continue;
        double area = 0.0;
        auto grad = basis_gradients(p[t[0]], p[t[1]], p[t[2]], area);
        double val[3] = {phi[t[0]], phi[t[1]], phi[t[2]]};
        Vec3 gphi = val[0] * grad[0] + val[1] * grad[1] + val[2] * grad[2];
        double pot = 0.5 + (g.A2(t[0]) + g.A2(t[1]) + g.A2(t[2])) / 3;
        double w = centroid_weight(p[t[0]], p[t[1]], p[t[2]]);
        Q += w * (gphi.squaredNorm() * area - pot * p1_mass(val, area));
    }
    return Q;
}

double weighted_norm2(const TriMesh& mesh, const std::vector<double>& phi,
                      const std::vector<char>* mask) {
    const auto& p = mesh.positions();
    double s = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(f);
        if (!face_active(t, mask)) continue;
        double val[3] = {phi[t[0]], phi[t[1]], phi[t[2]]};
        s += centroid_weight(p[t[0]], p[t[1]], p[t[2]]) * p1_mass(val, mesh.face_area(f));
    }
    return s;
}

FormMatrices assemble_form(const TriMesh& mesh, const MeshGeometry& g,
                           const std::vector<char>* mask) {
    const int n = mesh.num_vertices();
    const auto& p = mesh.positions();
    std::vector<Eigen::Triplet<double>> kt, mt;
    kt.reserve(9 * mesh.num_faces());
    mt.reserve(9 * mesh.num_faces());
    FormMatrices out;
    for (const Face& t : mesh.faces()) {
        if (!face_active(t, mask)) continue;
        double area = 0.0;
        auto grad = basis_gradients(p[t[0]], p[t[1]], p[t[2]], area);
        double pot = 0.5 + (g.A2(t[0]) + g.A2(t[1]) + g.A2(t[2])) / 3;
        out.potential_max = std::max(out.potential_max, pot);
        double w = centroid_weight(p[t[0]], p[t[1]], p[t[2]]);
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                double mass = w * area / 12 * (a == b ? 2.0 : 1.0);
                mt.emplace_back(t[a], t[b], mass);
                kt.emplace_back(t[a], t[b], w * area * grad[a].dot(grad[b]) - pot * mass);
            }
        }
    }
    out.K.resize(n, n);
    out.M.resize(n, n);
    out.K.setFromTriplets(kt.begin(), kt.end());
    out.M.setFromTriplets(mt.begin(), mt.end());
    return out;
}

RayleighResult min_rayleigh(const TriMesh& mesh, const MeshGeometry& g, double R, double tol,
                            int max_iter, const std::vector<char>* mask) {
    const int n = mesh.num_vertices();
    FormMatrices fm = assemble_form(mesh, g, mask);
    std::vector<char> used(n, 0);
    for (const Face& t : mesh.faces())
        if (face_active(t, mask))
            for (int v : t) used[v] = 1;
    std::vector<int> dof, index(n, -1);
    for (int v = 0; v < n; ++v) {
        if (used[v] && mesh.position(v).norm() < R) {
            index[v] = static_cast<int>(dof.size());
            dof.push_back(v);
        }
    }
    require(!dof.empty(), ErrorCode::InvalidArgument, "mesh does not meet B_R");
    const int m = static_cast<int>(dof.size());
    auto restrict = [&](const Eigen::SparseMatrix<double>& A) {
        std::vector<Eigen::Triplet<double>> tr;
        for (int k = 0; k < A.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
                if (index[it.row()] >= 0 && index[it.col()] >= 0)
                    tr.emplace_back(index[it.row()], index[it.col()], it.value());
        Eigen::SparseMatrix<double> out(m, m);
        out.setFromTriplets(tr.begin(), tr.end());
        return out;
    };
    Eigen::SparseMatrix<double> K = restrict(fm.K), M = restrict(fm.M);
    // K + c M >= 0 for c = max potential, so this shift sits below the spectrum.
    const double shift = -fm.potential_max - 1.0;
    Eigen::SparseMatrix<double> A = K - shift * M;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    require(solver.info() == Eigen::Success, ErrorCode::SolverFailure,
            "factorisation of the shifted form failed");

    Eigen::VectorXd x = Eigen::VectorXd::Ones(m);
    x /= std::sqrt(x.dot(M * x));
    double lambda = x.dot(K * x);
    RayleighResult out;
    bool converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        x = solver.solve(M * x);
        x /= std::sqrt(x.dot(M * x));
        double next = x.dot(K * x);
        out.iterations = it;
        bool done = std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next));
        lambda = next;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged)
        fail(ErrorCode::Convergence, "Rayleigh iteration stagnated after " +
                                         std::to_string(max_iter) + " iterations");
    // Fix the sign so the field is mostly positive.
    if (x.sum() < 0) x = -x;
    out.lambda = lambda;
    out.phi.assign(n, 0.0);
    for (int k = 0; k < m; ++k) out.phi[dof[k]] = x[k];
    return out;
}

double log_eta(double s, double rho) {
    s = std::abs(s);
    if (s >= rho) return 1.0;
    if (s == 0.0) return 0.0;
    return std::log(rho) / std::log(s);
}

double cutoff_beta(double s, double delta) {
    return smoothstep((std::abs(s) - delta / 2) / (delta / 2));
}

double log_cutoff_bound(double delta, double rho, int points) {
    double lr = std::abs(std::log(rho)), ld = std::abs(std::log(delta));
    return kLogCutoffConstant * points * points * (1 / lr + lr * lr / ld);
}

CutoffField log_cutoff(const TriMesh& mesh, const std::vector<Vec3>& points, double delta,
                       double rho) {
    require(delta > 0 && delta < rho && rho < 1, ErrorCode::InvalidArgument,
            "need 0 < delta < rho < 1");
    const int n = mesh.num_vertices();
    CutoffField out;
    out.f.assign(n, 1.0);
    if (!points.empty()) {
        GeodesicGraph geo(mesh);
        for (const Vec3& xi : points) {
            std::vector<double> r = geo.from_point(xi);
            for (int v = 0; v < n; ++v) out.f[v] *= log_eta(r[v], rho) * cutoff_beta(r[v], delta);
        }
    }
    const auto& p = mesh.positions();
    for (const Face& t : mesh.faces()) {
        double area = 0.0;
        auto grad = basis_gradients(p[t[0]], p[t[1]], p[t[2]], area);
        Vec3 gf = out.f[t[0]] * grad[0] + out.f[t[1]] * grad[1] + out.f[t[2]] * grad[2];
        out.energy += centroid_weight(p[t[0]], p[t[1]], p[t[2]]) * gf.squaredNorm() * area;
    }
    out.bound = log_cutoff_bound(delta, rho, static_cast<int>(points.size()));
    out.within_bound = out.energy <= out.bound;
    return out;
}

double radial_cutoff_energy(double delta, double rho) {
    require(delta > 0 && delta < rho && rho < 1, ErrorCode::InvalidArgument,
            "need 0 < delta < rho < 1");
    const double lr = std::log(rho);
    // Integrand in u = log s: 2 pi (s f'(s))^2 e^{-s^2/4}.
    auto integrand = [&](double u) {
        double s = std::exp(u);
        double ls = u;
        double eta = lr / ls;
        double s_eta = -lr / (ls * ls);
        double t = (s - delta / 2) / (delta / 2);
        double beta = 1.0, s_beta = 0.0;
        if (t < 1) {
            beta = t * t * (3 - 2 * t);
            s_beta = s * 6 * t * (1 - t) / (delta / 2);
        }
        double sf = s_eta * beta + eta * s_beta;
        return 2 * kPi * sf * sf * std::exp(-s * s / 4);
    };
    double inner = gauss_legendre(integrand, std::log(delta / 2), std::log(delta), 16);
    double span = std::log(rho) - std::log(delta);
    int panels = std::max(16, static_cast<int>(std::ceil(span * 4)));
    double outer = gauss_legendre(integrand, std::log(delta), std::log(rho), panels);
    return inner + outer;
}

Witness instability_witness(const TriMesh& mesh, const MeshGeometry& g, double R,
                            const std::vector<char>* mask) {
    require(R > 0, ErrorCode::InvalidArgument, "R must be positive");
    const int n = mesh.num_vertices();
    Witness w;
    w.phi.resize(n);
    for (int v = 0; v < n; ++v) {
        double r = mesh.position(v).norm();
        w.phi[v] = r >= R ? 0.0 : 1.0 - smoothstep((r - R / 2) / (R / 2));
    }
    w.Q = quadratic_form(mesh, g, w.phi, R, mask);
    w.method = "cutoff-constant";
    if (w.Q < -1e-6) return w;
    RayleighResult rr = min_rayleigh(mesh, g, R, 1e-8, 20000, mask);
    w.phi = rr.phi;
    w.Q = quadratic_form(mesh, g, w.phi, R, mask);
    w.method = "min-rayleigh";
    if (w.Q < -1e-6) return w;
    fail(ErrorCode::Convergence, "no witness found up to R = " + std::to_string(R));
}

}  // namespace mcf
