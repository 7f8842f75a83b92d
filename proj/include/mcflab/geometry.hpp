#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "mcflab/trimesh.hpp"

namespace mcf {

struct VertexGeometry {
    Vec3 normal = Vec3::Zero();
    // Sum of principal curvatures, positive on spheres with outward normals.
    double H = 0.0;
    double A2 = 0.0;
    // Mixed Voronoi area.
    double area = 0.0;
};

struct GeometryOptions {
    bool shape_operator = true;
};

// Per-vertex geometry of one mesh snapshot.
struct MeshGeometry {
    std::vector<VertexGeometry> vertex;
    std::vector<Vec3> tangent_u, tangent_v;
    // Shape operator S = dn in the (tangent_u, tangent_v) frame, tr S = H.
    std::vector<Mat2> shape;
    // False on boundary vertices, where H and |A|^2 are one-sided.
    std::vector<char> interior;
    std::vector<double> face_area;
    std::vector<Vec3> face_normal;
    // 1/2 (cot alpha + cot beta) per edge.
    std::vector<double> edge_weight;

    const Vec3& normal(int v) const { return vertex[v].normal; }
    double H(int v) const { return vertex[v].H; }
    double A2(int v) const { return vertex[v].A2; }
    double area(int v) const { return vertex[v].area; }
    Mat3 shape_ambient(int v) const;
    // Largest |principal curvature|.
    double principal_max(int v) const;
};

MeshGeometry compute_geometry(const TriMesh& mesh, const GeometryOptions& opts = {});

std::vector<double> cotan_weights(const TriMesh& mesh);
std::vector<double> mixed_areas(const TriMesh& mesh);
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

// Negative semidefinite stiffness: (L x)_i = sum_j w_ij (x_j - x_i).
Eigen::SparseMatrix<double> cotan_laplacian(const TriMesh& mesh,
                                            const std::vector<double>& weights);

// Discrete Laplace-Beltrami of a vertex field, normalised by mixed areas.
std::vector<double> laplace_beltrami(const TriMesh& mesh, const MeshGeometry& g,
                                     const std::vector<double>& f);

double angle_defect_sum(const TriMesh& mesh);

// Vertices within k edge hops of v, v first.
std::vector<int> k_ring(const TriMesh& mesh, int v, int k);

void tangent_frame(const Vec3& n, Vec3& u, Vec3& v);

struct ScalarQuadric {
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
};

// Least-squares f(p) - f0 = g.(u,v) + 1/2 (u,v)^T Hs (u,v) over local
// tangent-plane coordinates (u,v) of the points.
ScalarQuadric fit_scalar_quadric(const std::vector<Vec2>& uv, const std::vector<double>& df);

// Gradient and Hessian of a vertex field by 2-ring quadric fits.
std::vector<ScalarQuadric> field_derivatives(const TriMesh& mesh, const MeshGeometry& g,
                                             const std::vector<double>& f);

}  // namespace mcf
