#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mcflab/geometry.hpp"

namespace mcf {

struct SheetOptions {
    // Half-length of the normal segment searched for hits; NaN picks
    // min(bbox diagonal, 0.5 / max principal curvature on the mask).
    double tube = std::numeric_limits<double>::quiet_NaN();
    // Hits with |cos(normal, face normal)| below this are grazing.
    double min_cosine = 0.1;
};

struct SheetBundle {
    TriMesh reference;
    double eps = 0.0;
    double R = 0.0;
    std::vector<Vec3> singular;
    int m = 0;
    std::vector<char> mask;
    // heights[k][v], increasing in k on the mask, NaN elsewhere.
    std::vector<std::vector<double>> heights;
    // Vertices removed from the mask because a hit was grazing.
    std::vector<int> dropped;

    std::vector<int> mask_indices() const;
};

SheetBundle decompose_sheets(const TriMesh& target, const TriMesh& reference, double eps,
                             double R, const std::vector<Vec3>& singular,
                             const SheetOptions& opts = {});

struct HeightDifference {
    std::vector<double> u;
    std::vector<double> w;
};

// u = top minus bottom sheet, w = u / u(normalize_at).
HeightDifference height_difference(const SheetBundle& b, int normalize_at);

struct Multiplicity {
    int m = 0;
    std::vector<double> radii;
    std::vector<double> theta;
    double confidence = 0.0;
};

// Area ratio Area(B_r(x))/(pi r^2) on the last (finest) mesh of the family.
Multiplicity multiplicity_at(const std::vector<TriMesh>& family, const Vec3& x,
                             const std::vector<double>& radii);

struct GraphQuantities {
    std::vector<double> w, nu, eta;
};

// w, nu, eta of the normal graph p + u(p) n(p) at (p, u, grad u). The shape
// operator in g is S = dn, so B = Id + u S.
GraphQuantities graph_quantities(const TriMesh& reference, const MeshGeometry& g,
                                 const std::vector<double>& u,
                                 const std::vector<ScalarQuadric>& du);

std::vector<double> mean_curvature_of_graph(const TriMesh& reference, const MeshGeometry& g,
                                            const std::vector<double>& u,
                                            const std::vector<ScalarQuadric>& du);

// L u = Delta u - <x, grad u>/2 + |A|^2 u + u/2.
std::vector<double> shrinker_operator(const TriMesh& reference, const MeshGeometry& g,
                                      const std::vector<double>& u);

struct LinearizedResidual {
    double r_norm = 0.0;
    double u_norm = 0.0;
    double ratio = 0.0;
    // Residual at the last interior time sample.
    std::vector<double> field;
};

// r = d_t u - L u, u = u_plus - u_minus, central differences in time, space-time
// L2 over the mask (vertex areas times dt).
LinearizedResidual linearized_residual(const TriMesh& reference, const MeshGeometry& g,
                                       const std::vector<std::vector<double>>& u_plus,
                                       const std::vector<std::vector<double>>& u_minus,
                                       double dt, const std::vector<char>* mask = nullptr);

// RMCF of a graph over the plane, d_t f = W div(grad f / W) + (f - x.grad f)/2,
// RK4 on the vertex grid of plane_patch(half, n). Returns steps + 1 fields.
std::vector<std::vector<double>> rmcf_plane_graph(double half, int n,
                                                  const std::function<double(double, double)>& f0,
                                                  double dt, int steps);

struct ProjectionOptions {
    int samples = 1000;
    double theta_max = 1.2490457723982544;  // arctan 3
    // Every sample at theta_max instead of uniform in [0, theta_max].
    bool fixed_angle = false;
    double c1_bound = 0.5;
    std::uint64_t seed = 1;
};

struct ProjectionCheck {
    double worst = 0.0;
    int samples = 0;
    double c1_norm = 0.0;
};

// Max over random vertices P and slant angles theta of |GQ|/|BQ|, with G, Q the
// hits of the normal at P on the u1, u2 graphs and B the hit nearest to Q of the
// slanted line through Q on the u1 graph.
ProjectionCheck projection_bound_check(const TriMesh& reference, const MeshGeometry& g,
                                       const std::vector<double>& u1,
                                       const std::vector<double>& u2,
                                       const ProjectionOptions& opts = {},
                                       const std::vector<char>* mask = nullptr);

std::string sheets_json(const SheetBundle& b);

}  // namespace mcf
