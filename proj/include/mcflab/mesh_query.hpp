#pragma once

#include <limits>
#include <vector>

#include "mcflab/bvh.hpp"
#include "mcflab/geometry.hpp"

namespace mcf {

// Area of the mesh inside the Euclidean ball, clipping each face exactly.
double area_in_ball(const TriMesh& mesh, const Vec3& center, double r);

// Area of triangle (a,b,c) inside the ball.
double triangle_ball_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& center,
                          double r);

// Faces of the connected component of (mesh ∩ ball) containing the seed vertex.
std::vector<int> component_in_ball(const TriMesh& mesh, int seed, const Vec3& center, double r);

// sup over log-spaced radii in [r_lo, r_hi] of Area(B_r(p))/(pi r^2).
double area_ratio_sup(const TriMesh& mesh, const Vec3& p, double r_lo, double r_hi,
                      int samples = 16);

// Genus of the faces meeting B_r(center), boundary loops capped by disks.
int clipped_genus(const TriMesh& mesh, const Vec3& center, double r);

// Shortest paths on the edge graph refined by Steiner points on every edge;
// paths may cross faces in straight lines between any two boundary nodes.
class GeodesicGraph {
public:
    explicit GeodesicGraph(const TriMesh& mesh, int steiner_per_edge = 2);

    std::vector<double> from_vertex(int source) const;
    // Distances from an arbitrary point on the surface (snapped to the closest face).
    std::vector<double> from_point(const Vec3& p) const;

private:
    std::vector<double> run(const std::vector<std::pair<int, double>>& seeds) const;
    Vec3 node_position(int node) const;
    void face_nodes(int f, std::vector<int>& out) const;

    const TriMesh* mesh_;
    int k_;
    TriangleBVH bvh_;
};

std::vector<double> intrinsic_distance(const TriMesh& mesh, int source,
                                       const std::vector<int>& targets);

struct ReachOptions {
    double cap = std::numeric_limits<double>::quiet_NaN();  // default: 10 x bbox diagonal
    double resolution = 1e-3;
    double slack = 2e-3;
};

// Largest r with both B_r(x +- r n) free of mesh points.
double reach_estimate(const TriMesh& mesh, const MeshGeometry& g, const TriangleBVH& bvh, int v,
                      const ReachOptions& opts = {});

struct GraphRadius {
    double radius = 0.0;
    double max_slope = 0.0;  // sup |grad u| / |x'|
    int faces = 0;
};

// Checks the graph property of the component through v over the tangent disk
// of radius r0/96, after the curvature precondition |A| <= 1/r0 on B_r0(v).
GraphRadius graph_radius(const TriMesh& mesh, const MeshGeometry& g, int v, double r0,
                         double curvature_slack = 1e-2);

}  // namespace mcf
