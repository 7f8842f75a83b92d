#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "mcflab/trimesh.hpp"

namespace mcf {

struct Box {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Box& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool overlaps(const Box& b) const {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
    double dist2(const Vec3& p) const {
        Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
        return d.squaredNorm();
    }
};

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
double segment_point_dist2(const Vec3& p, const Vec3& a, const Vec3& b);
bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                         const Vec3& b0, const Vec3& b1, const Vec3& b2);

// Axis-aligned bounding volume hierarchy over the faces of a mesh snapshot.
class TriangleBVH {
public:
    explicit TriangleBVH(const TriMesh& mesh);

    struct Closest {
        int face = -1;
        double dist2 = std::numeric_limits<double>::infinity();
        Vec3 point = Vec3::Zero();
    };
    Closest closest(const Vec3& p) const;

    struct LineHit {
        int face;
        double t;
        // Cosine between the line direction and the face normal.
        double cosine;
    };
    // All crossings of the line origin + t*dir, |t| <= tmax, sorted by t. A line
    // through a shared edge or vertex reports it once per incident face.
    std::vector<LineHit> line_hits(const Vec3& origin, const Vec3& dir, double tmax) const;

    void query(const Box& box, const std::function<void(int)>& visit) const;

    const Vec3& vertex(int f, int k) const { return tri_[3 * f + k]; }

private:
    struct Node {
        Box box;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };
    int build(int begin, int end);

    std::vector<Vec3> tri_;
    std::vector<Box> face_box_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace mcf
