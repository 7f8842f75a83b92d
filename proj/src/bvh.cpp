#include "mcflab/bvh.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace mcf {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double segment_point_dist2(const Vec3& p, const Vec3& a, const Vec3& b) {
    Vec3 ab = b - a;
    double len2 = ab.squaredNorm();
    double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).squaredNorm();
}

namespace {

// Interval of the triangle on line L = o + t*dir given signed distances of the
// vertices to the other triangle's plane.
bool interval(const std::array<Vec3, 3>& v, const std::array<double, 3>& d, const Vec3& dir,
              double& t0, double& t1) {
    std::array<double, 3> proj;
    for (int k = 0; k < 3; ++k) proj[k] = dir.dot(v[k]);
    std::vector<double> ts;
    for (int k = 0; k < 3; ++k) {
        int j = (k + 1) % 3;
        if ((d[k] > 0 && d[j] < 0) || (d[k] < 0 && d[j] > 0)) {
            ts.push_back(proj[k] + (proj[j] - proj[k]) * d[k] / (d[k] - d[j]));
        } else if (d[k] == 0) {
            ts.push_back(proj[k]);
        }
    }
    if (ts.empty()) return false;
    t0 = *std::min_element(ts.begin(), ts.end());
    t1 = *std::max_element(ts.begin(), ts.end());
    return true;
}

}  // namespace

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                         const Vec3& b0, const Vec3& b1, const Vec3& b2) {
    Vec3 na = (a1 - a0).cross(a2 - a0);
    Vec3 nb = (b1 - b0).cross(b2 - b0);
    const double eps = 1e-12 * std::max(na.norm(), nb.norm());
    std::array<double, 3> db{na.dot(b0 - a0), na.dot(b1 - a0), na.dot(b2 - a0)};
    for (double& x : db) if (std::abs(x) < eps) x = 0;
    if ((db[0] > 0 && db[1] > 0 && db[2] > 0) || (db[0] < 0 && db[1] < 0 && db[2] < 0)) return false;
    std::array<double, 3> da{nb.dot(a0 - b0), nb.dot(a1 - b0), nb.dot(a2 - b0)};
    for (double& x : da) if (std::abs(x) < eps) x = 0;
    if ((da[0] > 0 && da[1] > 0 && da[2] > 0) || (da[0] < 0 && da[1] < 0 && da[2] < 0)) return false;
    Vec3 dir = na.cross(nb);
    if (dir.squaredNorm() < eps * eps) return false;  // coplanar: treated as touching only
    double s0, s1, t0, t1;
    if (!interval({a0, a1, a2}, da, dir, s0, s1)) return false;
    if (!interval({b0, b1, b2}, db, dir, t0, t1)) return false;
    return s0 < t1 && t0 < s1;
}

TriangleBVH::TriangleBVH(const TriMesh& mesh) {
    const int nf = mesh.num_faces();
    tri_.resize(3 * static_cast<std::size_t>(nf));
    face_box_.resize(nf);
    for (int f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            tri_[3 * f + k] = mesh.position(mesh.face(f)[k]);
            face_box_[f].grow(tri_[3 * f + k]);
        }
    }
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * static_cast<std::size_t>(nf) + 1);
    if (nf > 0) build(0, nf);
}

int TriangleBVH::build(int begin, int end) {
    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Box box, cbox;
    for (int i = begin; i < end; ++i) {
        box.grow(face_box_[order_[i]]);
        cbox.grow(0.5 * (face_box_[order_[i]].lo + face_box_[order_[i]].hi));
    }
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= 4) return id;
    int axis = 0;
    (cbox.hi - cbox.lo).maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         double ca = face_box_[a].lo[axis] + face_box_[a].hi[axis];
                         double cb = face_box_[b].lo[axis] + face_box_[b].hi[axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    int l = build(begin, mid);
    int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

TriangleBVH::Closest TriangleBVH::closest(const Vec3& p) const {
    Closest best;
    if (nodes_.empty()) return best;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes_[stack.back()];
        stack.pop_back();
        if (n.box.dist2(p) >= best.dist2) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                int f = order_[i];
                Vec3 q = closest_point_on_triangle(p, tri_[3 * f], tri_[3 * f + 1], tri_[3 * f + 2]);
                double d2 = (q - p).squaredNorm();
                if (d2 < best.dist2) best = {f, d2, q};
            }
            continue;
        }
        double dl = nodes_[n.left].box.dist2(p), dr = nodes_[n.right].box.dist2(p);
        if (dl < dr) {
            stack.push_back(n.right);
            stack.push_back(n.left);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return best;
}

void TriangleBVH::query(const Box& box, const std::function<void(int)>& visit) const {
    if (nodes_.empty()) return;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes_[stack.back()];
        stack.pop_back();
        if (!n.box.overlaps(box)) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i)
                if (face_box_[order_[i]].overlaps(box)) visit(order_[i]);
            continue;
        }
        stack.push_back(n.left);
        stack.push_back(n.right);
    }
}

std::vector<TriangleBVH::LineHit> TriangleBVH::line_hits(const Vec3& origin, const Vec3& dir,
                                                         double tmax) const {
    std::vector<LineHit> hits;
    Vec3 d = dir.normalized();
    Box seg;
    seg.grow(origin - tmax * d);
    seg.grow(origin + tmax * d);
    // The segment box is loose for oblique lines; exact test below.
    query(seg, [&](int f) {
        const Vec3& a = tri_[3 * f];
        Vec3 e1 = tri_[3 * f + 1] - a, e2 = tri_[3 * f + 2] - a;
        Vec3 pv = d.cross(e2);
        double det = e1.dot(pv);
        if (std::abs(det) < 1e-300) return;
        double inv = 1.0 / det;
        Vec3 tv = origin - a;
        double u = tv.dot(pv) * inv;
        constexpr double tol = 1e-10;
        if (u < -tol || u > 1 + tol) return;
        Vec3 qv = tv.cross(e1);
        double v = d.dot(qv) * inv;
        if (v < -tol || u + v > 1 + tol) return;
        double t = e2.dot(qv) * inv;
        if (std::abs(t) > tmax) return;
        Vec3 n = e1.cross(e2).normalized();
        hits.push_back({f, t, n.dot(d)});
    });
    std::sort(hits.begin(), hits.end(), [](const LineHit& a, const LineHit& b) {
        return a.t < b.t || (a.t == b.t && a.face < b.face);
    });
    return hits;
}

}  // namespace mcf
