#include "mcflab/mesh_query.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace mcf {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

double sector(const Vec2& a, const Vec2& b, double r) {
    return 0.5 * r * r * std::atan2(cross2(a, b), a.dot(b));
}

// Signed area of disk(0, r) ∩ triangle(0, a, b).
double wedge_disk_area(const Vec2& a, const Vec2& b, double r) {
    const double r2 = r * r;
    const bool ain = a.squaredNorm() <= r2, bin = b.squaredNorm() <= r2;
    if (ain && bin) return 0.5 * cross2(a, b);
    Vec2 d = b - a;
    double A = d.squaredNorm(), B = a.dot(d), C = a.squaredNorm() - r2;
    double disc = B * B - A * C;
    if (A == 0) return 0.0;
    if (disc <= 0) return sector(a, b, r);
    double s = std::sqrt(disc);
    double t1 = (-B - s) / A, t2 = (-B + s) / A;
    if (ain) {
        Vec2 p = a + t2 * d;
        return 0.5 * cross2(a, p) + sector(p, b, r);
    }
    if (bin) {
        Vec2 p = a + t1 * d;
        return sector(a, p, r) + 0.5 * cross2(p, b);
    }
    if (t1 > 0 && t2 < 1) {
        Vec2 p1 = a + t1 * d, p2 = a + t2 * d;
        return sector(a, p1, r) + 0.5 * cross2(p1, p2) + sector(p2, b, r);
    }
    return sector(a, b, r);
}

bool face_meets_ball(const TriMesh& m, int f, const Vec3& c, double r) {
    const Face& t = m.face(f);
    Vec3 q = closest_point_on_triangle(c, m.position(t[0]), m.position(t[1]), m.position(t[2]));
    return (q - c).squaredNorm() < r * r;
}

}  // namespace

double triangle_ball_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& center,
                          double r) {
    Vec3 n = (b - a).cross(c - a);
    double twice = n.norm();
    if (twice == 0) return 0.0;
    n /= twice;
    double far2 = std::max({(a - center).squaredNorm(), (b - center).squaredNorm(),
                            (c - center).squaredNorm()});
    if (far2 <= r * r) return 0.5 * twice;
    Vec3 q = closest_point_on_triangle(center, a, b, c);
    if ((q - center).squaredNorm() >= r * r) return 0.0;
    double h = n.dot(center - a);
    double rho = std::sqrt(r * r - h * h);
    Vec3 c0 = center - h * n;
    Vec3 e1 = (b - a).normalized();
    Vec3 e2 = n.cross(e1);
    auto to2 = [&](const Vec3& p) { return Vec2((p - c0).dot(e1), (p - c0).dot(e2)); };
    Vec2 pa = to2(a), pb = to2(b), pc = to2(c);
    double s = wedge_disk_area(pa, pb, rho) + wedge_disk_area(pb, pc, rho) +
               wedge_disk_area(pc, pa, rho);
    return std::clamp(std::abs(s), 0.0, 0.5 * twice);
}

double area_in_ball(const TriMesh& mesh, const Vec3& center, double r) {
    if (r <= 0) return 0.0;
    double total = 0.0;
    for (const Face& t : mesh.faces())
        total += triangle_ball_area(mesh.position(t[0]), mesh.position(t[1]),
                                    mesh.position(t[2]), center, r);
    return total;
}

std::vector<int> component_in_ball(const TriMesh& mesh, int seed, const Vec3& center, double r) {
    require(seed >= 0 && seed < mesh.num_vertices(), ErrorCode::InvalidArgument, "seed index");
    require((mesh.position(seed) - center).norm() < r, ErrorCode::Precondition,
            "seed vertex outside ball");
    std::vector<char> seen(mesh.num_faces(), 0);
    std::queue<int> q;
    for (int f : mesh.vertex_faces(seed)) {
        seen[f] = 1;
        q.push(f);
    }
    std::vector<int> out;
    while (!q.empty()) {
        int f = q.front();
        q.pop();
        out.push_back(f);
        for (int k = 0; k < 3; ++k) {
            int h = 3 * f + k;
            int tw = mesh.twin(h);
            if (tw < 0 || seen[tw / 3]) continue;
            if (segment_point_dist2(center, mesh.position(mesh.origin(h)),
                                    mesh.position(mesh.target(h))) >= r * r)
                continue;
            seen[tw / 3] = 1;
            q.push(tw / 3);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double area_ratio_sup(const TriMesh& mesh, const Vec3& p, double r_lo, double r_hi, int samples) {
    double best = 0.0;
    for (int i = 0; i < samples; ++i) {
        double s = samples == 1 ? 0.0 : static_cast<double>(i) / (samples - 1);
        double r = r_lo * std::pow(r_hi / r_lo, s);
        best = std::max(best, area_in_ball(mesh, p, r) / (kPi * r * r));
    }
    return best;
}

int clipped_genus(const TriMesh& mesh, const Vec3& center, double r) {
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (std::abs((mesh.position(v) - center).norm() - r) < 1e-9 * r) {
            r *= 1.0 + 1e-6;
            break;
        }
    }
    std::vector<char> in(mesh.num_faces(), 0);
    int F = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        in[f] = face_meets_ball(mesh, f, center, r);
        F += in[f];
    }
    if (F == 0) return 0;
    std::vector<char> vused(mesh.num_vertices(), 0);
    int V = 0, E = 0;
    std::vector<std::pair<int, int>> boundary;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        if (!in[f]) continue;
        for (int v : mesh.face(f))
            if (!vused[v]) {
                vused[v] = 1;
                ++V;
            }
    }
    for (int e = 0; e < mesh.num_edges(); ++e) {
        int h = mesh.edges()[e].he;
        int tw = mesh.twin(h);
        int c = in[h / 3] + (tw >= 0 ? in[tw / 3] : 0);
        if (c == 0) continue;
        ++E;
        if (c == 1) boundary.emplace_back(mesh.edges()[e].v0, mesh.edges()[e].v1);
    }
    // Components of the face set and boundary loops, both by union-find.
    std::vector<int> parent(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int f = 0; f < mesh.num_faces(); ++f) {
        if (!in[f]) continue;
        const Face& t = mesh.face(f);
        parent[find(t[1])] = find(t[0]);
        parent[find(t[2])] = find(t[0]);
    }
    std::set<int> comps;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (vused[v]) comps.insert(find(v));
    for (int i = 0; i < mesh.num_vertices(); ++i) parent[i] = i;
    std::set<int> bverts;
    for (auto [a, b] : boundary) {
        parent[find(b)] = find(a);
        bverts.insert(a);
        bverts.insert(b);
    }
    std::set<int> loops;
    for (int v : bverts) loops.insert(find(v));
    const int chi = V - E + F;
    const int c = static_cast<int>(comps.size());
    const int b = static_cast<int>(loops.size());
    return std::max(0, (2 * c - chi - b) / 2);
}

GeodesicGraph::GeodesicGraph(const TriMesh& mesh, int steiner_per_edge)
    : mesh_(&mesh), k_(steiner_per_edge), bvh_(mesh) {
    require(mesh.num_vertices() > 0, ErrorCode::InvalidArgument, "empty mesh");
}

Vec3 GeodesicGraph::node_position(int node) const {
    const int nv = mesh_->num_vertices();
    if (node < nv) return mesh_->position(node);
    int e = (node - nv) / k_, j = (node - nv) % k_;
    const Edge& ed = mesh_->edges()[e];
    double s = static_cast<double>(j + 1) / (k_ + 1);
    return (1 - s) * mesh_->position(ed.v0) + s * mesh_->position(ed.v1);
}

void GeodesicGraph::face_nodes(int f, std::vector<int>& out) const {
    out.clear();
    const int nv = mesh_->num_vertices();
    for (int k = 0; k < 3; ++k) {
        out.push_back(mesh_->face(f)[k]);
        int e = mesh_->edge_of(3 * f + k);
        for (int j = 0; j < k_; ++j) out.push_back(nv + e * k_ + j);
    }
}

std::vector<double> GeodesicGraph::run(const std::vector<std::pair<int, double>>& seeds) const {
    const int nv = mesh_->num_vertices();
    const int total = nv + mesh_->num_edges() * k_;
    std::vector<double> dist(total, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (auto [n, d] : seeds) {
        if (d < dist[n]) {
            dist[n] = d;
            pq.emplace(d, n);
        }
    }
    std::vector<int> nodes, faces;
    while (!pq.empty()) {
        auto [d, n] = pq.top();
        pq.pop();
        if (d > dist[n]) continue;
        faces.clear();
        if (n < nv) {
            for (int f : mesh_->vertex_faces(n)) faces.push_back(f);
        } else {
            int h = mesh_->edges()[(n - nv) / k_].he;
            faces.push_back(h / 3);
            if (mesh_->twin(h) >= 0) faces.push_back(mesh_->twin(h) / 3);
        }
        const Vec3 p = node_position(n);
        for (int f : faces) {
            face_nodes(f, nodes);
            for (int m : nodes) {
                if (m == n) continue;
                double nd = d + (node_position(m) - p).norm();
                if (nd < dist[m]) {
                    dist[m] = nd;
                    pq.emplace(nd, m);
                }
            }
        }
    }
    dist.resize(nv);
    return dist;
}

std::vector<double> GeodesicGraph::from_vertex(int source) const {
    require(source >= 0 && source < mesh_->num_vertices(), ErrorCode::InvalidArgument,
            "source index");
    return run({{source, 0.0}});
}

std::vector<double> GeodesicGraph::from_point(const Vec3& p) const {
    auto c = bvh_.closest(p);
    require(c.face >= 0, ErrorCode::InvalidArgument, "empty mesh");
    std::vector<int> nodes;
    face_nodes(c.face, nodes);
    std::vector<std::pair<int, double>> seeds;
    for (int n : nodes) seeds.emplace_back(n, (node_position(n) - c.point).norm());
    return run(seeds);
}

std::vector<double> intrinsic_distance(const TriMesh& mesh, int source,
                                       const std::vector<int>& targets) {
    GeodesicGraph g(mesh);
    std::vector<double> all = g.from_vertex(source);
    std::vector<double> out;
    out.reserve(targets.size());
    for (int t : targets) {
        require(t >= 0 && t < mesh.num_vertices(), ErrorCode::InvalidArgument, "target index");
        if (!std::isfinite(all[t]))
            fail(ErrorCode::Disconnected, "target " + std::to_string(t) + " not reachable");
        out.push_back(all[t]);
    }
    return out;
}

double reach_estimate(const TriMesh& mesh, const MeshGeometry& g, const TriangleBVH& bvh, int v,
                      const ReachOptions& opts) {
    double cap = opts.cap;
    if (!std::isfinite(cap)) {
        Box b;
        for (const Vec3& p : mesh.positions()) b.grow(p);
        cap = 10.0 * (b.hi - b.lo).norm();
    }
    const Vec3& x = mesh.position(v);
    const Vec3& n = g.normal(v);
    // Faces through x tilt away from the vertex normal; a tangent ball of any
    // radius then sits at distance r*cos(tilt) from them.
    double slack = opts.slack;
    for (int f : mesh.vertex_faces(v)) slack = std::max(slack, 1.5 * (1.0 - n.dot(g.face_normal[f])));
    auto side_ok = [&](double r, double s) {
        auto c = bvh.closest(x + s * r * n);
        return std::sqrt(c.dist2) >= r * (1.0 - slack);
    };
    auto side = [&](double s) {
        if (side_ok(cap, s)) return cap;
        double lo = 0.0, hi = cap;
        while (hi - lo > opts.resolution * std::max(lo, 1e-12 * cap)) {
            double mid = 0.5 * (lo + hi);
            (side_ok(mid, s) ? lo : hi) = mid;
        }
        return lo;
    };
    return std::min(side(1.0), side(-1.0));
}

GraphRadius graph_radius(const TriMesh& mesh, const MeshGeometry& g, int v, double r0,
                         double curvature_slack) {
    require(r0 > 0, ErrorCode::InvalidArgument, "r0 must be positive");
    const Vec3& x = mesh.position(v);
    std::vector<int> comp = component_in_ball(mesh, v, x, r0);
    std::vector<char> in_comp(mesh.num_faces(), 0);
    for (int f : comp) {
        in_comp[f] = 1;
        for (int w : mesh.face(f)) {
            if ((mesh.position(w) - x).norm() >= r0 || !g.interior[w]) continue;
            if (g.principal_max(w) > (1.0 + curvature_slack) / r0)
                fail(ErrorCode::Curvature,
                     "|A| exceeds 1/r0 at vertex " + std::to_string(w));
        }
    }

    const Vec3& n = g.normal(v);
    const double rho = r0 / 96.0;
    auto flat = [&](const Vec3& p) {
        Vec3 d = p - x;
        return Vec3(d - d.dot(n) * n);
    };
    auto meets_cylinder = [&](int f) {
        const Face& t = mesh.face(f);
        Vec3 q = closest_point_on_triangle(Vec3::Zero(), flat(mesh.position(t[0])),
                                           flat(mesh.position(t[1])), flat(mesh.position(t[2])));
        return q.norm() < rho;
    };

    GraphRadius out;
    out.radius = rho;
    std::vector<char> seen(mesh.num_faces(), 0);
    std::queue<int> q;
    for (int f : mesh.vertex_faces(v)) {
        seen[f] = 1;
        q.push(f);
    }
    while (!q.empty()) {
        int f = q.front();
        q.pop();
        ++out.faces;
        double c = g.face_normal[f].dot(n);
        if (c <= 0)
            fail(ErrorCode::GraphTest, "projection folds at face " + std::to_string(f));
        Vec3 cen = (mesh.position(mesh.face(f)[0]) + mesh.position(mesh.face(f)[1]) +
                    mesh.position(mesh.face(f)[2])) / 3.0;
        double slope = std::sqrt(std::max(0.0, 1.0 - c * c)) / c;
        double rad = flat(cen).norm();
        if (rad > 0) out.max_slope = std::max(out.max_slope, slope / rad);
        for (int k = 0; k < 3; ++k) {
            int tw = mesh.twin(3 * f + k);
            if (tw < 0 || seen[tw / 3] || !in_comp[tw / 3]) continue;
            if (!meets_cylinder(tw / 3)) continue;
            seen[tw / 3] = 1;
            q.push(tw / 3);
        }
    }
    return out;
}

}  // namespace mcf
