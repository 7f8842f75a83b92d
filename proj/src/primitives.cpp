#include "mcflab/primitives.hpp"

#include <map>

namespace mcf {

namespace {

TriMesh build_multi(std::vector<Vec3> v, std::vector<Face> f) {
    BuildOptions o;
    o.allow_multi = true;
    return TriMesh::build(std::move(v), std::move(f), o);
}

}  // namespace

TriMesh icosphere(int level, double radius, const Vec3& center) {
    require(level >= 0 && radius > 0, ErrorCode::InvalidArgument, "icosphere parameters");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (Vec3& p : v) p.normalize();
    std::vector<Face> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto k = std::minmax(a, b);
            auto it = mid.find(k);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            int id = static_cast<int>(v.size()) - 1;
            mid.emplace(k, id);
            return id;
        };
        std::vector<Face> nf;
        nf.reserve(f.size() * 4);
        for (const Face& tri : f) {
            int a = midpoint(tri[0], tri[1]);
            int b = midpoint(tri[1], tri[2]);
            int c = midpoint(tri[2], tri[0]);
            nf.push_back({tri[0], a, c});
            nf.push_back({tri[1], b, a});
            nf.push_back({tri[2], c, b});
            nf.push_back({a, b, c});
        }
        f.swap(nf);
    }
    for (Vec3& p : v) p = center + radius * p;
    return TriMesh::build(std::move(v), std::move(f));
}

TriMesh plane_patch(double half, int n, double height) {
    require(half > 0 && n >= 1, ErrorCode::InvalidArgument, "plane_patch parameters");
    std::vector<Vec3> v;
    std::vector<Face> f;
    v.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            v.emplace_back(-half + 2 * half * i / n, -half + 2 * half * j / n, height);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return TriMesh::build(std::move(v), std::move(f));
}

TriMesh tube(double radius, double half_length, int n_around, int n_along) {
    require(radius > 0 && half_length > 0 && n_around >= 3 && n_along >= 1,
            ErrorCode::InvalidArgument, "tube parameters");
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int j = 0; j <= n_along; ++j) {
        double z = -half_length + 2 * half_length * j / n_along;
        // Staggered rings keep the triangles close to equilateral.
        double shift = (j % 2) * kPi / n_around;
        for (int i = 0; i < n_around; ++i) {
            double a = 2 * kPi * i / n_around + shift;
            v.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        }
    }
    auto id = [n_around](int i, int j) { return j * n_around + (i % n_around); };
    for (int j = 0; j < n_along; ++j) {
        for (int i = 0; i < n_around; ++i) {
            if (j % 2 == 0) {
                f.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                f.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            } else {
                f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
                f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            }
        }
    }
    return TriMesh::build(std::move(v), std::move(f));
}

TriMesh capsule(double radius, double half_length, int n_around, int n_along, int n_cap) {
    require(radius > 0 && half_length > 0 && n_around >= 3 && n_along >= 1 && n_cap >= 1,
            ErrorCode::InvalidArgument, "capsule parameters");
    // Profile from the south pole to the north pole: (ring radius, z).
    std::vector<std::pair<double, double>> prof;
    for (int k = 1; k <= n_cap; ++k) {
        double phi = -kPi / 2 + (kPi / 2) * k / n_cap;
        prof.emplace_back(radius * std::cos(phi), -half_length + radius * std::sin(phi));
    }
    for (int j = 1; j <= n_along; ++j)
        prof.emplace_back(radius, -half_length + 2 * half_length * j / n_along);
    for (int k = 1; k < n_cap; ++k) {
        double phi = (kPi / 2) * k / n_cap;
        prof.emplace_back(radius * std::cos(phi), half_length + radius * std::sin(phi));
    }
    std::vector<Vec3> v{{0, 0, -half_length - radius}};
    std::vector<Face> f;
    const int rings = static_cast<int>(prof.size());
    for (int j = 0; j < rings; ++j) {
        double shift = (j % 2) * kPi / n_around;
        for (int i = 0; i < n_around; ++i) {
            double a = 2 * kPi * i / n_around + shift;
            v.emplace_back(prof[j].first * std::cos(a), prof[j].first * std::sin(a), prof[j].second);
        }
    }
    v.emplace_back(0, 0, half_length + radius);
    const int south = 0, north = static_cast<int>(v.size()) - 1;
    auto id = [n_around](int i, int j) { return 1 + j * n_around + (i % n_around); };
    for (int i = 0; i < n_around; ++i) f.push_back({south, id(i + 1, 0), id(i, 0)});
    for (int j = 0; j + 1 < rings; ++j) {
        for (int i = 0; i < n_around; ++i) {
            if (j % 2 == 0) {
                f.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                f.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            } else {
                f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
                f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            }
        }
    }
    for (int i = 0; i < n_around; ++i) f.push_back({north, id(i, rings - 1), id(i + 1, rings - 1)});
    return TriMesh::build(std::move(v), std::move(f));
}

TriMesh torus(double major, double minor, int n_major, int n_minor) {
    require(major > minor && minor > 0 && n_major >= 3 && n_minor >= 3,
            ErrorCode::InvalidArgument, "torus parameters");
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int j = 0; j < n_major; ++j) {
        double u = 2 * kPi * j / n_major;
        for (int i = 0; i < n_minor; ++i) {
            double w = 2 * kPi * i / n_minor;
            double rr = major + minor * std::cos(w);
            v.emplace_back(rr * std::cos(u), rr * std::sin(u), minor * std::sin(w));
        }
    }
    auto id = [&](int i, int j) { return (j % n_major) * n_minor + (i % n_minor); };
    for (int j = 0; j < n_major; ++j) {
        for (int i = 0; i < n_minor; ++i) {
            f.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
        }
    }
    return TriMesh::build(std::move(v), std::move(f));
}

TriMesh merge(const std::vector<TriMesh>& parts) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (const TriMesh& m : parts) {
        const int off = static_cast<int>(v.size());
        v.insert(v.end(), m.positions().begin(), m.positions().end());
        for (Face t : m.faces()) {
            for (int& i : t) i += off;
            f.push_back(t);
        }
    }
    return build_multi(std::move(v), std::move(f));
}

TriMesh transformed(const TriMesh& mesh, const std::function<Vec3(const Vec3&)>& map) {
    std::vector<Vec3> v;
    v.reserve(mesh.num_vertices());
    for (const Vec3& p : mesh.positions()) v.push_back(map(p));
    TriMesh out = mesh;
    out.set_positions(std::move(v));
    return out;
}

}  // namespace mcf
