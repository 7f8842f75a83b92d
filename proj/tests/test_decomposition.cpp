#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mcflab/decomposition.hpp"
#include "mcflab/primitives.hpp"

using namespace mcf;

namespace {

BallDecomposition run(const TriMesh& m, double eps, double R, int res, DecomposeOptions o = {}) {
    return decompose(m, compute_geometry(m), eps, R, res, o);
}

TriMesh slab(double z_lo, double z_hi, double half) {
    return merge({plane_patch(half, 24, z_lo), plane_patch(half, 24, z_hi)});
}

bool thick_touches_thin(const BallDecomposition& d) {
    const int n = d.res;
    auto bad = [](VoxelLabel p, VoxelLabel q) {
        return (p == VoxelLabel::Thick && q == VoxelLabel::Thin) ||
               (p == VoxelLabel::Thin && q == VoxelLabel::Thick);
    };
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                VoxelLabel p = d.at(i, j, k);
                if (i + 1 < n && bad(p, d.at(i + 1, j, k))) return true;
                if (j + 1 < n && bad(p, d.at(i, j + 1, k))) return true;
                if (k + 1 < n && bad(p, d.at(i, j, k + 1))) return true;
            }
    return false;
}

}  // namespace

TEST(Decompose, SinglePlaneHasNoThinPart) {
    BallDecomposition d = run(plane_patch(1.2, 30), 0.1, 1.0, 80);
    EXPECT_TRUE(d.S.empty());
    EXPECT_EQ(d.vol_high, 0.0);
    EXPECT_LE(d.vol_thin, 2 * kPi * d.voxel);
}

TEST(Decompose, TwoSheetSlabIsThin) {
    const double dsep = 0.05, R = 0.5;
    BallDecomposition d = run(slab(-0.025, 0.025, 0.6), 0.2, R, 256);
    EXPECT_NEAR(d.vol_thin, dsep * kPi * R * R, 0.1 * dsep * kPi * R * R);
}

TEST(Decompose, TinySphereIsHighCurvature) {
    TriMesh s = icosphere(3, 0.01);
    BallDecomposition d = run(s, 0.1, 1.0, 80);
    EXPECT_EQ(static_cast<int>(d.S.size()), s.num_vertices());
    const int c = d.res / 2;
    for (int dk : {-1, 0})
        for (int dj : {-1, 0})
            for (int di : {-1, 0}) EXPECT_EQ(d.at(c + di, c + dj, c + dk), VoxelLabel::High);
}

TEST(Decompose, TooCoarseRejected) {
    EXPECT_THROW(run(plane_patch(1.2, 10), 0.1, 1.0, 64), Error);
    EXPECT_THROW(run(plane_patch(1.2, 10), 0.1, 1.0, 16), Error);
}

TEST(Decompose, LabelsPartitionTheBall) {
    for (const TriMesh& m : {torus(0.5, 0.2, 40, 20), icosphere(3, 0.3), slab(-0.1, 0.05, 1.0)}) {
        BallDecomposition d = run(m, 0.15, 0.8, 64);
        double total = d.vol_high + d.vol_thick + d.vol_thin + d.vol_near;
        double vv = std::pow(d.voxel, 3);
        EXPECT_NEAR(total, 4.0 / 3.0 * kPi * std::pow(0.8, 3), vv * d.boundary_voxels);
        for (int v : d.S) {
            const MeshGeometry g = compute_geometry(m);
            EXPECT_GT(std::sqrt(g.A2(v)), 1 / 0.15);
            EXPECT_LT(m.position(v).norm(), 0.8);
        }
        EXPECT_FALSE(thick_touches_thin(d));
    }
}

TEST(Decompose, HighPartMonotoneInThreshold) {
    TriMesh m = torus(0.5, 0.12, 60, 30);
    double prev = -1;
    for (double thr : {12.0, 9.0, 6.0, 3.0}) {
        DecomposeOptions o;
        o.curvature_threshold = thr;
        BallDecomposition d = run(m, 0.12, 0.9, 64, o);
        EXPECT_GE(d.vol_high, prev);
        prev = d.vol_high;
    }
    EXPECT_GT(prev, 0.0);
}

TEST(Decompose, SlabConvergesUnderRefinement) {
    const double dsep = 0.05, R = 0.5, exact = dsep * kPi * R * R;
    double err[2] = {0, 0};
    const int res[2] = {64, 128};
    const double h0 = 2 * R / res[0];
    for (int s = 0; s < 8; ++s) {
        double z = (s + 0.5) / 8 * h0;
        for (int r = 0; r < 2; ++r) {
            BallDecomposition d = run(slab(z - dsep / 2, z + dsep / 2, 0.6), 0.2, R, res[r]);
            err[r] += std::abs(d.vol_thin - exact) / 8;
        }
    }
    EXPECT_NEAR(err[0] / err[1], 2.0, 0.5);
}

TEST(Decompose, RleRoundTripsCounts) {
    BallDecomposition d = run(icosphere(2, 0.4), 0.2, 0.6, 32);
    std::string rle = encode_rle(d);
    std::istringstream in(rle);
    int res;
    in >> res;
    EXPECT_EQ(res, 32);
    long total = 0;
    int label, count;
    while (in >> label >> count) total += count;
    EXPECT_EQ(total, 32L * 32 * 32);
}

TEST(TriangleBox, Overlap) {
    Vec3 c = Vec3::Zero(), h = Vec3::Constant(0.5);
    EXPECT_TRUE(triangle_box_overlap(c, h, Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0)));
    EXPECT_FALSE(triangle_box_overlap(c, h, Vec3(-1, -1, 0.6), Vec3(1, -1, 0.6), Vec3(0, 1, 0.6)));
    // Diagonal plane cutting off a corner region without touching the box.
    EXPECT_FALSE(triangle_box_overlap(c, h, Vec3(2, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 2)));
    EXPECT_TRUE(triangle_box_overlap(c, h, Vec3(1.4, 0, 0), Vec3(0, 1.4, 0), Vec3(0, 0, 1.4)));
}

TEST(FOfT, Examples) {
    TimeSeries c{{0, 1, 2, 3}, {3, 3, 3, 3}};
    EXPECT_EQ(f_of_t(c, 2.5, 1.0), 3.0);
    TimeSeries lin;
    for (int i = 0; i <= 100; ++i) {
        lin.t.push_back(i / 100.0);
        lin.value.push_back(i / 100.0);
    }
    EXPECT_DOUBLE_EQ(f_of_t(lin, 1.0, 0.5), 0.5);

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    TimeSeries dec;
    for (int i = 0; i <= 50; ++i) {
        dec.t.push_back(0.1 * i);
        dec.value.push_back(5 - 0.1 * i + noise(rng));
    }
    double m = 1e9;
    for (int i = 20; i <= 30; ++i) m = std::min(m, dec.value[i]);
    EXPECT_EQ(f_of_t(dec, 3.0, 1.0), m);
    EXPECT_THROW(f_of_t(dec, 0.5, 1.0), Error);
    EXPECT_THROW(f_of_t(dec, 6.0, 0.1), Error);
}

TEST(SelectTimes, ExponentialAndSpike) {
    auto ex = [](double t) { return std::exp(-t); };
    Selection s = select_times(ex, 0.0, 1.0, 3, 20.0, 0.01);
    ASSERT_TRUE(s.complete);
    EXPECT_NEAR(s.times[0], 1.01, 1e-12);
    EXPECT_NEAR(s.times[1], 3.01, 1e-9);

    auto spike = [](double t) { return std::abs(t - 1.5) < 1e-9 ? 3 * std::exp(-t / 10) : std::exp(-t / 10); };
    Selection p = select_times(spike, 0.0, 1.0, 1, 10.0, 0.01);
    ASSERT_TRUE(p.complete);
    EXPECT_NEAR(p.times[0], 1.5, 1e-9);

    Selection z = select_times([](double) { return 0.0; }, 0.0, 1.0, 1, 10.0, 0.01);
    EXPECT_FALSE(z.complete);
    EXPECT_EQ(z.message, "no positive start found");

    Selection short_h = select_times(ex, 0.0, 1.0, 50, 20.0, 0.01);
    EXPECT_FALSE(short_h.complete);
    EXPECT_FALSE(short_h.times.empty());
}

TEST(SelectTimes, WindowPropertyOnRandomSpikes) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        TimeSeries f;
        std::uniform_real_distribution<double> u(0, 1);
        for (int i = 0; i <= 4000; ++i) {
            double t = 0.01 * i;
            double v = std::exp(-t / 8) * (1 + 0.2 * u(rng));
            if (u(rng) < 0.01) v *= 2 + 4 * u(rng);
            f.t.push_back(t);
            f.value.push_back(v);
        }
        const double l = 0.5 + u(rng);
        Selection s = select_times(f, 0.3, l, 6);
        ASSERT_FALSE(s.times.empty());
        for (std::size_t a = 0; a < s.times.size(); ++a) {
            int i = s.indices[a];
            for (std::size_t j = i; j < f.t.size() && f.t[j] <= f.t[i] + l; ++j)
                EXPECT_LE(f.value[j], 2 * f.value[i]);
            if (a > 0) EXPECT_GT(s.times[a], s.times[a - 1] + l);
        }
    }
}
