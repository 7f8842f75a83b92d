#pragma once

#include <functional>
#include <vector>

#include "mcflab/trimesh.hpp"

namespace mcf {

// Subdivided icosahedron projected to the sphere; level L has 10*4^L + 2 vertices.
TriMesh icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero());

// Square [-half, half]^2 in the plane z = height, n cells per side.
TriMesh plane_patch(double half, int n, double height = 0.0);

// Open tube x^2 + y^2 = r^2, |z| <= half_length.
TriMesh tube(double radius, double half_length, int n_around, int n_along);

// Tube closed by hemispherical caps.
TriMesh capsule(double radius, double half_length, int n_around, int n_along, int n_cap);

TriMesh torus(double major, double minor, int n_major, int n_minor);

// Disjoint union (multi-component).
TriMesh merge(const std::vector<TriMesh>& parts);

TriMesh transformed(const TriMesh& mesh, const std::function<Vec3(const Vec3&)>& map);

}  // namespace mcf
