#pragma once

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "mcflab/geometry.hpp"

namespace mcf {

// Q(phi) = sum_f (|grad phi|^2 - (1/2 + |A|^2) phi^2) e^{-|x_c|^2/4} over faces, with
// P1 gradients, exact P1 mass and |A|^2, weight at face centroids. Only faces
// whose vertices are all in the mask (if given) contribute.
double quadratic_form(const TriMesh& mesh, const MeshGeometry& g, const std::vector<double>& phi,
                      double R, const std::vector<char>* mask = nullptr);

// int phi^2 e^{-|x|^2/4} with the same quadrature.
double weighted_norm2(const TriMesh& mesh, const std::vector<double>& phi,
                      const std::vector<char>* mask = nullptr);

struct FormMatrices {
    Eigen::SparseMatrix<double> K;  // Q(phi) = phi^T K phi
    Eigen::SparseMatrix<double> M;  // weighted L2
    double potential_max = 0.0;     // max of 1/2 + |A|^2 over contributing faces
};

FormMatrices assemble_form(const TriMesh& mesh, const MeshGeometry& g,
                           const std::vector<char>* mask = nullptr);

struct RayleighResult {
    double lambda = 0.0;
    std::vector<double> phi;  // unit weighted norm, zero outside B_R
    int iterations = 0;
};

// Smallest Q(phi)/|phi|^2 over phi vanishing at vertices with |x| >= R, by
// shifted inverse power iteration on K phi = lambda M phi.
RayleighResult min_rayleigh(const TriMesh& mesh, const MeshGeometry& g, double R,
                            double tol = 1e-8, int max_iter = 20000,
                            const std::vector<char>* mask = nullptr);

// eta(s) = log rho / log s on (0, rho), 1 beyond.
double log_eta(double s, double rho);
// Cubic smoothstep from 0 at delta/2 to 1 at delta; |beta'| <= 3/delta.
double cutoff_beta(double s, double delta);

// Frozen constant of the energy bound C (1/|log rho| + |log rho|^2 / |log delta|).
inline constexpr double kLogCutoffConstant = 2 * kPi;
double log_cutoff_bound(double delta, double rho, int points = 1);

struct CutoffField {
    std::vector<double> f;
    double energy = 0.0;
    double bound = 0.0;
    bool within_bound = true;
};

// f = prod_k eta(r_k) beta(r_k) with r_k the intrinsic distance to the k-th point;
// energy = int |grad f|^2 e^{-|x|^2/4} with P1 gradients.
CutoffField log_cutoff(const TriMesh& mesh, const std::vector<Vec3>& points, double delta,
                       double rho);

// The same energy for one point at the origin of the plane, by Gauss-Legendre
// quadrature of 2 pi int (f')^2 e^{-s^2/4} s ds in log s.
double radial_cutoff_energy(double delta, double rho);

struct Witness {
    std::vector<double> phi;
    double Q = 0.0;
    std::string method;  // "cutoff-constant" or "min-rayleigh"
};

// phi = 1 on B_{R/2}, smoothstep to 0 at R; falls back to the Rayleigh minimiser.
Witness instability_witness(const TriMesh& mesh, const MeshGeometry& g, double R,
                            const std::vector<char>* mask = nullptr);

}  // namespace mcf
