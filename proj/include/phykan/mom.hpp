#pragma once

#include "phykan/em.hpp"
#include "phykan/mesh.hpp"

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace phykan::mom {

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetric Gauss rules on the reference triangle; orders 1, 3, 7, 13
// (degrees 1, 2, 5, 7). Points returned as barycentric triples with weights
// summing to 1.
struct TriQuadRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;
    static const TriQuadRule& of_order(int npts);
};

struct QuadratureSpec {
    int outer_order = 3;
    int inner_order = 7;
};

// RWG basis attached to interior edge `edge` of a mesh:
//   f(r) = +- l/(2A) (r - v_free) on T+/-, zero elsewhere.
struct RwgBasis {
    const mesh::TriMesh* m = nullptr;
    int edge = -1;

    Eigen::Vector3d eval(const Eigen::Vector3d& point, long tri) const;
    double surface_divergence(long tri) const;  // +- l/A, 0 off-support
};

struct ImpedanceMatrix {
    Eigen::MatrixXcd Z;  // complex-symmetric, ohms
    QuadratureSpec quad;
};

struct RwgSolution {
    Eigen::VectorXcd coefficients;                  // I_n per interior edge
    std::vector<Eigen::Vector3cd> element_currents; // A/m at centroids
    em::PlaneWave wave;
};

// Analytic potential integrals over triangle `tri` for observation r:
//   inv_r   = integral of 1/|r - r'| dS'
//   rho_inv = integral of (r' - rho)/|r - r'| dS', rho = in-plane projection of r
double analytic_inv_r(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                      const Eigen::Vector3d& obs);
Eigen::Vector3d analytic_rho_inv_r(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                   const Eigen::Vector3d& c, const Eigen::Vector3d& obs);

// Galerkin mixed-potential EFIE matrix; touching triangle pairs are handled
// by 1/R extraction with the analytic integrals above. The result is exactly
// complex-symmetric.
ImpedanceMatrix assemble_impedance(const mesh::TriMesh& m, const em::EmConstants& consts,
                                   const QuadratureSpec& quad = {});

// V_n = integral of f_n . E_inc over the edge's triangle pair.
Eigen::VectorXcd assemble_excitation(const mesh::TriMesh& m, const em::PlaneWave& wave,
                                     const em::EmConstants& consts, const QuadratureSpec& quad = {});

// Dense LU solve; checks the residual and diagnoses singular systems.
RwgSolution solve_mom(const ImpedanceMatrix& zmat, const Eigen::VectorXcd& v, const mesh::TriMesh& m,
                      const em::PlaneWave& wave);

// Evaluate the RWG expansion at element centroids.
std::vector<Eigen::Vector3cd> centroid_currents(const Eigen::VectorXcd& coefficients,
                                                const mesh::TriMesh& m);

// One full reference solve.
RwgSolution solve_plane_wave(const mesh::TriMesh& m, const em::PlaneWave& wave,
                             const em::EmConstants& consts, const QuadratureSpec& quad = {});

}  // namespace phykan::mom
