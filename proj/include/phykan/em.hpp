#pragma once

#include "phykan/mesh.hpp"

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

namespace phykan::em {

inline constexpr double speed_of_light = 299792458.0;
inline constexpr double mu0 = 4.0e-7 * M_PI;
inline constexpr double eps0 = 1.0 / (mu0 * speed_of_light * speed_of_light);

struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Time convention exp(+i w t) with kernel exp(-i k R); used consistently by
// the solver, the residual loss, and the far-field integral.
struct EmConstants {
    double frequency = 0.0;  // Hz
    double wavenumber = 0.0; // rad/m
    double omega = 0.0;      // rad/s
    double eta0 = 0.0;       // ohms

    static EmConstants from_frequency(double f_hz);
    double wavelength() const { return speed_of_light / frequency; }
};

// spherical frame helpers, theta from +z, phi from +x
Eigen::Vector3d unit_radial(double theta, double phi);
Eigen::Vector3d unit_theta(double theta, double phi);
Eigen::Vector3d unit_phi(double theta, double phi);

struct PlaneWave {
    double theta = 0.0, phi = 0.0;        // propagation angles (radians)
    Eigen::Vector3d polarization{1, 0, 0}; // unit, orthogonal to direction
    double amplitude = 1.0;                // V/m

    Eigen::Vector3d direction() const { return unit_radial(theta, phi); }

    // theta-hat polarized ("vertical") wave
    static PlaneWave vertical(double theta, double phi, double amplitude = 1.0);
};

// g(R) = exp(-i k R) / (4 pi R)
std::complex<double> scalar_green(const Eigen::Vector3d& p, const Eigen::Vector3d& q, double k);

// Free-space dyadic kernel mapping a current moment (A*m) at q to the field
// contribution (V/m) at p:
//   G = -i w mu0 g(R) [ (1 - i/(kR) - 1/(kR)^2) I - (1 - 3i/(kR) - 3/(kR)^2) RR^T ]
Eigen::Matrix3cd dyadic_green(const Eigen::Vector3d& p, const Eigen::Vector3d& q,
                              const EmConstants& consts);

Eigen::Vector3cd incident_field(const PlaneWave& wave, const Eigen::Vector3d& p,
                                const EmConstants& consts);

// r-normalized transverse far field of per-element centroid currents:
//   E(rhat) = -(i w mu0 / 4 pi) sum_k A_k (I - rhat rhat^T) J_k exp(+i k rhat.p_k)
Eigen::Vector3cd farfield_pattern(const mesh::TriMesh& m, const std::vector<Eigen::Vector3cd>& currents,
                                  double theta, double phi, const EmConstants& consts);

// sigma = 4 pi |E_ff|^2 / |E_inc|^2, reported as 10 log10(sigma / 1 m^2)
std::vector<double> bistatic_rcs(const mesh::TriMesh& m, const std::vector<Eigen::Vector3cd>& currents,
                                 const std::vector<std::pair<double, double>>& directions,
                                 const PlaneWave& wave, const EmConstants& consts);

}  // namespace phykan::em
