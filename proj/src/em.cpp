#include "phykan/em.hpp"

#include <cmath>

namespace phykan::em {

using Eigen::Matrix3cd;
using Eigen::Vector3cd;
using Eigen::Vector3d;
using namespace std::complex_literals;

EmConstants EmConstants::from_frequency(double f_hz) {
    if (!(f_hz > 0.0)) throw std::invalid_argument("frequency must be positive");
    EmConstants c;
    c.frequency = f_hz;
    c.omega = 2.0 * M_PI * f_hz;
    c.wavenumber = c.omega / speed_of_light;
    c.eta0 = mu0 * speed_of_light;
    return c;
}

Vector3d unit_radial(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vector3d unit_theta(double theta, double phi) {
    return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), -std::sin(theta)};
}

Vector3d unit_phi(double /*theta*/, double phi) { return {-std::sin(phi), std::cos(phi), 0.0}; }

PlaneWave PlaneWave::vertical(double theta, double phi, double amplitude) {
    PlaneWave w;
    w.theta = theta;
    w.phi = phi;
    w.polarization = unit_theta(theta, phi);
    w.amplitude = amplitude;
    return w;
}

std::complex<double> scalar_green(const Vector3d& p, const Vector3d& q, double k) {
    double r = (p - q).norm();
    if (!(r > 0.0)) throw SingularityError("scalar_green: coincident points");
    return std::exp(std::complex<double>(0.0, -k * r)) / (4.0 * M_PI * r);
}

Matrix3cd dyadic_green(const Vector3d& p, const Vector3d& q, const EmConstants& consts) {
    Vector3d d = p - q;
    double r = d.norm();
    if (!(r > 0.0)) throw SingularityError("dyadic_green: coincident points");
    const double k = consts.wavenumber;
    const std::complex<double> g = scalar_green(p, q, k);
    const std::complex<double> ikr_inv = 1.0i / (k * r);
    const double kr2_inv = 1.0 / (k * r * k * r);
    const std::complex<double> a = 1.0 - ikr_inv - kr2_inv;
    const std::complex<double> b = 1.0 - 3.0 * ikr_inv - 3.0 * kr2_inv;
    Vector3d rh = d / r;
    Matrix3cd out = Matrix3cd::Identity() * a - (rh * rh.transpose()).cast<std::complex<double>>() * b;
    return (-1.0i * consts.omega * mu0 * g) * out;
}

Vector3cd incident_field(const PlaneWave& wave, const Vector3d& p, const EmConstants& consts) {
    const std::complex<double> phase =
        std::exp(std::complex<double>(0.0, -consts.wavenumber * wave.direction().dot(p)));
    return wave.polarization.cast<std::complex<double>>() * (wave.amplitude * phase);
}

Vector3cd farfield_pattern(const mesh::TriMesh& m, const std::vector<Vector3cd>& currents,
                           double theta, double phi, const EmConstants& consts) {
    if (currents.size() != static_cast<size_t>(m.num_triangles()))
        throw std::invalid_argument("farfield_pattern: currents length " + std::to_string(currents.size()) +
                                    " does not match element count " + std::to_string(m.num_triangles()));
    const Vector3d rhat = unit_radial(theta, phi);
    Vector3cd acc = Vector3cd::Zero();
    for (long t = 0; t < m.num_triangles(); ++t) {
        const std::complex<double> ph =
            std::exp(std::complex<double>(0.0, consts.wavenumber * rhat.dot(m.element_centroids[t])));
        acc += m.element_areas[t] * ph * currents[t];
    }
    acc -= rhat.cast<std::complex<double>>() * rhat.cast<std::complex<double>>().dot(acc);
    return (-1.0i * consts.omega * mu0 / (4.0 * M_PI)) * acc;
}

std::vector<double> bistatic_rcs(const mesh::TriMesh& m, const std::vector<Vector3cd>& currents,
                                 const std::vector<std::pair<double, double>>& directions,
                                 const PlaneWave& wave, const EmConstants& consts) {
    if (!(wave.amplitude > 0.0)) throw std::invalid_argument("bistatic_rcs: incident amplitude must be > 0");
    std::vector<double> out;
    out.reserve(directions.size());
    for (const auto& [theta, phi] : directions) {
        Vector3cd eff = farfield_pattern(m, currents, theta, phi, consts);
        double sigma = 4.0 * M_PI * eff.squaredNorm() / (wave.amplitude * wave.amplitude);
        out.push_back(10.0 * std::log10(sigma));
    }
    return out;
}

}  // namespace phykan::em
