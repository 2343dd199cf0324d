#pragma once

// Mie-series oracle for scattering from a perfectly conducting sphere.
// Completely independent of the solver: spherical Bessel functions from the
// standard library, Riccati forms via recurrence. Conventions follow the
// classical series with exp(-iwt)/exp(+ikr); RCS is modulus-only so the
// choice cannot leak into comparisons against the solver.

#include <cmath>
#include <complex>
#include <vector>

namespace phykan::testing {

struct MieSeries {
    double x = 0.0;  // ka
    std::vector<std::complex<double>> a, b;

    MieSeries(double radius, double k) {
        x = k * radius;
        int nmax = static_cast<int>(std::ceil(x + 4.0 * std::cbrt(x) + 4.0)) + 2;
        a.resize(nmax + 1);
        b.resize(nmax + 1);
        for (int n = 1; n <= nmax; ++n) {
            double jn = std::sph_bessel(n, x), jnm = std::sph_bessel(n - 1, x);
            double yn = std::sph_neumann(n, x), ynm = std::sph_neumann(n - 1, x);
            std::complex<double> hn(jn, yn), hnm(jnm, ynm);
            double psi = x * jn;
            double psi_d = x * jnm - n * jn;
            std::complex<double> xi = x * hn;
            std::complex<double> xi_d = x * hnm - static_cast<double>(n) * hn;
            a[n] = psi_d / xi_d;  // perfectly conducting limit
            b[n] = psi / xi;
        }
    }

    // scattering amplitudes for scattering angle theta measured from the
    // forward (propagation) direction
    void amplitudes(double theta, std::complex<double>& s1, std::complex<double>& s2) const {
        double mu = std::cos(theta);
        s1 = 0.0;
        s2 = 0.0;
        double pi_prev = 0.0, pi_cur = 1.0;  // pi_0, pi_1
        for (int n = 1; n < static_cast<int>(a.size()); ++n) {
            double tau = n * mu * pi_cur - (n + 1) * pi_prev;
            double f = (2.0 * n + 1.0) / (n * (n + 1.0));
            s1 += f * (a[n] * pi_cur + b[n] * tau);
            s2 += f * (a[n] * tau + b[n] * pi_cur);
            double pi_next = ((2.0 * n + 1.0) * mu * pi_cur - (n + 1.0) * pi_prev) / n;
            pi_prev = pi_cur;
            pi_cur = pi_next;
        }
    }

    // bistatic RCS (m^2) in the E-plane (observation in the plane containing
    // the incident polarization)
    double rcs_eplane(double k, double theta) const {
        std::complex<double> s1, s2;
        amplitudes(theta, s1, s2);
        return 4.0 * M_PI * std::norm(s2) / (k * k);
    }

    double rcs_hplane(double k, double theta) const {
        std::complex<double> s1, s2;
        amplitudes(theta, s1, s2);
        return 4.0 * M_PI * std::norm(s1) / (k * k);
    }

    // total scattering cross-section from the coefficients
    double c_sca(double k) const {
        double s = 0.0;
        for (int n = 1; n < static_cast<int>(a.size()); ++n)
            s += (2.0 * n + 1.0) * (std::norm(a[n]) + std::norm(b[n]));
        return 2.0 * M_PI / (k * k) * s;
    }

    // extinction via the optical theorem; equals c_sca for a lossless body
    double c_ext(double k) const {
        std::complex<double> s = 0.0;
        for (int n = 1; n < static_cast<int>(a.size()); ++n)
            s += (2.0 * n + 1.0) * (a[n] + b[n]);
        return 4.0 * M_PI / (k * k) * 0.5 * s.real();
    }
};

}  // namespace phykan::testing
