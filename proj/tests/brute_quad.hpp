#pragma once

// Adaptive brute-force surface quadrature used as an independent oracle for
// the assembly path: no singularity extraction, no analytic formulas, just
// recursive subdivision that refines toward the observation point.

#include "phykan/em.hpp"
#include "phykan/mom.hpp"

#include <Eigen/Dense>

#include <complex>

namespace phykan::testing {

using Eigen::Vector3d;
using Cplx = std::complex<double>;

// integrates f(point) over the triangle; refines while the observation point
// is within ~2.5 diameters of the patch
template <class F, class V>
void adaptive_tri(const Vector3d& a, const Vector3d& b, const Vector3d& c, const Vector3d& obs,
                  const F& f, int depth, V& acc) {
    Vector3d cen = (a + b + c) / 3.0;
    double diam = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    if (depth <= 0 || (obs - cen).norm() > 2.5 * diam) {
        const auto& rule = mom::TriQuadRule::of_order(7);
        double area = 0.5 * (b - a).cross(c - a).norm();
        for (size_t q = 0; q < rule.bary.size(); ++q) {
            Vector3d p = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
            if ((p - obs).norm() < 1e-14) continue;  // integrable point singularity
            acc += (rule.weights[q] * area) * f(p);
        }
        return;
    }
    Vector3d ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    adaptive_tri(a, ab, ca, obs, f, depth - 1, acc);
    adaptive_tri(b, bc, ab, obs, f, depth - 1, acc);
    adaptive_tri(c, ca, bc, obs, f, depth - 1, acc);
    adaptive_tri(ab, bc, ca, obs, f, depth - 1, acc);
}

// uniform refinement to `levels`, then a 7-point rule per panel
template <class F, class V>
void uniform_tri(const Vector3d& a, const Vector3d& b, const Vector3d& c, const F& f, int levels,
                 V& acc) {
    if (levels <= 0) {
        const auto& rule = mom::TriQuadRule::of_order(7);
        double area = 0.5 * (b - a).cross(c - a).norm();
        for (size_t q = 0; q < rule.bary.size(); ++q) {
            Vector3d p = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
            acc += (rule.weights[q] * area) * f(p);
        }
        return;
    }
    Vector3d ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    uniform_tri(a, ab, ca, f, levels - 1, acc);
    uniform_tri(b, bc, ab, f, levels - 1, acc);
    uniform_tri(c, ca, bc, f, levels - 1, acc);
    uniform_tri(ab, bc, ca, f, levels - 1, acc);
}

inline Cplx brute_integral_scalar(const Vector3d& a, const Vector3d& b, const Vector3d& c,
                                  const Vector3d& obs, double k, int depth = 12) {
    Cplx acc = 0.0;
    adaptive_tri(a, b, c, obs,
                 [&](const Vector3d& p) {
                     double r = (p - obs).norm();
                     return std::exp(Cplx(0.0, -k * r)) / (4.0 * M_PI * r);
                 },
                 depth, acc);
    return acc;
}

inline double brute_integral_inv_r(const Vector3d& a, const Vector3d& b, const Vector3d& c,
                                   const Vector3d& obs, int depth = 14) {
    double acc = 0.0;
    adaptive_tri(a, b, c, obs, [&](const Vector3d& p) { return 1.0 / (p - obs).norm(); }, depth, acc);
    return acc;
}

inline Eigen::Vector3d brute_integral_rho_inv_r(const Vector3d& a, const Vector3d& b, const Vector3d& c,
                                                const Vector3d& obs, int depth = 14) {
    Vector3d n = (b - a).cross(c - a).normalized();
    Vector3d rho = obs - n.dot(obs - a) * n;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    adaptive_tri(a, b, c, obs,
                 [&](const Vector3d& p) -> Eigen::Vector3d { return (p - rho) / (p - obs).norm(); },
                 depth, acc);
    return acc;
}

// Full mixed-potential EFIE matrix entry by brute force: dense outer rule,
// adaptive inner integration of the raw kernel.
inline Cplx brute_impedance_entry(const mesh::TriMesh& m, long em_, long en,
                                  const em::EmConstants& consts, int depth = 12) {
    const auto& rule = mom::TriQuadRule::of_order(13);
    const double k = consts.wavenumber;
    Cplx z = 0.0;
    const auto& ea = m.edges[em_];
    const auto& eb = m.edges[en];
    for (int sa = 0; sa < 2; ++sa) {
        long ta = sa == 0 ? ea.tri_plus : ea.tri_minus;
        double sign_a = sa == 0 ? 1.0 : -1.0;
        Vector3d va = m.vertices[sa == 0 ? ea.free_vertex_plus : ea.free_vertex_minus];
        for (int sb = 0; sb < 2; ++sb) {
            long tb = sb == 0 ? eb.tri_plus : eb.tri_minus;
            double sign_b = sb == 0 ? 1.0 : -1.0;
            Vector3d vb = m.vertices[sb == 0 ? eb.free_vertex_plus : eb.free_vertex_minus];
            const Vector3d& b0 = m.vertices[m.triangles[tb][0]];
            const Vector3d& b1 = m.vertices[m.triangles[tb][1]];
            const Vector3d& b2 = m.vertices[m.triangles[tb][2]];
            const Vector3d& a0 = m.vertices[m.triangles[ta][0]];
            const Vector3d& a1 = m.vertices[m.triangles[ta][1]];
            const Vector3d& a2 = m.vertices[m.triangles[ta][2]];
            Cplx aterm = 0.0, phi = 0.0;
            for (size_t q = 0; q < rule.bary.size(); ++q) {
                Vector3d p = rule.bary[q][0] * a0 + rule.bary[q][1] * a1 + rule.bary[q][2] * a2;
                double w = rule.weights[q] * m.element_areas[ta];
                Cplx i0 = brute_integral_scalar(b0, b1, b2, p, k, depth);
                Eigen::Vector3cd i1 = Eigen::Vector3cd::Zero();
                adaptive_tri(b0, b1, b2, p,
                             [&](const Vector3d& s) -> Eigen::Vector3cd {
                                 double r = (s - p).norm();
                                 return s.cast<Cplx>() * (std::exp(Cplx(0.0, -k * r)) / (4.0 * M_PI * r));
                             },
                             depth, i1);
                Eigen::Vector3cd fsrc = i1 - vb.cast<Cplx>() * i0;
                Vector3d ft = p - va;
                aterm += w * (ft.x() * fsrc.x() + ft.y() * fsrc.y() + ft.z() * fsrc.z());
                phi += w * i0;
            }
            double ca = sign_a * ea.length / (2.0 * m.element_areas[ta]);
            double cb = sign_b * eb.length / (2.0 * m.element_areas[tb]);
            double da = sign_a * ea.length / m.element_areas[ta];
            double db = sign_b * eb.length / m.element_areas[tb];
            z += Cplx(0, 1) * consts.omega * em::mu0 * ca * cb * aterm -
                 (Cplx(0, 1) / (consts.omega * em::eps0)) * da * db * phi;
        }
    }
    return z;
}

}  // namespace phykan::testing
