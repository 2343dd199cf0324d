#include "phykan/mom.hpp"

#include <cmath>

namespace phykan::mom {

using Eigen::Matrix3cd;
using Eigen::MatrixXcd;
using Eigen::Vector3cd;
using Eigen::Vector3d;
using Eigen::VectorXcd;
using std::complex;
using namespace std::complex_literals;

const TriQuadRule& TriQuadRule::of_order(int npts) {
    static const TriQuadRule r1 = [] {
        TriQuadRule r;
        r.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
        r.weights = {1.0};
        return r;
    }();
    static const TriQuadRule r3 = [] {
        TriQuadRule r;
        r.bary = {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
        r.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        return r;
    }();
    static const TriQuadRule r7 = [] {
        TriQuadRule r;
        const double s = std::sqrt(15.0);
        const double a = (6.0 - s) / 21.0, b = (6.0 + s) / 21.0;
        const double wa = (155.0 - s) / 1200.0, wb = (155.0 + s) / 1200.0;
        r.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1 - 2 * a, a, a}, {a, 1 - 2 * a, a}, {a, a, 1 - 2 * a},
                  {1 - 2 * b, b, b},           {b, 1 - 2 * b, b}, {b, b, 1 - 2 * b}};
        r.weights = {9.0 / 40, wa, wa, wa, wb, wb, wb};
        return r;
    }();
    static const TriQuadRule r13 = [] {
        // Dunavant degree-7 rule
        TriQuadRule r;
        const double a1 = 0.260345966079038, w1 = 0.175615257433204;
        const double a2 = 0.065130102902216, w2 = 0.053347235608839;
        const double a3 = 0.312865496004875, b3 = 0.048690315425316, w3 = 0.077113760890257;
        r.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
        r.weights = {-0.149570044467670};
        auto orbit3 = [&](double a, double w) {
            r.bary.push_back({1 - 2 * a, a, a});
            r.bary.push_back({a, 1 - 2 * a, a});
            r.bary.push_back({a, a, 1 - 2 * a});
            r.weights.insert(r.weights.end(), 3, w);
        };
        orbit3(a1, w1);
        orbit3(a2, w2);
        double c3 = 1.0 - a3 - b3;
        for (auto [x, y, z] : {std::array{a3, b3, c3}, std::array{a3, c3, b3}, std::array{b3, a3, c3},
                               std::array{b3, c3, a3}, std::array{c3, a3, b3}, std::array{c3, b3, a3}}) {
            r.bary.push_back({x, y, z});
            r.weights.push_back(w3);
        }
        return r;
    }();
    switch (npts) {
        case 1: return r1;
        case 3: return r3;
        case 7: return r7;
        case 13: return r13;
        default: throw std::invalid_argument("TriQuadRule: supported orders are 1, 3, 7, 13");
    }
}

Vector3d RwgBasis::eval(const Vector3d& point, long tri) const {
    const auto& e = m->edges[edge];
    if (tri == e.tri_plus)
        return (e.length / (2.0 * m->element_areas[tri])) * (point - m->vertices[e.free_vertex_plus]);
    if (tri == e.tri_minus)
        return (e.length / (2.0 * m->element_areas[tri])) * (m->vertices[e.free_vertex_minus] - point);
    return Vector3d::Zero();
}

double RwgBasis::surface_divergence(long tri) const {
    const auto& e = m->edges[edge];
    if (tri == e.tri_plus) return e.length / m->element_areas[tri];
    if (tri == e.tri_minus) return -e.length / m->element_areas[tri];
    return 0.0;
}

// ---- analytic 1/R integrals (observation anywhere) --------------------------

namespace {

struct EdgeGeom {
    double t0;       // signed in-plane distance from projection to edge line
    double lp, lm;   // tangential coordinates of edge endpoints
    double rp, rm;   // distances from obs to endpoints
    double r02;      // t0^2 + d^2
    Vector3d mhat;   // in-plane outward edge normal
    double f2;       // ln((R+ + l+)/(R- + l-)), guarded
    double beta;     // arctan pair
};

struct TriGeom {
    Vector3d n;
    double d;       // signed height of obs
    Vector3d rho;   // in-plane projection of obs
    EdgeGeom e[3];
};

TriGeom tri_geometry(const Vector3d& a, const Vector3d& b, const Vector3d& c, const Vector3d& obs) {
    TriGeom g;
    g.n = (b - a).cross(c - a).normalized();
    g.d = g.n.dot(obs - a);
    g.rho = obs - g.d * g.n;
    const Vector3d v[3] = {a, b, c};
    for (int i = 0; i < 3; ++i) {
        const Vector3d &p0 = v[i], &p1 = v[(i + 1) % 3];
        Vector3d s = (p1 - p0).normalized();
        EdgeGeom& eg = g.e[i];
        eg.mhat = s.cross(g.n);
        eg.t0 = (p0 - g.rho).dot(eg.mhat);
        eg.lp = (p1 - g.rho).dot(s);
        eg.lm = (p0 - g.rho).dot(s);
        eg.r02 = eg.t0 * eg.t0 + g.d * g.d;
        eg.rp = std::sqrt(eg.r02 + eg.lp * eg.lp);
        eg.rm = std::sqrt(eg.r02 + eg.lm * eg.lm);
        // log term; swap to the equivalent quotient when the direct one is
        // ill-conditioned (obs near the edge line, both l's negative)
        double num = eg.rp + eg.lp, den = eg.rm + eg.lm;
        if (std::min(num, den) < 1e-14 * (eg.rp + eg.rm)) {
            if (eg.r02 < 1e-28) {
                eg.f2 = 0.0;  // on the edge line: the t0/R0^2 prefactors vanish
            } else {
                eg.f2 = std::log((eg.rm - eg.lm) / (eg.rp - eg.lp));
            }
        } else {
            eg.f2 = std::log(num / den);
        }
        double ad = std::fabs(g.d);
        eg.beta = std::atan2(eg.t0 * eg.lp, eg.r02 + ad * eg.rp) -
                  std::atan2(eg.t0 * eg.lm, eg.r02 + ad * eg.rm);
    }
    return g;
}

}  // namespace

double analytic_inv_r(const Vector3d& a, const Vector3d& b, const Vector3d& c, const Vector3d& obs) {
    TriGeom g = tri_geometry(a, b, c, obs);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += g.e[i].t0 * g.e[i].f2 - std::fabs(g.d) * g.e[i].beta;
    return s;
}

Vector3d analytic_rho_inv_r(const Vector3d& a, const Vector3d& b, const Vector3d& c, const Vector3d& obs) {
    TriGeom g = tri_geometry(a, b, c, obs);
    Vector3d s = Vector3d::Zero();
    for (int i = 0; i < 3; ++i)
        s += 0.5 * g.e[i].mhat * (g.e[i].r02 * g.e[i].f2 + g.e[i].lp * g.e[i].rp - g.e[i].lm * g.e[i].rm);
    return s;
}

// ---- assembly ----------------------------------------------------------------

namespace {

// (exp(-ikR) - 1) / (4 pi R): smooth remainder after 1/R extraction
complex<double> smooth_green(double r, double k) {
    double kr = k * r;
    if (kr < 1e-3) {
        // Taylor of (e^{-ikR}-1)/R to 4th order in kR
        return complex<double>(-k * kr / 2.0 + k * kr * kr * kr / 24.0, -k + k * kr * kr / 6.0) /
               (4.0 * M_PI);
    }
    return (std::exp(complex<double>(0.0, -kr)) - 1.0) / (4.0 * M_PI * r);
}

struct InnerIntegrals {
    complex<double> i0;  // integral of g over source triangle
    Vector3cd i1;        // integral of r' g over source triangle
};

// Inner integrals for observation point obs over source triangle `src`,
// optionally with 1/(4 pi R) extracted and integrated analytically.
InnerIntegrals inner_integrals(const mesh::TriMesh& m, long src, const Vector3d& obs, double k,
                               const TriQuadRule& rule, bool extract) {
    const Vector3d& a = m.vertices[m.triangles[src][0]];
    const Vector3d& b = m.vertices[m.triangles[src][1]];
    const Vector3d& c = m.vertices[m.triangles[src][2]];
    const double area = m.element_areas[src];
    InnerIntegrals out{0.0, Vector3cd::Zero()};
    for (size_t q = 0; q < rule.bary.size(); ++q) {
        Vector3d p = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
        double r = (obs - p).norm();
        complex<double> g;
        if (extract) {
            g = smooth_green(r, k);
        } else {
            g = std::exp(complex<double>(0.0, -k * r)) / (4.0 * M_PI * r);
        }
        double w = rule.weights[q] * area;
        out.i0 += w * g;
        out.i1 += w * g * p.cast<complex<double>>();
    }
    if (extract) {
        Vector3d n = (b - a).cross(c - a).normalized();
        Vector3d rho = obs - n.dot(obs - a) * n;
        double inv = analytic_inv_r(a, b, c, obs) / (4.0 * M_PI);
        Vector3d vec = analytic_rho_inv_r(a, b, c, obs) / (4.0 * M_PI);
        out.i0 += inv;
        out.i1 += (vec + rho * inv).cast<complex<double>>();
    }
    return out;
}

bool triangles_touch(const mesh::TriMesh& m, long a, long b) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (m.triangles[a][i] == m.triangles[b][j]) return true;
    return false;
}

}  // namespace

ImpedanceMatrix assemble_impedance(const mesh::TriMesh& m, const em::EmConstants& consts,
                                   const QuadratureSpec& quad) {
    const long ne = m.num_edges();
    const long nt = m.num_triangles();
    const double k = consts.wavenumber;
    const TriQuadRule& outer_far = TriQuadRule::of_order(quad.outer_order);
    // the extracted 1/R potentials vary sharply over touching pairs; a
    // degree-7 outer rule there keeps self terms at the 0.1% level
    const TriQuadRule& outer_near = TriQuadRule::of_order(13);
    const TriQuadRule& inner = TriQuadRule::of_order(quad.inner_order);

    const double scale = std::sqrt(m.total_area() / nt);
    MatrixXcd z = MatrixXcd::Zero(ne, ne);

    // interior edges attached to each triangle (3 on closed meshes, fewer on
    // open test fixtures): id, RWG sign, free vertex
    struct EdgeOnTri {
        long edge;
        double sign;
        Vector3d free;
        double len;
    };
    std::vector<std::vector<EdgeOnTri>> etab(nt);
    for (long e = 0; e < ne; ++e) {
        const auto& ed = m.edges[e];
        etab[ed.tri_plus].push_back({e, 1.0, m.vertices[ed.free_vertex_plus], ed.length});
        etab[ed.tri_minus].push_back({e, -1.0, m.vertices[ed.free_vertex_minus], ed.length});
    }

    for (long ta = 0; ta < nt; ++ta) {
        const Vector3d& a0 = m.vertices[m.triangles[ta][0]];
        const Vector3d& a1 = m.vertices[m.triangles[ta][1]];
        const Vector3d& a2 = m.vertices[m.triangles[ta][2]];
        const double area_a = m.element_areas[ta];
        for (long tb = 0; tb < nt; ++tb) {
            const bool touch = triangles_touch(m, ta, tb);
            if (touch && (m.element_areas[ta] < 1e-12 * scale * scale ||
                          m.element_areas[tb] < 1e-12 * scale * scale))
                throw AssemblyError("degenerate triangle in near-singular pair (" + std::to_string(ta) +
                                    "," + std::to_string(tb) + ")");
            const TriQuadRule& outer = touch ? outer_near : outer_far;
            const auto& rows = etab[ta];
            const auto& cols = etab[tb];
            complex<double> s00 = 0.0;                 // int int g
            Eigen::Matrix<complex<double>, 3, 3> sdd;  // test-edge x source-edge vector part
            sdd.setZero();
            for (size_t qa = 0; qa < outer.bary.size(); ++qa) {
                Vector3d p = outer.bary[qa][0] * a0 + outer.bary[qa][1] * a1 + outer.bary[qa][2] * a2;
                double w = outer.weights[qa] * area_a;
                InnerIntegrals ii = inner_integrals(m, tb, p, k, inner, touch);
                s00 += w * ii.i0;
                for (size_t i = 0; i < rows.size(); ++i) {
                    Vector3d test_vec = p - rows[i].free;
                    for (size_t j = 0; j < cols.size(); ++j) {
                        Vector3cd inner_vec = ii.i1 - cols[j].free.cast<complex<double>>() * ii.i0;
                        sdd(i, j) += w * (test_vec.x() * inner_vec.x() + test_vec.y() * inner_vec.y() +
                                          test_vec.z() * inner_vec.z());
                    }
                }
            }
            for (size_t i = 0; i < rows.size(); ++i) {
                const auto& em_ = rows[i];
                for (size_t j = 0; j < cols.size(); ++j) {
                    const auto& en = cols[j];
                    double ca = em_.sign * em_.len / (2.0 * area_a);
                    double cb = en.sign * en.len / (2.0 * m.element_areas[tb]);
                    complex<double> aterm = ca * cb * sdd(i, j);
                    complex<double> phi = (em_.sign * em_.len / area_a) *
                                          (en.sign * en.len / m.element_areas[tb]) * s00;
                    z(em_.edge, en.edge) += 1.0i * consts.omega * em::mu0 * aterm -
                                            (1.0i / (consts.omega * em::eps0)) * phi;
                }
            }
        }
    }
    // exact complex symmetry
    MatrixXcd zs = 0.5 * (z + z.transpose());
    ImpedanceMatrix out;
    out.Z = std::move(zs);
    out.quad = quad;
    return out;
}

Eigen::VectorXcd assemble_excitation(const mesh::TriMesh& m, const em::PlaneWave& wave,
                                     const em::EmConstants& consts, const QuadratureSpec& quad) {
    const TriQuadRule& rule = TriQuadRule::of_order(quad.inner_order);
    VectorXcd v = VectorXcd::Zero(m.num_edges());
    for (long e = 0; e < m.num_edges(); ++e) {
        RwgBasis f{&m, static_cast<int>(e)};
        const auto& ed = m.edges[e];
        for (long tri : {static_cast<long>(ed.tri_plus), static_cast<long>(ed.tri_minus)}) {
            const Vector3d& a = m.vertices[m.triangles[tri][0]];
            const Vector3d& b = m.vertices[m.triangles[tri][1]];
            const Vector3d& c = m.vertices[m.triangles[tri][2]];
            for (size_t q = 0; q < rule.bary.size(); ++q) {
                Vector3d p = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
                double w = rule.weights[q] * m.element_areas[tri];
                Vector3cd ei = em::incident_field(wave, p, consts);
                Vector3d fv = f.eval(p, tri);
                v(e) += w * (fv.x() * ei.x() + fv.y() * ei.y() + fv.z() * ei.z());
            }
        }
    }
    return v;
}

RwgSolution solve_mom(const ImpedanceMatrix& zmat, const VectorXcd& v, const mesh::TriMesh& m,
                      const em::PlaneWave& wave) {
    if (zmat.Z.rows() != zmat.Z.cols() || zmat.Z.rows() != v.size())
        throw std::invalid_argument("solve_mom: dimension mismatch");
    Eigen::PartialPivLU<MatrixXcd> lu(zmat.Z);
    VectorXcd coeff = lu.solve(v);
    double vn = v.norm();
    double resid = vn > 0.0 ? (zmat.Z * coeff - v).norm() / vn : 0.0;
    if (!coeff.allFinite() || resid > 1e-8) {
        Eigen::JacobiSVD<MatrixXcd> svd(zmat.Z);
        double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
        throw SolverError("solve_mom: numerically singular system, relative residual " +
                          std::to_string(resid) + ", condition estimate " + std::to_string(cond));
    }
    RwgSolution sol;
    sol.coefficients = std::move(coeff);
    sol.element_currents = centroid_currents(sol.coefficients, m);
    sol.wave = wave;
    return sol;
}

std::vector<Vector3cd> centroid_currents(const VectorXcd& coefficients, const mesh::TriMesh& m) {
    if (coefficients.size() != m.num_edges())
        throw std::invalid_argument("centroid_currents: coefficient count mismatch");
    std::vector<Vector3cd> out(m.num_triangles(), Vector3cd::Zero());
    for (long t = 0; t < m.num_triangles(); ++t) {
        for (int i = 0; i < 3; ++i) {
            int e = m.triangle_edges[t][i];
            RwgBasis f{&m, e};
            out[t] += coefficients(e) * f.eval(m.element_centroids[t], t).cast<complex<double>>();
        }
    }
    return out;
}

RwgSolution solve_plane_wave(const mesh::TriMesh& m, const em::PlaneWave& wave,
                             const em::EmConstants& consts, const QuadratureSpec& quad) {
    ImpedanceMatrix z = assemble_impedance(m, consts, quad);
    VectorXcd v = assemble_excitation(m, wave, consts, quad);
    return solve_mom(z, v, m, wave);
}

}  // namespace phykan::mom
