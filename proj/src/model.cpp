#include "phykan/model.hpp"

#include "phykan/mom.hpp"

#include <cmath>

namespace phykan::model {

using ad::Parameter;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::Vector3cd;
using Eigen::Vector3d;
using Eigen::VectorXcd;
using std::complex;
using namespace std::complex_literals;

MatrixXd edge_features(const mesh::TriMesh& m, const em::EmConstants& consts) {
    const long ne = m.num_edges();
    const double lambda = consts.wavelength();
    Vector3d lo = m.vertices[0], hi = m.vertices[0];
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    Vector3d center = 0.5 * (lo + hi);
    double diag = (hi - lo).norm();
    MatrixXd f(ne, 15);
    for (long e = 0; e < ne; ++e) {
        const auto& ed = m.edges[e];
        Vector3d a = m.vertices[ed.vertex_a], b = m.vertices[ed.vertex_b];
        Vector3d mid = 0.5 * (a + b);
        Vector3d dir = (b - a).normalized();
        f.block<1, 3>(e, 0) = ((mid - center) / diag).transpose();
        f.block<1, 3>(e, 3) = dir.transpose();
        f(e, 6) = ed.length / lambda;
        f.block<1, 3>(e, 7) = m.element_normals[ed.tri_plus].transpose();
        f.block<1, 3>(e, 10) = m.element_normals[ed.tri_minus].transpose();
        f(e, 13) = m.element_areas[ed.tri_plus] / (lambda * lambda);
        f(e, 14) = m.element_areas[ed.tri_minus] / (lambda * lambda);
    }
    return f;
}

std::vector<double> angle_embedding(double theta, double phi, int harmonics) {
    std::vector<double> out;
    out.reserve(4 * harmonics);
    for (int l = 1; l <= harmonics; ++l) {
        double w = std::pow(2.0, l - 1);
        out.push_back(std::sin(w * theta));
        out.push_back(std::cos(w * theta));
    }
    for (int l = 1; l <= harmonics; ++l) {
        double w = std::pow(2.0, l - 1);
        out.push_back(std::sin(w * phi));
        out.push_back(std::cos(w * phi));
    }
    return out;
}

MatrixXcd efie_collocation_operator(const mesh::TriMesh& m, const em::EmConstants& consts) {
    const long k = m.num_triangles();
    MatrixXcd op = MatrixXcd::Zero(3 * k, 3 * k);
    for (long i = 0; i < k; ++i) {
        for (long j = 0; j < k; ++j) {
            Eigen::Matrix3cd block;
            if (i == j) {
                const auto& tri = m.triangles[i];
                double self = mom::analytic_inv_r(m.vertices[tri[0]], m.vertices[tri[1]],
                                                  m.vertices[tri[2]], m.element_centroids[i]) /
                              (4.0 * M_PI);
                block = -1.0i * consts.omega * em::mu0 * self * Eigen::Matrix3cd::Identity();
            } else {
                if ((m.element_centroids[i] - m.element_centroids[j]).norm() < 1e-14)
                    throw mesh::MeshError("coincident element centroids " + std::to_string(i) + "," +
                                          std::to_string(j));
                block = em::dyadic_green(m.element_centroids[i], m.element_centroids[j], consts) *
                        m.element_areas[j];
            }
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) op(r * k + i, c * k + j) = block(r, c);
        }
    }
    return op;
}

VectorXcd incident_samples(const mesh::TriMesh& m, const em::PlaneWave& wave,
                           const em::EmConstants& consts) {
    const long k = m.num_triangles();
    VectorXcd e(3 * k);
    for (long i = 0; i < k; ++i) {
        Vector3cd f = em::incident_field(wave, m.element_centroids[i], consts);
        for (int c = 0; c < 3; ++c) e(c * k + i) = f(c);
    }
    return e;
}

namespace {

// integral of the dyadic kernel over a source patch, subdividing until the
// observation point is well separated
Eigen::Matrix3cd patch_dyadic(const Vector3d& a, const Vector3d& b, const Vector3d& c,
                              const Vector3d& obs, const em::EmConstants& consts, int depth) {
    Vector3d cen = (a + b + c) / 3.0;
    double diam = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    if (depth <= 0 || (obs - cen).norm() > 2.0 * diam) {
        const auto& rule = mom::TriQuadRule::of_order(7);
        double area = 0.5 * (b - a).cross(c - a).norm();
        Eigen::Matrix3cd acc = Eigen::Matrix3cd::Zero();
        for (size_t q = 0; q < rule.bary.size(); ++q) {
            Vector3d p = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
            acc += (rule.weights[q] * area) * em::dyadic_green(obs, p, consts);
        }
        return acc;
    }
    Vector3d ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    return patch_dyadic(a, ab, ca, obs, consts, depth - 1) + patch_dyadic(b, bc, ab, obs, consts, depth - 1) +
           patch_dyadic(c, ca, bc, obs, consts, depth - 1) + patch_dyadic(ab, bc, ca, obs, consts, depth - 1);
}

Vector3d collocation_point(const mesh::TriMesh& m, long i, const CollocationSpec& spec) {
    return m.element_centroids[i] -
           spec.displacement * std::sqrt(m.element_areas[i]) * m.element_normals[i];
}

}  // namespace

Eigen::MatrixXcd nullfield_efie_operator(const mesh::TriMesh& m, const em::EmConstants& consts,
                                         const CollocationSpec& spec) {
    const long k = m.num_triangles();
    MatrixXcd op(3 * k, 3 * k);
    for (long i = 0; i < k; ++i) {
        Vector3d obs = collocation_point(m, i, spec);
        for (long j = 0; j < k; ++j) {
            Eigen::Matrix3cd blk;
            double r = (obs - m.element_centroids[j]).norm();
            if (r < spec.near_cutoff * std::sqrt(m.element_areas[j])) {
                const auto& tr = m.triangles[j];
                blk = -patch_dyadic(m.vertices[tr[0]], m.vertices[tr[1]], m.vertices[tr[2]], obs,
                                    consts, 6);
            } else {
                blk = -em::dyadic_green(obs, m.element_centroids[j], consts) * m.element_areas[j];
            }
            for (int rr = 0; rr < 3; ++rr)
                for (int cc = 0; cc < 3; ++cc) op(rr * k + i, cc * k + j) = blk(rr, cc);
        }
    }
    return op;
}

VectorXcd nullfield_rhs(const mesh::TriMesh& m, const em::PlaneWave& wave,
                        const em::EmConstants& consts, const CollocationSpec& spec) {
    const long k = m.num_triangles();
    VectorXcd e(3 * k);
    for (long i = 0; i < k; ++i) {
        Vector3cd f = em::incident_field(wave, collocation_point(m, i, spec), consts);
        for (int c = 0; c < 3; ++c) e(c * k + i) = f(c);
    }
    return e;
}

Eigen::MatrixXcd green_prior_init(const mesh::TriMesh& m, const em::EmConstants& consts) {
    MatrixXcd op = efie_collocation_operator(m, consts);
    const long k = m.num_triangles();
    double max_block = 0.0;
    for (long i = 0; i < k; ++i)
        for (long j = 0; j < k; ++j) {
            double f2 = 0.0;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) f2 += std::norm(op(r * k + i, c * k + j));
            max_block = std::max(max_block, f2);
        }
    return op / std::sqrt(max_block);
}

Eigen::MatrixXcd random_prior_like(const Eigen::MatrixXcd& reference, std::uint64_t seed) {
    double acc = 0.0;
    for (long i = 0; i < reference.size(); ++i) {
        acc += std::norm(reference.data()[i]);
    }
    double rms = std::sqrt(acc / (2.0 * reference.size()));  // per real channel
    Rng rng(Rng::substream(seed, 0xab1a7e));
    MatrixXcd out(reference.rows(), reference.cols());
    for (long c = 0; c < reference.cols(); ++c)
        for (long r = 0; r < reference.rows(); ++r)
            out(r, c) = complex<double>(rms * rng.normal(), rms * rng.normal());
    return out;
}

namespace {

VectorXcd stack_currents(const WaveCurrents& j, long k) {
    VectorXcd x(3 * k);
    for (long i = 0; i < k; ++i)
        for (int c = 0; c < 3; ++c) x(c * k + i) = j[i](c);
    return x;
}

}  // namespace

double efie_residual_loss_fields(const std::vector<WaveCurrents>& currents, const mesh::TriMesh& m,
                                 const std::vector<VectorXcd>& field_samples,
                                 const em::EmConstants& consts, const CollocationSpec& spec) {
    if (currents.size() != field_samples.size())
        throw std::invalid_argument("efie_residual_loss: one current set per wave required");
    const long k = m.num_triangles();
    MatrixXcd op = nullfield_efie_operator(m, consts, spec);
    double acc = 0.0;
    for (size_t u = 0; u < currents.size(); ++u) {
        if (currents[u].size() != static_cast<size_t>(k))
            throw std::invalid_argument("efie_residual_loss: currents length mismatch");
        acc += (op * stack_currents(currents[u], k) - field_samples[u]).squaredNorm();
    }
    return acc / (static_cast<double>(currents.size()) * k);
}

double efie_residual_loss(const std::vector<WaveCurrents>& currents, const mesh::TriMesh& m,
                          const std::vector<em::PlaneWave>& waves, const em::EmConstants& consts,
                          const CollocationSpec& spec) {
    std::vector<VectorXcd> fields;
    fields.reserve(waves.size());
    for (const auto& w : waves) fields.push_back(nullfield_rhs(m, w, consts, spec));
    return efie_residual_loss_fields(currents, m, fields, consts, spec);
}

double reconstruction_mse(const WaveCurrents& pre, const WaveCurrents& ref) {
    return reconstruction_mse(std::vector<WaveCurrents>{pre}, std::vector<WaveCurrents>{ref});
}

double reconstruction_mse(const std::vector<WaveCurrents>& pre, const std::vector<WaveCurrents>& ref) {
    if (pre.size() != ref.size()) throw std::invalid_argument("reconstruction_mse: batch size mismatch");
    double num = 0.0, den = 0.0;
    for (size_t u = 0; u < pre.size(); ++u) {
        if (pre[u].size() != ref[u].size())
            throw std::invalid_argument("reconstruction_mse: element count mismatch");
        for (size_t i = 0; i < pre[u].size(); ++i) {
            num += (pre[u][i] - ref[u][i]).squaredNorm();
            den += ref[u][i].squaredNorm();
        }
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

// ---- the model -----------------------------------------------------------------

namespace {

std::vector<double> normal_vec(long n, Rng& rng, double scale) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

// real stacked form [[Re, -Im], [Im, Re]]
Tensor stacked_real_operator(const MatrixXcd& op) {
    const long n3 = op.rows();
    std::vector<double> data(4 * n3 * n3);
    const long w = 2 * n3;
    for (long r = 0; r < n3; ++r)
        for (long c = 0; c < n3; ++c) {
            double re = op(r, c).real(), im = op(r, c).imag();
            data[r * w + c] = re;
            data[r * w + n3 + c] = -im;
            data[(n3 + r) * w + c] = im;
            data[(n3 + r) * w + n3 + c] = re;
        }
    return Tensor::constant({w, w}, std::move(data));
}

}  // namespace

PhyKanModel::PhyKanModel(const mesh::TriMesh& m, const em::EmConstants& consts, const ModelConfig& cfg)
    : mesh_(&m),
      consts_(consts),
      cfg_(cfg),
      k_(m.num_triangles()),
      m_edges_(m.num_edges()),
      w0_re_("global.w0_re", Shape{3 * k_, 3 * k_}, std::vector<double>(9 * k_ * k_, 0.0)),
      w0_im_("global.w0_im", Shape{3 * k_, 3 * k_}, std::vector<double>(9 * k_ * k_, 0.0)),
      w1_("global.w1", Shape{12, cfg.latent}, std::vector<double>(12 * cfg.latent, 0.0)),
      w2_("global.w2", Shape{cfg.latent + 4 * cfg.angle_harmonics, cfg.latent},
          std::vector<double>((cfg.latent + 4 * cfg.angle_harmonics) * cfg.latent, 0.0)),
      b_("global.b", Shape{1, cfg.latent}, std::vector<double>(cfg.latent, 0.0)),
      head_("head.w", Shape{2 * cfg.latent, 6}, std::vector<double>(12 * cfg.latent, 0.0)) {
    features_ = edge_features(m, consts);
    adjacency_ = mesh::edge_adjacency(m);

    element_edge_idx_.resize(3 * k_);
    for (long t = 0; t < k_; ++t)
        for (int i = 0; i < 3; ++i) element_edge_idx_[t * 3 + i] = m.triangle_edges[t][i];

    efie_op_ = nullfield_efie_operator(m, consts, cfg.collocation);
    efie_real_ = stacked_real_operator(efie_op_);

    std::vector<double> pdata(3 * k_);
    for (long i = 0; i < k_; ++i)
        for (int c = 0; c < 3; ++c) pdata[c * k_ + i] = m.element_centroids[i](c);
    p_stacked_ = Tensor::constant({3 * k_, 1}, std::move(pdata));

    s_rearrange_.resize(k_ * 6);
    for (long i = 0; i < k_; ++i)
        for (int c = 0; c < 6; ++c)
            s_rearrange_[i * 6 + c] = (c < 3) ? (c * k_ + i) : (3 * k_ + (c - 3) * k_ + i);

    current_scale_ = 2.0 / consts.eta0;

    Rng rng(Rng::substream(cfg.seed, 0x10ca1));
    kan::KernelSpec spec;
    spec.variant = cfg.variant.kernel;
    local_ = std::make_unique<kan::KanStack>("local", 15, cfg.latent, spec, cfg.variant.graph,
                                             &adjacency_, rng);
    w1_.value() = normal_vec(12 * cfg.latent, rng, 1.0 / std::sqrt(12.0));
    w2_.value() = normal_vec((cfg.latent + 4 * cfg.angle_harmonics) * cfg.latent, rng,
                             1.0 / std::sqrt(static_cast<double>(cfg.latent + 4 * cfg.angle_harmonics)));

    MatrixXcd w0 = cfg.green_init ? green_prior_init(m, consts)
                                  : random_prior_like(green_prior_init(m, consts), cfg.seed);
    for (long c = 0; c < 3 * k_; ++c)
        for (long r = 0; r < 3 * k_; ++r) {
            w0_re_.value()[r * 3 * k_ + c] = w0(r, c).real();
            w0_im_.value()[r * 3 * k_ + c] = w0(r, c).imag();
        }
}

std::vector<Parameter*> PhyKanModel::parameters() {
    auto out = local_->parameters();
    out.push_back(&w0_re_);
    out.push_back(&w0_im_);
    out.push_back(&w1_);
    out.push_back(&w2_);
    out.push_back(&b_);
    out.push_back(&head_);
    return out;
}

long PhyKanModel::parameter_count() const {
    long n = 0;
    for (auto* p : const_cast<PhyKanModel*>(this)->parameters()) n += p->shape().count();
    return n;
}

Tensor PhyKanModel::currents_graph(Tape& tape, const std::vector<em::PlaneWave>& waves) {
    const long ns = static_cast<long>(waves.size());
    if (ns < 1) throw std::invalid_argument("currents_graph: empty wave batch");

    // local branch (wave independent): edge embeddings -> element mean
    std::vector<double> feat_rowmajor(m_edges_ * 15);
    for (long r = 0; r < m_edges_; ++r)
        for (long c = 0; c < 15; ++c) feat_rowmajor[r * 15 + c] = features_(r, c);
    Tensor x = Tensor::constant({m_edges_, 15}, std::move(feat_rowmajor));
    Tensor h = local_->forward(tape, x);                                     // [M, D]
    Tensor per_elem = ad::gather_rows(h, element_edge_idx_);                 // [3K, D]
    Tensor hk = ad::scale(ad::rowblock_sum(per_elem, 3), 1.0 / 3.0);         // [K, D]

    // global branch
    Tensor w0re = tape.leaf(w0_re_), w0im = tape.leaf(w0_im_);
    Tensor sre = ad::matmul(w0re, p_stacked_);  // [3K, 1]
    Tensor sim = ad::matmul(w0im, p_stacked_);
    Tensor s6 = ad::gather_flat(ad::concat_rows({sre, sim}), s_rearrange_, {k_, 6});

    // incident-field coupling through the same first-layer weights
    std::vector<double> ere(3 * k_ * ns), eim(3 * k_ * ns);
    std::vector<double> gamma(ns * 4 * cfg_.angle_harmonics);
    for (long u = 0; u < ns; ++u) {
        VectorXcd e = incident_samples(*mesh_, waves[u], consts_);
        for (long r = 0; r < 3 * k_; ++r) {
            ere[r * ns + u] = e(r).real();
            eim[r * ns + u] = e(r).imag();
        }
        auto g = angle_embedding(waves[u].theta, waves[u].phi, cfg_.angle_harmonics);
        std::copy(g.begin(), g.end(), gamma.begin() + u * 4 * cfg_.angle_harmonics);
    }
    Tensor ereT = Tensor::constant({3 * k_, ns}, std::move(ere));
    Tensor eimT = Tensor::constant({3 * k_, ns}, std::move(eim));
    Tensor bre = ad::sub(ad::matmul(w0re, ereT), ad::matmul(w0im, eimT));  // [3K, Ns]
    Tensor bim = ad::add(ad::matmul(w0re, eimT), ad::matmul(w0im, ereT));
    Tensor bstack = ad::concat_rows({bre, bim});  // [6K, Ns]
    std::vector<long> born_idx(ns * k_ * 6);
    for (long u = 0; u < ns; ++u)
        for (long i = 0; i < k_; ++i)
            for (int c = 0; c < 6; ++c) born_idx[(u * k_ + i) * 6 + c] = s_rearrange_[i * 6 + c] * ns + u;
    Tensor born6 = ad::gather_flat(bstack, born_idx, {ns * k_, 6});

    std::vector<long> tile_elem(ns * k_), tile_wave(ns * k_);
    for (long u = 0; u < ns; ++u)
        for (long i = 0; i < k_; ++i) {
            tile_elem[u * k_ + i] = i;
            tile_wave[u * k_ + i] = u;
        }
    Tensor s_tiled = ad::gather_rows(s6, tile_elem);    // [NsK, 6]
    Tensor h_tiled = ad::gather_rows(hk, tile_elem);    // [NsK, D]
    Tensor gammaT = Tensor::constant({ns, 4 * cfg_.angle_harmonics}, std::move(gamma));
    Tensor gamma_tiled = ad::gather_rows(gammaT, tile_wave);

    Tensor h1 = ad::matmul(ad::concat_cols({s_tiled, born6}), tape.leaf(w1_));
    Tensor act = ad::relu(ad::concat_cols({h1, gamma_tiled}));
    Tensor f = ad::add(ad::matmul(act, tape.leaf(w2_)), ad::tile_rows(tape.leaf(b_), ns * k_));

    Tensor z = ad::concat_cols({h_tiled, f});
    return ad::scale(ad::matmul(z, tape.leaf(head_)), current_scale_);  // [NsK, 6]
}

Tensor PhyKanModel::loss_graph(Tape& tape, const std::vector<em::PlaneWave>& waves) {
    const long ns = static_cast<long>(waves.size());
    Tensor j6 = currents_graph(tape, waves);

    std::vector<long> xidx(6 * k_ * ns);
    for (int c = 0; c < 6; ++c)
        for (long i = 0; i < k_; ++i)
            for (long u = 0; u < ns; ++u) {
                long row = (c < 3) ? (c * k_ + i) : (3 * k_ + (c - 3) * k_ + i);
                xidx[row * ns + u] = (u * k_ + i) * 6 + c;
            }
    Tensor xmat = ad::gather_flat(j6, xidx, {6 * k_, ns});

    // right-hand side at the displaced collocation points
    std::vector<double> edata(6 * k_ * ns);
    for (long u = 0; u < ns; ++u) {
        VectorXcd e = nullfield_rhs(*mesh_, waves[u], consts_, cfg_.collocation);
        for (long r = 0; r < 3 * k_; ++r) {
            edata[r * ns + u] = e(r).real();
            edata[(3 * k_ + r) * ns + u] = e(r).imag();
        }
    }
    Tensor emat = Tensor::constant({6 * k_, ns}, std::move(edata));

    Tensor resid = ad::sub(ad::matmul(efie_real_, xmat), emat);
    return ad::scale(ad::sum_all(ad::mul(resid, resid)), 1.0 / (static_cast<double>(ns) * k_));
}

std::vector<WaveCurrents> PhyKanModel::predict(const std::vector<em::PlaneWave>& waves) {
    Tape tape;
    Tensor j6 = currents_graph(tape, waves);
    const auto& v = j6.values();
    std::vector<WaveCurrents> out(waves.size(), WaveCurrents(k_));
    for (size_t u = 0; u < waves.size(); ++u)
        for (long i = 0; i < k_; ++i) {
            const double* row = v.data() + ((u * k_ + i) * 6);
            out[u][i] = Vector3cd(complex<double>(row[0], row[3]), complex<double>(row[1], row[4]),
                                  complex<double>(row[2], row[5]));
        }
    return out;
}

double PhyKanModel::zero_baseline_loss(const std::vector<em::PlaneWave>& waves) const {
    double acc = 0.0;
    for (const auto& w : waves) acc += nullfield_rhs(*mesh_, w, consts_, cfg_.collocation).squaredNorm();
    return acc / (static_cast<double>(waves.size()) * k_);
}

}  // namespace phykan::model
