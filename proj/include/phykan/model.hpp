#pragma once

#include "phykan/adam.hpp"
#include "phykan/em.hpp"
#include "phykan/kan.hpp"
#include "phykan/mesh.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <vector>

namespace phykan::model {

using WaveCurrents = std::vector<Eigen::Vector3cd>;  // one 3-vector per element

// Per-edge geometric descriptor, d = 15: midpoint (3, over the bounding-box
// diagonal), edge direction (3), length/lambda (1), both face normals (6),
// both face areas/lambda^2 (2).
Eigen::MatrixXd edge_features(const mesh::TriMesh& m, const em::EmConstants& consts);

// Interleaved sin/cos embedding of (theta, phi), octave frequencies
// w_l = 2^(l-1); length 4L.
std::vector<double> angle_embedding(double theta, double phi, int harmonics);

// Dyadic-Green coupling blocks over element centroids: off-diagonal 3x3
// blocks G(p_k, p_j) A_j, diagonal the scalar self-term
// (-i w mu0 integral of 1/(4 pi R)) I. Index layout c*K + k. This matrix
// seeds the global branch (green_prior_init below).
Eigen::MatrixXcd efie_collocation_operator(const mesh::TriMesh& m, const em::EmConstants& consts);

// Discretized EFIE operator used by the residual loss. The residual of
// Eq.-(1)-style collocation is evaluated at points displaced inward from the
// centroids (p_k - delta_k n_k, delta_k = displacement * sqrt(A_k)), where
// the true current extinguishes the incident field exactly and the kernel
// stays bounded; source patches closer than near_cutoff * sqrt(A_j) are
// integrated by subdivision instead of centroid sampling. The sign follows
// the convention  sum_j W_kj J_j = E_inc(p_k)  of the integral equation.
struct CollocationSpec {
    double displacement = 0.5;
    double near_cutoff = 3.0;
};
Eigen::MatrixXcd nullfield_efie_operator(const mesh::TriMesh& m, const em::EmConstants& consts,
                                         const CollocationSpec& spec = {});
// Incident-field samples at the displaced collocation points.
Eigen::VectorXcd nullfield_rhs(const mesh::TriMesh& m, const em::PlaneWave& wave,
                               const em::EmConstants& consts, const CollocationSpec& spec = {});

// Incident-field samples at centroids, stacked like the operator rows.
Eigen::VectorXcd incident_samples(const mesh::TriMesh& m, const em::PlaneWave& wave,
                                  const em::EmConstants& consts);

// First-layer weights of the global branch. Green initialization normalizes
// the collocation blocks so the largest block Frobenius norm is 1; the
// ablation arm draws random entries of matched RMS scale.
Eigen::MatrixXcd green_prior_init(const mesh::TriMesh& m, const em::EmConstants& consts);
Eigen::MatrixXcd random_prior_like(const Eigen::MatrixXcd& reference, std::uint64_t seed);

// EFIE residual loss over a batch of incident waves (plain complex route,
// independent of the autodiff path):
//   L = 1/(Ns K) sum_u sum_k | sum_{j!=k} W_kj J_u(p_j) + S_k J_u(p_k) - E_u |^2
// built on the null-field collocation operator above. Zero currents under a
// unit-amplitude wave give exactly 1.
double efie_residual_loss(const std::vector<WaveCurrents>& currents, const mesh::TriMesh& m,
                          const std::vector<em::PlaneWave>& waves, const em::EmConstants& consts,
                          const CollocationSpec& spec = {});
// Same, with arbitrary right-hand-side field samples (manufactured solutions).
double efie_residual_loss_fields(const std::vector<WaveCurrents>& currents, const mesh::TriMesh& m,
                                 const std::vector<Eigen::VectorXcd>& field_samples,
                                 const em::EmConstants& consts, const CollocationSpec& spec = {});

// Normalized reconstruction MSE: mean |pre - ref|^2 / mean |ref|^2 over
// elements and components (and waves in the batch form).
double reconstruction_mse(const WaveCurrents& pre, const WaveCurrents& ref);
double reconstruction_mse(const std::vector<WaveCurrents>& pre, const std::vector<WaveCurrents>& ref);

struct ModelConfig {
    kan::VariantConfig variant{};
    long latent = 64;        // D
    int angle_harmonics = 4; // L
    bool green_init = true;
    std::uint64_t seed = 1;
    CollocationSpec collocation{};
};

// Dual-branch surface-current model: a local KAN over edge nodes averaged
// onto elements, and a global branch whose first layer carries dyadic-Green
// structure, conditioned on the incidence angle embedding; a linear head
// maps the fused features to Re/Im current components per element.
class PhyKanModel {
public:
    PhyKanModel(const mesh::TriMesh& m, const em::EmConstants& consts, const ModelConfig& cfg);

    // training loss over a batch of waves, recorded on the tape
    ad::Tensor loss_graph(ad::Tape& tape, const std::vector<em::PlaneWave>& waves);

    // currents for each wave (inference)
    std::vector<WaveCurrents> predict(const std::vector<em::PlaneWave>& waves);

    std::vector<ad::Parameter*> parameters();
    const ModelConfig& config() const { return cfg_; }
    const mesh::TriMesh& surface() const { return *mesh_; }
    const em::EmConstants& constants() const { return consts_; }
    long element_count() const { return k_; }
    long parameter_count() const;

    // loss of the all-zero prediction (the unit baseline)
    double zero_baseline_loss(const std::vector<em::PlaneWave>& waves) const;

private:
    ad::Tensor currents_graph(ad::Tape& tape, const std::vector<em::PlaneWave>& waves);  // [Ns*K, 6]

    const mesh::TriMesh* mesh_;
    em::EmConstants consts_;
    ModelConfig cfg_;
    long k_ = 0, m_edges_ = 0;

    // constants
    Eigen::MatrixXd features_;                   // [M, 15]
    ad::CsrMatrix adjacency_;
    std::vector<long> element_edge_idx_;         // [3K] gather plan for Eq.-(9) mean
    Eigen::MatrixXcd efie_op_;                   // [3K, 3K] physical operator
    ad::Tensor efie_real_;                       // [6K, 6K] stacked real form (projected if set)
    ad::Tensor p_stacked_;                       // [3K, 1] centroid components
    std::vector<long> s_rearrange_;              // [K*6] complex stack -> per-element channels
    double current_scale_ = 1.0;

    // parameters
    std::unique_ptr<kan::KanStack> local_;
    ad::Parameter w0_re_, w0_im_;  // [3K, 3K]
    ad::Parameter w1_;             // [12, D]
    ad::Parameter w2_;             // [D + 4L, D]
    ad::Parameter b_;              // [1, D]
    ad::Parameter head_;           // [2D, 6]
};

}  // namespace phykan::model
