#pragma once

#include "phykan/rng.hpp"
#include "phykan/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace phykan::kan {

enum class KernelVariant { BSpline, Fourier, Rational };
enum class GraphVariant { None, Gcn, Gat };

struct VariantConfig {
    KernelVariant kernel = KernelVariant::BSpline;
    GraphVariant graph = GraphVariant::None;
};

// config strings from the experiment protocol
VariantConfig parse_variant(const std::string& name);  // bspline|fourier|rational|kagcn|kagat
std::string variant_name(const VariantConfig& v);

struct KernelSpec {
    KernelVariant variant = KernelVariant::BSpline;
    ad::BsplineGrid grid{};   // B-spline kernel
    int harmonics = 8;        // Fourier kernel, base frequency below
    double base_freq = 1.0;
    int num_degree = 3;       // rational numerator degree
    int den_degree = 2;       // rational denominator term count (squared guard)

    long features_per_input() const {
        switch (variant) {
            case KernelVariant::BSpline: return grid.num_basis();
            case KernelVariant::Fourier: return 2L * harmonics;
            case KernelVariant::Rational: return 0;  // no linear feature map
        }
        return 0;
    }
};

// One learnable univariate function phi(x) = w_b silu(x) + expansion(x).
// With zero expansion coefficients and w_b = 1 it reduces to x*sigmoid(x).
class UnivariateKernel {
public:
    UnivariateKernel(std::string name, const KernelSpec& spec, Rng& rng, double coeff_scale = 0.1);

    ad::Tensor eval(ad::Tape& tape, const ad::Tensor& x);
    std::vector<ad::Parameter*> parameters();

    const KernelSpec& spec() const { return spec_; }
    ad::Parameter& base_weight() { return base_w_; }
    ad::Parameter& coefficients() { return coeffs_; }
    ad::Parameter& denominator() { return den_; }

private:
    KernelSpec spec_;
    ad::Parameter base_w_;  // scalar w_b
    ad::Parameter coeffs_;  // feature coefficients / numerator polynomial
    ad::Parameter den_;     // rational denominator terms (unused otherwise)
};

// Dense KAN layer: out[o] = sum_i phi_io(x_i), phi as above with per-(i,o)
// coefficients; the silu base term is a learned linear map.
class KanLayer {
public:
    KanLayer(std::string name, long in_dim, long out_dim, const KernelSpec& spec, Rng& rng);

    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x);
    std::vector<ad::Parameter*> parameters();

    long in_dim() const { return in_; }
    long out_dim() const { return out_; }
    const KernelSpec& spec() const { return spec_; }

private:
    std::string name_;
    long in_ = 0, out_ = 0;
    KernelSpec spec_;
    ad::Parameter w_base_;  // [in, out]
    ad::Parameter w_feat_;  // [in*F, out] for bspline/fourier; numerator rows for rational
    ad::Parameter w_den_;   // [den_degree, in*out] rational only
};

// Graph aggregation in front of a KanLayer. GCN: fixed symmetric-normalized
// adjacency with self loops. GAT: single-head attention over {self, four
// neighbors}; scores come from a small KAN on concatenated node pairs and a
// zero initialization makes the attention uniform (mean aggregation).
class GraphKanLayer {
public:
    GraphKanLayer(std::string name, long in_dim, long out_dim, const KernelSpec& spec,
                  GraphVariant variant, const ad::CsrMatrix& adjacency, Rng& rng);

    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x);
    std::vector<ad::Parameter*> parameters();

    GraphVariant variant() const { return variant_; }
    KanLayer& inner() { return inner_; }

private:
    GraphVariant variant_;
    KanLayer inner_;
    std::shared_ptr<const ad::CsrMatrix> norm_adj_;     // GCN
    std::vector<long> center_idx_, neighbor_idx_;       // GAT gather plans
    long fan_ = 0;                                      // neighbors incl. self
    std::unique_ptr<KanLayer> score_;                   // GAT attention scores
};

// Three KAN layers whose outputs are concatenated and fused back to width D.
class KanStack {
public:
    KanStack(std::string name, long in_dim, long latent, const KernelSpec& spec, GraphVariant graph,
             const ad::CsrMatrix* adjacency, Rng& rng);

    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x);
    std::vector<ad::Parameter*> parameters();

    long latent() const { return latent_; }

private:
    long latent_;
    std::vector<std::unique_ptr<KanLayer>> plain_;
    std::vector<std::unique_ptr<GraphKanLayer>> graph_;
    ad::Parameter fuse_;  // [3D, D]
};

// Learnable spatial basis set b_n(p; u_n) = sum_i c_{n,i} phi(w_{n,i}.p + beta_{n,i});
// the KAN reading of a MoM basis family over element centroids.
class KanBasisSet {
public:
    KanBasisSet(long num_basis, long kernels_per_basis, const KernelSpec& spec, Rng& rng);

    // points [K,3] -> values [K, num_basis]
    ad::Tensor evaluate(ad::Tape& tape, const ad::Tensor& points);
    // contraction sum_n alpha_n b_n(p) for per-element alphas [K, num_basis]
    ad::Tensor contract(ad::Tape& tape, const ad::Tensor& points, const ad::Tensor& alphas);

    std::vector<ad::Parameter*> parameters();
    ad::Parameter& projections() { return w_; }
    ad::Parameter& offsets() { return beta_; }
    ad::Parameter& amplitudes() { return c_; }
    UnivariateKernel& kernel() { return phi_; }

private:
    long nb_, mk_;
    ad::Parameter w_;     // [3, nb*mk] projection directions
    ad::Parameter beta_;  // [1, nb*mk]
    ad::Parameter c_;     // [1, nb*mk] amplitudes
    UnivariateKernel phi_;
};

// D^{-1/2} (A + I) D^{-1/2} over a 0/1 adjacency
ad::CsrMatrix gcn_normalize(const ad::CsrMatrix& a);

}  // namespace phykan::kan
