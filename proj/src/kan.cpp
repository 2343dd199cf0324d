#include "phykan/kan.hpp"

#include <cmath>
#include <stdexcept>

namespace phykan::kan {

using ad::Parameter;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

VariantConfig parse_variant(const std::string& name) {
    if (name == "bspline") return {KernelVariant::BSpline, GraphVariant::None};
    if (name == "fourier") return {KernelVariant::Fourier, GraphVariant::None};
    if (name == "rational") return {KernelVariant::Rational, GraphVariant::None};
    if (name == "kagcn") return {KernelVariant::BSpline, GraphVariant::Gcn};
    if (name == "kagat") return {KernelVariant::BSpline, GraphVariant::Gat};
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected bspline|fourier|rational|kagcn|kagat)");
}

std::string variant_name(const VariantConfig& v) {
    if (v.graph == GraphVariant::Gcn) return "kagcn";
    if (v.graph == GraphVariant::Gat) return "kagat";
    switch (v.kernel) {
        case KernelVariant::BSpline: return "bspline";
        case KernelVariant::Fourier: return "fourier";
        case KernelVariant::Rational: return "rational";
    }
    return "?";
}

namespace {

std::vector<double> normal_vec(long n, Rng& rng, double scale) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

// feature expansion shared by the B-spline and Fourier kernels
Tensor feature_map(const KernelSpec& spec, const Tensor& x) {
    switch (spec.variant) {
        case KernelVariant::BSpline: return ad::bspline_basis(x, spec.grid);
        case KernelVariant::Fourier: return ad::fourier_features(x, spec.harmonics, spec.base_freq);
        case KernelVariant::Rational: throw std::logic_error("rational kernel has no feature map");
    }
    throw std::logic_error("bad kernel variant");
}

// P(x)/Q(x) evaluated per (input, output) pair on the repeated layout
// [B, out*in]; num rows are polynomial coefficients by power, den rows the
// squared-term coefficients keeping Q >= 1.
Tensor rational_ratio(Tape& tape, const Tensor& xe, Parameter& num, Parameter& den, long nrows,
                      long drows) {
    const long b = xe.shape().rows;
    Tensor numer = ad::tile_rows(ad::slice_rows(tape.leaf(num), 0, 1), b);
    Tensor denom = ad::add_scalar(ad::Tensor::zeros(xe.shape()), 1.0);
    Tensor xp = xe;
    for (long m = 1; m < nrows; ++m) {
        Tensor cm = ad::tile_rows(ad::slice_rows(tape.leaf(num), m, m + 1), b);
        numer = ad::add(numer, ad::mul(cm, xp));
        if (m <= drows) {
            Tensor qm = ad::tile_rows(ad::slice_rows(tape.leaf(den), m - 1, m), b);
            Tensor term = ad::mul(qm, xp);
            denom = ad::add(denom, ad::mul(term, term));
        }
        if (m + 1 < nrows) xp = ad::mul(xp, xe);
    }
    return ad::div(numer, denom);
}

}  // namespace

// ---- UnivariateKernel --------------------------------------------------------

UnivariateKernel::UnivariateKernel(std::string name, const KernelSpec& spec, Rng& rng,
                                   double coeff_scale)
    : spec_(spec),
      base_w_(name + ".wb", Shape{1, 1}, {1.0}),
      coeffs_(name + ".c",
              spec.variant == KernelVariant::Rational ? Shape{spec.num_degree + 1, 1}
                                                      : Shape{spec.features_per_input(), 1},
              normal_vec(spec.variant == KernelVariant::Rational ? spec.num_degree + 1
                                                                 : spec.features_per_input(),
                         rng, coeff_scale)),
      den_(name + ".q", Shape{std::max(spec.den_degree, 1), 1},
           normal_vec(std::max(spec.den_degree, 1), rng,
                      spec.variant == KernelVariant::Rational ? coeff_scale : 0.0)) {}

Tensor UnivariateKernel::eval(Tape& tape, const Tensor& x) {
    const Shape xs = x.shape();
    Tensor flat = ad::reshape(x, {xs.count(), 1});
    Tensor base = ad::matmul(ad::silu(flat), tape.leaf(base_w_));
    Tensor expansion;
    if (spec_.variant == KernelVariant::Rational) {
        // coefficients stored [np+1, 1]; evaluate P/Q directly on the flat input
        const long b = flat.shape().rows;
        Tensor numer = ad::tile_rows(ad::transpose(ad::slice_rows(tape.leaf(coeffs_), 0, 1)), b);
        Tensor denom = ad::add_scalar(ad::Tensor::zeros(flat.shape()), 1.0);
        Tensor xp = flat;
        for (long m = 1; m <= spec_.num_degree; ++m) {
            Tensor cm = ad::tile_rows(ad::transpose(ad::slice_rows(tape.leaf(coeffs_), m, m + 1)), b);
            numer = ad::add(numer, ad::mul(cm, xp));
            if (m <= spec_.den_degree) {
                Tensor qm = ad::tile_rows(ad::transpose(ad::slice_rows(tape.leaf(den_), m - 1, m)), b);
                Tensor term = ad::mul(qm, xp);
                denom = ad::add(denom, ad::mul(term, term));
            }
            if (m < spec_.num_degree) xp = ad::mul(xp, flat);
        }
        expansion = ad::div(numer, denom);
    } else {
        expansion = ad::matmul(feature_map(spec_, flat), tape.leaf(coeffs_));
    }
    return ad::reshape(ad::add(base, expansion), xs);
}

std::vector<Parameter*> UnivariateKernel::parameters() {
    if (spec_.variant == KernelVariant::Rational) return {&base_w_, &coeffs_, &den_};
    return {&base_w_, &coeffs_};
}

// ---- KanLayer ------------------------------------------------------------------

KanLayer::KanLayer(std::string name, long in_dim, long out_dim, const KernelSpec& spec, Rng& rng)
    : name_(name),
      in_(in_dim),
      out_(out_dim),
      spec_(spec),
      w_base_(name + ".wb", Shape{in_dim, out_dim},
              normal_vec(in_dim * out_dim, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)))),
      w_feat_(name + ".wf",
              spec.variant == KernelVariant::Rational
                  ? Shape{spec.num_degree + 1, in_dim * out_dim}
                  : Shape{in_dim * spec.features_per_input(), out_dim},
              normal_vec(spec.variant == KernelVariant::Rational
                             ? (spec.num_degree + 1) * in_dim * out_dim
                             : in_dim * spec.features_per_input() * out_dim,
                         rng, 0.1 / std::sqrt(static_cast<double>(in_dim)))),
      w_den_(name + ".wq", Shape{std::max(spec.den_degree, 1), in_dim * out_dim},
             normal_vec(std::max(spec.den_degree, 1) * in_dim * out_dim, rng,
                        spec.variant == KernelVariant::Rational ? 0.1 : 0.0)) {}

Tensor KanLayer::forward(Tape& tape, const Tensor& x) {
    if (x.shape().cols != in_)
        throw ad::ShapeError(name_ + ": input width " + std::to_string(x.shape().cols) +
                             " does not match layer in_dim " + std::to_string(in_));
    Tensor base = ad::matmul(ad::silu(x), tape.leaf(w_base_));
    if (spec_.variant == KernelVariant::Rational) {
        Tensor xe = ad::repeat_block_cols(x, out_);  // column o*in + i
        Tensor ratio = rational_ratio(tape, xe, w_feat_, w_den_, spec_.num_degree + 1, spec_.den_degree);
        return ad::add(base, ad::colblock_sum(ratio, in_));
    }
    Tensor feats = feature_map(spec_, x);  // [B, in*F]
    return ad::add(base, ad::matmul(feats, tape.leaf(w_feat_)));
}

std::vector<Parameter*> KanLayer::parameters() {
    if (spec_.variant == KernelVariant::Rational) return {&w_base_, &w_feat_, &w_den_};
    return {&w_base_, &w_feat_};
}

// ---- GraphKanLayer ---------------------------------------------------------------

ad::CsrMatrix gcn_normalize(const ad::CsrMatrix& a) {
    std::vector<double> deg(a.rows);
    for (long r = 0; r < a.rows; ++r) deg[r] = static_cast<double>(a.row_ptr[r + 1] - a.row_ptr[r]) + 1.0;
    ad::CsrMatrix n;
    n.rows = a.rows;
    n.cols = a.cols;
    n.row_ptr.assign(a.rows + 1, 0);
    for (long r = 0; r < a.rows; ++r) {
        // self loop first, then neighbors in column order
        std::vector<std::pair<long, double>> row;
        row.emplace_back(r, 1.0 / deg[r]);
        for (long k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            long c = a.col_idx[k];
            row.emplace_back(c, 1.0 / (std::sqrt(deg[r]) * std::sqrt(deg[c])));
        }
        std::sort(row.begin(), row.end());
        for (auto& [c, v] : row) {
            n.col_idx.push_back(c);
            n.vals.push_back(v);
        }
        n.row_ptr[r + 1] = static_cast<long>(n.col_idx.size());
    }
    return n;
}

GraphKanLayer::GraphKanLayer(std::string name, long in_dim, long out_dim, const KernelSpec& spec,
                             GraphVariant variant, const ad::CsrMatrix& adjacency, Rng& rng)
    : variant_(variant), inner_(name + ".kan", in_dim, out_dim, spec, rng) {
    if (variant_ == GraphVariant::Gcn) {
        norm_adj_ = std::make_shared<ad::CsrMatrix>(gcn_normalize(adjacency));
        return;
    }
    // GAT: fixed fan of {self + neighbors}; interior-edge graphs are 4-regular
    long deg = adjacency.row_ptr[1] - adjacency.row_ptr[0];
    for (long r = 0; r < adjacency.rows; ++r)
        if (adjacency.row_ptr[r + 1] - adjacency.row_ptr[r] != deg)
            throw std::invalid_argument("GraphKanLayer: GAT expects a regular adjacency");
    fan_ = deg + 1;
    for (long r = 0; r < adjacency.rows; ++r) {
        center_idx_.insert(center_idx_.end(), fan_, r);
        neighbor_idx_.push_back(r);  // self first
        for (long k = adjacency.row_ptr[r]; k < adjacency.row_ptr[r + 1]; ++k)
            neighbor_idx_.push_back(adjacency.col_idx[k]);
    }
    KernelSpec score_spec = spec;
    score_ = std::make_unique<KanLayer>(name + ".att", 2 * in_dim, 1, score_spec, rng);
    // zero scores at init: uniform attention over the fan
    for (auto* p : score_->parameters()) std::fill(p->value().begin(), p->value().end(), 0.0);
}

Tensor GraphKanLayer::forward(Tape& tape, const Tensor& x) {
    if (variant_ == GraphVariant::Gcn) return inner_.forward(tape, ad::spmm(norm_adj_, x));

    const long m = x.shape().rows, d = x.shape().cols;
    Tensor xc = ad::gather_rows(x, center_idx_);
    Tensor xn = ad::gather_rows(x, neighbor_idx_);
    Tensor scores = score_->forward(tape, ad::concat_cols({xc, xn}));  // [fan*M, 1]
    Tensor smat = ad::reshape(scores, {m, fan_});
    // numerically stable softmax; the shift is constant w.r.t. gradients
    std::vector<double> mx(m, -1e300);
    for (long r = 0; r < m; ++r)
        for (long c = 0; c < fan_; ++c) mx[r] = std::max(mx[r], smat.values()[r * fan_ + c]);
    Tensor shift = ad::repeat_block_cols(Tensor::constant({m, 1}, mx), fan_);
    Tensor e = ad::exp(ad::sub(smat, shift));
    Tensor att = ad::div(e, ad::repeat_block_cols(ad::sum_cols(e), fan_));
    Tensor w = ad::repeat_block_cols(ad::reshape(att, {m * fan_, 1}), d);
    Tensor agg = ad::rowblock_sum(ad::mul(w, xn), fan_);
    return inner_.forward(tape, agg);
}

std::vector<Parameter*> GraphKanLayer::parameters() {
    auto out = inner_.parameters();
    if (score_) {
        auto s = score_->parameters();
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

// ---- KanStack ---------------------------------------------------------------------

KanStack::KanStack(std::string name, long in_dim, long latent, const KernelSpec& spec,
                   GraphVariant graph, const ad::CsrMatrix* adjacency, Rng& rng)
    : latent_(latent),
      fuse_(name + ".fuse", Shape{3 * latent, latent},
            normal_vec(3 * latent * latent, rng, 1.0 / std::sqrt(3.0 * latent))) {
    const long dims[4] = {in_dim, latent, latent, latent};
    for (int l = 0; l < 3; ++l) {
        std::string lname = name + ".l" + std::to_string(l + 1);
        if (graph == GraphVariant::None) {
            plain_.push_back(std::make_unique<KanLayer>(lname, dims[l], dims[l + 1], spec, rng));
        } else {
            if (!adjacency) throw std::invalid_argument("KanStack: graph variant needs an adjacency");
            graph_.push_back(
                std::make_unique<GraphKanLayer>(lname, dims[l], dims[l + 1], spec, graph, *adjacency, rng));
        }
    }
}

Tensor KanStack::forward(Tape& tape, const Tensor& x) {
    Tensor h1 = plain_.empty() ? graph_[0]->forward(tape, x) : plain_[0]->forward(tape, x);
    Tensor h2 = plain_.empty() ? graph_[1]->forward(tape, h1) : plain_[1]->forward(tape, h1);
    Tensor h3 = plain_.empty() ? graph_[2]->forward(tape, h2) : plain_[2]->forward(tape, h2);
    return ad::matmul(ad::concat_cols({h1, h2, h3}), tape.leaf(fuse_));
}

std::vector<Parameter*> KanStack::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : plain_) {
        auto p = l->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    for (auto& l : graph_) {
        auto p = l->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    out.push_back(&fuse_);
    return out;
}

// ---- KanBasisSet --------------------------------------------------------------------

KanBasisSet::KanBasisSet(long num_basis, long kernels_per_basis, const KernelSpec& spec, Rng& rng)
    : nb_(num_basis),
      mk_(kernels_per_basis),
      w_("basis.w", Shape{3, num_basis * kernels_per_basis},
         normal_vec(3 * num_basis * kernels_per_basis, rng, 1.0)),
      beta_("basis.beta", Shape{1, num_basis * kernels_per_basis},
            normal_vec(num_basis * kernels_per_basis, rng, 0.5)),
      c_("basis.c", Shape{1, num_basis * kernels_per_basis},
         normal_vec(num_basis * kernels_per_basis, rng, 1.0)),
      phi_("basis.phi", spec, rng) {}

Tensor KanBasisSet::evaluate(Tape& tape, const Tensor& points) {
    const long k = points.shape().rows;
    Tensor proj = ad::add(ad::matmul(points, tape.leaf(w_)), ad::tile_rows(tape.leaf(beta_), k));
    Tensor phi = phi_.eval(tape, proj);
    Tensor weighted = ad::mul(phi, ad::tile_rows(tape.leaf(c_), k));
    return ad::colblock_sum(weighted, mk_);  // [K, nb]
}

Tensor KanBasisSet::contract(Tape& tape, const Tensor& points, const Tensor& alphas) {
    return ad::sum_cols(ad::mul(evaluate(tape, points), alphas));  // [K,1]
}

std::vector<Parameter*> KanBasisSet::parameters() {
    auto out = phi_.parameters();
    out.push_back(&w_);
    out.push_back(&beta_);
    out.push_back(&c_);
    return out;
}

}  // namespace phykan::kan
