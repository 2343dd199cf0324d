#include "phykan/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace phykan::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::string to_string(const Shape& s) {
    return "[" + std::to_string(s.rows) + "," + std::to_string(s.cols) + "]";
}

namespace {

Buffer make_buffer(long n) { return std::make_shared<std::vector<double>>(n); }

Tape* common_tape(const Tensor& a, const Tensor& b) {
    Tape* t = a.on_tape() ? a.tape() : nullptr;
    if (b.on_tape()) {
        if (t && t != b.tape()) throw ShapeError("operands recorded on different tapes");
        t = b.tape();
    }
    return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape() == b.shape()))
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

void axpy(std::vector<double>& dst, const std::vector<double>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    if (static_cast<long>(data.size()) != shape.count())
        throw ShapeError("constant: data length " + std::to_string(data.size()) +
                         " does not match shape " + to_string(shape));
    Tensor t;
    t.shape_ = shape;
    t.data_ = std::make_shared<std::vector<double>>(std::move(data));
    return t;
}

Tensor Tape::emit(Shape shape, Buffer data, std::function<void(Tape&, long)> vjp, Parameter* param) {
    Node n;
    n.shape = shape;
    n.value = data;
    n.vjp = std::move(vjp);
    n.param = param;
    nodes_.push_back(std::move(n));
    Tensor t;
    t.shape_ = shape;
    t.data_ = std::move(data);
    t.tape_ = this;
    t.node_ = static_cast<long>(nodes_.size()) - 1;
    return t;
}

Tensor Tape::leaf(Parameter& p) {
    auto buf = std::make_shared<std::vector<double>>(p.value());
    return emit(p.shape(), buf, nullptr, &p);
}

std::vector<double>& Tape::grad_of(long node) {
    Node& n = nodes_[node];
    if (n.grad.empty()) n.grad.assign(n.shape.count(), 0.0);
    return n.grad;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.on_tape() || loss.tape() != this)
        throw std::invalid_argument("backward: loss tensor is not recorded on this tape");
    if (loss.shape().count() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    for (auto& n : nodes_) n.grad.clear();
    grad_of(loss.node())[0] = 1.0;
    for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad.empty()) continue;
        if (n.param) {
            axpy(n.param->grad(), n.grad);
        } else if (n.vjp) {
            n.vjp(*this, i);
        }
    }
}

// ---- elementwise -----------------------------------------------------------

namespace {

// Shared skeleton for unary elementwise ops. dfdx is evaluated lazily in the
// backward closure from the saved input buffer.
template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF dfdx) {
    const auto& x = a.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = f(x[i]);
    if (!a.on_tape()) return Tensor::constant(a.shape(), std::move(*out));
    Buffer xin = std::make_shared<std::vector<double>>(x);
    long pa = a.node();
    return a.tape()->emit(a.shape(), out, [xin, pa, dfdx](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx((*xin)[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto &x = a.values(), &y = b.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = x[i] + y[i];
    Tape* tp = common_tape(a, b);
    if (!tp) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.on_tape() ? a.node() : -1, pb = b.on_tape() ? b.node() : -1;
    return tp->emit(a.shape(), out, [pa, pb](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        if (pa >= 0) axpy(t.grad_of(pa), g);
        if (pb >= 0) axpy(t.grad_of(pb), g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto &x = a.values(), &y = b.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = x[i] - y[i];
    Tape* tp = common_tape(a, b);
    if (!tp) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.on_tape() ? a.node() : -1, pb = b.on_tape() ? b.node() : -1;
    return tp->emit(a.shape(), out, [pa, pb](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        if (pa >= 0) axpy(t.grad_of(pa), g);
        if (pb >= 0) {
            auto& gb = t.grad_of(pb);
            for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto &x = a.values(), &y = b.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = x[i] * y[i];
    Tape* tp = common_tape(a, b);
    if (!tp) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.on_tape() ? a.node() : -1, pb = b.on_tape() ? b.node() : -1;
    Buffer xs = std::make_shared<std::vector<double>>(x);
    Buffer ys = std::make_shared<std::vector<double>>(y);
    return tp->emit(a.shape(), out, [pa, pb, xs, ys](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        if (pa >= 0) {
            auto& ga = t.grad_of(pa);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*ys)[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_of(pb);
            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*xs)[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    const auto &x = a.values(), &y = b.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = x[i] / y[i];
    Tape* tp = common_tape(a, b);
    if (!tp) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.on_tape() ? a.node() : -1, pb = b.on_tape() ? b.node() : -1;
    Buffer xs = std::make_shared<std::vector<double>>(x);
    Buffer ys = std::make_shared<std::vector<double>>(y);
    return tp->emit(a.shape(), out, [pa, pb, xs, ys](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        if (pa >= 0) {
            auto& ga = t.grad_of(pa);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (*ys)[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_of(pb);
            for (size_t i = 0; i < g.size(); ++i) {
                double yi = (*ys)[i];
                gb[i] -= g[i] * (*xs)[i] / (yi * yi);
            }
        }
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
    const auto& x = a.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = c * x[i];
    if (!a.on_tape()) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.node();
    return a.tape()->emit(a.shape(), out, [pa, c](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    const auto& x = a.values();
    auto out = make_buffer(x.size());
    for (size_t i = 0; i < x.size(); ++i) (*out)[i] = x[i] + c;
    if (!a.on_tape()) return Tensor::constant(a.shape(), std::move(*out));
    long pa = a.node();
    return a.tape()->emit(a.shape(), out, [pa](Tape& t, long self) {
        axpy(t.grad_of(pa), t.node_grad(self));
    });
}

Tensor power(const Tensor& a, double p) {
    return unary_op(
        a, [p](double v) { return std::pow(v, p); },
        [p](double v) { return p * std::pow(v, p - 1.0); });
}

Tensor sin(const Tensor& a) {
    return unary_op(a, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

Tensor cos(const Tensor& a) {
    return unary_op(a, [](double v) { return std::cos(v); }, [](double v) { return -std::sin(v); });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor silu(const Tensor& a) {
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    return unary_op(
        a, [sig](double v) { return v * sig(v); },
        [sig](double v) {
            double s = sig(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

// ---- matmul & friends -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().cols != b.shape().rows)
        throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
    Shape os{a.shape().rows, b.shape().cols};
    auto out = make_buffer(os.count());
    {
        ConstMap A(a.values().data(), a.shape().rows, a.shape().cols);
        ConstMap B(b.values().data(), b.shape().rows, b.shape().cols);
        MutMap O(out->data(), os.rows, os.cols);
        O.noalias() = A * B;
    }
    Tape* tp = common_tape(a, b);
    if (!tp) return Tensor::constant(os, std::move(*out));
    long pa = a.on_tape() ? a.node() : -1, pb = b.on_tape() ? b.node() : -1;
    Buffer av = std::make_shared<std::vector<double>>(a.values());
    Buffer bv = std::make_shared<std::vector<double>>(b.values());
    Shape as = a.shape(), bs = b.shape();
    return tp->emit(os, out, [pa, pb, av, bv, as, bs, os](Tape& t, long self) {
        ConstMap G(t.node_grad(self).data(), os.rows, os.cols);
        if (pa >= 0) {
            MutMap GA(t.grad_of(pa).data(), as.rows, as.cols);
            ConstMap B(bv->data(), bs.rows, bs.cols);
            GA.noalias() += G * B.transpose();
        }
        if (pb >= 0) {
            MutMap GB(t.grad_of(pb).data(), bs.rows, bs.cols);
            ConstMap A(av->data(), as.rows, as.cols);
            GB.noalias() += A.transpose() * G;
        }
    });
}

Tensor transpose(const Tensor& a) {
    Shape os{a.shape().cols, a.shape().rows};
    auto out = make_buffer(os.count());
    {
        ConstMap A(a.values().data(), a.shape().rows, a.shape().cols);
        MutMap O(out->data(), os.rows, os.cols);
        O = A.transpose();
    }
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    Shape as = a.shape();
    return a.tape()->emit(os, out, [pa, as, os](Tape& t, long self) {
        ConstMap G(t.node_grad(self).data(), os.rows, os.cols);
        MutMap GA(t.grad_of(pa).data(), as.rows, as.cols);
        GA.noalias() += G.transpose();
    });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    long rows = xs[0].shape().rows, cols = 0;
    Tape* tp = nullptr;
    for (const auto& x : xs) {
        if (x.shape().rows != rows) throw ShapeError("concat_cols: row mismatch");
        cols += x.shape().cols;
        if (x.on_tape()) {
            if (tp && tp != x.tape()) throw ShapeError("concat_cols: different tapes");
            tp = x.tape();
        }
    }
    Shape os{rows, cols};
    auto out = make_buffer(os.count());
    long off = 0;
    for (const auto& x : xs) {
        long c = x.shape().cols;
        for (long r = 0; r < rows; ++r)
            std::copy_n(x.values().data() + r * c, c, out->data() + r * cols + off);
        off += c;
    }
    if (!tp) return Tensor::constant(os, std::move(*out));
    struct Part {
        long node, off, cols;
    };
    std::vector<Part> parts;
    off = 0;
    for (const auto& x : xs) {
        if (x.on_tape()) parts.push_back({x.node(), off, x.shape().cols});
        off += x.shape().cols;
    }
    return tp->emit(os, out, [parts, os](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        for (const auto& p : parts) {
            auto& gp = t.grad_of(p.node);
            for (long r = 0; r < os.rows; ++r)
                for (long c = 0; c < p.cols; ++c) gp[r * p.cols + c] += g[r * os.cols + p.off + c];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty input");
    long cols = xs[0].shape().cols, rows = 0;
    Tape* tp = nullptr;
    for (const auto& x : xs) {
        if (x.shape().cols != cols) throw ShapeError("concat_rows: column mismatch");
        rows += x.shape().rows;
        if (x.on_tape()) {
            if (tp && tp != x.tape()) throw ShapeError("concat_rows: different tapes");
            tp = x.tape();
        }
    }
    Shape os{rows, cols};
    auto out = make_buffer(os.count());
    long off = 0;
    for (const auto& x : xs) {
        std::copy(x.values().begin(), x.values().end(), out->begin() + off);
        off += x.shape().count();
    }
    if (!tp) return Tensor::constant(os, std::move(*out));
    struct Part {
        long node, off, count;
    };
    std::vector<Part> parts;
    off = 0;
    for (const auto& x : xs) {
        if (x.on_tape()) parts.push_back({x.node(), off, x.shape().count()});
        off += x.shape().count();
    }
    return tp->emit(os, out, [parts](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        for (const auto& p : parts) {
            auto& gp = t.grad_of(p.node);
            for (long i = 0; i < p.count; ++i) gp[i] += g[p.off + i];
        }
    });
}

Tensor slice_cols(const Tensor& a, long c0, long c1) {
    const Shape as = a.shape();
    if (c0 < 0 || c1 > as.cols || c0 >= c1) throw ShapeError("slice_cols: bad column range");
    Shape os{as.rows, c1 - c0};
    auto out = make_buffer(os.count());
    for (long r = 0; r < as.rows; ++r)
        std::copy_n(a.values().data() + r * as.cols + c0, os.cols, out->data() + r * os.cols);
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as, os, c0](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < os.rows; ++r)
            for (long c = 0; c < os.cols; ++c) ga[r * as.cols + c0 + c] += g[r * os.cols + c];
    });
}

Tensor slice_rows(const Tensor& a, long r0, long r1) {
    const Shape as = a.shape();
    if (r0 < 0 || r1 > as.rows || r0 >= r1) throw ShapeError("slice_rows: bad row range");
    Shape os{r1 - r0, as.cols};
    auto out = make_buffer(os.count());
    std::copy_n(a.values().data() + r0 * as.cols, os.count(), out->data());
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as, r0, os](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long i = 0; i < os.count(); ++i) ga[r0 * as.cols + i] += g[i];
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    auto out = make_buffer(1);
    (*out)[0] = s;
    if (!a.on_tape()) return Tensor::constant({1, 1}, std::move(*out));
    long pa = a.node();
    return a.tape()->emit({1, 1}, out, [pa](Tape& t, long self) {
        double g = t.node_grad(self)[0];
        auto& ga = t.grad_of(pa);
        for (auto& v : ga) v += g;
    });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.shape().count())); }

Tensor sum_cols(const Tensor& a) {
    const Shape as = a.shape();
    Shape os{as.rows, 1};
    auto out = make_buffer(os.count());
    for (long r = 0; r < as.rows; ++r) {
        double s = 0.0;
        for (long c = 0; c < as.cols; ++c) s += a.values()[r * as.cols + c];
        (*out)[r] = s;
    }
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < as.rows; ++r)
            for (long c = 0; c < as.cols; ++c) ga[r * as.cols + c] += g[r];
    });
}

Tensor reshape(const Tensor& a, Shape s) {
    if (s.count() != a.shape().count())
        throw ShapeError("reshape: element count mismatch " + to_string(a.shape()) + " -> " + to_string(s));
    auto out = std::make_shared<std::vector<double>>(a.values());
    if (!a.on_tape()) return Tensor::constant(s, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(s, out, [pa](Tape& t, long self) { axpy(t.grad_of(pa), t.node_grad(self)); });
}

Tensor gather_rows(const Tensor& a, const std::vector<long>& idx) {
    const Shape as = a.shape();
    Shape os{static_cast<long>(idx.size()), as.cols};
    auto out = make_buffer(os.count());
    for (long r = 0; r < os.rows; ++r) {
        long src = idx[r];
        if (src < 0 || src >= as.rows) throw ShapeError("gather_rows: index out of range");
        std::copy_n(a.values().data() + src * as.cols, as.cols, out->data() + r * as.cols);
    }
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    auto ix = std::make_shared<std::vector<long>>(idx);
    return a.tape()->emit(os, out, [pa, ix, as, os](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < os.rows; ++r)
            for (long c = 0; c < as.cols; ++c) ga[(*ix)[r] * as.cols + c] += g[r * as.cols + c];
    });
}

Tensor gather_flat(const Tensor& a, const std::vector<long>& idx, Shape os) {
    if (static_cast<long>(idx.size()) != os.count())
        throw ShapeError("gather_flat: index count does not match output shape");
    auto out = make_buffer(os.count());
    long n = a.shape().count();
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= n) throw ShapeError("gather_flat: index out of range");
        (*out)[i] = a.values()[idx[i]];
    }
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    auto ix = std::make_shared<std::vector<long>>(idx);
    return a.tape()->emit(os, out, [pa, ix](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (size_t i = 0; i < ix->size(); ++i) ga[(*ix)[i]] += g[i];
    });
}

Tensor tile_rows(const Tensor& a, long n) {
    if (a.shape().rows != 1) throw ShapeError("tile_rows: input must have a single row");
    Shape os{n, a.shape().cols};
    auto out = make_buffer(os.count());
    for (long r = 0; r < n; ++r) std::copy(a.values().begin(), a.values().end(), out->begin() + r * os.cols);
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, os](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < os.rows; ++r)
            for (long c = 0; c < os.cols; ++c) ga[c] += g[r * os.cols + c];
    });
}

Tensor colblock_sum(const Tensor& a, long group) {
    const Shape as = a.shape();
    if (group <= 0 || as.cols % group != 0) throw ShapeError("colblock_sum: group does not divide columns");
    Shape os{as.rows, as.cols / group};
    auto out = make_buffer(os.count());
    for (long r = 0; r < as.rows; ++r)
        for (long b = 0; b < os.cols; ++b) {
            double s = 0.0;
            for (long k = 0; k < group; ++k) s += a.values()[r * as.cols + b * group + k];
            (*out)[r * os.cols + b] = s;
        }
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as, os, group](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < as.rows; ++r)
            for (long b = 0; b < os.cols; ++b)
                for (long k = 0; k < group; ++k)
                    ga[r * as.cols + b * group + k] += g[r * os.cols + b];
    });
}

Tensor rowblock_sum(const Tensor& a, long group) {
    const Shape as = a.shape();
    if (group <= 0 || as.rows % group != 0) throw ShapeError("rowblock_sum: group does not divide rows");
    Shape os{as.rows / group, as.cols};
    auto out = make_buffer(os.count());
    for (long r = 0; r < os.rows; ++r)
        for (long g = 0; g < group; ++g)
            for (long c = 0; c < as.cols; ++c)
                (*out)[r * as.cols + c] += a.values()[(r * group + g) * as.cols + c];
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as, os, group](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < os.rows; ++r)
            for (long k = 0; k < group; ++k)
                for (long c = 0; c < as.cols; ++c)
                    ga[(r * group + k) * as.cols + c] += g[r * as.cols + c];
    });
}

Tensor repeat_block_cols(const Tensor& a, long times) {
    const Shape as = a.shape();
    if (times <= 0) throw ShapeError("repeat_block_cols: times must be positive");
    Shape os{as.rows, as.cols * times};
    auto out = make_buffer(os.count());
    for (long r = 0; r < as.rows; ++r)
        for (long t = 0; t < times; ++t)
            std::copy_n(a.values().data() + r * as.cols, as.cols,
                        out->data() + r * os.cols + t * as.cols);
    if (!a.on_tape()) return Tensor::constant(os, std::move(*out));
    long pa = a.node();
    return a.tape()->emit(os, out, [pa, as, os, times](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& ga = t.grad_of(pa);
        for (long r = 0; r < as.rows; ++r)
            for (long k = 0; k < times; ++k)
                for (long c = 0; c < as.cols; ++c)
                    ga[r * as.cols + c] += g[r * os.cols + k * as.cols + c];
    });
}

Tensor detach(const Tensor& a) {
    return Tensor::constant(a.shape(), a.values());
}

// ---- sparse ----------------------------------------------------------------

CsrMatrix CsrMatrix::transposed() const {
    CsrMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.row_ptr.assign(cols + 1, 0);
    for (long c : col_idx) t.row_ptr[c + 1]++;
    for (long i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    t.col_idx.resize(col_idx.size());
    t.vals.resize(vals.size());
    std::vector<long> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (long r = 0; r < rows; ++r)
        for (long k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            long pos = cursor[col_idx[k]]++;
            t.col_idx[pos] = r;
            t.vals[pos] = vals[k];
        }
    return t;
}

Tensor spmm(const std::shared_ptr<const CsrMatrix>& a, const Tensor& x) {
    if (a->cols != x.shape().rows) throw ShapeError("spmm: dimension mismatch");
    Shape os{a->rows, x.shape().cols};
    auto out = make_buffer(os.count());
    const long c = os.cols;
    for (long r = 0; r < a->rows; ++r) {
        double* orow = out->data() + r * c;
        for (long k = a->row_ptr[r]; k < a->row_ptr[r + 1]; ++k) {
            const double v = a->vals[k];
            const double* xrow = x.values().data() + a->col_idx[k] * c;
            for (long j = 0; j < c; ++j) orow[j] += v * xrow[j];
        }
    }
    if (!x.on_tape()) return Tensor::constant(os, std::move(*out));
    long px = x.node();
    return x.tape()->emit(os, out, [a, px, c](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& gx = t.grad_of(px);
        for (long r = 0; r < a->rows; ++r)
            for (long k = a->row_ptr[r]; k < a->row_ptr[r + 1]; ++k) {
                const double v = a->vals[k];
                double* grow = gx.data() + a->col_idx[k] * c;
                const double* orow = g.data() + r * c;
                for (long j = 0; j < c; ++j) grow[j] += v * orow[j];
            }
    });
}

// ---- B-spline basis ---------------------------------------------------------

void BsplineGrid::eval(double x, double* b, double* db) const {
    const int nb = num_basis();
    const int nk = grid_size + 2 * degree + 1;  // knot count
    const double xc = std::clamp(x, lo, hi);

    // degree-0 values over all spans
    double work[64];
    double lower[64];  // degree-1 below final, for derivatives
    const int nspan = nk - 1;
    for (int i = 0; i < nspan; ++i) work[i] = 0.0;
    {
        double h = (hi - lo) / grid_size;
        int span = degree + std::min(static_cast<int>((xc - lo) / h), grid_size - 1);
        work[span] = 1.0;
    }
    for (int p = 1; p <= degree; ++p) {
        if (p == degree)
            for (int i = 0; i < nspan; ++i) lower[i] = work[i];
        for (int i = 0; i + p < nspan; ++i) {
            double left = 0.0, right = 0.0;
            if (work[i] != 0.0) left = (xc - knot(i)) / (knot(i + p) - knot(i)) * work[i];
            if (work[i + 1] != 0.0) right = (knot(i + p + 1) - xc) / (knot(i + p + 1) - knot(i + 1)) * work[i + 1];
            work[i] = left + right;
        }
        for (int i = nspan - p; i < nspan; ++i) work[i] = 0.0;
    }
    for (int i = 0; i < nb; ++i) {
        double d = 0.0;
        if (degree > 0) {
            double t1 = knot(i + degree) - knot(i);
            double t2 = knot(i + degree + 1) - knot(i + 1);
            d = degree * (lower[i] / t1 - lower[i + 1] / t2);
        }
        db[i] = d;
        b[i] = work[i];
    }
    if (x != xc) {  // linear extrapolation outside the grid
        for (int i = 0; i < nb; ++i) b[i] += db[i] * (x - xc);
    }
}

Tensor bspline_basis(const Tensor& x, const BsplineGrid& grid) {
    const Shape xs = x.shape();
    const int nb = grid.num_basis();
    if (nb > 60) throw ShapeError("bspline_basis: grid too large");
    Shape os{xs.rows, xs.cols * nb};
    auto out = make_buffer(os.count());
    auto deriv = make_buffer(os.count());
    for (long i = 0; i < xs.count(); ++i)
        grid.eval(x.values()[i], out->data() + i * nb, deriv->data() + i * nb);
    if (!x.on_tape()) return Tensor::constant(os, std::move(*out));
    long px = x.node();
    return x.tape()->emit(os, out, [px, deriv, nb](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& gx = t.grad_of(px);
        for (size_t i = 0; i < gx.size(); ++i) {
            double s = 0.0;
            for (int k = 0; k < nb; ++k) s += g[i * nb + k] * (*deriv)[i * nb + k];
            gx[i] += s;
        }
    });
}

Tensor fourier_features(const Tensor& x, int harmonics, double base) {
    const Shape xs = x.shape();
    const int nf = 2 * harmonics;
    Shape os{xs.rows, xs.cols * nf};
    auto out = make_buffer(os.count());
    for (long i = 0; i < xs.count(); ++i) {
        double v = x.values()[i];
        for (int l = 1; l <= harmonics; ++l) {
            (*out)[i * nf + 2 * (l - 1)] = std::sin(l * base * v);
            (*out)[i * nf + 2 * (l - 1) + 1] = std::cos(l * base * v);
        }
    }
    if (!x.on_tape()) return Tensor::constant(os, std::move(*out));
    long px = x.node();
    Buffer saved = out;
    return x.tape()->emit(os, out, [px, saved, harmonics, base, nf](Tape& t, long self) {
        const auto& g = t.node_grad(self);
        auto& gx = t.grad_of(px);
        for (size_t i = 0; i < gx.size(); ++i) {
            double s = 0.0;
            for (int l = 1; l <= harmonics; ++l) {
                double sv = (*saved)[i * nf + 2 * (l - 1)];
                double cv = (*saved)[i * nf + 2 * (l - 1) + 1];
                s += l * base * (g[i * nf + 2 * (l - 1)] * cv - g[i * nf + 2 * (l - 1) + 1] * sv);
            }
            gx[i] += s;
        }
    });
}

}  // namespace phykan::ad
