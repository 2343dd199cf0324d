#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace phykan::ad {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// All tensors are dense row-major 2-D arrays of doubles. Scalars are [1,1],
// vectors [1,n] or [n,1].
struct Shape {
    long rows = 0;
    long cols = 0;
    long count() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

using Buffer = std::shared_ptr<std::vector<double>>;

// Named leaf tensor with a persistent gradient. Gradients accumulate across
// backward() calls; call zero_grad() between optimizer steps.
class Parameter {
public:
    Parameter(std::string name, Shape shape, std::vector<double> value)
        : name_(std::move(name)), shape_(shape), value_(std::move(value)), grad_(shape.count(), 0.0) {
        if (static_cast<long>(value_.size()) != shape_.count())
            throw ShapeError("parameter " + name_ + ": data length does not match shape");
    }

    const std::string& name() const { return name_; }
    const Shape& shape() const { return shape_; }
    std::vector<double>& value() { return value_; }
    const std::vector<double>& value() const { return value_; }
    std::vector<double>& grad() { return grad_; }
    const std::vector<double>& grad() const { return grad_; }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

private:
    std::string name_;
    Shape shape_;
    std::vector<double> value_;
    std::vector<double> grad_;
};

class Tape;

// Handle to a value, either a free constant or a node recorded on a tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor scalar(double v) { return constant({1, 1}, {v}); }
    static Tensor zeros(Shape shape) { return constant(shape, std::vector<double>(shape.count(), 0.0)); }

    const Shape& shape() const { return shape_; }
    const std::vector<double>& values() const { return *data_; }
    double scalar_value() const {
        if (shape_.count() != 1) throw ShapeError("scalar_value on non-scalar tensor");
        return (*data_)[0];
    }
    bool on_tape() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    long node() const { return node_; }

private:
    friend class Tape;
    Shape shape_;
    Buffer data_;
    Tape* tape_ = nullptr;
    long node_ = -1;
};

// Reverse-mode tape. Single-threaded; one tape per loss evaluation. Leaves
// are Parameters; backward() accumulates into Parameter::grad.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Record a parameter as a leaf node and return its tensor handle.
    Tensor leaf(Parameter& p);

    // Run reverse pass from a scalar loss. May be called more than once;
    // gradients accumulate on parameters.
    void backward(const Tensor& loss);

    long size() const { return static_cast<long>(nodes_.size()); }

    // Record a new node; used by the primitive ops. vjp(tape, self) reads
    // grad_of(self) and adds into the parents' grads.
    Tensor emit(Shape shape, Buffer data, std::function<void(Tape&, long)> vjp,
                Parameter* param = nullptr);

    std::vector<double>& grad_of(long node);
    const std::vector<double>& node_grad(long node) const { return nodes_[node].grad; }

private:
    struct Node {
        Shape shape;
        Buffer value;
        std::function<void(Tape&, long)> vjp;
        std::vector<double> grad;  // allocated during backward
        Parameter* param = nullptr;
    };

    std::vector<Node> nodes_;
};

// ---- primitive operations -------------------------------------------------
// Elementwise ops require identical shapes (no broadcasting; scalar-tensor
// combinations go through scale/add_scalar).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor slice_cols(const Tensor& a, long c0, long c1);
Tensor slice_rows(const Tensor& a, long r0, long r1);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_cols(const Tensor& a);  // [r,c] -> [r,1]
Tensor power(const Tensor& a, double p);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor silu(const Tensor& a);  // x * sigmoid(x)
Tensor relu(const Tensor& a);
Tensor reshape(const Tensor& a, Shape s);
// rows of `a` selected by constant indices; backward scatter-adds
Tensor gather_rows(const Tensor& a, const std::vector<long>& idx);
// arbitrary flat-index permutation/duplication into a new shape
Tensor gather_flat(const Tensor& a, const std::vector<long>& idx, Shape out);
Tensor tile_rows(const Tensor& a, long n);  // [1,c] -> [n,c]
// sum each contiguous block of `group` columns: [r, g*group] -> [r, g]
Tensor colblock_sum(const Tensor& a, long group);
// sum each contiguous block of `group` rows: [g*group, c] -> [g, c]
Tensor rowblock_sum(const Tensor& a, long group);
// repeat the whole column block `times` times: [r, c] -> [r, c*times]
Tensor repeat_block_cols(const Tensor& a, long times);
Tensor detach(const Tensor& a);

// Constant sparse matrix (CSR) for graph aggregation.
struct CsrMatrix {
    long rows = 0, cols = 0;
    std::vector<long> row_ptr;  // size rows+1
    std::vector<long> col_idx;
    std::vector<double> vals;
    CsrMatrix transposed() const;
};

// y = A x with constant A ([m,k] CSR) and differentiable x ([k,c]).
Tensor spmm(const std::shared_ptr<const CsrMatrix>& a, const Tensor& x);

// Cubic-or-lower B-spline basis expansion on a fixed uniform grid.
// Input [r,c] -> output [r, c*num_basis] where num_basis = grid_size+degree.
// Outside [lo,hi] the basis values continue linearly from the boundary.
struct BsplineGrid {
    int grid_size = 8;
    int degree = 3;
    double lo = -2.0, hi = 2.0;
    int num_basis() const { return grid_size + degree; }
    double knot(int i) const {  // extended uniform knots
        double h = (hi - lo) / grid_size;
        return lo + (i - degree) * h;
    }
    // basis values and derivatives at x (arrays of size num_basis())
    void eval(double x, double* b, double* db) const;
};

Tensor bspline_basis(const Tensor& x, const BsplineGrid& grid);

// sin/cos harmonic features: [r,c] -> [r, c*2L] as
// [sin(1*x_j), cos(1*x_j), ..., sin(L*x_j), cos(L*x_j)] per input column,
// frequencies scaled by `base`.
Tensor fourier_features(const Tensor& x, int harmonics, double base);

// ---- helpers ---------------------------------------------------------------

// non-differentiating forward value access
inline double value_at(const Tensor& t, long i) { return t.values()[i]; }

}  // namespace phykan::ad
