#ifndef LCAST_TENSOR_HPP
#define LCAST_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lcast/errors.hpp"
#include "lcast/rng.hpp"

namespace lcast {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

namespace detail {

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

// One reverse-mode record: given the upstream gradient of this node, add the
// contribution for each parent into the supplied pass-local buffer. A null
// buffer means that parent does not need a gradient.
struct BackwardRecord {
    std::vector<ImplPtr> parents;
    std::function<void(const std::vector<double>& upstream,
                       const std::vector<std::vector<double>*>& parent_bufs)>
        fn;
    const char* op = "";
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad; // same length as data when requires_grad
    std::unique_ptr<BackwardRecord> node;
    uint64_t seq = 0;

    TensorImpl(Shape s, std::vector<double> d, bool rg);
    ~TensorImpl();
    TensorImpl(const TensorImpl&) = delete;
    TensorImpl& operator=(const TensorImpl&) = delete;
};

} // namespace detail

// Cumulative allocation statistics for live tensor payloads (data + grad
// buffers) on this thread. Used by the cost profiler.
struct AllocStats {
    int64_t live_bytes = 0;
    int64_t peak_bytes = 0;
};

AllocStats& alloc_stats();
void reset_peak_bytes();

// Dense row-major n-d array of f64 with optional reverse-mode gradient.
// Values are immutable once created except for gradient accumulation and
// explicit leaf updates (optimizer steps, initializers). Every op below
// records a backward closure when any input requires a gradient; the graph
// is acyclic because a node's parents always predate it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, double std_dev, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    int64_t rows() const; // 2-d only
    int64_t cols() const; // 2-d only
    bool requires_grad() const;

    const std::vector<double>& values() const;
    // Leaf-only mutation hook for optimizers and initializers.
    std::vector<double>& values_mut();

    const std::vector<double>& grad() const;
    void zero_grad();

    double at(std::initializer_list<int64_t> idx) const;
    double item() const; // single-element tensors

    // Deep copy as a fresh leaf (no graph history).
    Tensor clone() const;
    // Copy of the values with requires_grad off; used for exported maps.
    Tensor detach() const;

    detail::ImplPtr impl() const { return impl_; }
    static Tensor wrap(detail::ImplPtr p);

private:
    detail::ImplPtr impl_;
};

// Ordered list of backprop records reachable from a root, ascending creation
// order; replaying it back-to-front visits every node after all its consumers.
struct GradTape {
    std::vector<detail::ImplPtr> order;
    static GradTape from(const Tensor& root);
};

// Accumulates d(loss)/d(t) into t.grad for every requires_grad tensor
// reachable from loss. Each call adds a full pass; callers zero grads
// between steps.
void backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Elementwise suite. add/mul accept exactly matching shapes or a
// single-element tensor on either side; nothing else broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

Tensor gather_rows(const Tensor& a, std::span<const int64_t> idx);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, int64_t start, int64_t count);
Tensor concat_cols(std::span<const Tensor> parts);
// Repeats a length-d vector (shape [d] or [1, d]) into an [n, d] matrix.
Tensor repeat_rows(const Tensor& row, int64_t n);
Tensor reshape(const Tensor& a, Shape shape);
Tensor dropout(const Tensor& a, double rate, Rng& rng);

} // namespace lcast

#endif
