#include "lcast/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace lcast {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

namespace {

std::atomic<uint64_t> g_seq{1};

thread_local AllocStats g_alloc_stats;

void track_alloc(int64_t bytes) {
    g_alloc_stats.live_bytes += bytes;
    if (g_alloc_stats.live_bytes > g_alloc_stats.peak_bytes)
        g_alloc_stats.peak_bytes = g_alloc_stats.live_bytes;
}

void check_shape(const Shape& s) {
    if (s.empty()) throw DimError("tensor shape must have at least one extent");
    for (int64_t e : s)
        if (e <= 0) throw DimError("tensor extents must be positive, got " + shape_str(s));
}

} // namespace

AllocStats& alloc_stats() { return g_alloc_stats; }

void reset_peak_bytes() { g_alloc_stats.peak_bytes = g_alloc_stats.live_bytes; }

namespace detail {

TensorImpl::TensorImpl(Shape s, std::vector<double> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
    if (requires_grad) grad.assign(data.size(), 0.0);
    seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    track_alloc(static_cast<int64_t>((data.size() + grad.size()) * sizeof(double)));
}

TensorImpl::~TensorImpl() {
    track_alloc(-static_cast<int64_t>((data.size() + grad.size()) * sizeof(double)));
}

} // namespace detail

using detail::ImplPtr;
using detail::TensorImpl;

// ---- construction ----------------------------------------------------------

Tensor Tensor::wrap(ImplPtr p) {
    Tensor t;
    t.impl_ = std::move(p);
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape(shape);
    const int64_t n = shape_numel(shape);
    return wrap(std::make_shared<TensorImpl>(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                                             requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    const int64_t n = shape_numel(shape);
    return wrap(std::make_shared<TensorImpl>(std::move(shape), std::vector<double>(static_cast<size_t>(n), value),
                                             requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw DimError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    return wrap(std::make_shared<TensorImpl>(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double std_dev, bool requires_grad) {
    check_shape(shape);
    const int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (double& v : data) v = truncated_normal(rng, std_dev);
    return wrap(std::make_shared<TensorImpl>(std::move(shape), std::move(data), requires_grad));
}

// ---- accessors -------------------------------------------------------------

namespace {
const TensorImpl& deref(const ImplPtr& p) {
    if (!p) throw ContractError("operation on an empty tensor");
    return *p;
}
} // namespace

const Shape& Tensor::shape() const { return deref(impl_).shape; }

int64_t Tensor::numel() const { return static_cast<int64_t>(deref(impl_).data.size()); }

int64_t Tensor::rows() const {
    const auto& s = shape();
    if (s.size() != 2) throw DimError("rows() requires a 2-d tensor, got " + shape_str(s));
    return s[0];
}

int64_t Tensor::cols() const {
    const auto& s = shape();
    if (s.size() != 2) throw DimError("cols() requires a 2-d tensor, got " + shape_str(s));
    return s[1];
}

bool Tensor::requires_grad() const { return deref(impl_).requires_grad; }

const std::vector<double>& Tensor::values() const { return deref(impl_).data; }

std::vector<double>& Tensor::values_mut() {
    auto& impl = *impl_;
    if (impl.node) throw ContractError("values_mut() is only valid on leaf tensors");
    return impl.data;
}

const std::vector<double>& Tensor::grad() const {
    const auto& impl = deref(impl_);
    if (!impl.requires_grad) throw ContractError("grad() on a tensor that does not require grad");
    return impl.grad;
}

void Tensor::zero_grad() {
    auto& impl = *impl_;
    if (impl.requires_grad) std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    const auto& impl = deref(impl_);
    if (idx.size() != impl.shape.size())
        throw IndexError("at() arity " + std::to_string(idx.size()) + " vs rank " +
                         std::to_string(impl.shape.size()));
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : idx) {
        if (i < 0 || i >= impl.shape[d])
            throw IndexError("index " + std::to_string(i) + " out of range for axis extent " +
                             std::to_string(impl.shape[d]));
        flat = flat * impl.shape[d] + i;
        ++d;
    }
    return impl.data[static_cast<size_t>(flat)];
}

double Tensor::item() const {
    const auto& impl = deref(impl_);
    if (impl.data.size() != 1)
        throw ContractError("item() requires a single-element tensor, got " + shape_str(impl.shape));
    return impl.data[0];
}

Tensor Tensor::clone() const {
    const auto& impl = deref(impl_);
    return from_data(impl.shape, impl.data, impl.requires_grad);
}

Tensor Tensor::detach() const {
    const auto& impl = deref(impl_);
    return from_data(impl.shape, impl.data, false);
}

// ---- backward engine -------------------------------------------------------

GradTape GradTape::from(const Tensor& root) {
    GradTape tape;
    std::unordered_set<TensorImpl*> seen;
    std::vector<ImplPtr> stack{root.impl()};
    while (!stack.empty()) {
        ImplPtr cur = stack.back();
        stack.pop_back();
        if (!cur || !seen.insert(cur.get()).second) continue;
        tape.order.push_back(cur);
        if (cur->node)
            for (const auto& p : cur->node->parents) stack.push_back(p);
    }
    std::sort(tape.order.begin(), tape.order.end(),
              [](const ImplPtr& a, const ImplPtr& b) { return a->seq < b->seq; });
    return tape;
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward() requires a scalar loss");
    if (!loss.requires_grad()) return;

    GradTape tape = GradTape::from(loss);

    // Pass-local buffers keep repeated backward calls independent; persistent
    // .grad fields only ever receive the finished pass.
    std::unordered_map<TensorImpl*, std::vector<double>> buf;
    buf.reserve(tape.order.size());
    buf[loss.impl().get()] = {1.0};

    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        TensorImpl* impl = it->get();
        auto found = buf.find(impl);
        if (found == buf.end() || !impl->node) continue;
        const std::vector<double>& upstream = found->second;
        auto& node = *impl->node;
        std::vector<std::vector<double>*> parent_bufs(node.parents.size(), nullptr);
        for (size_t i = 0; i < node.parents.size(); ++i) {
            TensorImpl* p = node.parents[i].get();
            if (!p->requires_grad) continue;
            auto [slot, inserted] = buf.try_emplace(p);
            if (inserted) slot->second.assign(p->data.size(), 0.0);
            parent_bufs[i] = &slot->second;
        }
        node.fn(upstream, parent_bufs);
    }

    for (const auto& impl : tape.order) {
        if (!impl->requires_grad) continue;
        auto found = buf.find(impl.get());
        if (found == buf.end()) continue;
        const auto& g = found->second;
        for (size_t i = 0; i < g.size(); ++i) impl->grad[i] += g[i];
    }
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool any_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make_result(Shape shape, std::vector<double> data, bool requires_grad,
                   std::vector<ImplPtr> parents,
                   std::function<void(const std::vector<double>&, const std::vector<std::vector<double>*>&)> fn,
                   const char* op) {
    auto impl = std::make_shared<TensorImpl>(std::move(shape), std::move(data), requires_grad);
    if (requires_grad) {
        impl->node = std::make_unique<detail::BackwardRecord>();
        impl->node->parents = std::move(parents);
        impl->node->fn = std::move(fn);
        impl->node->op = op;
    }
    return Tensor::wrap(std::move(impl));
}

void require_2d(const Tensor& t, const char* who) {
    if (t.shape().size() != 2)
        throw DimError(std::string(who) + " requires a 2-d tensor, got " + shape_str(t.shape()));
}

// a_ik * b_kj accumulated into c_ij; streaming over b rows.
void matmul_kernel(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            if (av == 0.0) continue;
            const double* bk = b + kk * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

// c_ij = sum_k a_ik * b_jk  (a times b-transposed)
void matmul_nt_kernel(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            ci[j] += acc;
        }
    }
}

// c_kj = sum_i a_ik * b_ij  (a-transposed times b)
void matmul_tn_kernel(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            if (av == 0.0) continue;
            double* ck = c + kk * n;
            for (int64_t j = 0; j < n; ++j) ck[j] += av * bi[j];
        }
    }
}

} // namespace

// ---- matmul / transpose ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const int64_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2)
        throw DimError("matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));

    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    matmul_kernel(a.values().data(), b.values().data(), out.data(), m, k, n);

    const bool rg = any_grad({&a, &b});
    ImplPtr ia = a.impl(), ib = b.impl();
    return make_result(
        {m, n}, std::move(out), rg, {ia, ib},
        [ia, ib, m, k, n](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (pb[0]) // dA = dC * B^T
                matmul_nt_kernel(up.data(), ib->data.data(), pb[0]->data(), m, n, k);
            if (pb[1]) // dB = A^T * dC
                matmul_tn_kernel(ia->data.data(), up.data(), pb[1]->data(), m, k, n);
        },
        "matmul");
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const int64_t m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<size_t>(m * n));
    const auto& src = a.values();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = src[static_cast<size_t>(i * n + j)];
    return make_result(
        {n, m}, std::move(out), a.requires_grad(), {a.impl()},
        [m, n](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    g[static_cast<size_t>(i * n + j)] += up[static_cast<size_t>(j * m + i)];
        },
        "transpose");
}

// ---- softmax / layer norm ----------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
    require_2d(a, "softmax_rows");
    const int64_t m = a.rows(), n = a.cols();
    const auto& src = a.values();
    for (double v : src)
        if (!std::isfinite(v)) throw NumericError("softmax_rows input contains a non-finite value");

    std::vector<double> out(src.size());
    for (int64_t i = 0; i < m; ++i) {
        const double* row = src.data() + i * n;
        double* orow = out.data() + i * n;
        double mx = row[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int64_t j = 0; j < n; ++j) orow[j] /= sum;
    }

    std::vector<double> saved = out;
    return make_result(
        {m, n}, std::move(out), a.requires_grad(), {a.impl()},
        [saved = std::move(saved), m, n](const std::vector<double>& up,
                                         const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (int64_t i = 0; i < m; ++i) {
                const double* y = saved.data() + i * n;
                const double* dy = up.data() + i * n;
                double dot = 0.0;
                for (int64_t j = 0; j < n; ++j) dot += dy[j] * y[j];
                double* gi = g.data() + i * n;
                for (int64_t j = 0; j < n; ++j) gi[j] += y[j] * (dy[j] - dot);
            }
        },
        "softmax_rows");
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    const auto& shape = a.shape();
    const int64_t d = shape.back();
    if (eps <= 0) throw ConfigError("layer_norm eps must be positive");
    if (gain.numel() != d || bias.numel() != d)
        throw DimError("layer_norm gain/bias length must equal last extent " + std::to_string(d));
    const int64_t rows = a.numel() / d;

    const auto& src = a.values();
    const auto& g = gain.values();
    const auto& b = bias.values();
    std::vector<double> out(src.size());
    std::vector<double> xhat(src.size());
    std::vector<double> inv_std(static_cast<size_t>(rows));

    for (int64_t r = 0; r < rows; ++r) {
        const double* x = src.data() + r * d;
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += x[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = x[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double s = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = s;
        double* xh = xhat.data() + r * d;
        double* o = out.data() + r * d;
        for (int64_t j = 0; j < d; ++j) {
            xh[j] = (x[j] - mean) * s;
            o[j] = g[static_cast<size_t>(j)] * xh[j] + b[static_cast<size_t>(j)];
        }
    }

    const bool rg = any_grad({&a, &gain, &bias});
    ImplPtr ig = gain.impl();
    return make_result(
        shape, std::move(out), rg, {a.impl(), gain.impl(), bias.impl()},
        [xhat = std::move(xhat), inv_std = std::move(inv_std), ig, rows,
         d](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            const auto& gv = ig->data;
            for (int64_t r = 0; r < rows; ++r) {
                const double* dy = up.data() + r * d;
                const double* xh = xhat.data() + r * d;
                if (pb[0]) {
                    // dx = s * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t j = 0; j < d; ++j) {
                        const double dxh = dy[j] * gv[static_cast<size_t>(j)];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    const double s = inv_std[static_cast<size_t>(r)];
                    double* gx = pb[0]->data() + r * d;
                    for (int64_t j = 0; j < d; ++j) {
                        const double dxh = dy[j] * gv[static_cast<size_t>(j)];
                        gx[j] += s * (dxh - m1 - xh[j] * m2);
                    }
                }
                if (pb[1]) {
                    double* gg = pb[1]->data();
                    for (int64_t j = 0; j < d; ++j) gg[j] += dy[j] * xh[j];
                }
                if (pb[2]) {
                    double* gb = pb[2]->data();
                    for (int64_t j = 0; j < d; ++j) gb[j] += dy[j];
                }
            }
        },
        "layer_norm");
}

// ---- elementwise suite --------------------------------------------------------

namespace {

enum class BroadcastKind { Exact, ScalarRight, ScalarLeft };

BroadcastKind classify(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() == b.shape()) return BroadcastKind::Exact;
    if (b.numel() == 1) return BroadcastKind::ScalarRight;
    if (a.numel() == 1) return BroadcastKind::ScalarLeft;
    throw DimError(std::string(who) + ": incompatible shapes " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const BroadcastKind kind = classify(a, b, "add");
    const Tensor& big = (kind == BroadcastKind::ScalarLeft) ? b : a;
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(big.values().size());
    switch (kind) {
        case BroadcastKind::Exact:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
            break;
        case BroadcastKind::ScalarRight:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[0];
            break;
        case BroadcastKind::ScalarLeft:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[0] + bv[i];
            break;
    }
    return make_result(
        big.shape(), std::move(out), any_grad({&a, &b}), {a.impl(), b.impl()},
        [kind](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            auto spread = [&](std::vector<double>* g, bool is_scalar) {
                if (!g) return;
                if (is_scalar) {
                    double s = 0.0;
                    for (double v : up) s += v;
                    (*g)[0] += s;
                } else {
                    for (size_t i = 0; i < up.size(); ++i) (*g)[i] += up[i];
                }
            };
            spread(pb[0], kind == BroadcastKind::ScalarLeft);
            spread(pb[1], kind == BroadcastKind::ScalarRight);
        },
        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    const BroadcastKind kind = classify(a, b, "mul");
    const Tensor& big = (kind == BroadcastKind::ScalarLeft) ? b : a;
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(big.values().size());
    switch (kind) {
        case BroadcastKind::Exact:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
            break;
        case BroadcastKind::ScalarRight:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[0];
            break;
        case BroadcastKind::ScalarLeft:
            for (size_t i = 0; i < out.size(); ++i) out[i] = av[0] * bv[i];
            break;
    }
    ImplPtr ia = a.impl(), ib = b.impl();
    return make_result(
        big.shape(), std::move(out), any_grad({&a, &b}), {ia, ib},
        [ia, ib, kind](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            const auto& av = ia->data;
            const auto& bv = ib->data;
            if (pb[0]) {
                auto& g = *pb[0];
                switch (kind) {
                    case BroadcastKind::Exact:
                        for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * bv[i];
                        break;
                    case BroadcastKind::ScalarRight:
                        for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * bv[0];
                        break;
                    case BroadcastKind::ScalarLeft: {
                        double s = 0.0;
                        for (size_t i = 0; i < up.size(); ++i) s += up[i] * bv[i];
                        g[0] += s;
                        break;
                    }
                }
            }
            if (pb[1]) {
                auto& g = *pb[1];
                switch (kind) {
                    case BroadcastKind::Exact:
                        for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * av[i];
                        break;
                    case BroadcastKind::ScalarRight: {
                        double s = 0.0;
                        for (size_t i = 0; i < up.size(); ++i) s += up[i] * av[i];
                        g[0] += s;
                        break;
                    }
                    case BroadcastKind::ScalarLeft:
                        for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * av[0];
                        break;
                }
            }
        },
        "mul");
}

Tensor scale(const Tensor& a, double s) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
    return make_result(
        a.shape(), std::move(out), a.requires_grad(), {a.impl()},
        [s](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * s;
        },
        "scale");
}

namespace {
// tanh form of gelu; 0.044715 is the cubic coefficient from the approximation.
constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
} // namespace

Tensor gelu(const Tensor& a) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = av[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
    }
    ImplPtr ia = a.impl();
    return make_result(
        a.shape(), std::move(out), a.requires_grad(), {ia},
        [ia](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            const auto& av = ia->data;
            for (size_t i = 0; i < up.size(); ++i) {
                const double x = av[i];
                const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
                const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
                g[i] += up[i] * d;
            }
        },
        "gelu");
}

Tensor mean_all(const Tensor& a) {
    const auto& av = a.values();
    double s = 0.0;
    for (double v : av) s += v;
    const double inv = 1.0 / static_cast<double>(av.size());
    const size_t n = av.size();
    return make_result(
        {1}, {s * inv}, a.requires_grad(), {a.impl()},
        [inv, n](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            const double u = up[0] * inv;
            for (size_t i = 0; i < n; ++i) g[i] += u;
        },
        "mean_all");
}

Tensor mse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimError("mse: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor d = sub(a, b);
    return mean_all(mul(d, d));
}

// ---- structural ops ------------------------------------------------------------

Tensor gather_rows(const Tensor& a, std::span<const int64_t> idx) {
    require_2d(a, "gather_rows");
    const int64_t n = a.rows(), d = a.cols();
    for (int64_t i : idx)
        if (i < 0 || i >= n)
            throw IndexError("gather_rows index " + std::to_string(i) + " out of range [0, " + std::to_string(n) +
                             ")");
    const auto& src = a.values();
    std::vector<double> out(idx.size() * static_cast<size_t>(d));
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(src.data() + idx[r] * d, d, out.data() + static_cast<int64_t>(r) * d);
    std::vector<int64_t> saved(idx.begin(), idx.end());
    return make_result(
        {static_cast<int64_t>(idx.size()), d}, std::move(out), a.requires_grad(), {a.impl()},
        [saved = std::move(saved), d](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (size_t r = 0; r < saved.size(); ++r) {
                const double* u = up.data() + static_cast<int64_t>(r) * d;
                double* dst = g.data() + saved[r] * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += u[j];
            }
        },
        "gather_rows");
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_rows needs at least one part");
    const int64_t d = parts[0].cols();
    int64_t total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_rows");
        if (p.cols() != d) throw DimError("concat_rows column mismatch");
        total += p.rows();
        rg = rg || p.requires_grad();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total * d));
    std::vector<ImplPtr> parents;
    std::vector<int64_t> row_counts;
    for (const Tensor& p : parts) {
        const auto& v = p.values();
        out.insert(out.end(), v.begin(), v.end());
        parents.push_back(p.impl());
        row_counts.push_back(p.rows());
    }
    return make_result(
        {total, d}, std::move(out), rg, std::move(parents),
        [row_counts = std::move(row_counts), d](const std::vector<double>& up,
                                                const std::vector<std::vector<double>*>& pb) {
            int64_t offset = 0;
            for (size_t p = 0; p < row_counts.size(); ++p) {
                const int64_t len = row_counts[p] * d;
                if (pb[p]) {
                    auto& g = *pb[p];
                    for (int64_t i = 0; i < len; ++i) g[static_cast<size_t>(i)] += up[static_cast<size_t>(offset + i)];
                }
                offset += len;
            }
        },
        "concat_rows");
}

Tensor slice_cols(const Tensor& a, int64_t start, int64_t count) {
    require_2d(a, "slice_cols");
    const int64_t m = a.rows(), n = a.cols();
    if (start < 0 || count <= 0 || start + count > n)
        throw IndexError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + std::to_string(n) + " columns");
    const auto& src = a.values();
    std::vector<double> out(static_cast<size_t>(m * count));
    for (int64_t i = 0; i < m; ++i)
        std::copy_n(src.data() + i * n + start, count, out.data() + i * count);
    return make_result(
        {m, count}, std::move(out), a.requires_grad(), {a.impl()},
        [m, n, start, count](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (int64_t i = 0; i < m; ++i) {
                const double* u = up.data() + i * count;
                double* dst = g.data() + i * n + start;
                for (int64_t j = 0; j < count; ++j) dst[j] += u[j];
            }
        },
        "slice_cols");
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_cols needs at least one part");
    const int64_t m = parts[0].rows();
    int64_t total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_cols");
        if (p.rows() != m) throw DimError("concat_cols row mismatch");
        total += p.cols();
        rg = rg || p.requires_grad();
    }
    std::vector<double> out(static_cast<size_t>(m * total));
    std::vector<ImplPtr> parents;
    std::vector<int64_t> col_counts;
    int64_t offset = 0;
    for (const Tensor& p : parts) {
        const auto& v = p.values();
        const int64_t c = p.cols();
        for (int64_t i = 0; i < m; ++i)
            std::copy_n(v.data() + i * c, c, out.data() + i * total + offset);
        offset += c;
        parents.push_back(p.impl());
        col_counts.push_back(c);
    }
    return make_result(
        {m, total}, std::move(out), rg, std::move(parents),
        [col_counts = std::move(col_counts), m, total](const std::vector<double>& up,
                                                       const std::vector<std::vector<double>*>& pb) {
            int64_t offset = 0;
            for (size_t p = 0; p < col_counts.size(); ++p) {
                const int64_t c = col_counts[p];
                if (pb[p]) {
                    auto& g = *pb[p];
                    for (int64_t i = 0; i < m; ++i) {
                        const double* u = up.data() + i * total + offset;
                        double* dst = g.data() + i * c;
                        for (int64_t j = 0; j < c; ++j) dst[j] += u[j];
                    }
                }
                offset += c;
            }
        },
        "concat_cols");
}

Tensor repeat_rows(const Tensor& row, int64_t n) {
    const auto& s = row.shape();
    int64_t d = 0;
    if (s.size() == 1)
        d = s[0];
    else if (s.size() == 2 && s[0] == 1)
        d = s[1];
    else
        throw DimError("repeat_rows expects shape [d] or [1xd], got " + shape_str(s));
    if (n <= 0) throw DimError("repeat_rows count must be positive");
    const auto& src = row.values();
    std::vector<double> out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i) std::copy_n(src.data(), d, out.data() + i * d);
    return make_result(
        {n, d}, std::move(out), row.requires_grad(), {row.impl()},
        [n, d](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (int64_t i = 0; i < n; ++i) {
                const double* u = up.data() + i * d;
                for (int64_t j = 0; j < d; ++j) g[static_cast<size_t>(j)] += u[j];
            }
        },
        "repeat_rows");
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_shape(shape);
    if (shape_numel(shape) != a.numel())
        throw DimError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
    return make_result(
        std::move(shape), a.values(), a.requires_grad(), {a.impl()},
        [](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (size_t i = 0; i < up.size(); ++i) g[i] += up[i];
        },
        "reshape");
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    if (rate == 0.0) return a;
    const auto& av = a.values();
    const double keep = 1.0 - rate;
    std::vector<double> mask(av.size());
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) {
        mask[i] = (uniform_unit(rng) < rate) ? 0.0 : 1.0 / keep;
        out[i] = av[i] * mask[i];
    }
    return make_result(
        a.shape(), std::move(out), a.requires_grad(), {a.impl()},
        [mask = std::move(mask)](const std::vector<double>& up, const std::vector<std::vector<double>*>& pb) {
            if (!pb[0]) return;
            auto& g = *pb[0];
            for (size_t i = 0; i < up.size(); ++i) g[i] += up[i] * mask[i];
        },
        "dropout");
}

} // namespace lcast
