#ifndef LCAST_NN_HPP
#define LCAST_NN_HPP

#include <optional>
#include <string>
#include <vector>

#include "lcast/tensor.hpp"

namespace lcast::nn {

// Per-thread tally of attention score elements: each attention call adds
// rows(Q) * rows(K), the size of the logical score matrix (heads share the
// same query/key index set). Exact integers, reset around the region of
// interest.
int64_t score_elements();
void reset_score_elements();

// Named parameter with its weight-decay eligibility. Tensors share storage,
// so a registry entry aliases the live parameter.
struct ParamRef {
    std::string name;
    Tensor tensor;
    bool decay = true;
};
using ParamRegistry = std::vector<ParamRef>;

// Weights for one attention block: projections into a d_model space split
// across heads, an output projection back to the query-side width, a 2x FFN,
// and pre-norm gains/biases for the attention and FFN sub-layers. The
// key/value projections map from the context's native width, so a block can
// bridge mismatched query/context dimensions.
struct AttnBlockParams {
    Tensor wq, wk, wv, wo;
    Tensor w1, b1, w2, b2;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    int64_t query_dim = 0;
    int64_t context_dim = 0;
    int64_t d_model = 0;
    int64_t d_ff = 0;
    int64_t n_heads = 1;

    static AttnBlockParams init(int64_t query_dim, int64_t context_dim, int64_t n_heads, Rng& rng);
    void collect(ParamRegistry& reg, const std::string& prefix) const;
    AttnBlockParams clone() const;
};

struct AttentionResult {
    Tensor output;                      // [N x d_model]
    Tensor map;                         // head-averaged post-softmax scores, detached [N x M]
    std::vector<Tensor> head_maps;      // filled only when requested
};

// Softmax(Q_h K_h^T / sqrt(d)) V_h per head, heads concatenated.
AttentionResult attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t n_heads,
                          bool collect_head_maps = false);

struct DropoutCtx {
    double rate = 0.0;
    Rng* rng = nullptr;
    bool active() const { return rate > 0.0 && rng != nullptr; }
};

struct AttnBlockResult {
    Tensor output;   // same shape as U
    Tensor map;      // [rows(U) x rows(Z)]
};

// Residual attention followed by a residual FFN, pre-norm on each sub-layer
// input. Self-attention is the U == Z call.
AttnBlockResult attn_block(const Tensor& u, const Tensor& z, const AttnBlockParams& params,
                           const DropoutCtx& drop = {});

} // namespace lcast::nn

#endif
