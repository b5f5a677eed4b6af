#include "lcast/nn.hpp"

namespace lcast::nn {

namespace {
thread_local int64_t g_score_elements = 0;
}

int64_t score_elements() { return g_score_elements; }
void reset_score_elements() { g_score_elements = 0; }

AttnBlockParams AttnBlockParams::init(int64_t query_dim, int64_t context_dim, int64_t n_heads, Rng& rng) {
    if (query_dim <= 0 || context_dim <= 0) throw ConfigError("attention block dims must be positive");
    if (n_heads <= 0 || query_dim % n_heads != 0)
        throw ConfigError("n_heads " + std::to_string(n_heads) + " must divide the query dim " +
                          std::to_string(query_dim));
    constexpr double kInitStd = 0.02;
    AttnBlockParams p;
    p.query_dim = query_dim;
    p.context_dim = context_dim;
    p.d_model = query_dim;
    p.d_ff = 2 * query_dim;
    p.n_heads = n_heads;
    p.wq = Tensor::randn({query_dim, p.d_model}, rng, kInitStd, true);
    p.wk = Tensor::randn({context_dim, p.d_model}, rng, kInitStd, true);
    p.wv = Tensor::randn({context_dim, p.d_model}, rng, kInitStd, true);
    p.wo = Tensor::randn({p.d_model, query_dim}, rng, kInitStd, true);
    p.w1 = Tensor::randn({query_dim, p.d_ff}, rng, kInitStd, true);
    p.b1 = Tensor::zeros({p.d_ff}, true);
    p.w2 = Tensor::randn({p.d_ff, query_dim}, rng, kInitStd, true);
    p.b2 = Tensor::zeros({query_dim}, true);
    p.ln1_g = Tensor::full({query_dim}, 1.0, true);
    p.ln1_b = Tensor::zeros({query_dim}, true);
    p.ln2_g = Tensor::full({query_dim}, 1.0, true);
    p.ln2_b = Tensor::zeros({query_dim}, true);
    return p;
}

void AttnBlockParams::collect(ParamRegistry& reg, const std::string& prefix) const {
    reg.push_back({prefix + ".wq", wq, true});
    reg.push_back({prefix + ".wk", wk, true});
    reg.push_back({prefix + ".wv", wv, true});
    reg.push_back({prefix + ".wo", wo, true});
    reg.push_back({prefix + ".w1", w1, true});
    reg.push_back({prefix + ".b1", b1, false});
    reg.push_back({prefix + ".w2", w2, true});
    reg.push_back({prefix + ".b2", b2, false});
    reg.push_back({prefix + ".ln1_g", ln1_g, false});
    reg.push_back({prefix + ".ln1_b", ln1_b, false});
    reg.push_back({prefix + ".ln2_g", ln2_g, false});
    reg.push_back({prefix + ".ln2_b", ln2_b, false});
}

AttnBlockParams AttnBlockParams::clone() const {
    AttnBlockParams p = *this;
    p.wq = wq.clone();
    p.wk = wk.clone();
    p.wv = wv.clone();
    p.wo = wo.clone();
    p.w1 = w1.clone();
    p.b1 = b1.clone();
    p.w2 = w2.clone();
    p.b2 = b2.clone();
    p.ln1_g = ln1_g.clone();
    p.ln1_b = ln1_b.clone();
    p.ln2_g = ln2_g.clone();
    p.ln2_b = ln2_b.clone();
    return p;
}

AttentionResult attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t n_heads,
                          bool collect_head_maps) {
    const int64_t d_model = q.cols();
    if (k.cols() != d_model || v.cols() != d_model)
        throw DimError("attention: Q/K/V widths differ: " + shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                       ", " + shape_str(v.shape()));
    if (k.rows() != v.rows())
        throw DimError("attention: K and V row counts differ");
    if (n_heads <= 0 || d_model % n_heads != 0)
        throw DimError("attention: n_heads " + std::to_string(n_heads) + " must divide width " +
                       std::to_string(d_model));

    const int64_t d_head = d_model / n_heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_head));
    g_score_elements += q.rows() * k.rows();

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(n_heads));
    Tensor map_sum;
    AttentionResult res;
    for (int64_t h = 0; h < n_heads; ++h) {
        Tensor qh = slice_cols(q, h * d_head, d_head);
        Tensor kh = slice_cols(k, h * d_head, d_head);
        Tensor vh = slice_cols(v, h * d_head, d_head);
        Tensor weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_d));
        head_outputs.push_back(matmul(weights, vh));
        Tensor w_detached = weights.detach();
        map_sum = (h == 0) ? w_detached : add(map_sum, w_detached);
        if (collect_head_maps) res.head_maps.push_back(std::move(w_detached));
    }
    res.output = (n_heads == 1) ? head_outputs[0] : concat_cols(head_outputs);
    res.map = scale(map_sum, 1.0 / static_cast<double>(n_heads));
    return res;
}

AttnBlockResult attn_block(const Tensor& u, const Tensor& z, const AttnBlockParams& p, const DropoutCtx& drop) {
    if (u.cols() != p.query_dim)
        throw DimError("attn_block: U width " + std::to_string(u.cols()) + " vs params query dim " +
                       std::to_string(p.query_dim));
    if (z.cols() != p.context_dim)
        throw DimError("attn_block: Z width " + std::to_string(z.cols()) + " vs params context dim " +
                       std::to_string(p.context_dim));

    Tensor un = layer_norm(u, p.ln1_g, p.ln1_b);
    Tensor q = matmul(un, p.wq);
    Tensor k = matmul(z, p.wk);
    Tensor v = matmul(z, p.wv);
    AttentionResult attn = attention(q, k, v, p.n_heads);
    Tensor attn_out = matmul(attn.output, p.wo);
    if (drop.active()) attn_out = dropout(attn_out, drop.rate, *drop.rng);
    Tensor h = add(u, attn_out);

    Tensor hn = layer_norm(h, p.ln2_g, p.ln2_b);
    Tensor hidden = gelu(add(matmul(hn, p.w1), repeat_rows(p.b1, hn.rows())));
    if (drop.active()) hidden = dropout(hidden, drop.rate, *drop.rng);
    Tensor ffn = add(matmul(hidden, p.w2), repeat_rows(p.b2, hn.rows()));
    return {add(h, ffn), std::move(attn.map)};
}

} // namespace lcast::nn
