#include "lcast/model.hpp"

#include <fstream>

#include <json.hpp>

namespace lcast {

using nlohmann::json;

std::string encoder_variant_name(EncoderVariant v) {
    switch (v) {
        case EncoderVariant::LatentBottleneck: return "latent_bottleneck";
        case EncoderVariant::FullSelfAttn: return "full_self_attn";
        default: return "decoupled_self_attn";
    }
}

EncoderVariant encoder_variant_from_name(const std::string& name) {
    if (name == "latent_bottleneck") return EncoderVariant::LatentBottleneck;
    if (name == "full_self_attn") return EncoderVariant::FullSelfAttn;
    if (name == "decoupled_self_attn") return EncoderVariant::DecoupledSelfAttn;
    throw ConfigError("unknown encoder variant '" + name + "'");
}

std::string decoder_variant_name(DecoderVariant v) {
    return v == DecoderVariant::QueryCrossAttn ? "query_crossattn" : "direct_latent";
}

DecoderVariant decoder_variant_from_name(const std::string& name) {
    if (name == "query_crossattn") return DecoderVariant::QueryCrossAttn;
    if (name == "direct_latent") return DecoderVariant::DirectLatent;
    throw ConfigError("unknown decoder variant '" + name + "'");
}

std::string pe_sharing_name(PeSharing v) { return v == PeSharing::Shared ? "shared" : "separate"; }

PeSharing pe_sharing_from_name(const std::string& name) {
    if (name == "shared") return PeSharing::Shared;
    if (name == "separate") return PeSharing::Separate;
    throw ConfigError("unknown positional embedding mode '" + name + "'");
}

void ModelConfig::validate() const {
    if (patch_len <= 0) throw ConfigError("patch_len must be positive");
    if (n_channels <= 0) throw ConfigError("n_channels must be positive");
    if (n_latents < 1) throw ConfigError("n_latents must be at least 1");
    if (k_self_layers < 0) throw ConfigError("k_self_layers must be non-negative");
    if (d_embed <= 0 || d_latent <= 0) throw ConfigError("embedding widths must be positive");
    if (n_heads <= 0) throw ConfigError("n_heads must be positive");
    if (d_embed % n_heads != 0)
        throw ConfigError("n_heads " + std::to_string(n_heads) + " must divide d_embed " + std::to_string(d_embed));
    if (d_latent % n_heads != 0)
        throw ConfigError("n_heads " + std::to_string(n_heads) + " must divide d_latent " + std::to_string(d_latent));
    if (lookback <= 0 || lookback % patch_len != 0)
        throw ConfigError("lookback " + std::to_string(lookback) + " must be a positive multiple of patch_len " +
                          std::to_string(patch_len));
    if (horizon <= 0 || horizon % patch_len != 0)
        throw ConfigError("horizon " + std::to_string(horizon) + " must be a positive multiple of patch_len " +
                          std::to_string(patch_len));
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    constexpr double kInitStd = 0.02;
    Rng rng = make_rng(seed, "init");
    ModelParams p;
    p.w_input = Tensor::randn({cfg.patch_len, cfg.d_embed}, rng, kInitStd, true);
    p.w_output = Tensor::randn({cfg.d_embed, cfg.patch_len}, rng, kInitStd, true);
    p.e_temporal = Tensor::randn({cfg.n_patches(), cfg.d_embed}, rng, kInitStd, true);
    p.e_channel = Tensor::randn({cfg.n_channels, cfg.d_embed}, rng, kInitStd, true);
    p.z0 = Tensor::randn({cfg.n_latents, cfg.d_latent}, rng, kInitStd, true);
    if (cfg.pe_sharing == PeSharing::Separate) {
        p.e_temporal_dec = Tensor::randn({cfg.n_patches(), cfg.d_embed}, rng, kInitStd, true);
        p.e_channel_dec = Tensor::randn({cfg.n_channels, cfg.d_embed}, rng, kInitStd, true);
    }

    p.enc_latent_in = nn::AttnBlockParams::init(cfg.d_latent, cfg.d_embed, cfg.n_heads, rng);
    for (int64_t k = 0; k < cfg.k_self_layers; ++k)
        p.enc_latent_self.push_back(nn::AttnBlockParams::init(cfg.d_latent, cfg.d_latent, cfg.n_heads, rng));
    p.enc_token_out = nn::AttnBlockParams::init(cfg.d_embed, cfg.d_latent, cfg.n_heads, rng);

    const int64_t dec_context =
        cfg.decoder_variant == DecoderVariant::DirectLatent ? cfg.d_latent : cfg.d_embed;
    p.dec = nn::AttnBlockParams::init(cfg.d_embed, dec_context, cfg.n_heads, rng);

    if (cfg.encoder_variant == EncoderVariant::FullSelfAttn)
        p.enc_full = nn::AttnBlockParams::init(cfg.d_embed, cfg.d_embed, cfg.n_heads, rng);
    if (cfg.encoder_variant == EncoderVariant::DecoupledSelfAttn) {
        p.enc_time = nn::AttnBlockParams::init(cfg.d_embed, cfg.d_embed, cfg.n_heads, rng);
        p.enc_chan = nn::AttnBlockParams::init(cfg.d_embed, cfg.d_embed, cfg.n_heads, rng);
    }
    return p;
}

nn::ParamRegistry ModelParams::named() const {
    nn::ParamRegistry reg;
    reg.push_back({"w_input", w_input, true});
    reg.push_back({"w_output", w_output, true});
    reg.push_back({"e_temporal", e_temporal, true});
    reg.push_back({"e_channel", e_channel, true});
    reg.push_back({"z0", z0, true});
    if (e_temporal_dec) reg.push_back({"e_temporal_dec", *e_temporal_dec, true});
    if (e_channel_dec) reg.push_back({"e_channel_dec", *e_channel_dec, true});
    enc_latent_in.collect(reg, "enc_latent_in");
    for (size_t k = 0; k < enc_latent_self.size(); ++k)
        enc_latent_self[k].collect(reg, "enc_latent_self." + std::to_string(k));
    enc_token_out.collect(reg, "enc_token_out");
    dec.collect(reg, "dec");
    if (enc_full) enc_full->collect(reg, "enc_full");
    if (enc_time) enc_time->collect(reg, "enc_time");
    if (enc_chan) enc_chan->collect(reg, "enc_chan");
    return reg;
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.w_input = w_input.clone();
    p.w_output = w_output.clone();
    p.e_temporal = e_temporal.clone();
    p.e_channel = e_channel.clone();
    p.z0 = z0.clone();
    if (e_temporal_dec) p.e_temporal_dec = e_temporal_dec->clone();
    if (e_channel_dec) p.e_channel_dec = e_channel_dec->clone();
    p.enc_latent_in = enc_latent_in.clone();
    for (const auto& blk : enc_latent_self) p.enc_latent_self.push_back(blk.clone());
    p.enc_token_out = enc_token_out.clone();
    p.dec = dec.clone();
    if (enc_full) p.enc_full = enc_full->clone();
    if (enc_time) p.enc_time = enc_time->clone();
    if (enc_chan) p.enc_chan = enc_chan->clone();
    return p;
}

void ModelParams::zero_grads() const {
    for (auto& ref : named()) {
        Tensor t = ref.tensor;
        t.zero_grad();
    }
}

ParamCensus census(const ModelConfig& cfg, const ModelParams& params) {
    (void)cfg;
    ParamCensus c;
    for (const auto& ref : params.named()) {
        const int64_t n = ref.tensor.numel();
        if (ref.name == "w_input" || ref.name == "e_temporal" || ref.name == "e_channel" || ref.name == "z0" ||
            ref.name == "e_temporal_dec" || ref.name == "e_channel_dec")
            c.embeddings += n;
        else if (ref.name == "w_output" || ref.name.rfind("dec.", 0) == 0)
            c.decoder += n;
        else
            c.encoder += n;
    }
    return c;
}

// ---- forward ---------------------------------------------------------------------

namespace {

// Token matrix of normalized input patch values, channel-major then ascending
// patch order: row (c, k) holds the P values of input patch k for channel c.
Tensor input_patch_tokens(const std::vector<double>& x_norm, const IndexPlan& plan, int64_t n_channels) {
    const int64_t n_in = plan.n_input();
    const int64_t p_len = plan.grid.patch_len;
    const int64_t len = n_in * p_len; // x_norm is C x len, input patches in ascending order
    std::vector<double> tokens(static_cast<size_t>(n_channels * n_in * p_len));
    for (int64_t c = 0; c < n_channels; ++c)
        for (int64_t k = 0; k < n_in; ++k)
            std::copy_n(x_norm.data() + c * len + k * p_len, p_len,
                        tokens.data() + (c * n_in + k) * p_len);
    return Tensor::from_data({n_channels * n_in, p_len}, std::move(tokens));
}

std::vector<int64_t> tile_channel_indices(int64_t n_channels, int64_t reps) {
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(n_channels * reps));
    for (int64_t c = 0; c < n_channels; ++c)
        for (int64_t r = 0; r < reps; ++r) idx.push_back(c);
    return idx;
}

std::vector<int64_t> tile_patch_indices(const std::vector<int64_t>& patches, int64_t n_channels) {
    std::vector<int64_t> idx;
    idx.reserve(patches.size() * static_cast<size_t>(n_channels));
    for (int64_t c = 0; c < n_channels; ++c)
        for (int64_t p : patches) idx.push_back(p);
    return idx;
}

Tensor embed_inputs(const std::vector<double>& x_norm, const IndexPlan& plan, const ModelParams& params,
                    const ModelConfig& cfg) {
    Tensor tokens = input_patch_tokens(x_norm, plan, cfg.n_channels);
    Tensor projected = matmul(tokens, params.w_input);
    const auto chan_idx = tile_channel_indices(cfg.n_channels, plan.n_input());
    const auto patch_idx = tile_patch_indices(plan.input_patches, cfg.n_channels);
    Tensor cpe = gather_rows(params.e_channel, chan_idx);
    Tensor tpe = gather_rows(params.e_temporal, patch_idx);
    return add(add(projected, cpe), tpe);
}

Tensor build_queries(const IndexPlan& plan, const ModelParams& params, const ModelConfig& cfg) {
    if (plan.n_target() == 0) throw ContractError("query construction needs a nonempty target set");
    const Tensor& e_chan =
        (cfg.pe_sharing == PeSharing::Separate) ? *params.e_channel_dec : params.e_channel;
    const Tensor& e_temp =
        (cfg.pe_sharing == PeSharing::Separate) ? *params.e_temporal_dec : params.e_temporal;
    const auto chan_idx = tile_channel_indices(cfg.n_channels, plan.n_target());
    const auto patch_idx = tile_patch_indices(plan.target_patches, cfg.n_channels);
    return add(gather_rows(e_chan, chan_idx), gather_rows(e_temp, patch_idx));
}

struct EncodeResult {
    Tensor h1;
    Tensor z_final;
    Tensor map;
};

EncodeResult encode_latent_bottleneck(const Tensor& h0, const ModelParams& params, const ModelConfig& cfg,
                                      const nn::DropoutCtx& drop) {
    auto stage1 = nn::attn_block(params.z0, h0, params.enc_latent_in, drop);
    Tensor z = stage1.output;
    for (const auto& blk : params.enc_latent_self) z = nn::attn_block(z, z, blk, drop).output;
    EncodeResult res;
    res.z_final = z;
    res.map = std::move(stage1.map);
    if (cfg.decoder_variant == DecoderVariant::DirectLatent) {
        // DirectLT consumes the latents; the write-back stage is skipped.
        res.h1 = h0;
    } else {
        res.h1 = nn::attn_block(h0, z, params.enc_token_out, drop).output;
    }
    return res;
}

EncodeResult encode_full_self(const Tensor& h0, const ModelParams& params, const nn::DropoutCtx& drop) {
    auto out = nn::attn_block(h0, h0, *params.enc_full, drop);
    return {out.output, Tensor(), std::move(out.map)};
}

EncodeResult encode_decoupled(const Tensor& h0, const ModelParams& params, const ModelConfig& cfg,
                              const nn::DropoutCtx& drop) {
    const int64_t c_count = cfg.n_channels;
    const int64_t n_in = h0.rows() / c_count;

    // Temporal stage: self-attention within each channel's token row.
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(c_count));
    Tensor last_map;
    for (int64_t c = 0; c < c_count; ++c) {
        std::vector<int64_t> idx(static_cast<size_t>(n_in));
        for (int64_t k = 0; k < n_in; ++k) idx[static_cast<size_t>(k)] = c * n_in + k;
        Tensor group = gather_rows(h0, idx);
        auto out = nn::attn_block(group, group, *params.enc_time, drop);
        rows.push_back(out.output);
        last_map = std::move(out.map);
    }
    Tensor after_time = concat_rows(rows); // original row order

    // Channel stage: self-attention across channels at each patch position.
    std::vector<Tensor> cols;
    cols.reserve(static_cast<size_t>(n_in));
    for (int64_t k = 0; k < n_in; ++k) {
        std::vector<int64_t> idx(static_cast<size_t>(c_count));
        for (int64_t c = 0; c < c_count; ++c) idx[static_cast<size_t>(c)] = c * n_in + k;
        Tensor group = gather_rows(after_time, idx);
        auto out = nn::attn_block(group, group, *params.enc_chan, drop);
        cols.push_back(out.output);
        last_map = std::move(out.map);
    }
    // cols[k] row c corresponds to token (c, k); restore (c-major, k-minor).
    Tensor stacked = concat_rows(cols); // row (k * C + c)
    std::vector<int64_t> perm(static_cast<size_t>(c_count * n_in));
    for (int64_t c = 0; c < c_count; ++c)
        for (int64_t k = 0; k < n_in; ++k) perm[static_cast<size_t>(c * n_in + k)] = k * c_count + c;
    return {gather_rows(stacked, perm), Tensor(), std::move(last_map)};
}

} // namespace

std::vector<double> window_inputs(const Window& window, const IndexPlan& plan) {
    const auto times = plan.input_time_indices();
    std::vector<double> out(static_cast<size_t>(window.n_channels) * times.size());
    for (int64_t c = 0; c < window.n_channels; ++c)
        for (size_t k = 0; k < times.size(); ++k)
            out[static_cast<size_t>(c) * times.size() + k] = window.at(c, times[k]);
    return out;
}

std::vector<double> window_targets(const Window& window, const IndexPlan& plan) {
    const auto times = plan.target_time_indices();
    std::vector<double> out(static_cast<size_t>(window.n_channels) * times.size());
    for (int64_t c = 0; c < window.n_channels; ++c)
        for (size_t k = 0; k < times.size(); ++k)
            out[static_cast<size_t>(c) * times.size() + k] = window.at(c, times[k]);
    return out;
}

Tensor forward(const Window& window, const IndexPlan& plan, const ModelParams& params, const ModelConfig& cfg,
               ForwardTrace* trace, nn::DropoutCtx drop) {
    if (window.width != cfg.total_steps())
        throw DimError("window width " + std::to_string(window.width) + " does not match model total steps " +
                       std::to_string(cfg.total_steps()));
    if (window.n_channels != cfg.n_channels)
        throw DimError("window has " + std::to_string(window.n_channels) + " channels, model expects " +
                       std::to_string(cfg.n_channels));
    if (plan.grid.n_patches != cfg.n_patches() || plan.grid.patch_len != cfg.patch_len)
        throw DimError("plan grid does not match model config");

    // RevIN over input steps only.
    const std::vector<double> x_input = window_inputs(window, plan);
    auto [x_norm, revin] = revin_normalize(x_input, cfg.n_channels, plan.n_input() * cfg.patch_len);

    Tensor h0 = embed_inputs(x_norm, plan, params, cfg);

    EncodeResult enc;
    switch (cfg.encoder_variant) {
        case EncoderVariant::LatentBottleneck: enc = encode_latent_bottleneck(h0, params, cfg, drop); break;
        case EncoderVariant::FullSelfAttn: enc = encode_full_self(h0, params, drop); break;
        case EncoderVariant::DecoupledSelfAttn: enc = encode_decoupled(h0, params, cfg, drop); break;
    }

    Tensor q0 = build_queries(plan, params, cfg);

    Tensor q1;
    Tensor dec_map;
    if (cfg.decoder_variant == DecoderVariant::DirectLatent) {
        if (!enc.z_final.defined())
            throw ConfigError("direct_latent decoding requires the latent bottleneck encoder");
        auto out = nn::attn_block(q0, enc.z_final, params.dec, drop);
        q1 = out.output;
        dec_map = std::move(out.map);
    } else {
        auto out = nn::attn_block(q0, enc.h1, params.dec, drop);
        q1 = out.output;
        dec_map = std::move(out.map);
    }

    // Per-token projection D -> P; channel-major row order makes the
    // [C*m x P] buffer reshape directly into C x (m*P).
    const int64_t width = plan.n_target() * cfg.patch_len;
    Tensor pred_norm = reshape(matmul(q1, params.w_output), {cfg.n_channels, width});

    // RevIN inverse inside the graph so gradients carry the channel scales.
    std::vector<double> sig(static_cast<size_t>(cfg.n_channels * width));
    std::vector<double> mu(static_cast<size_t>(cfg.n_channels * width));
    for (int64_t c = 0; c < cfg.n_channels; ++c) {
        std::fill_n(sig.data() + c * width, width, revin.sigma[static_cast<size_t>(c)]);
        std::fill_n(mu.data() + c * width, width, revin.mu[static_cast<size_t>(c)]);
    }
    Tensor pred = add(mul(pred_norm, Tensor::from_data({cfg.n_channels, width}, std::move(sig))),
                      Tensor::from_data({cfg.n_channels, width}, std::move(mu)));

    if (trace) {
        trace->h0 = h0;
        trace->h1 = enc.h1;
        trace->q0 = q0;
        trace->q1 = q1;
        trace->z_final = enc.z_final;
        trace->encoder_map = enc.map;
        trace->decoder_map = dec_map;
        trace->revin = revin;
    }
    return pred;
}

Tensor forecast_standard(const Window& window, const ModelParams& params, const ModelConfig& cfg,
                         ForwardTrace* trace) {
    Rng unused(0);
    const IndexPlan plan = sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Standard, unused);
    return forward(window, plan, params, cfg, trace);
}

// ---- checkpoints --------------------------------------------------------------------

namespace {

json config_to_json_obj(const ModelConfig& cfg) {
    return json{{"patch_len", cfg.patch_len},
                {"d_embed", cfg.d_embed},
                {"d_latent", cfg.d_latent},
                {"n_latents", cfg.n_latents},
                {"k_self_layers", cfg.k_self_layers},
                {"n_heads", cfg.n_heads},
                {"n_channels", cfg.n_channels},
                {"lookback", cfg.lookback},
                {"horizon", cfg.horizon},
                {"encoder_variant", encoder_variant_name(cfg.encoder_variant)},
                {"decoder_variant", decoder_variant_name(cfg.decoder_variant)},
                {"pe_sharing", pe_sharing_name(cfg.pe_sharing)},
                {"dropout", cfg.dropout},
                {"seed", cfg.seed}};
}

ModelConfig config_from_json_obj(const json& j) {
    ModelConfig cfg;
    cfg.patch_len = j.at("patch_len").get<int64_t>();
    cfg.d_embed = j.at("d_embed").get<int64_t>();
    cfg.d_latent = j.at("d_latent").get<int64_t>();
    cfg.n_latents = j.at("n_latents").get<int64_t>();
    cfg.k_self_layers = j.at("k_self_layers").get<int64_t>();
    cfg.n_heads = j.at("n_heads").get<int64_t>();
    cfg.n_channels = j.at("n_channels").get<int64_t>();
    cfg.lookback = j.at("lookback").get<int64_t>();
    cfg.horizon = j.at("horizon").get<int64_t>();
    cfg.encoder_variant = encoder_variant_from_name(j.at("encoder_variant").get<std::string>());
    cfg.decoder_variant = decoder_variant_from_name(j.at("decoder_variant").get<std::string>());
    cfg.pe_sharing = pe_sharing_from_name(j.at("pe_sharing").get<std::string>());
    cfg.dropout = j.at("dropout").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    return cfg;
}

} // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_to_json_obj(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& json_text) {
    return config_from_json_obj(json::parse(json_text));
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params,
                     const CheckpointMeta& meta) {
    json doc;
    doc["format_version"] = 1;
    doc["model_config"] = config_to_json_obj(cfg);
    doc["meta"] = {{"seed", meta.seed},
                   {"global_step", meta.global_step},
                   {"epoch", meta.epoch},
                   {"val_mse", meta.val_mse}};
    json arrays = json::array();
    for (const auto& ref : params.named()) {
        json entry;
        entry["name"] = ref.name;
        entry["shape"] = ref.tensor.shape();
        entry["data"] = ref.tensor.values();
        arrays.push_back(std::move(entry));
    }
    doc["params"] = std::move(arrays);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << doc.dump();
    if (!out) throw IoError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint " + path + ": " + e.what());
    }
    if (doc.value("format_version", 0) != 1)
        throw IoError("unsupported checkpoint format version in " + path);

    Checkpoint ckpt;
    ckpt.config = config_from_json_obj(doc.at("model_config"));
    ckpt.params = ModelParams::init(ckpt.config, 0);
    ckpt.meta.seed = doc.at("meta").at("seed").get<uint64_t>();
    ckpt.meta.global_step = doc.at("meta").at("global_step").get<int64_t>();
    ckpt.meta.epoch = doc.at("meta").at("epoch").get<int64_t>();
    ckpt.meta.val_mse = doc.at("meta").at("val_mse").get<double>();

    auto reg = ckpt.params.named();
    const json& arrays = doc.at("params");
    if (arrays.size() != reg.size())
        throw IoError("checkpoint " + path + " holds " + std::to_string(arrays.size()) + " arrays, model expects " +
                      std::to_string(reg.size()));
    for (size_t i = 0; i < reg.size(); ++i) {
        const json& entry = arrays[i];
        if (entry.at("name").get<std::string>() != reg[i].name)
            throw IoError("checkpoint array " + std::to_string(i) + " is '" +
                          entry.at("name").get<std::string>() + "', expected '" + reg[i].name + "'");
        const auto shape = entry.at("shape").get<Shape>();
        if (shape != reg[i].tensor.shape())
            throw IoError("checkpoint array '" + reg[i].name + "' has shape " + shape_str(shape) + ", expected " +
                          shape_str(reg[i].tensor.shape()));
        auto data = entry.at("data").get<std::vector<double>>();
        Tensor t = reg[i].tensor;
        t.values_mut() = std::move(data);
    }
    return ckpt;
}

} // namespace lcast
