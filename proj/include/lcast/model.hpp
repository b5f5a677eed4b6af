#ifndef LCAST_MODEL_HPP
#define LCAST_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "lcast/data.hpp"
#include "lcast/nn.hpp"
#include "lcast/sampling.hpp"
#include "lcast/tensor.hpp"

namespace lcast {

enum class EncoderVariant { LatentBottleneck, FullSelfAttn, DecoupledSelfAttn };
enum class DecoderVariant { QueryCrossAttn, DirectLatent };
enum class PeSharing { Shared, Separate };

std::string encoder_variant_name(EncoderVariant v);
EncoderVariant encoder_variant_from_name(const std::string& name);
std::string decoder_variant_name(DecoderVariant v);
DecoderVariant decoder_variant_from_name(const std::string& name);
std::string pe_sharing_name(PeSharing v);
PeSharing pe_sharing_from_name(const std::string& name);

struct ModelConfig {
    int64_t patch_len = 12;
    int64_t d_embed = 32;       // token embedding width
    int64_t d_latent = 32;      // latent token width
    int64_t n_latents = 8;
    int64_t k_self_layers = 3;  // latent self-attention depth
    int64_t n_heads = 4;
    int64_t n_channels = 1;
    int64_t lookback = 96;
    int64_t horizon = 24;
    EncoderVariant encoder_variant = EncoderVariant::LatentBottleneck;
    DecoderVariant decoder_variant = DecoderVariant::QueryCrossAttn;
    PeSharing pe_sharing = PeSharing::Shared;
    double dropout = 0.0;
    uint64_t seed = 0;

    int64_t total_steps() const { return lookback + horizon; }
    int64_t n_patches() const { return total_steps() / patch_len; }
    int64_t n_input_patches() const { return lookback / patch_len; }
    PatchGrid grid() const { return make_patch_grid(total_steps(), patch_len); }
    void validate() const;
};

// Learnable state. Tensor fields share storage with the registry view, so
// optimizer updates through the registry mutate the live model.
struct ModelParams {
    Tensor w_input;   // P x D
    Tensor w_output;  // D x P
    Tensor e_temporal; // N x D
    Tensor e_channel;  // C x D
    Tensor z0;         // M x D_L
    std::optional<Tensor> e_temporal_dec; // used when pe_sharing == separate
    std::optional<Tensor> e_channel_dec;

    nn::AttnBlockParams enc_latent_in;                 // latents <- input tokens
    std::vector<nn::AttnBlockParams> enc_latent_self;  // K refinement layers
    nn::AttnBlockParams enc_token_out;                 // input tokens <- latents
    nn::AttnBlockParams dec;                           // queries <- context

    std::optional<nn::AttnBlockParams> enc_full;  // full self-attention variant
    std::optional<nn::AttnBlockParams> enc_time;  // decoupled: within-channel
    std::optional<nn::AttnBlockParams> enc_chan;  // decoupled: across channels

    static ModelParams init(const ModelConfig& cfg, uint64_t seed);
    nn::ParamRegistry named() const;
    ModelParams clone() const;
    void zero_grads() const;
};

// Parameter census by architectural group; the decoder group (decoder block +
// output head) is what stays constant across horizons.
struct ParamCensus {
    int64_t embeddings = 0; // w_input, positional tables, latents
    int64_t encoder = 0;
    int64_t decoder = 0;    // decoder block + w_output
    int64_t total() const { return embeddings + encoder + decoder; }
};
ParamCensus census(const ModelConfig& cfg, const ModelParams& params);

// Intermediate activations and attention maps from one forward pass.
struct ForwardTrace {
    Tensor h0, h1, q0, q1, z_final;
    Tensor encoder_map; // M x (C*|input|) for the bottleneck encoder
    Tensor decoder_map; // (C*|target|) x context rows
    RevinState revin;
};

// Runs the full pipeline on one window: RevIN -> input embeddings ->
// encoder variant -> queries -> decoder variant -> output projection ->
// RevIN inverse. Returns denormalized predictions, channel-major
// C x (|target| * P), target patches in ascending order.
Tensor forward(const Window& window, const IndexPlan& plan, const ModelParams& params, const ModelConfig& cfg,
               ForwardTrace* trace = nullptr, nn::DropoutCtx drop = {});

// Standard forecasting entry point: same code path with the deterministic
// last-patches plan.
Tensor forecast_standard(const Window& window, const ModelParams& params, const ModelConfig& cfg,
                         ForwardTrace* trace = nullptr);

// Target values of the window arranged to match forward()'s output layout.
std::vector<double> window_targets(const Window& window, const IndexPlan& plan);
// Input values of the window, channel-major C x (|input| * P).
std::vector<double> window_inputs(const Window& window, const IndexPlan& plan);

// ---- checkpoints ----------------------------------------------------------------

struct CheckpointMeta {
    uint64_t seed = 0;
    int64_t global_step = 0;
    int64_t epoch = 0;
    double val_mse = 0.0;
};

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    CheckpointMeta meta;
};

// Versioned JSON container; values survive a save/load round trip exactly.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

} // namespace lcast

#endif
