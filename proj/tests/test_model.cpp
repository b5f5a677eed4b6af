#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lcast/model.hpp"
#include "oracles.hpp"

using namespace lcast;
namespace fs = std::filesystem;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.patch_len = 4;
    cfg.d_embed = 8;
    cfg.d_latent = 8;
    cfg.n_latents = 2;
    cfg.k_self_layers = 1;
    cfg.n_heads = 2;
    cfg.n_channels = 2;
    cfg.lookback = 8;  // 2 input patches
    cfg.horizon = 8;   // 2 target patches, N = 4
    return cfg;
}

Window random_window(const ModelConfig& cfg, Rng& rng) {
    Window w;
    w.n_channels = cfg.n_channels;
    w.width = cfg.total_steps();
    w.values.resize(static_cast<size_t>(w.n_channels * w.width));
    for (double& v : w.values) v = -2.0 + 4.0 * uniform_unit(rng);
    return w;
}

IndexPlan standard_plan(const ModelConfig& cfg) {
    Rng unused(0);
    return sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Standard, unused);
}

void zero_param(Tensor t) { std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0); }

void zero_block_outputs(nn::AttnBlockParams& p) {
    zero_param(p.wo);
    zero_param(p.w2);
}

} // namespace

TEST_CASE("config validation catches divisibility breaks") {
    ModelConfig cfg = toy_config();
    cfg.lookback = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_config();
    cfg.n_heads = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_config();
    cfg.horizon = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(toy_config().validate());
}

TEST_CASE("embedding tokens reduce to TPE rows when projections and CPE vanish") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 1);
    zero_param(params.w_input);
    zero_param(params.e_channel);
    Rng rng(2);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);

    ForwardTrace trace;
    (void)forward(w, plan, params, cfg, &trace);
    // h0 row (c, k) should equal the TPE row of input patch k.
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t k = 0; k < plan.n_input(); ++k)
            for (int64_t d = 0; d < cfg.d_embed; ++d)
                CHECK(trace.h0.at({c * plan.n_input() + k, d}) ==
                      doctest::Approx(params.e_temporal.at({plan.input_patches[static_cast<size_t>(k)], d})));
}

TEST_CASE("identical channel values differ only by CPE rows") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 3);
    Rng rng(4);
    Window w = random_window(cfg, rng);
    for (int64_t t = 0; t < w.width; ++t) w.at(1, t) = w.at(0, t); // duplicate channel
    const IndexPlan plan = standard_plan(cfg);
    ForwardTrace trace;
    (void)forward(w, plan, params, cfg, &trace);
    const int64_t n_in = plan.n_input();
    for (int64_t k = 0; k < n_in; ++k)
        for (int64_t d = 0; d < cfg.d_embed; ++d) {
            const double diff = trace.h0.at({n_in + k, d}) - trace.h0.at({k, d});
            const double cpe_diff = params.e_channel.at({1, d}) - params.e_channel.at({0, d});
            CHECK(diff == doctest::Approx(cpe_diff).epsilon(1e-9));
        }
}

TEST_CASE("queries are pure positional sums, shared and separate modes") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 5);
    Rng rng(6);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    ForwardTrace trace;
    (void)forward(w, plan, params, cfg, &trace);

    CHECK(trace.q0.rows() == cfg.n_channels * plan.n_target()); // 2 * 2
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t j = 0; j < plan.n_target(); ++j)
            for (int64_t d = 0; d < cfg.d_embed; ++d)
                CHECK(trace.q0.at({c * plan.n_target() + j, d}) ==
                      doctest::Approx(params.e_channel.at({c, d}) +
                                      params.e_temporal.at({plan.target_patches[static_cast<size_t>(j)], d})));

    // Separate mode with zeroed decoder tables gives all-zero queries.
    ModelConfig sep_cfg = cfg;
    sep_cfg.pe_sharing = PeSharing::Separate;
    ModelParams sep_params = ModelParams::init(sep_cfg, 7);
    zero_param(*sep_params.e_temporal_dec);
    zero_param(*sep_params.e_channel_dec);
    ForwardTrace sep_trace;
    (void)forward(w, plan, sep_params, sep_cfg, &sep_trace);
    for (double v : sep_trace.q0.values()) CHECK(v == 0.0);
}

TEST_CASE("query count scales with channels times target patches") {
    ModelConfig cfg = toy_config();
    cfg.n_channels = 7;
    cfg.lookback = 32; // 8 input patches
    cfg.horizon = 8;   // 2 target patches
    ModelParams params = ModelParams::init(cfg, 8);
    Rng rng(9);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.q0.rows() == 14);
}

TEST_CASE("residual identity chain: zeroed projections pass tokens through") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 10);
    zero_block_outputs(params.enc_latent_in);
    for (auto& blk : params.enc_latent_self) zero_block_outputs(blk);
    zero_block_outputs(params.enc_token_out);
    Rng rng(11);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.h1.values() == trace.h0.values());

    // Zeroed decoder outputs leave queries unchanged as well.
    zero_block_outputs(params.dec);
    ForwardTrace trace2;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace2);
    CHECK(trace2.q1.values() == trace2.q0.values());
}

TEST_CASE("single latent attends everywhere with weight one") {
    ModelConfig cfg = toy_config();
    cfg.n_latents = 1;
    cfg.k_self_layers = 0;
    ModelParams params = ModelParams::init(cfg, 12);
    Rng rng(13);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.encoder_map.rows() == 1);
    CHECK(trace.encoder_map.cols() == cfg.n_channels * 2);
    double sum = 0.0;
    for (int64_t j = 0; j < trace.encoder_map.cols(); ++j) sum += trace.encoder_map.at({0, j});
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("encoder score-element counts match the closed forms") {
    // Bottleneck: 2*M*n + K*M^2; full: n^2; decoupled: C*n_in^2 + n_in*C^2.
    ModelConfig cfg;
    cfg.patch_len = 4;
    cfg.d_embed = 8;
    cfg.d_latent = 8;
    cfg.n_latents = 16;
    cfg.k_self_layers = 3;
    cfg.n_heads = 2;
    cfg.n_channels = 7;
    cfg.lookback = 32; // 8 input patches -> n = 56 tokens
    cfg.horizon = 8;
    Rng rng(14);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    const int64_t n_tokens = cfg.n_channels * plan.n_input();
    const int64_t n_queries = cfg.n_channels * plan.n_target();

    auto run_and_count = [&](EncoderVariant variant) {
        ModelConfig vcfg = cfg;
        vcfg.encoder_variant = variant;
        ModelParams params = ModelParams::init(vcfg, 15);
        nn::reset_score_elements();
        (void)forward(w, plan, params, vcfg);
        // The decoder contributes n_queries x n_tokens on top of the encoder.
        return nn::score_elements() - n_queries * n_tokens;
    };

    const int64_t bottleneck = run_and_count(EncoderVariant::LatentBottleneck);
    CHECK(bottleneck == 2 * cfg.n_latents * n_tokens + cfg.k_self_layers * cfg.n_latents * cfg.n_latents);
    CHECK(bottleneck == 2560);

    const int64_t full = run_and_count(EncoderVariant::FullSelfAttn);
    CHECK(full == n_tokens * n_tokens);
    CHECK(full == 3136);

    const int64_t decoupled = run_and_count(EncoderVariant::DecoupledSelfAttn);
    const int64_t n_in = plan.n_input();
    CHECK(decoupled == cfg.n_channels * n_in * n_in + n_in * cfg.n_channels * cfg.n_channels);
}

TEST_CASE("decoupled encoder with one channel has identity channel stage") {
    ModelConfig cfg = toy_config();
    cfg.n_channels = 1;
    cfg.encoder_variant = EncoderVariant::DecoupledSelfAttn;
    ModelParams params = ModelParams::init(cfg, 16);
    zero_block_outputs(*params.enc_time);
    zero_block_outputs(*params.enc_chan);
    Rng rng(17);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.h1.values() == trace.h0.values());
    // The last channel-stage map is 1x1 attention: weight exactly one.
    CHECK(trace.encoder_map.rows() == 1);
    CHECK(trace.encoder_map.at({0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("full self-attention over a single token is residual-only") {
    ModelConfig cfg = toy_config();
    cfg.n_channels = 1;
    cfg.lookback = 4; // one input patch -> one token
    cfg.horizon = 4;
    cfg.encoder_variant = EncoderVariant::FullSelfAttn;
    ModelParams params = ModelParams::init(cfg, 18);
    zero_block_outputs(*params.enc_full);
    Rng rng(19);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.h1.values() == trace.h0.values());
}

TEST_CASE("decoder attention map shape law") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 20);
    Rng rng(21);
    Rng plan_rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        Window w = random_window(cfg, rng);
        const IndexPlan plan = sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Disjoint, plan_rng);
        ForwardTrace trace;
        (void)forward(w, plan, params, cfg, &trace);
        CHECK(trace.decoder_map.rows() == cfg.n_channels * plan.n_target());
        CHECK(trace.decoder_map.cols() == cfg.n_channels * plan.n_input());
        CHECK(trace.encoder_map.rows() == cfg.n_latents);
        CHECK(trace.encoder_map.cols() == cfg.n_channels * plan.n_input());
    }
}

TEST_CASE("direct-latent decoding attends over latent tokens") {
    ModelConfig cfg = toy_config();
    cfg.decoder_variant = DecoderVariant::DirectLatent;
    ModelParams params = ModelParams::init(cfg, 23);
    Rng rng(24);
    Window w = random_window(cfg, rng);
    ForwardTrace trace;
    (void)forward(w, standard_plan(cfg), params, cfg, &trace);
    CHECK(trace.decoder_map.rows() == cfg.n_channels * 2);
    CHECK(trace.decoder_map.cols() == cfg.n_latents);

    // M = 1: every query row holds a single weight of one.
    ModelConfig one = cfg;
    one.n_latents = 1;
    ModelParams params_one = ModelParams::init(one, 25);
    ForwardTrace trace_one;
    (void)forward(w, standard_plan(one), params_one, one, &trace_one);
    for (int64_t i = 0; i < trace_one.decoder_map.rows(); ++i)
        CHECK(trace_one.decoder_map.at({i, 0}) == doctest::Approx(1.0));
}

TEST_CASE("zero output projection predicts the RevIN means") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 26);
    zero_param(params.w_output);
    Rng rng(27);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    const Tensor pred = forward(w, plan, params, cfg);
    // Pre-denormalization output is zero, so predictions equal the per-channel mean.
    const auto x_input = window_inputs(w, plan);
    for (int64_t c = 0; c < cfg.n_channels; ++c) {
        double mean = 0.0;
        for (int64_t t = 0; t < cfg.lookback; ++t) mean += x_input[static_cast<size_t>(c * cfg.lookback + t)];
        mean /= static_cast<double>(cfg.lookback);
        for (int64_t t = 0; t < cfg.horizon; ++t) CHECK(pred.at({c, t}) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("single target patch output width equals the patch length") {
    ModelConfig cfg = toy_config();
    cfg.horizon = 4; // one target patch
    ModelParams params = ModelParams::init(cfg, 28);
    Rng rng(29);
    Window w = random_window(cfg, rng);
    const Tensor pred = forward(w, standard_plan(cfg), params, cfg);
    CHECK(pred.rows() == cfg.n_channels);
    CHECK(pred.cols() == cfg.patch_len);
}

TEST_CASE("full pipeline gradient matches finite differences on every parameter") {
    ModelConfig cfg = toy_config(); // C=2, N=4, M=2, D=8
    ModelParams params = ModelParams::init(cfg, 30);
    Rng rng(31);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);

    auto loss_value = [&]() {
        const Tensor pred = forward(w, plan, params, cfg);
        const Tensor target = Tensor::from_data(pred.shape(), window_targets(w, plan));
        return mse(pred, target);
    };

    params.zero_grads();
    Tensor loss = loss_value();
    backward(loss);

    for (auto& ref : params.named()) {
        const auto base_vals = ref.tensor.values();
        const auto analytic = ref.tensor.grad();
        // Sweep every coordinate of small tensors; stride through big ones.
        const size_t stride = std::max<size_t>(1, base_vals.size() / 8);
        for (size_t i = 0; i < base_vals.size(); i += stride) {
            auto f = [&](const std::vector<double>& v) {
                Tensor t = ref.tensor;
                const auto saved = t.values();
                t.values_mut() = v;
                const double out = loss_value().item();
                t.values_mut() = saved;
                return out;
            };
            const double numeric = oracles::finite_diff(f, base_vals, i);
            CAPTURE(ref.name);
            CAPTURE(i);
            CHECK(oracles::grad_error(analytic[i], numeric) < 1e-3);
        }
    }
}

TEST_CASE("standard plan equals the dedicated forecast entry point bitwise") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 32);
    Rng rng(33);
    Window w = random_window(cfg, rng);
    const Tensor a = forward(w, standard_plan(cfg), params, cfg);
    const Tensor b = forecast_standard(w, params, cfg);
    CHECK(a.values() == b.values());
}

TEST_CASE("forward is deterministic") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 34);
    Rng rng(35);
    Window w = random_window(cfg, rng);
    const Tensor a = forward(w, standard_plan(cfg), params, cfg);
    const Tensor b = forward(w, standard_plan(cfg), params, cfg);
    CHECK(a.values() == b.values());
    CHECK(a.rows() == cfg.n_channels);
    CHECK(a.cols() == cfg.horizon);
}

TEST_CASE("channel permutation equivariance on a frozen model") {
    ModelConfig cfg = toy_config();
    cfg.n_channels = 3;
    ModelParams params = ModelParams::init(cfg, 36);
    Rng rng(37);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    const Tensor base = forward(w, plan, params, cfg);

    const std::vector<int64_t> perm{2, 0, 1};
    Window w_perm = w;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < w.width; ++t) w_perm.at(c, t) = w.at(perm[static_cast<size_t>(c)], t);
    ModelParams params_perm = params.clone();
    params_perm.e_channel = gather_rows(params.e_channel, perm).detach();
    const Tensor permuted = forward(w_perm, plan, params_perm, cfg);

    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < cfg.horizon; ++t)
            CHECK(std::abs(permuted.at({c, t}) - base.at({perm[static_cast<size_t>(c)], t})) < 1e-9);
}

TEST_CASE("latent count changes no interface shapes") {
    ModelConfig small = toy_config();
    ModelConfig big = toy_config();
    big.n_latents = 8;
    ModelParams ps = ModelParams::init(small, 38);
    ModelParams pb = ModelParams::init(big, 38);
    Rng rng(39);
    Window w = random_window(small, rng);
    const Tensor a = forward(w, standard_plan(small), ps, small);
    const Tensor b = forward(w, standard_plan(big), pb, big);
    CHECK(a.shape() == b.shape());
}

TEST_CASE("per-channel constant shift moves predictions by the same constant") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 40);
    Rng rng(41);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    const Tensor base = forward(w, plan, params, cfg);

    const std::vector<double> shift{3.25, -1.5};
    Window w2 = w;
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = 0; t < w.width; ++t) w2.at(c, t) += shift[static_cast<size_t>(c)];
    const Tensor shifted = forward(w2, plan, params, cfg);
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = 0; t < cfg.horizon; ++t)
            CHECK(std::abs(shifted.at({c, t}) - base.at({c, t}) - shift[static_cast<size_t>(c)]) < 1e-7);
}

TEST_CASE("revin statistics ignore target values bitwise") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 42);
    Rng rng(43);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    ForwardTrace t1;
    (void)forward(w, plan, params, cfg, &t1);

    Window w2 = w;
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = cfg.lookback; t < w.width; ++t) w2.at(c, t) = 1234.5;
    ForwardTrace t2;
    (void)forward(w2, plan, params, cfg, &t2);
    CHECK(t1.revin.mu == t2.revin.mu);
    CHECK(t1.revin.sigma == t2.revin.sigma);
}

TEST_CASE("affine input transform maps predictions affinely (frozen model)") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg, 44);
    Rng rng(45);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    const Tensor base = forward(w, plan, params, cfg);

    // Exact up to the normalization eps floor: the scaled variance enters
    // sqrt(a^2 var + eps) rather than a sqrt(var + eps), an O(eps/var)
    // perturbation of the normalized inputs.
    const double a = 2.5, b = -1.25;
    Window w2 = w;
    for (double& v : w2.values) v = a * v + b;
    const Tensor mapped = forward(w2, plan, params, cfg);
    for (size_t i = 0; i < base.values().size(); ++i)
        CHECK(mapped.values()[i] == doctest::Approx(a * base.values()[i] + b).epsilon(1e-4));
}

TEST_CASE("checkpoint round trip reproduces forwards exactly") {
    const std::string path = (fs::temp_directory_path() /
                              ("lcast_ckpt_" + std::to_string(::getpid()) + ".json"))
                                 .string();
    ModelConfig cfg = toy_config();
    cfg.pe_sharing = PeSharing::Separate;
    ModelParams params = ModelParams::init(cfg, 46);
    CheckpointMeta meta;
    meta.seed = 46;
    meta.global_step = 17;
    meta.epoch = 3;
    meta.val_mse = 0.125;
    save_checkpoint(path, cfg, params, meta);

    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.meta.global_step == 17);
    CHECK(loaded.meta.epoch == 3);
    CHECK(model_config_to_json(loaded.config) == model_config_to_json(cfg));

    Rng rng(47);
    Window w = random_window(cfg, rng);
    const Tensor a = forward(w, standard_plan(cfg), params, cfg);
    const Tensor b = forward(w, standard_plan(cfg), loaded.params, loaded.config);
    for (size_t i = 0; i < a.values().size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-12);
    fs::remove(path);

    CHECK_THROWS_AS(load_checkpoint(path + ".missing"), IoError);
}

TEST_CASE("parameter census: decoder group is horizon-independent") {
    ModelConfig a = toy_config();
    a.patch_len = 12;
    a.d_embed = 24;
    a.d_latent = 24;
    a.lookback = 96;
    a.horizon = 96;
    ModelConfig b = a;
    b.horizon = 192;
    const ParamCensus ca = census(a, ModelParams::init(a, 48));
    const ParamCensus cb = census(b, ModelParams::init(b, 48));
    CHECK(ca.decoder == cb.decoder);
    CHECK(ca.embeddings < cb.embeddings); // the temporal table grows instead
}
