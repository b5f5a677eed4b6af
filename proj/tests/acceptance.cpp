// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Expected values come from independent oracles (finite differences,
// closed forms, brute-force counters) computed in this file.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>
#include <unistd.h>

#include "lcast/config.hpp"
#include "lcast/eval.hpp"
#include "lcast/model.hpp"
#include "lcast/train.hpp"
#include "oracles.hpp"

using namespace lcast;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;

void report(int criterion, const std::string& label, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", criterion, label.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failed;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> rand_vals(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = lo + (hi - lo) * uniform_unit(rng);
    return v;
}

// ---- criterion 1: gradient integrity ------------------------------------------

// Checks analytic-vs-numeric agreement for every coordinate of the first
// input of a scalar-valued graph.
bool fd_agrees(const std::function<Tensor(const Tensor&)>& graph, const std::vector<double>& x0, const Shape& shape,
               double tol, double& worst) {
    Tensor x = Tensor::from_data(shape, x0, true);
    Tensor loss = graph(x);
    backward(loss);
    const auto analytic = x.grad();
    auto f = [&](const std::vector<double>& v) { return graph(Tensor::from_data(shape, v)).item(); };
    bool ok = true;
    for (size_t i = 0; i < x0.size(); ++i) {
        const double numeric = oracles::finite_diff(f, x0, i);
        const double err = oracles::grad_error(analytic[i], numeric);
        worst = std::max(worst, err);
        ok = ok && err < tol;
    }
    return ok;
}

ModelConfig pipeline_toy_config() {
    ModelConfig cfg;
    cfg.patch_len = 4;
    cfg.d_embed = 8;
    cfg.d_latent = 8;
    cfg.n_latents = 2;
    cfg.k_self_layers = 1;
    cfg.n_heads = 2;
    cfg.n_channels = 2;
    cfg.lookback = 8;
    cfg.horizon = 8; // N = 4
    return cfg;
}

Window random_window(const ModelConfig& cfg, Rng& rng) {
    Window w;
    w.n_channels = cfg.n_channels;
    w.width = cfg.total_steps();
    w.values = rand_vals(rng, static_cast<size_t>(w.n_channels * w.width));
    return w;
}

IndexPlan standard_plan(const ModelConfig& cfg) {
    Rng unused(0);
    return sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Standard, unused);
}

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    bool ok = true;
    double worst = 0.0;

    for (int trial = 0; trial < 100 && ok; ++trial) {
        const auto a6 = rand_vals(rng, 6);
        const auto b6 = rand_vals(rng, 6);
        const auto g3 = rand_vals(rng, 3);
        const auto b3 = rand_vals(rng, 3);

        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(matmul(x, Tensor::from_data({3, 2}, b6)),
                                                                        matmul(x, Tensor::from_data({3, 2}, b6)))); },
                             a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(transpose(x), transpose(x))); }, a6, {2, 3},
                             1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(softmax_rows(x), Tensor::from_data({2, 3}, b6))); },
                             a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees(
                       [&](const Tensor& x) {
                           Tensor y = layer_norm(x, Tensor::from_data({3}, g3), Tensor::from_data({3}, b3));
                           return mean_all(mul(y, y));
                       },
                       a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(add(x, Tensor::from_data({2, 3}, b6)), x)); },
                             a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(mul(x, Tensor::from_data({2, 3}, b6)), x)); },
                             a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(scale(x, -2.3), x)); }, a6, {2, 3}, 1e-4,
                             worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(gelu(x)); }, a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mse(x, Tensor::from_data({2, 3}, b6)); }, a6, {2, 3},
                             1e-4, worst);
        const std::vector<int64_t> gidx{1, 0, 1};
        ok = ok && fd_agrees(
                       [&](const Tensor& x) {
                           Tensor g = gather_rows(x, gidx);
                           return mean_all(mul(g, g));
                       },
                       a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees(
                       [&](const Tensor& x) {
                           Tensor s = slice_cols(x, 1, 2);
                           std::vector<Tensor> cols{s, s};
                           Tensor c = concat_cols(cols);
                           std::vector<Tensor> rows{c, c};
                           Tensor r = concat_rows(rows);
                           return mean_all(mul(r, r));
                       },
                       a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees(
                       [&](const Tensor& x) {
                           Tensor r = reshape(x, {3, 2});
                           return mean_all(mul(r, r));
                       },
                       a6, {2, 3}, 1e-4, worst);
        ok = ok && fd_agrees([&](const Tensor& x) { return mean_all(mul(repeat_rows(x, 4), repeat_rows(x, 4))); },
                             g3, {3}, 1e-4, worst);
        ok = ok && fd_agrees(
                       [&](const Tensor& x) {
                           Rng drop_rng(99); // fixed mask keeps the map differentiable
                           return mean_all(dropout(mul(x, x), 0.3, drop_rng));
                       },
                       a6, {2, 3}, 1e-4, worst);
    }

    // Full pipeline: one exhaustive sweep over every parameter coordinate,
    // then randomized spot checks.
    const ModelConfig cfg = pipeline_toy_config();
    Rng wrng(202);
    double pipe_worst = 0.0;
    bool pipe_ok = true;
    {
        ModelParams params = ModelParams::init(cfg, 7);
        Window w = random_window(cfg, wrng);
        const IndexPlan plan = standard_plan(cfg);
        const Tensor target = Tensor::from_data({cfg.n_channels, cfg.horizon}, rand_vals(wrng, static_cast<size_t>(cfg.n_channels * cfg.horizon)));
        auto loss_of = [&]() { return mse(forward(w, plan, params, cfg), target); };

        params.zero_grads();
        Tensor loss = loss_of();
        backward(loss);
        for (auto& ref : params.named()) {
            const auto base = ref.tensor.values();
            const auto analytic = ref.tensor.grad();
            for (size_t i = 0; i < base.size(); ++i) {
                auto f = [&](const std::vector<double>& v) {
                    Tensor t = ref.tensor;
                    const auto saved = t.values();
                    t.values_mut() = v;
                    const double out = loss_of().item();
                    t.values_mut() = saved;
                    return out;
                };
                const double numeric = oracles::finite_diff(f, base, i);
                const double err = oracles::grad_error(analytic[i], numeric);
                pipe_worst = std::max(pipe_worst, err);
                pipe_ok = pipe_ok && err < 1e-3;
            }
        }
    }
    // Randomized trials: fresh params/window, random coordinates.
    for (int trial = 0; trial < 100 && pipe_ok; ++trial) {
        ModelParams params = ModelParams::init(cfg, 1000 + static_cast<uint64_t>(trial));
        Window w = random_window(cfg, wrng);
        const IndexPlan plan = standard_plan(cfg);
        const Tensor target = Tensor::from_data({cfg.n_channels, cfg.horizon}, rand_vals(wrng, static_cast<size_t>(cfg.n_channels * cfg.horizon)));
        auto loss_of = [&]() { return mse(forward(w, plan, params, cfg), target); };
        params.zero_grads();
        backward(loss_of());
        auto reg = params.named();
        for (int pick = 0; pick < 3; ++pick) {
            auto& ref = reg[uniform_below(wrng, reg.size())];
            const auto base = ref.tensor.values();
            const size_t i = uniform_below(wrng, base.size());
            auto f = [&](const std::vector<double>& v) {
                Tensor t = ref.tensor;
                const auto saved = t.values();
                t.values_mut() = v;
                const double out = loss_of().item();
                t.values_mut() = saved;
                return out;
            };
            const double numeric = oracles::finite_diff(f, base, i);
            const double err = oracles::grad_error(ref.tensor.grad()[i], numeric);
            pipe_worst = std::max(pipe_worst, err);
            pipe_ok = pipe_ok && err < 1e-3;
        }
    }

    const double secs = seconds_since(t0);
    char detail[256];
    std::snprintf(detail, sizeof(detail), "op worst rel err %.2e (tol 1e-4), pipeline worst %.2e (tol 1e-3), %.1f s",
                  worst, pipe_worst, secs);
    report(1, "gradient integrity", ok && pipe_ok && secs < 60.0, detail);
}

// ---- criterion 2: formulation correctness ----------------------------------------

void criterion2() {
    Rng rng(303);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int64_t n = 2 + static_cast<int64_t>(uniform_below(rng, 63));
        const int64_t n_in = 1 + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - 1)));
        const int64_t m = n - n_in;
        SampleStrategy strategy;
        switch (uniform_below(rng, 4)) {
            case 0: strategy = SampleStrategy::Standard; break;
            case 1: strategy = SampleStrategy::Contiguous; break;
            case 2: strategy = SampleStrategy::Disjoint; break;
            default: strategy = (m >= 2) ? SampleStrategy::Mixed : SampleStrategy::Contiguous; break;
        }
        const PatchGrid grid = make_patch_grid(n * 4, 4);
        const IndexPlan plan = sample_plan(grid, n_in * 4, strategy, rng);

        ok = ok && plan.n_input() == n_in;
        std::vector<bool> seen(static_cast<size_t>(n), false);
        for (int64_t p : plan.input_patches) {
            ok = ok && !seen[static_cast<size_t>(p)];
            seen[static_cast<size_t>(p)] = true;
        }
        for (int64_t p : plan.target_patches) {
            ok = ok && !seen[static_cast<size_t>(p)];
            seen[static_cast<size_t>(p)] = true;
        }
        for (bool s : seen) ok = ok && s;

        if (strategy == SampleStrategy::Standard) {
            for (int64_t i = 0; i < n_in; ++i) ok = ok && plan.input_patches[static_cast<size_t>(i)] == i;
            for (int64_t j = 0; j < m; ++j) ok = ok && plan.target_patches[static_cast<size_t>(j)] == n_in + j;
        }
    }
    report(2, "formulation correctness", ok, "1000 random (N, L/P, strategy) draws partition exactly");
}

// ---- criterion 3: special-case equivalence -----------------------------------------

void criterion3() {
    Rng rng(404);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        ModelConfig cfg;
        cfg.patch_len = 2 + static_cast<int64_t>(uniform_below(rng, 3));
        cfg.n_heads = 1 + static_cast<int64_t>(uniform_below(rng, 2));
        cfg.d_embed = cfg.n_heads * (2 + static_cast<int64_t>(uniform_below(rng, 3)));
        cfg.d_latent = cfg.n_heads * (2 + static_cast<int64_t>(uniform_below(rng, 3)));
        cfg.n_latents = 1 + static_cast<int64_t>(uniform_below(rng, 4));
        cfg.k_self_layers = static_cast<int64_t>(uniform_below(rng, 3));
        cfg.n_channels = 1 + static_cast<int64_t>(uniform_below(rng, 3));
        const int64_t n_in = 1 + static_cast<int64_t>(uniform_below(rng, 4));
        const int64_t n_out = 1 + static_cast<int64_t>(uniform_below(rng, 3));
        cfg.lookback = n_in * cfg.patch_len;
        cfg.horizon = n_out * cfg.patch_len;

        ModelParams params = ModelParams::init(cfg, 5000 + static_cast<uint64_t>(trial));
        Window w = random_window(cfg, rng);
        const Tensor a = forward(w, standard_plan(cfg), params, cfg);
        const Tensor b = forecast_standard(w, params, cfg);
        ok = ok && a.values() == b.values();
    }
    report(3, "special-case equivalence", ok, "standard-plan forward == forecast entry point bitwise, 100 models");
}

// ---- criterion 4: RevIN laws ---------------------------------------------------------

void criterion4() {
    Rng rng(505);
    bool ok_round = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t c = 1 + static_cast<int64_t>(uniform_below(rng, 4));
        const int64_t len = 2 + static_cast<int64_t>(uniform_below(rng, 60));
        const auto x = rand_vals(rng, static_cast<size_t>(c * len), -5.0, 5.0);
        auto [norm, state] = revin_normalize(x, c, len);
        const auto back = revin_denormalize(norm, c, len, state);
        for (size_t i = 0; i < x.size(); ++i) ok_round = ok_round && std::abs(back[i] - x[i]) < 1e-9;
    }

    const ModelConfig cfg = pipeline_toy_config();
    ModelParams params = ModelParams::init(cfg, 11);
    Window w = random_window(cfg, rng);
    const IndexPlan plan = standard_plan(cfg);
    ForwardTrace t1;
    (void)forward(w, plan, params, cfg, &t1);
    Window w_t = w;
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = cfg.lookback; t < w.width; ++t) w_t.at(c, t) = -777.0;
    ForwardTrace t2;
    (void)forward(w_t, plan, params, cfg, &t2);
    const bool ok_stats = t1.revin.mu == t2.revin.mu && t1.revin.sigma == t2.revin.sigma;

    const Tensor base = forward(w, plan, params, cfg);
    bool ok_shift = true;
    const std::vector<double> shift{2.75, -4.5};
    Window w_s = w;
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = 0; t < w.width; ++t) w_s.at(c, t) += shift[static_cast<size_t>(c)];
    const Tensor shifted = forward(w_s, plan, params, cfg);
    for (int64_t c = 0; c < cfg.n_channels; ++c)
        for (int64_t t = 0; t < cfg.horizon; ++t)
            ok_shift = ok_shift && std::abs(shifted.at({c, t}) - base.at({c, t}) - shift[static_cast<size_t>(c)]) < 1e-7;

    report(4, "RevIN laws", ok_round && ok_stats && ok_shift,
           std::string("roundtrip 1e-9 ") + (ok_round ? "ok" : "FAIL") + ", target-independent stats " +
               (ok_stats ? "bitwise" : "FAIL") + ", shift equivariance 1e-7 " + (ok_shift ? "ok" : "FAIL"));
}

// ---- criterion 5: attention laws -------------------------------------------------------

void criterion5() {
    Rng rng(606);
    Rng plan_rng(607);
    const ModelConfig cfg = pipeline_toy_config();
    ModelParams params = ModelParams::init(cfg, 13);
    bool ok = true;
    const SampleStrategy strategies[] = {SampleStrategy::Standard, SampleStrategy::Contiguous,
                                         SampleStrategy::Disjoint, SampleStrategy::Mixed};
    for (int trial = 0; trial < 60 && ok; ++trial) {
        Window w = random_window(cfg, rng);
        const IndexPlan plan = sample_plan(cfg.grid(), cfg.lookback, strategies[trial % 4], plan_rng);
        ForwardTrace trace;
        (void)forward(w, plan, params, cfg, &trace);

        ok = ok && trace.encoder_map.rows() == cfg.n_latents;
        ok = ok && trace.encoder_map.cols() == cfg.n_channels * plan.n_input();
        ok = ok && trace.decoder_map.rows() == cfg.n_channels * plan.n_target();
        ok = ok && trace.decoder_map.cols() == cfg.n_channels * plan.n_input();
        for (const Tensor* map : {&trace.encoder_map, &trace.decoder_map}) {
            for (int64_t i = 0; i < map->rows(); ++i) {
                double sum = 0.0;
                for (int64_t j = 0; j < map->cols(); ++j) sum += map->at({i, j});
                ok = ok && std::abs(sum - 1.0) < 1e-6;
            }
        }
    }
    report(5, "attention laws", ok, "maps row-stochastic (1e-6) with lawful shapes over all strategies");
}

// ---- criterion 6: complexity law ---------------------------------------------------------

void criterion6() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig base;
    base.patch_len = 4;
    base.d_embed = 16;
    base.d_latent = 16;
    base.n_latents = 8;
    base.k_self_layers = 3;
    base.n_heads = 2;
    base.n_channels = 7;
    base.horizon = 8;
    base.lookback = 32;
    const std::vector<int64_t> grid{56, 112, 224, 448};

    const CostProfile profile =
        profile_variants(base, {EncoderVariant::LatentBottleneck, EncoderVariant::FullSelfAttn}, grid);

    bool counts_ok = true;
    for (const auto& row : profile.rows) {
        const int64_t expected = (row.variant == "latent_bottleneck")
                                     ? 2 * base.n_latents * row.token_count +
                                           base.k_self_layers * base.n_latents * base.n_latents
                                     : row.token_count * row.token_count;
        counts_ok = counts_ok && row.score_elements == expected;
    }
    const double e_lb = profile.fitted_exponent.at("latent_bottleneck");
    const double e_full = profile.fitted_exponent.at("full_self_attn");
    const double secs = seconds_since(t0);
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "counts match closed forms: %s; exponents: bottleneck %.4f (1.0+-0.1), full %.4f (2.0+-0.1), %.1f s",
                  counts_ok ? "yes" : "NO", e_lb, e_full, secs);
    report(6, "complexity law",
           counts_ok && std::abs(e_lb - 1.0) <= 0.1 && std::abs(e_full - 2.0) <= 0.1 && secs < 300.0, detail);
}

// ---- criterion 7: decoder parameter census --------------------------------------------------

void criterion7() {
    ModelConfig a;
    a.patch_len = 12;
    a.d_embed = 32;
    a.d_latent = 32;
    a.n_latents = 8;
    a.n_heads = 4;
    a.n_channels = 2;
    a.lookback = 96;
    a.horizon = 96;
    ModelConfig b = a;
    b.horizon = 192;
    const ParamCensus ca = census(a, ModelParams::init(a, 17));
    const ParamCensus cb = census(b, ModelParams::init(b, 17));
    char detail[160];
    std::snprintf(detail, sizeof(detail), "decoder params H=96: %lld, H=192: %lld",
                  static_cast<long long>(ca.decoder), static_cast<long long>(cb.decoder));
    report(7, "decoder parameter census", ca.decoder == cb.decoder && ca.decoder > 0, detail);
}

// ---- criteria 8-10: learning, ablations, persistence ------------------------------------------

SynthSpec learning_spec(int64_t length) {
    SynthSpec spec;
    spec.length = length;
    spec.seed = 42;
    ChannelSpec c0;
    c0.sines.push_back({1.0, 36.0, 0.0});
    c0.noise_std = 0.05;
    spec.channels.push_back(c0);
    ChannelSpec c1;
    c1.sines.push_back({0.8, 60.0, 1.1});
    c1.noise_std = 0.05;
    spec.channels.push_back(c1);
    return spec;
}

void criterion8() {
    const SynthSpec spec = learning_spec(2000);
    const MultivariateSeries series = synth_generate(spec);
    const DatasetBundle bundle = chronological_split(series, {0.6, 0.2, 0.2});

    ModelConfig mc;
    mc.patch_len = 12;
    mc.d_embed = 32;
    mc.d_latent = 32;
    mc.n_latents = 8;
    mc.k_self_layers = 3;
    mc.n_heads = 4;
    mc.n_channels = 2;
    mc.lookback = 96;
    mc.horizon = 24;

    const double naive = naive_repeat_mse_analytic(spec, mc.horizon);

    double total_mse = 0.0;
    double worst_seed_secs = 0.0;
    bool ok = true;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainConfig tc;
        tc.epochs = 30;
        tc.warmup_epochs = 5;
        tc.batch_size = 32;
        tc.lr_base = 5e-4;
        tc.strategy = SampleStrategy::Mixed;
        tc.seed = seed;
        const TrainResult r = train(mc, tc, series, bundle);
        const ValMetrics test = evaluate_split(series, bundle, Split::Test, r.best, mc);
        const double secs = seconds_since(t0);
        worst_seed_secs = std::max(worst_seed_secs, secs);
        total_mse += test.mse;
        ok = ok && secs < 600.0;
        std::printf("    seed %llu: test MSE %.4f (naive %.4f), %.1f s\n", static_cast<unsigned long long>(seed),
                    test.mse, naive, secs);
        std::fflush(stdout);
    }
    const double mean_mse = total_mse / 5.0;
    char detail[192];
    std::snprintf(detail, sizeof(detail), "mean test MSE %.4f vs analytic naive %.4f (need <= %.4f), slowest seed %.1f s",
                  mean_mse, naive, 0.5 * naive, worst_seed_secs);
    report(8, "learning works", ok && mean_mse <= 0.5 * naive, detail);
}

void criterion9() {
    // Directional claims need models trained past initialization; the
    // criterion-8 dataset and model with a reduced epoch budget are the
    // smallest setting where both directions are stable across seeds.
    const SynthSpec spec = learning_spec(2000);
    const MultivariateSeries series = synth_generate(spec);
    const DatasetBundle bundle = chronological_split(series, {0.6, 0.2, 0.2});

    ModelConfig mc;
    mc.patch_len = 12;
    mc.d_embed = 32;
    mc.d_latent = 32;
    mc.n_latents = 8;
    mc.k_self_layers = 3;
    mc.n_heads = 4;
    mc.n_channels = 2;
    mc.lookback = 96;
    mc.horizon = 24;
    TrainConfig tc_gen;
    tc_gen.epochs = 15;
    tc_gen.warmup_epochs = 3;
    tc_gen.batch_size = 32;
    tc_gen.strategy = SampleStrategy::Mixed;
    TrainConfig tc_std = tc_gen;
    tc_std.strategy = SampleStrategy::Standard;
    ModelConfig mc_direct = mc;
    mc_direct.decoder_variant = DecoderVariant::DirectLatent;

    // One suite serves both axes: (a) formulation on imputation MSE,
    // (b) decoder design on forecast MSE (both decoder entries train with
    // the generalized strategy so only the decoder differs).
    AblationOptions opts;
    opts.seeds = {0, 1, 2, 3, 4};
    opts.run_imputation = true;
    opts.mask_patch_len = 24;
    opts.mask_ratio = 0.25;
    const AblationReport suite = run_ablation(
        {{"generalized", mc, tc_gen}, {"standard", mc, tc_std}, {"direct_latent", mc_direct, tc_gen}}, series,
        bundle, opts);
    const double imp_gen = suite.mean_imputation_mse.at("generalized");
    const double imp_std = suite.mean_imputation_mse.at("standard");
    const double fc_full = suite.mean_forecast_mse.at("generalized");
    const double fc_direct = suite.mean_forecast_mse.at("direct_latent");

    // Encoder-variant comparison: reported, not asserted.
    AblationOptions opts_enc;
    opts_enc.seeds = {0, 1};
    ModelConfig mc_full_attn = mc;
    mc_full_attn.encoder_variant = EncoderVariant::FullSelfAttn;
    const AblationReport enc = run_ablation({{"latent_bottleneck", mc, tc_gen}, {"full_self_attn", mc_full_attn, tc_gen}},
                                            series, bundle, opts_enc);
    std::printf("    encoder comparison (reported): bottleneck %.4f vs full self-attn %.4f, winner %s\n",
                enc.mean_forecast_mse.at("latent_bottleneck"), enc.mean_forecast_mse.at("full_self_attn"),
                enc.forecast_winner.c_str());

    const bool ok = imp_gen <= imp_std && fc_full <= fc_direct && suite.failures.empty();
    char detail[224];
    std::snprintf(detail, sizeof(detail),
                  "imputation MSE generalized %.4f <= standard %.4f: %s; forecast MSE full %.4f <= DirectLT %.4f: %s",
                  imp_gen, imp_std, imp_gen <= imp_std ? "yes" : "NO", fc_full, fc_direct,
                  fc_full <= fc_direct ? "yes" : "NO");
    report(9, "directional ablations", ok, detail);
}

void criterion10() {
    const SynthSpec spec = learning_spec(800);
    const MultivariateSeries series = synth_generate(spec);
    const DatasetBundle bundle = chronological_split(series, {0.6, 0.2, 0.2});

    ModelConfig mc;
    mc.patch_len = 12;
    mc.d_embed = 16;
    mc.d_latent = 16;
    mc.n_latents = 4;
    mc.k_self_layers = 1;
    mc.n_heads = 2;
    mc.n_channels = 2;
    mc.lookback = 96;
    mc.horizon = 24;
    TrainConfig tc;
    tc.epochs = 2;
    tc.warmup_epochs = 1;
    tc.batch_size = 64;

    const TrainResult a = train(mc, tc, series, bundle);
    const TrainResult b = train(mc, tc, series, bundle);
    bool hist_ok = a.history.size() == b.history.size();
    for (size_t i = 0; hist_ok && i < a.history.size(); ++i)
        hist_ok = a.history[i].to_json() == b.history[i].to_json();

    const EvalReport ra = evaluate_forecast(series, bundle, a.best, mc, 0);
    const EvalReport rb = evaluate_forecast(series, bundle, b.best, mc, 0);
    const bool report_ok = ra.payload_json() == rb.payload_json();

    const std::string path =
        (fs::temp_directory_path() / ("lcast_acc_ckpt_" + std::to_string(::getpid()) + ".json")).string();
    CheckpointMeta meta;
    meta.val_mse = a.best_val_mse;
    save_checkpoint(path, mc, a.best, meta);
    const Checkpoint loaded = load_checkpoint(path);
    const ValMetrics val_orig = evaluate_split(series, bundle, Split::Val, a.best, mc);
    const ValMetrics val_loaded = evaluate_split(series, bundle, Split::Val, loaded.params, loaded.config);
    const bool ckpt_ok = std::abs(val_orig.mse - val_loaded.mse) <= 1e-10;
    fs::remove(path);

    char detail[192];
    std::snprintf(detail, sizeof(detail), "history identical: %s; report payload identical: %s; roundtrip dMSE %.2e",
                  hist_ok ? "yes" : "NO", report_ok ? "yes" : "NO", std::abs(val_orig.mse - val_loaded.mse));
    report(10, "determinism & persistence", hist_ok && report_ok && ckpt_ok, detail);
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf(g_failed == 0 ? "ALL CRITERIA PASSED\n" : "%d CRITERIA FAILED\n", g_failed);
    return g_failed == 0 ? 0 : 1;
}
