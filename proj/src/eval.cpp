#include "lcast/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace lcast {

using nlohmann::json;

double metric_mse(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size())
        throw DimError("metric_mse: " + std::to_string(pred.size()) + " vs " + std::to_string(target.size()) +
                       " values");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double metric_mae(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size())
        throw DimError("metric_mae: " + std::to_string(pred.size()) + " vs " + std::to_string(target.size()) +
                       " values");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double naive_repeat_mse(const MultivariateSeries& series, const DatasetBundle& bundle, Split split, int64_t lookback,
                        int64_t horizon) {
    if (horizon > lookback)
        throw ConfigError("naive block repeat needs horizon <= lookback, got " + std::to_string(horizon) + " > " +
                          std::to_string(lookback));
    const auto origins = window_origins(bundle, split, lookback + horizon, 1);
    double se = 0.0;
    int64_t n = 0;
    for (int64_t origin : origins) {
        for (int64_t c = 0; c < series.n_channels; ++c) {
            for (int64_t h = 0; h < horizon; ++h) {
                const double pred = series.at(c, origin + lookback - horizon + h);
                const double truth = series.at(c, origin + lookback + h);
                const double d = pred - truth;
                se += d * d;
                ++n;
            }
        }
    }
    return se / static_cast<double>(n);
}

double naive_repeat_mse_analytic(const SynthSpec& spec, int64_t horizon) {
    constexpr double kPi = 3.141592653589793238462643383280;
    double total = 0.0;
    for (const ChannelSpec& ch : spec.channels) {
        double v = 0.0;
        for (const SineComponent& s : ch.sines) {
            const double x = std::sin(kPi * static_cast<double>(horizon) / s.period);
            v += 2.0 * s.amplitude * s.amplitude * x * x;
        }
        v += ch.trend * static_cast<double>(horizon) * ch.trend * static_cast<double>(horizon);
        v += 2.0 * ch.noise_std * ch.noise_std;
        if (!ch.couplings.empty())
            throw ConfigError("analytic naive baseline does not cover coupled channels");
        total += v;
    }
    return total / static_cast<double>(spec.channels.size());
}

double EvalReport::mean_mse() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.mse;
    return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

double EvalReport::mean_mae() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.mae;
    return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

namespace {

json report_payload(const EvalReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"lookback", c.lookback},
                         {"horizon", c.horizon},
                         {"seed", c.seed},
                         {"mse", c.mse},
                         {"mae", c.mae},
                         {"n_windows", c.n_windows}});
    json payload = {{"protocol", r.protocol},
                    {"config_fingerprint", r.config_fingerprint},
                    {"cells", std::move(cells)},
                    {"mean_mse", r.mean_mse()},
                    {"mean_mae", r.mean_mae()}};
    if (!r.plans_json.empty()) {
        json plans = json::array();
        for (const auto& p : r.plans_json) plans.push_back(json::parse(p));
        payload["plans"] = std::move(plans);
    }
    return payload;
}

} // namespace

std::string EvalReport::payload_json() const { return report_payload(*this).dump(2); }

std::string EvalReport::document_json() const {
    json doc;
    doc["report"] = report_payload(*this);
    doc["meta"] = {{"runtime_seconds", runtime_seconds}};
    return doc.dump(2);
}

EvalReport evaluate_forecast(const MultivariateSeries& series, const DatasetBundle& bundle, const ModelParams& params,
                             const ModelConfig& cfg, uint64_t seed_tag) {
    const auto t0 = std::chrono::steady_clock::now();
    const ValMetrics m = evaluate_split(series, bundle, Split::Test, params, cfg);
    const auto origins = window_origins(bundle, Split::Test, cfg.total_steps(), 1);

    EvalReport report;
    report.protocol = "forecast";
    report.config_fingerprint = model_config_to_json(cfg);
    EvalCell cell;
    cell.lookback = cfg.lookback;
    cell.horizon = cfg.horizon;
    cell.seed = seed_tag;
    cell.mse = m.mse;
    cell.mae = m.mae;
    cell.n_windows = static_cast<int64_t>(origins.size());
    report.cells.push_back(cell);
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

ValMetrics imputation_metrics(const std::vector<double>& pred, const Window& window, const IndexPlan& plan) {
    const auto target = window_targets(window, plan);
    if (pred.size() != target.size())
        throw DimError("imputation metrics: prediction holds " + std::to_string(pred.size()) +
                       " values, masked positions " + std::to_string(target.size()));
    return {metric_mse(pred, target), metric_mae(pred, target)};
}

EvalReport evaluate_imputation(const MultivariateSeries& series, const DatasetBundle& bundle,
                               const ModelParams& params, const ModelConfig& cfg, int64_t mask_patch_len,
                               double mask_ratio, uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    if (mask_patch_len <= 0 || mask_patch_len % cfg.patch_len != 0)
        throw ConfigError("mask patch length " + std::to_string(mask_patch_len) +
                          " must be a positive multiple of the model patch length " + std::to_string(cfg.patch_len));
    if (mask_ratio < 0.0 || mask_ratio > 1.0) throw ConfigError("mask ratio must lie in [0, 1]");

    const PatchGrid grid = cfg.grid();
    const int64_t block = mask_patch_len / cfg.patch_len;   // model patches per mask block
    const int64_t n_blocks = grid.n_patches / block;
    // Interior blocks only, so the task stays imputation rather than
    // extrapolation at the window edges.
    const int64_t interior = n_blocks - 2;
    if (interior < 1)
        throw ConfigError("window of " + std::to_string(grid.n_patches) + " patches leaves no interior mask blocks");
    const int64_t k_blocks = static_cast<int64_t>(std::llround(mask_ratio * static_cast<double>(interior)));
    if (k_blocks < 1) throw ConfigError("mask ratio " + std::to_string(mask_ratio) + " yields an empty target set");
    if (k_blocks >= n_blocks)
        throw ConfigError("mask ratio " + std::to_string(mask_ratio) + " leaves no input patches");

    Rng rng = make_rng(seed, "impute_mask");
    const auto origins = window_origins(bundle, Split::Test, cfg.total_steps(), cfg.total_steps());

    EvalReport report;
    report.protocol = "imputation";
    report.config_fingerprint = model_config_to_json(cfg);

    double se_total = 0.0, ae_total = 0.0;
    int64_t n_total = 0;
    for (int64_t origin : origins) {
        // Uniform k-subset of the interior blocks.
        std::vector<int64_t> pool;
        for (int64_t b = 1; b <= interior; ++b) pool.push_back(b);
        for (int64_t i = 0; i < k_blocks; ++i) {
            const auto j = i + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(pool.size() - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        }
        std::vector<int64_t> targets;
        for (int64_t i = 0; i < k_blocks; ++i)
            for (int64_t p = pool[static_cast<size_t>(i)] * block; p < (pool[static_cast<size_t>(i)] + 1) * block; ++p)
                targets.push_back(p);
        const IndexPlan plan = IndexPlan::from_targets(grid, std::move(targets), SampleStrategy::Disjoint);
        report.plans_json.push_back(plan.to_json());

        const Window w = extract_window(series, origin, cfg.total_steps());
        const Tensor pred = forward(w, plan, params, cfg);
        const auto target = window_targets(w, plan);
        const auto& pv = pred.values();
        for (size_t i = 0; i < pv.size(); ++i) {
            const double d = pv[i] - target[i];
            se_total += d * d;
            ae_total += std::abs(d);
        }
        n_total += static_cast<int64_t>(pv.size());
    }

    EvalCell cell;
    cell.lookback = cfg.lookback;
    cell.horizon = cfg.horizon;
    cell.seed = seed;
    cell.mse = se_total / static_cast<double>(n_total);
    cell.mae = ae_total / static_cast<double>(n_total);
    cell.n_windows = static_cast<int64_t>(origins.size());
    report.cells.push_back(cell);
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---- attention export ------------------------------------------------------------------

namespace {

void write_matrix_csv(const std::string& path, const Tensor& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const int64_t rows = m.rows(), cols = m.cols();
    const auto& v = m.values();
    char buf[40];
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", v[static_cast<size_t>(i * cols + j)]);
            out << buf;
            if (j + 1 < cols) out << ",";
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing: " + path);
}

} // namespace

AttnExportPaths export_attention(const ModelParams& params, const ModelConfig& cfg, const Window& window,
                                 const IndexPlan& plan, const std::vector<std::string>& channel_names,
                                 const std::string& out_dir, const std::string& prefix) {
    std::filesystem::create_directories(out_dir);
    ForwardTrace trace;
    (void)forward(window, plan, params, cfg, &trace);

    AttnExportPaths paths;
    paths.encoder_csv = out_dir + "/" + prefix + "_encoder.csv";
    paths.decoder_csv = out_dir + "/" + prefix + "_decoder.csv";
    paths.meta_json = out_dir + "/" + prefix + "_meta.json";
    write_matrix_csv(paths.encoder_csv, trace.encoder_map);
    write_matrix_csv(paths.decoder_csv, trace.decoder_map);

    auto axis_entries = [&](const std::vector<int64_t>& patches) {
        json arr = json::array();
        for (int64_t c = 0; c < cfg.n_channels; ++c) {
            const std::string name = (c < static_cast<int64_t>(channel_names.size()))
                                         ? channel_names[static_cast<size_t>(c)]
                                         : "ch" + std::to_string(c);
            for (int64_t p : patches)
                arr.push_back({{"channel", name},
                               {"patch_index", p},
                               {"time_start", window.origin + plan.grid.patch_start(p)},
                               {"time_end", window.origin + plan.grid.patch_start(p) + plan.grid.patch_len - 1}});
        }
        return arr;
    };

    json meta;
    meta["plan"] = json::parse(plan.to_json());
    meta["window_origin"] = window.origin;
    meta["n_latents"] = cfg.n_latents;
    meta["encoder_map_shape"] = {trace.encoder_map.rows(), trace.encoder_map.cols()};
    meta["decoder_map_shape"] = {trace.decoder_map.rows(), trace.decoder_map.cols()};
    meta["input_axis"] = axis_entries(plan.input_patches);
    meta["query_axis"] = axis_entries(plan.target_patches);

    std::ofstream out(paths.meta_json);
    if (!out) throw IoError("cannot open for writing: " + paths.meta_json);
    out << meta.dump(2);
    if (!out) throw IoError("failed while writing: " + paths.meta_json);
    return paths;
}

// ---- cost profiling ------------------------------------------------------------------------

namespace {

double loglog_slope(const std::vector<int64_t>& x, const std::vector<int64_t>& y) {
    const size_t n = x.size();
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(n), ly(n);
    for (size_t i = 0; i < n; ++i) {
        lx[i] = std::log(static_cast<double>(x[i]));
        ly[i] = std::log(static_cast<double>(y[i]));
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        cov += (lx[i] - mx) * (ly[i] - my);
        var += (lx[i] - mx) * (lx[i] - mx);
    }
    return cov / var;
}

} // namespace

std::string CostProfile::to_json() const {
    json doc;
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"variant", r.variant},
                       {"token_count", r.token_count},
                       {"score_elements", r.score_elements},
                       {"param_count", r.param_count},
                       {"forward_seconds", r.forward_seconds},
                       {"peak_bytes", r.peak_bytes}});
    doc["rows"] = std::move(arr);
    doc["fitted_exponent"] = fitted_exponent;
    return doc.dump(2);
}

CostProfile profile_variants(const ModelConfig& base, const std::vector<EncoderVariant>& variants,
                             const std::vector<int64_t>& token_counts) {
    if (token_counts.size() < 3)
        throw ConfigError("profiling grid needs at least 3 token counts, got " + std::to_string(token_counts.size()));

    CostProfile profile;
    for (EncoderVariant variant : variants) {
        std::vector<int64_t> xs, ys;
        for (int64_t tokens : token_counts) {
            if (tokens % base.n_channels != 0 || tokens / base.n_channels < 1)
                throw ConfigError("token count " + std::to_string(tokens) + " is not a multiple of " +
                                  std::to_string(base.n_channels) + " channels");
            ModelConfig cfg = base;
            cfg.encoder_variant = variant;
            cfg.lookback = (tokens / base.n_channels) * cfg.patch_len;
            cfg.validate();

            ModelParams params = ModelParams::init(cfg, cfg.seed);

            // Synthetic window, values irrelevant to the counters.
            Window w;
            w.n_channels = cfg.n_channels;
            w.width = cfg.total_steps();
            w.values.resize(static_cast<size_t>(w.n_channels * w.width));
            Rng rng = make_rng(cfg.seed, "profile");
            for (double& v : w.values) v = normal(rng);
            Rng plan_rng(0);
            const IndexPlan plan = sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Standard, plan_rng);

            // Count encoder-side score elements by subtracting the decoder's
            // contribution, which is the only attention outside the encoder.
            reset_peak_bytes();
            nn::reset_score_elements();
            const auto t0 = std::chrono::steady_clock::now();
            ForwardTrace trace;
            (void)forward(w, plan, params, cfg, &trace);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const int64_t total = nn::score_elements();
            const int64_t decoder_part = trace.decoder_map.rows() * trace.decoder_map.cols();
            const int64_t encoder_elements = total - decoder_part;

            int64_t param_count = 0;
            for (const auto& ref : params.named()) param_count += ref.tensor.numel();

            CostProfileRow row;
            row.variant = encoder_variant_name(variant);
            row.token_count = tokens;
            row.score_elements = encoder_elements;
            row.param_count = param_count;
            row.forward_seconds = secs;
            row.peak_bytes = alloc_stats().peak_bytes;
            profile.rows.push_back(row);
            xs.push_back(tokens);
            ys.push_back(encoder_elements);
        }
        profile.fitted_exponent[encoder_variant_name(variant)] = loglog_slope(xs, ys);
    }
    return profile;
}

// ---- ablation harness -----------------------------------------------------------------------

std::string AblationReport::to_json() const {
    json doc;
    json arr = json::array();
    for (const auto& r : rows) {
        json row = {{"name", r.name}, {"seed", r.seed}, {"forecast_mse", r.forecast_mse},
                    {"forecast_mae", r.forecast_mae}};
        if (r.imputation_mse) row["imputation_mse"] = *r.imputation_mse;
        if (r.imputation_mae) row["imputation_mae"] = *r.imputation_mae;
        arr.push_back(std::move(row));
    }
    doc["rows"] = std::move(arr);
    doc["mean_forecast_mse"] = mean_forecast_mse;
    if (!mean_imputation_mse.empty()) doc["mean_imputation_mse"] = mean_imputation_mse;
    doc["forecast_winner"] = forecast_winner;
    if (!imputation_winner.empty()) doc["imputation_winner"] = imputation_winner;
    if (!failures.empty()) doc["failures"] = failures;
    return doc.dump(2);
}

AblationReport run_ablation(const std::vector<AblationEntry>& suite, const MultivariateSeries& series,
                            const DatasetBundle& bundle, const AblationOptions& opts) {
    AblationReport report;
    std::map<std::string, std::vector<double>> fc_mse, imp_mse;

    for (const auto& entry : suite) {
        for (uint64_t seed : opts.seeds) {
            try {
                ModelConfig mc = entry.model;
                TrainConfig tc = entry.train;
                tc.seed = seed;
                mc.seed = seed;
                const TrainResult trained = train(mc, tc, series, bundle);
                const ValMetrics fc = evaluate_split(series, bundle, Split::Test, trained.best, mc);

                AblationRow row;
                row.name = entry.name;
                row.seed = seed;
                row.forecast_mse = fc.mse;
                row.forecast_mae = fc.mae;
                if (opts.run_imputation) {
                    const EvalReport imp = evaluate_imputation(series, bundle, trained.best, mc, opts.mask_patch_len,
                                                               opts.mask_ratio, seed);
                    row.imputation_mse = imp.cells[0].mse;
                    row.imputation_mae = imp.cells[0].mae;
                    imp_mse[entry.name].push_back(imp.cells[0].mse);
                }
                fc_mse[entry.name].push_back(fc.mse);
                report.rows.push_back(std::move(row));
            } catch (const Error& e) {
                report.failures.push_back(entry.name + " (seed " + std::to_string(seed) + "): " + e.what());
            }
        }
    }

    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    double best_fc = 0.0;
    for (const auto& [name, values] : fc_mse) {
        const double m = mean_of(values);
        report.mean_forecast_mse[name] = m;
        if (report.forecast_winner.empty() || m < best_fc) {
            best_fc = m;
            report.forecast_winner = name;
        }
    }
    double best_imp = 0.0;
    for (const auto& [name, values] : imp_mse) {
        const double m = mean_of(values);
        report.mean_imputation_mse[name] = m;
        if (report.imputation_winner.empty() || m < best_imp) {
            best_imp = m;
            report.imputation_winner = name;
        }
    }
    return report;
}

} // namespace lcast
