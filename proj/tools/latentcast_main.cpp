// latentcast: train and probe a latent-bottleneck time-series forecaster.
//
// Subcommands: synth, train, eval, impute, ablate, attn, profile.
// Exit codes: 0 success, 1 validation error, 2 runtime abort.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcast/config.hpp"
#include "lcast/eval.hpp"
#include "lcast/model.hpp"
#include "lcast/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<uint64_t> seed;
    std::string out_dir = "out";
    bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.sets, "override a config key, dotted path (repeatable)");
    cmd->add_option("--seed", args.seed, "root seed override");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_flag("--dry-run", args.dry_run, "validate and print the resolved config, then stop");
}

lcast::RunConfig resolve_config(const CommonArgs& args) {
    lcast::RunConfig cfg = args.config_path.empty() ? lcast::parse_run_config("", args.sets)
                                                    : lcast::load_run_config(args.config_path, args.sets);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.train.seed = *args.seed;
        cfg.model.seed = *args.seed;
    }
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw lcast::IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw lcast::IoError("failed while writing: " + path);
}

// Resolved dataset with the channel count folded into the model config.
lcast::LoadedData prepare_data(lcast::RunConfig& cfg) {
    lcast::LoadedData data = lcast::load_data(cfg);
    cfg.model.n_channels = data.series.n_channels;
    cfg.model.validate();
    return data;
}

int cmd_synth(const std::string& spec_path, const std::string& out_csv) {
    std::ifstream in(spec_path);
    if (!in) throw lcast::ConfigError("cannot open synth spec: " + spec_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const lcast::SynthSpec spec = lcast::synth_spec_from_json(text);
    const lcast::MultivariateSeries series = lcast::synth_generate(spec);

    fs::create_directories(fs::path(out_csv).parent_path().empty() ? "." : fs::path(out_csv).parent_path().string());
    lcast::write_series_csv(out_csv, series);

    json manifest;
    manifest["spec"] = json::parse(lcast::synth_spec_to_json(spec));
    manifest["generator"] =
        "x_c(t) = sum_i A_i*sin(2*pi*t/p_i + phi_i) + trend*t "
        "+ sum_j w_j*det_src_j(t - lag_j) + noise_std*eps(c,t), eps ~ N(0,1) from seed stream 'synth'";
    manifest["rows"] = series.length;
    manifest["channels"] = series.n_channels;
    const std::string manifest_path = out_csv + ".manifest.json";
    write_text(manifest_path, manifest.dump(2));
    std::cout << "wrote " << out_csv << "\n";
    std::cout << "wrote " << manifest_path << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& resume_path) {
    lcast::RunConfig cfg = resolve_config(args);
    cfg.validate();
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    lcast::LoadedData data = prepare_data(cfg);
    fs::create_directories(args.out_dir);

    lcast::ModelParams initial;
    lcast::ModelParams* initial_ptr = nullptr;
    int64_t start_step = 0, start_epoch = 0;
    if (!resume_path.empty()) {
        lcast::Checkpoint ckpt = lcast::load_checkpoint(resume_path);
        if (lcast::model_config_to_json(ckpt.config) != lcast::model_config_to_json(cfg.model))
            throw lcast::ConfigError("resume checkpoint config does not match the run config");
        initial = std::move(ckpt.params);
        initial_ptr = &initial;
        start_step = ckpt.meta.global_step;
        start_epoch = ckpt.meta.epoch;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const lcast::TrainResult result =
        lcast::train(cfg.model, cfg.train, data.series, data.bundle, initial_ptr, start_step, start_epoch);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string history;
    for (const auto& rec : result.history) history += rec.to_json() + "\n";
    const std::string history_path = args.out_dir + "/history.jsonl";
    write_text(history_path, history);

    lcast::CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.global_step = result.global_step;
    meta.epoch = start_epoch + cfg.train.epochs;
    meta.val_mse = result.best_epoch >= 0 ? result.best_val_mse : 0.0;
    const std::string best_path = args.out_dir + "/checkpoint_best.json";
    const std::string last_path = args.out_dir + "/checkpoint_last.json";
    lcast::save_checkpoint(best_path, cfg.model, result.best, meta);
    lcast::save_checkpoint(last_path, cfg.model, result.last, meta);

    json run_meta = {{"wall_seconds", secs},
                     {"epochs", cfg.train.epochs},
                     {"best_epoch", result.best_epoch},
                     {"best_val_mse", result.best_val_mse}};
    write_text(args.out_dir + "/run_meta.json", run_meta.dump(2));

    std::cout << "wrote " << history_path << "\n";
    std::cout << "wrote " << best_path << "\n";
    std::cout << "wrote " << last_path << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& checkpoints) {
    lcast::RunConfig cfg = resolve_config(args);
    if (checkpoints.empty()) throw lcast::ConfigError("eval needs at least one --checkpoint");
    cfg.validate();
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    fs::create_directories(args.out_dir);

    json cells = json::array();
    double runtime = 0.0;
    for (const auto& path : checkpoints) {
        lcast::Checkpoint ckpt = lcast::load_checkpoint(path);
        lcast::RunConfig cell_cfg = cfg;
        cell_cfg.model = ckpt.config;
        lcast::LoadedData data = lcast::load_data(cell_cfg);
        if (data.series.n_channels != ckpt.config.n_channels)
            throw lcast::ConfigError("dataset has " + std::to_string(data.series.n_channels) +
                                     " channels, checkpoint expects " + std::to_string(ckpt.config.n_channels));
        const lcast::EvalReport report =
            lcast::evaluate_forecast(data.series, data.bundle, ckpt.params, ckpt.config, ckpt.meta.seed);
        runtime += report.runtime_seconds;
        cells.push_back(json::parse(report.payload_json()));
    }
    json doc;
    doc["report"] = {{"protocol", "forecast"}, {"checkpoints", std::move(cells)}};
    doc["meta"] = {{"runtime_seconds", runtime}};
    const std::string path = args.out_dir + "/eval_report.json";
    write_text(path, doc.dump(2));
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_impute(const CommonArgs& args, const std::string& checkpoint) {
    lcast::RunConfig cfg = resolve_config(args);
    if (checkpoint.empty()) throw lcast::ConfigError("impute needs --checkpoint");
    cfg.validate();
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    fs::create_directories(args.out_dir);
    lcast::Checkpoint ckpt = lcast::load_checkpoint(checkpoint);
    lcast::RunConfig cell_cfg = cfg;
    cell_cfg.model = ckpt.config;
    lcast::LoadedData data = lcast::load_data(cell_cfg);
    const lcast::EvalReport report = lcast::evaluate_imputation(
        data.series, data.bundle, ckpt.params, ckpt.config, cfg.mask_patch_len, cfg.mask_ratio, cfg.seed);
    const std::string path = args.out_dir + "/imputation_report.json";
    write_text(path, report.document_json());
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_attn(const CommonArgs& args, const std::string& checkpoint, int64_t window_index) {
    lcast::RunConfig cfg = resolve_config(args);
    if (checkpoint.empty()) throw lcast::ConfigError("attn needs --checkpoint");
    cfg.validate();
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    lcast::Checkpoint ckpt = lcast::load_checkpoint(checkpoint);
    lcast::RunConfig cell_cfg = cfg;
    cell_cfg.model = ckpt.config;
    lcast::LoadedData data = lcast::load_data(cell_cfg);

    const auto origins =
        lcast::window_origins(data.bundle, lcast::Split::Test, ckpt.config.total_steps(), 1);
    if (window_index < 0 || window_index >= static_cast<int64_t>(origins.size()))
        throw lcast::ConfigError("window index " + std::to_string(window_index) + " out of range [0, " +
                                 std::to_string(origins.size()) + ")");
    const lcast::Window w =
        lcast::extract_window(data.series, origins[static_cast<size_t>(window_index)], ckpt.config.total_steps());
    lcast::Rng unused(0);
    const lcast::IndexPlan plan =
        lcast::sample_plan(ckpt.config.grid(), ckpt.config.lookback, lcast::SampleStrategy::Standard, unused);

    const auto paths = lcast::export_attention(ckpt.params, ckpt.config, w, plan, data.series.channel_names,
                                               args.out_dir, "window" + std::to_string(window_index));
    std::cout << "wrote " << paths.encoder_csv << "\n";
    std::cout << "wrote " << paths.decoder_csv << "\n";
    std::cout << "wrote " << paths.meta_json << "\n";
    return 0;
}

int cmd_profile(const CommonArgs& args) {
    lcast::RunConfig cfg = resolve_config(args);
    cfg.model.n_channels = cfg.synth ? static_cast<int64_t>(cfg.synth->channels.size()) : cfg.model.n_channels;
    if (cfg.profile_token_counts.size() < 3)
        throw lcast::ConfigError("profile.token_counts grid too small: need at least 3 entries, got " +
                                 std::to_string(cfg.profile_token_counts.size()));
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    fs::create_directories(args.out_dir);
    std::vector<lcast::EncoderVariant> variants;
    for (const auto& name : cfg.profile_encoders) variants.push_back(lcast::encoder_variant_from_name(name));
    const lcast::CostProfile profile = lcast::profile_variants(cfg.model, variants, cfg.profile_token_counts);
    const std::string path = args.out_dir + "/cost_profile.json";
    write_text(path, profile.to_json());
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    lcast::RunConfig cfg = resolve_config(args);
    cfg.validate();
    if (cfg.suite.empty()) throw lcast::ConfigError("ablate needs a non-empty ablate.suite");
    if (args.dry_run) {
        std::cout << cfg.resolved_json() << "\n";
        return 0;
    }
    lcast::LoadedData data = prepare_data(cfg);
    fs::create_directories(args.out_dir);

    std::vector<lcast::AblationEntry> suite;
    for (const auto& e : cfg.suite) {
        // Re-parse the run config with the entry's overrides layered on top.
        std::vector<std::string> sets = args.sets;
        const json overrides = json::parse(e.overrides_json);
        for (auto it = overrides.begin(); it != overrides.end(); ++it)
            sets.push_back(it.key() + "=" + it.value().dump());
        lcast::RunConfig variant_cfg = args.config_path.empty()
                                           ? lcast::parse_run_config("", sets)
                                           : lcast::load_run_config(args.config_path, sets);
        variant_cfg.model.n_channels = data.series.n_channels;
        variant_cfg.model.validate();
        variant_cfg.train.validate();
        suite.push_back({e.name, variant_cfg.model, variant_cfg.train});
    }

    lcast::AblationOptions opts;
    opts.seeds = cfg.ablate_seeds;
    opts.run_imputation = cfg.ablate_imputation;
    opts.mask_patch_len = cfg.mask_patch_len;
    opts.mask_ratio = cfg.mask_ratio;
    const lcast::AblationReport report = lcast::run_ablation(suite, data.series, data.bundle, opts);
    const std::string path = args.out_dir + "/ablation_report.json";
    write_text(path, report.to_json());
    std::cout << "wrote " << path << "\n";
    if (!report.failures.empty()) {
        for (const auto& f : report.failures) std::cerr << "variant failed: " << f << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-bottleneck time-series forecaster"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* synth = app.add_subcommand("synth", "generate a synthetic CSV dataset from a spec");
    std::string synth_spec, synth_out = "synth.csv";
    synth->add_option("--spec", synth_spec, "synth spec JSON file")->required();
    synth->add_option("--out-csv", synth_out, "output CSV path");

    auto* train = app.add_subcommand("train", "train a model and write checkpoints + history");
    std::string resume_path;
    add_common(train, args);
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "forecast metrics for trained checkpoints");
    std::vector<std::string> eval_checkpoints;
    add_common(eval, args);
    eval->add_option("--checkpoint", eval_checkpoints, "checkpoint path (repeatable)");

    auto* impute = app.add_subcommand("impute", "patch-masked imputation metrics for a checkpoint");
    std::string impute_checkpoint;
    add_common(impute, args);
    impute->add_option("--checkpoint", impute_checkpoint, "checkpoint path");

    auto* ablate = app.add_subcommand("ablate", "train and compare a suite of config variants");
    add_common(ablate, args);

    auto* attn = app.add_subcommand("attn", "export encoder/decoder attention maps for one window");
    std::string attn_checkpoint;
    int64_t attn_window = 0;
    add_common(attn, args);
    attn->add_option("--checkpoint", attn_checkpoint, "checkpoint path");
    attn->add_option("--window-index", attn_window, "test-split window index");

    auto* profile = app.add_subcommand("profile", "count attention cost across encoder variants");
    add_common(profile, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
        if (train->parsed()) return cmd_train(args, resume_path);
        if (eval->parsed()) return cmd_eval(args, eval_checkpoints);
        if (impute->parsed()) return cmd_impute(args, impute_checkpoint);
        if (ablate->parsed()) return cmd_ablate(args);
        if (attn->parsed()) return cmd_attn(args, attn_checkpoint, attn_window);
        if (profile->parsed()) return cmd_profile(args);
    } catch (const lcast::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const lcast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const lcast::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
