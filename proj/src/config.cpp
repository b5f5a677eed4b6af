#include "lcast/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace lcast {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    std::string unknown;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) unknown += (unknown.empty() ? "" : ", ") + it.key();
    if (!unknown.empty()) throw ConfigError("unknown config keys in " + where + ": " + unknown);
}

SynthSpec synth_from_obj(const json& j) {
    reject_unknown_keys(j, {"channels", "length", "seed", "frequency", "start"}, "synth");
    SynthSpec spec;
    spec.length = j.at("length").get<int64_t>();
    spec.seed = j.value("seed", static_cast<uint64_t>(0));
    spec.frequency = j.value("frequency", std::string("1h"));
    spec.start = j.value("start", std::string("2020-01-01T00:00:00"));
    for (const auto& cj : j.at("channels")) {
        reject_unknown_keys(cj, {"name", "sines", "trend", "noise_std", "couplings"}, "synth.channels[]");
        ChannelSpec ch;
        ch.name = cj.value("name", std::string());
        ch.trend = cj.value("trend", 0.0);
        ch.noise_std = cj.value("noise_std", 0.0);
        if (cj.contains("sines"))
            for (const auto& sj : cj.at("sines")) {
                reject_unknown_keys(sj, {"amplitude", "period", "phase"}, "synth.channels[].sines[]");
                SineComponent s;
                s.amplitude = sj.value("amplitude", 1.0);
                s.period = sj.at("period").get<double>();
                s.phase = sj.value("phase", 0.0);
                ch.sines.push_back(s);
            }
        if (cj.contains("couplings"))
            for (const auto& pj : cj.at("couplings")) {
                reject_unknown_keys(pj, {"source", "lag", "weight"}, "synth.channels[].couplings[]");
                Coupling cp;
                cp.source = pj.at("source").get<int64_t>();
                cp.lag = pj.at("lag").get<int64_t>();
                cp.weight = pj.value("weight", 1.0);
                ch.couplings.push_back(cp);
            }
        spec.channels.push_back(std::move(ch));
    }
    return spec;
}

json synth_to_obj(const SynthSpec& spec) {
    json channels = json::array();
    for (const auto& ch : spec.channels) {
        json cj;
        if (!ch.name.empty()) cj["name"] = ch.name;
        if (!ch.sines.empty()) {
            json sines = json::array();
            for (const auto& s : ch.sines)
                sines.push_back({{"amplitude", s.amplitude}, {"period", s.period}, {"phase", s.phase}});
            cj["sines"] = std::move(sines);
        }
        if (ch.trend != 0.0) cj["trend"] = ch.trend;
        cj["noise_std"] = ch.noise_std;
        if (!ch.couplings.empty()) {
            json cps = json::array();
            for (const auto& cp : ch.couplings)
                cps.push_back({{"source", cp.source}, {"lag", cp.lag}, {"weight", cp.weight}});
            cj["couplings"] = std::move(cps);
        }
        channels.push_back(std::move(cj));
    }
    return json{{"channels", std::move(channels)},
                {"length", spec.length},
                {"seed", spec.seed},
                {"frequency", spec.frequency},
                {"start", spec.start}};
}

void apply_model(const json& j, ModelConfig& m) {
    reject_unknown_keys(j,
                        {"patch_len", "d_embed", "d_latent", "n_latents", "k_self_layers", "n_heads", "lookback",
                         "horizon", "encoder", "decoder", "pe_sharing", "dropout"},
                        "model");
    if (j.contains("patch_len")) m.patch_len = j.at("patch_len").get<int64_t>();
    if (j.contains("d_embed")) m.d_embed = j.at("d_embed").get<int64_t>();
    if (j.contains("d_latent")) m.d_latent = j.at("d_latent").get<int64_t>();
    if (j.contains("n_latents")) m.n_latents = j.at("n_latents").get<int64_t>();
    if (j.contains("k_self_layers")) m.k_self_layers = j.at("k_self_layers").get<int64_t>();
    if (j.contains("n_heads")) m.n_heads = j.at("n_heads").get<int64_t>();
    if (j.contains("lookback")) m.lookback = j.at("lookback").get<int64_t>();
    if (j.contains("horizon")) m.horizon = j.at("horizon").get<int64_t>();
    if (j.contains("encoder")) m.encoder_variant = encoder_variant_from_name(j.at("encoder").get<std::string>());
    if (j.contains("decoder")) m.decoder_variant = decoder_variant_from_name(j.at("decoder").get<std::string>());
    if (j.contains("pe_sharing")) m.pe_sharing = pe_sharing_from_name(j.at("pe_sharing").get<std::string>());
    if (j.contains("dropout")) m.dropout = j.at("dropout").get<double>();
}

void apply_train(const json& j, TrainConfig& t) {
    reject_unknown_keys(j,
                        {"lr", "weight_decay", "warmup_epochs", "epochs", "batch_size", "beta1", "beta2", "adam_eps",
                         "grad_clip", "strategy", "separate_ratio", "schedule"},
                        "train");
    if (j.contains("lr")) t.lr_base = j.at("lr").get<double>();
    if (j.contains("weight_decay")) t.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("warmup_epochs")) t.warmup_epochs = j.at("warmup_epochs").get<int64_t>();
    if (j.contains("epochs")) t.epochs = j.at("epochs").get<int64_t>();
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int64_t>();
    if (j.contains("beta1")) t.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) t.beta2 = j.at("beta2").get<double>();
    if (j.contains("adam_eps")) t.adam_eps = j.at("adam_eps").get<double>();
    if (j.contains("grad_clip")) {
        if (j.at("grad_clip").is_null())
            t.grad_clip = std::nullopt;
        else
            t.grad_clip = j.at("grad_clip").get<double>();
    }
    if (j.contains("strategy") && j.contains("separate_ratio"))
        throw ConfigError("train.strategy and train.separate_ratio are mutually exclusive");
    if (j.contains("strategy")) t.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    if (j.contains("separate_ratio"))
        t.strategy = strategy_from_separate_ratio(j.at("separate_ratio").get<double>());
    if (j.contains("schedule")) t.lr_schedule = lr_schedule_from_name(j.at("schedule").get<std::string>());
}

RunConfig from_json_doc(const json& doc) {
    reject_unknown_keys(
        doc, {"data", "model", "train", "seed", "impute", "profile", "ablate"}, "config root");
    RunConfig cfg;
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<uint64_t>();
    if (doc.contains("data")) {
        const json& d = doc.at("data");
        reject_unknown_keys(d, {"csv", "synth", "split", "standardize"}, "data");
        if (d.contains("csv")) cfg.csv_path = d.at("csv").get<std::string>();
        if (d.contains("synth")) cfg.synth = synth_from_obj(d.at("synth"));
        if (d.contains("split")) {
            const auto v = d.at("split").get<std::vector<double>>();
            if (v.size() != 3) throw ConfigError("data.split must hold exactly 3 ratios");
            cfg.split_ratio = {v[0], v[1], v[2]};
        }
        if (d.contains("standardize")) cfg.standardize = d.at("standardize").get<bool>();
    }
    if (doc.contains("model")) apply_model(doc.at("model"), cfg.model);
    if (doc.contains("train")) apply_train(doc.at("train"), cfg.train);
    if (doc.contains("impute")) {
        const json& ij = doc.at("impute");
        reject_unknown_keys(ij, {"mask_patch_len", "mask_ratio"}, "impute");
        if (ij.contains("mask_patch_len")) cfg.mask_patch_len = ij.at("mask_patch_len").get<int64_t>();
        if (ij.contains("mask_ratio")) cfg.mask_ratio = ij.at("mask_ratio").get<double>();
    }
    if (doc.contains("profile")) {
        const json& pj = doc.at("profile");
        reject_unknown_keys(pj, {"token_counts", "encoders"}, "profile");
        if (pj.contains("token_counts")) cfg.profile_token_counts = pj.at("token_counts").get<std::vector<int64_t>>();
        if (pj.contains("encoders")) cfg.profile_encoders = pj.at("encoders").get<std::vector<std::string>>();
    }
    if (doc.contains("ablate")) {
        const json& aj = doc.at("ablate");
        reject_unknown_keys(aj, {"suite", "seeds", "imputation"}, "ablate");
        if (aj.contains("seeds")) cfg.ablate_seeds = aj.at("seeds").get<std::vector<uint64_t>>();
        if (aj.contains("imputation")) cfg.ablate_imputation = aj.at("imputation").get<bool>();
        if (aj.contains("suite"))
            for (const auto& ej : aj.at("suite")) {
                reject_unknown_keys(ej, {"name", "set"}, "ablate.suite[]");
                RunConfig::SuiteEntry entry;
                entry.name = ej.at("name").get<std::string>();
                entry.overrides_json = ej.value("set", json::object()).dump();
                cfg.suite.push_back(std::move(entry));
            }
    }
    return cfg;
}

json parse_set_value(const std::string& text) {
    // JSON scalar if it parses as one; bare string otherwise.
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

void apply_dotted_set(json& doc, const std::string& spec) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + spec + "'");
    const std::string key = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    json* cursor = &doc;
    size_t begin = 0;
    while (true) {
        const size_t dot = key.find('.', begin);
        const std::string part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
        if (part.empty()) throw ConfigError("--set key has an empty path segment: '" + key + "'");
        if (dot == std::string::npos) {
            (*cursor)[part] = parse_set_value(value);
            break;
        }
        cursor = &(*cursor)[part];
        begin = dot + 1;
    }
}

} // namespace

void RunConfig::validate() const {
    if (!csv_path.empty() && synth) throw ConfigError("data.csv and data.synth are mutually exclusive");
    if (csv_path.empty() && !synth) throw ConfigError("a dataset is required: set data.csv or data.synth");
    const double sum = split_ratio[0] + split_ratio[1] + split_ratio[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("data.split must sum to 1");
    model.validate();
    train.validate();
    if (mask_patch_len <= 0 || mask_patch_len % model.patch_len != 0)
        throw ConfigError("impute.mask_patch_len must be a positive multiple of model.patch_len");
    if (mask_ratio < 0.0 || mask_ratio > 1.0) throw ConfigError("impute.mask_ratio must lie in [0, 1]");
    for (const auto& name : profile_encoders) (void)encoder_variant_from_name(name);
}

std::string RunConfig::resolved_json() const {
    json doc;
    json data;
    if (!csv_path.empty()) data["csv"] = csv_path;
    if (synth) data["synth"] = synth_to_obj(*synth);
    data["split"] = split_ratio;
    data["standardize"] = standardize;
    doc["data"] = std::move(data);
    doc["model"] = json::parse(model_config_to_json(model));
    doc["model"].erase("seed"); // the run seed governs
    doc["model"].erase("n_channels"); // derived from the dataset
    json train_obj = {{"lr", train.lr_base},
                      {"weight_decay", train.weight_decay},
                      {"warmup_epochs", train.warmup_epochs},
                      {"epochs", train.epochs},
                      {"batch_size", train.batch_size},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"adam_eps", train.adam_eps},
                      {"strategy", strategy_name(train.strategy)},
                      {"schedule", lr_schedule_name(train.lr_schedule)}};
    train_obj["grad_clip"] = train.grad_clip ? json(*train.grad_clip) : json(nullptr);
    doc["train"] = std::move(train_obj);
    doc["impute"] = {{"mask_patch_len", mask_patch_len}, {"mask_ratio", mask_ratio}};
    doc["profile"] = {{"token_counts", profile_token_counts}, {"encoders", profile_encoders}};
    doc["seed"] = seed;
    return doc.dump(2);
}

RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& sets) {
    json doc;
    try {
        doc = json_text.empty() ? json::object() : json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config JSON: ") + e.what());
    }
    for (const auto& s : sets) apply_dotted_set(doc, s);
    try {
        RunConfig cfg = from_json_doc(doc);
        cfg.train.seed = cfg.seed;
        cfg.model.seed = cfg.seed;
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text, sets);
}

LoadedData load_data(const RunConfig& cfg) {
    LoadedData out;
    if (cfg.synth)
        out.series = synth_generate(*cfg.synth);
    else
        out.series = load_csv(cfg.csv_path);
    out.bundle = chronological_split(out.series, cfg.split_ratio);
    if (cfg.standardize) {
        const ChannelStats stats = train_split_stats(out.series, out.bundle);
        out.series = standardize(out.series, stats);
    }
    return out;
}

SynthSpec synth_spec_from_json(const std::string& json_text) {
    try {
        return synth_from_obj(json::parse(json_text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed synth spec: ") + e.what());
    }
}

std::string synth_spec_to_json(const SynthSpec& spec) { return synth_to_obj(spec).dump(2); }

void write_series_csv(const std::string& path, const MultivariateSeries& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "date";
    for (const auto& name : series.channel_names) out << "," << name;
    out << "\n";
    char buf[40];
    for (int64_t t = 0; t < series.length; ++t) {
        out << (t < static_cast<int64_t>(series.timestamps.size()) ? series.timestamps[static_cast<size_t>(t)]
                                                                   : std::to_string(t));
        for (int64_t c = 0; c < series.n_channels; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", series.at(c, t));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing: " + path);
}

} // namespace lcast
