#ifndef LCAST_CONFIG_HPP
#define LCAST_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "lcast/data.hpp"
#include "lcast/eval.hpp"
#include "lcast/model.hpp"
#include "lcast/train.hpp"

namespace lcast {

// Everything a run needs, merged from a JSON config file plus repeated
// --set key=value overrides (dotted keys, e.g. model.d_embed=64). Unknown
// keys anywhere are hard errors. Validation happens in one pass before any
// compute.
struct RunConfig {
    // data
    std::string csv_path;                       // exclusive with synth
    std::optional<SynthSpec> synth;
    std::array<double, 3> split_ratio{0.7, 0.1, 0.2};
    bool standardize = false;

    ModelConfig model;
    TrainConfig train;

    // protocol knobs
    int64_t mask_patch_len = 24;
    double mask_ratio = 0.25;
    std::vector<int64_t> profile_token_counts{56, 112, 224, 448};
    std::vector<std::string> profile_encoders{"latent_bottleneck", "full_self_attn", "decoupled_self_attn"};

    // ablation suite: (name, dotted-key overrides as JSON object text)
    struct SuiteEntry {
        std::string name;
        std::string overrides_json;
    };
    std::vector<SuiteEntry> suite;
    std::vector<uint64_t> ablate_seeds{0, 1, 2, 3, 4};
    bool ablate_imputation = false;

    uint64_t seed = 0;

    void validate() const;
    std::string resolved_json() const;
};

// Parses a JSON document (text) into a RunConfig; `sets` holds dotted
// key=value override pairs applied on top.
RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& sets);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets);

// Materializes the configured dataset (CSV or synthetic) plus its split.
struct LoadedData {
    MultivariateSeries series;
    DatasetBundle bundle;
};
LoadedData load_data(const RunConfig& cfg);

// Synth spec JSON <-> struct (also used by the synth subcommand).
SynthSpec synth_spec_from_json(const std::string& json_text);
std::string synth_spec_to_json(const SynthSpec& spec);

// Writes a loader-compatible CSV (date column + header) for a series.
void write_series_csv(const std::string& path, const MultivariateSeries& series);

} // namespace lcast

#endif
