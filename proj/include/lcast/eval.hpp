#ifndef LCAST_EVAL_HPP
#define LCAST_EVAL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcast/data.hpp"
#include "lcast/model.hpp"
#include "lcast/train.hpp"

namespace lcast {

double metric_mse(const std::vector<double>& pred, const std::vector<double>& target);
double metric_mae(const std::vector<double>& pred, const std::vector<double>& target);

// Repeats the trailing horizon-length block of the lookback as the forecast
// (for horizon 1 this is the plain last value). The reference every learned
// model has to beat.
double naive_repeat_mse(const MultivariateSeries& series, const DatasetBundle& bundle, Split split, int64_t lookback,
                        int64_t horizon);

// Closed-form expectation of the naive block-repeat error for a synthetic
// spec with one-sine-plus-noise channels:
//   mean_c [ sum_i 2 A_i^2 sin^2(pi * H / p_i) + (trend * H)^2 + 2 sigma_c^2 ]
double naive_repeat_mse_analytic(const SynthSpec& spec, int64_t horizon);

struct EvalCell {
    int64_t lookback = 0;
    int64_t horizon = 0;
    uint64_t seed = 0;
    double mse = 0.0;
    double mae = 0.0;
    int64_t n_windows = 0;
};

struct EvalReport {
    std::string protocol; // "forecast" or "imputation"
    std::vector<EvalCell> cells;
    std::string config_fingerprint;
    double runtime_seconds = 0.0; // meta only, excluded from the payload
    std::vector<std::string> plans_json; // imputation: per-window plans

    double mean_mse() const;
    double mean_mae() const;
    // Deterministic payload (no wall-clock content).
    std::string payload_json() const;
    // Full document: payload + meta section.
    std::string document_json() const;
};

// Standard-plan forecasting over stride-1 test windows.
EvalReport evaluate_forecast(const MultivariateSeries& series, const DatasetBundle& bundle, const ModelParams& params,
                             const ModelConfig& cfg, uint64_t seed_tag = 0);

// Patch-wise masked imputation: within each test window (tiled, stride =
// window width) a seeded random set of interior mask blocks becomes the
// target set; metrics cover only masked positions.
EvalReport evaluate_imputation(const MultivariateSeries& series, const DatasetBundle& bundle,
                               const ModelParams& params, const ModelConfig& cfg, int64_t mask_patch_len,
                               double mask_ratio, uint64_t seed);

// Metric extraction used by the imputation path: compares predictions against
// the window's masked positions only.
ValMetrics imputation_metrics(const std::vector<double>& pred, const Window& window, const IndexPlan& plan);

// ---- attention export -------------------------------------------------------------

struct AttnExportPaths {
    std::string encoder_csv;
    std::string decoder_csv;
    std::string meta_json;
};

// Writes the encoder stage-1 map and the decoder map as CSV matrices
// (9 significant digits) plus a JSON sidecar with axis metadata and the plan.
AttnExportPaths export_attention(const ModelParams& params, const ModelConfig& cfg, const Window& window,
                                 const IndexPlan& plan, const std::vector<std::string>& channel_names,
                                 const std::string& out_dir, const std::string& prefix);

// ---- cost profiling ----------------------------------------------------------------

struct CostProfileRow {
    std::string variant;
    int64_t token_count = 0;    // C * |input patches|
    int64_t score_elements = 0; // exact counter over the encoder stages
    int64_t param_count = 0;
    double forward_seconds = 0.0;
    int64_t peak_bytes = 0;
};

struct CostProfile {
    std::vector<CostProfileRow> rows;
    std::map<std::string, double> fitted_exponent; // per variant, log-log slope
    std::string to_json() const;
};

// Counts encoder attention-score elements for each variant at each token
// count and fits the growth exponent by least squares in log-log space.
// Needs at least 3 token counts.
CostProfile profile_variants(const ModelConfig& base, const std::vector<EncoderVariant>& variants,
                             const std::vector<int64_t>& token_counts);

// ---- ablation harness ----------------------------------------------------------------

struct AblationEntry {
    std::string name;
    ModelConfig model;
    TrainConfig train;
};

struct AblationRow {
    std::string name;
    uint64_t seed = 0;
    double forecast_mse = 0.0;
    double forecast_mae = 0.0;
    std::optional<double> imputation_mse;
    std::optional<double> imputation_mae;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    // name -> seed-mean metrics
    std::map<std::string, double> mean_forecast_mse;
    std::map<std::string, double> mean_imputation_mse;
    std::string forecast_winner;
    std::string imputation_winner;
    std::vector<std::string> failures; // isolated per-variant errors
    std::string to_json() const;
};

struct AblationOptions {
    std::vector<uint64_t> seeds{0, 1, 2, 3, 4};
    bool run_imputation = false;
    int64_t mask_patch_len = 24;
    double mask_ratio = 0.25;
};

// Trains each entry under identical data and seeds and reports per-variant
// metrics with directional win flags.
AblationReport run_ablation(const std::vector<AblationEntry>& suite, const MultivariateSeries& series,
                            const DatasetBundle& bundle, const AblationOptions& opts);

} // namespace lcast

#endif
