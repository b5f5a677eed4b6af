#ifndef LCAST_TRAIN_HPP
#define LCAST_TRAIN_HPP

#include <optional>
#include <string>
#include <vector>

#include "lcast/data.hpp"
#include "lcast/model.hpp"
#include "lcast/nn.hpp"

namespace lcast {

enum class LrSchedule { ConstantAfterWarmup, Cosine };

std::string lr_schedule_name(LrSchedule s);
LrSchedule lr_schedule_from_name(const std::string& name);

struct TrainConfig {
    double lr_base = 5e-4;
    double weight_decay = 0.05;
    int64_t warmup_epochs = 5;
    int64_t epochs = 30;
    int64_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::optional<double> grad_clip;
    uint64_t seed = 0;
    SampleStrategy strategy = SampleStrategy::Mixed;
    LrSchedule lr_schedule = LrSchedule::ConstantAfterWarmup;

    void validate() const;
};

// Decoupled-weight-decay Adam. Decay multiplies the parameter directly by
// (1 - lr * wd) before the adaptive step and is skipped for registry entries
// flagged decay == false (norm gains/biases, bias vectors).
class AdamW {
public:
    AdamW(const nn::ParamRegistry& params, const TrainConfig& cfg);

    // Applies one update from the gradients currently held by the parameters.
    void step(double lr);
    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t n) { step_count_ = n; }

private:
    nn::ParamRegistry params_;
    TrainConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int64_t step_count_ = 0;
};

// Per-step learning rate: linear ramp 0 -> lr_base across the warmup epochs,
// then constant, or cosine to zero at the final step.
double lr_at(int64_t global_step, int64_t steps_per_epoch, int64_t total_epochs, const TrainConfig& cfg);

// Training objective: mean squared error over all target entries.
Tensor loss_generalized(const Tensor& pred, const Tensor& target);

struct EpochRecord {
    int64_t epoch = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
    double lr = 0.0;
    std::string to_json() const;
};

struct TrainResult {
    ModelParams best;
    ModelParams last;
    std::vector<EpochRecord> history;
    double best_val_mse = 0.0;
    int64_t best_epoch = -1;
    int64_t global_step = 0;
};

struct ValMetrics {
    double mse = 0.0;
    double mae = 0.0;
};

// Standard-plan forecasting metrics over stride-1 windows of a split.
ValMetrics evaluate_split(const MultivariateSeries& series, const DatasetBundle& bundle, Split split,
                          const ModelParams& params, const ModelConfig& cfg);

// Epoch loop: seeded shuffle of training windows, one fresh index plan per
// window per epoch, batched objective, AdamW with warmup, per-epoch
// validation under the standard plan, best-checkpoint retention.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const MultivariateSeries& series,
                  const DatasetBundle& bundle, ModelParams* initial = nullptr, int64_t start_step = 0,
                  int64_t start_epoch = 0);

} // namespace lcast

#endif
