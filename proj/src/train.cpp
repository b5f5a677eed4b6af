#include "lcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcast {

std::string lr_schedule_name(LrSchedule s) {
    return s == LrSchedule::ConstantAfterWarmup ? "constant_after_warmup" : "cosine";
}

LrSchedule lr_schedule_from_name(const std::string& name) {
    if (name == "constant_after_warmup") return LrSchedule::ConstantAfterWarmup;
    if (name == "cosine") return LrSchedule::Cosine;
    throw ConfigError("unknown lr schedule '" + name + "'");
}

void TrainConfig::validate() const {
    if (lr_base <= 0) throw ConfigError("lr_base must be positive");
    if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (epochs > 0 && warmup_epochs > epochs)
        throw ConfigError("warmup_epochs " + std::to_string(warmup_epochs) + " exceeds epochs " +
                          std::to_string(epochs));
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1) throw ConfigError("betas must lie in (0, 1)");
    if (adam_eps <= 0) throw ConfigError("adam_eps must be positive");
    if (grad_clip && *grad_clip <= 0) throw ConfigError("grad_clip must be positive when set");
}

AdamW::AdamW(const nn::ParamRegistry& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& ref : params_) {
        m_.emplace_back(ref.tensor.numel(), 0.0);
        v_.emplace_back(ref.tensor.numel(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));

    double grad_scale = 1.0;
    if (cfg_.grad_clip) {
        double sq = 0.0;
        for (const auto& ref : params_)
            for (double g : ref.tensor.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > *cfg_.grad_clip) grad_scale = *cfg_.grad_clip / norm;
    }

    for (size_t i = 0; i < params_.size(); ++i) {
        auto& ref = params_[i];
        const auto& grad = ref.tensor.grad();
        Tensor t = ref.tensor;
        auto& theta = t.values_mut();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < theta.size(); ++j) {
            const double g = grad[j] * grad_scale;
            if (std::isnan(g))
                throw NumericError("NaN gradient in parameter '" + ref.name + "' at element " + std::to_string(j));
            if (cfg_.weight_decay > 0 && ref.decay) theta[j] -= lr * cfg_.weight_decay * theta[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.adam_eps);
        }
    }
}

double lr_at(int64_t global_step, int64_t steps_per_epoch, int64_t total_epochs, const TrainConfig& cfg) {
    const int64_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
    const int64_t total_steps = total_epochs * steps_per_epoch;
    if (warmup_steps > 0 && global_step < warmup_steps)
        return cfg.lr_base * static_cast<double>(global_step + 1) / static_cast<double>(warmup_steps);
    if (cfg.lr_schedule == LrSchedule::ConstantAfterWarmup) return cfg.lr_base;
    const int64_t decay_steps = total_steps - warmup_steps;
    if (decay_steps <= 0) return cfg.lr_base;
    const double u = static_cast<double>(global_step - warmup_steps + 1) / static_cast<double>(decay_steps);
    return cfg.lr_base * 0.5 * (1.0 + std::cos(3.141592653589793238462643383280 * std::min(u, 1.0)));
}

Tensor loss_generalized(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw DimError("loss: prediction shape " + shape_str(pred.shape()) + " vs target " +
                       shape_str(target.shape()));
    return mse(pred, target);
}

std::string EpochRecord::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"epoch\":" << epoch << ",\"lr\":" << lr << ",\"train_loss\":" << train_loss << ",\"val_mae\":" << val_mae
       << ",\"val_mse\":" << val_mse << "}";
    return os.str();
}

ValMetrics evaluate_split(const MultivariateSeries& series, const DatasetBundle& bundle, Split split,
                          const ModelParams& params, const ModelConfig& cfg) {
    Rng unused(0);
    const IndexPlan plan = sample_plan(cfg.grid(), cfg.lookback, SampleStrategy::Standard, unused);
    const auto origins = window_origins(bundle, split, cfg.total_steps(), 1);
    double se = 0.0, ae = 0.0;
    int64_t count = 0;
    for (int64_t origin : origins) {
        const Window w = extract_window(series, origin, cfg.total_steps());
        const Tensor pred = forward(w, plan, params, cfg);
        const auto target = window_targets(w, plan);
        const auto& pv = pred.values();
        for (size_t i = 0; i < pv.size(); ++i) {
            const double d = pv[i] - target[i];
            se += d * d;
            ae += std::abs(d);
        }
        count += static_cast<int64_t>(pv.size());
    }
    return {se / static_cast<double>(count), ae / static_cast<double>(count)};
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const MultivariateSeries& series,
                  const DatasetBundle& bundle, ModelParams* initial, int64_t start_step, int64_t start_epoch) {
    model_cfg.validate();
    train_cfg.validate();

    ModelParams params = initial ? initial->clone() : ModelParams::init(model_cfg, train_cfg.seed);
    auto registry = params.named();
    AdamW opt(registry, train_cfg);
    opt.set_step_count(start_step);

    TrainResult result;
    result.global_step = start_step;
    if (train_cfg.epochs == 0) {
        result.best = params.clone();
        result.last = std::move(params);
        return result;
    }

    Rng shuffle_rng = make_rng(train_cfg.seed, "shuffle");
    Rng plan_rng = make_rng(train_cfg.seed, "plan");
    Rng drop_rng = make_rng(train_cfg.seed, "dropout");

    const PatchGrid grid = model_cfg.grid();
    auto origins = window_origins(bundle, Split::Train, model_cfg.total_steps(), 1);
    const int64_t steps_per_epoch =
        (static_cast<int64_t>(origins.size()) + train_cfg.batch_size - 1) / train_cfg.batch_size;

    double last_lr = 0.0;
    for (int64_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        shuffle_in_place(origins, shuffle_rng);
        double epoch_loss = 0.0;
        int64_t n_batches = 0;

        for (size_t pos = 0; pos < origins.size(); pos += static_cast<size_t>(train_cfg.batch_size)) {
            const size_t end = std::min(pos + static_cast<size_t>(train_cfg.batch_size), origins.size());
            Tensor batch_loss;
            for (size_t b = pos; b < end; ++b) {
                const Window w = extract_window(series, origins[b], model_cfg.total_steps());
                const IndexPlan plan = sample_plan(grid, model_cfg.lookback, train_cfg.strategy, plan_rng);
                nn::DropoutCtx drop{model_cfg.dropout, &drop_rng};
                const Tensor pred = forward(w, plan, params, model_cfg, nullptr, drop);
                const Tensor target =
                    Tensor::from_data(pred.shape(), window_targets(w, plan));
                const Tensor loss = loss_generalized(pred, target);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - pos));
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value))
                throw NumericError("non-finite training loss at epoch " + std::to_string(start_epoch + epoch) +
                                   ", step " + std::to_string(result.global_step));

            params.zero_grads();
            backward(batch_loss);
            const double lr = lr_at(result.global_step, steps_per_epoch, train_cfg.epochs, train_cfg);
            opt.step(lr);
            last_lr = lr;
            ++result.global_step;
            epoch_loss += loss_value;
            ++n_batches;
        }

        const ValMetrics val = evaluate_split(series, bundle, Split::Val, params, model_cfg);
        EpochRecord rec;
        rec.epoch = start_epoch + epoch;
        rec.train_loss = epoch_loss / static_cast<double>(n_batches);
        rec.val_mse = val.mse;
        rec.val_mae = val.mae;
        rec.lr = last_lr;
        result.history.push_back(rec);

        if (result.best_epoch < 0 || val.mse < result.best_val_mse) {
            result.best_val_mse = val.mse;
            result.best_epoch = rec.epoch;
            result.best = params.clone();
        }
    }
    result.last = std::move(params);
    return result;
}

} // namespace lcast
