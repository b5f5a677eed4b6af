#include "lcast/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcast {

PatchGrid make_patch_grid(int64_t total_steps, int64_t patch_len) {
    if (patch_len <= 0) throw ConfigError("patch length must be positive");
    if (total_steps <= 0) throw ConfigError("total steps must be positive");
    if (total_steps % patch_len != 0)
        throw ConfigError("patch length " + std::to_string(patch_len) + " does not divide total steps " +
                          std::to_string(total_steps));
    return {patch_len, total_steps / patch_len, total_steps};
}

std::string strategy_name(SampleStrategy s) {
    switch (s) {
        case SampleStrategy::Standard: return "standard";
        case SampleStrategy::Contiguous: return "contiguous";
        case SampleStrategy::Disjoint: return "disjoint";
        default: return "mixed";
    }
}

SampleStrategy strategy_from_name(const std::string& name) {
    if (name == "standard") return SampleStrategy::Standard;
    if (name == "contiguous") return SampleStrategy::Contiguous;
    if (name == "disjoint") return SampleStrategy::Disjoint;
    if (name == "mixed") return SampleStrategy::Mixed;
    throw ConfigError("unknown sampling strategy '" + name + "'");
}

SampleStrategy strategy_from_separate_ratio(double ratio) {
    if (ratio == 1.0) return SampleStrategy::Contiguous;
    if (ratio == 0.0) return SampleStrategy::Disjoint;
    if (ratio == 0.5) return SampleStrategy::Mixed;
    throw ConfigError("separate ratio must be one of {0, 0.5, 1}, got " + std::to_string(ratio));
}

std::vector<int64_t> IndexPlan::input_time_indices() const {
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(n_input() * grid.patch_len));
    for (int64_t p : input_patches)
        for (int64_t t = grid.patch_start(p); t < grid.patch_start(p) + grid.patch_len; ++t) out.push_back(t);
    return out;
}

std::vector<int64_t> IndexPlan::target_time_indices() const {
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(n_target() * grid.patch_len));
    for (int64_t p : target_patches)
        for (int64_t t = grid.patch_start(p); t < grid.patch_start(p) + grid.patch_len; ++t) out.push_back(t);
    return out;
}

std::string IndexPlan::to_json() const {
    std::ostringstream os;
    auto put = [&os](const std::vector<int64_t>& v) {
        os << "[";
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) os << ",";
            os << v[i];
        }
        os << "]";
    };
    os << "{\"input_patches\":";
    put(input_patches);
    os << ",\"n_patches\":" << grid.n_patches;
    os << ",\"patch_len\":" << grid.patch_len;
    os << ",\"strategy\":\"" << strategy_name(strategy) << "\"";
    os << ",\"target_patches\":";
    put(target_patches);
    os << "}";
    return os.str();
}

IndexPlan IndexPlan::from_targets(const PatchGrid& grid, std::vector<int64_t> targets, SampleStrategy tag) {
    std::sort(targets.begin(), targets.end());
    if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
        throw ContractError("target patch set contains duplicates");
    for (int64_t p : targets)
        if (p < 0 || p >= grid.n_patches)
            throw IndexError("target patch " + std::to_string(p) + " out of range [0, " +
                             std::to_string(grid.n_patches) + ")");
    if (targets.empty()) throw ContractError("target patch set is empty");
    if (static_cast<int64_t>(targets.size()) == grid.n_patches)
        throw ContractError("target set leaves no input patches");

    IndexPlan plan;
    plan.grid = grid;
    plan.strategy = tag;
    plan.target_patches = std::move(targets);
    size_t j = 0;
    for (int64_t p = 0; p < grid.n_patches; ++p) {
        if (j < plan.target_patches.size() && plan.target_patches[j] == p)
            ++j;
        else
            plan.input_patches.push_back(p);
    }
    return plan;
}

IndexPlan sample_plan(const PatchGrid& grid, int64_t lookback, SampleStrategy strategy, Rng& rng) {
    if (lookback <= 0 || lookback % grid.patch_len != 0)
        throw ConfigError("lookback " + std::to_string(lookback) + " must be a positive multiple of patch length " +
                          std::to_string(grid.patch_len));
    const int64_t n_in = lookback / grid.patch_len;
    const int64_t n = grid.n_patches;
    const int64_t m = n - n_in;
    if (m < 1)
        throw ConfigError("plan needs at least one target patch: lookback covers " + std::to_string(n_in) + " of " +
                          std::to_string(n) + " patches");

    std::vector<int64_t> targets;
    switch (strategy) {
        case SampleStrategy::Standard:
            for (int64_t p = n_in; p < n; ++p) targets.push_back(p);
            break;
        case SampleStrategy::Contiguous: {
            const int64_t offset = static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - m + 1)));
            for (int64_t p = offset; p < offset + m; ++p) targets.push_back(p);
            break;
        }
        case SampleStrategy::Disjoint: {
            // Partial Fisher-Yates over the index pool: uniform m-subset.
            std::vector<int64_t> pool(static_cast<size_t>(n));
            for (int64_t p = 0; p < n; ++p) pool[static_cast<size_t>(p)] = p;
            for (int64_t i = 0; i < m; ++i) {
                const auto j = i + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - i)));
                std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
                targets.push_back(pool[static_cast<size_t>(i)]);
            }
            break;
        }
        case SampleStrategy::Mixed: {
            if (m < 2) throw ConfigError("mixed strategy needs at least 2 target patches, got " + std::to_string(m));
            const int64_t a = (m + 1) / 2;
            const int64_t b = m / 2;
            constexpr int kMaxTries = 10000;
            bool placed = false;
            for (int tries = 0; tries < kMaxTries && !placed; ++tries) {
                const auto o1 = static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - a + 1)));
                const auto o2 = static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(n - b + 1)));
                if (o1 + a <= o2 || o2 + b <= o1) {
                    for (int64_t p = o1; p < o1 + a; ++p) targets.push_back(p);
                    for (int64_t p = o2; p < o2 + b; ++p) targets.push_back(p);
                    placed = true;
                }
            }
            if (!placed)
                throw SamplingError("mixed strategy found no non-overlapping placement for runs of " +
                                    std::to_string(a) + " and " + std::to_string(b) + " in " + std::to_string(n) +
                                    " patches");
            break;
        }
    }
    return IndexPlan::from_targets(grid, std::move(targets), strategy);
}

// ---- RevIN ----------------------------------------------------------------------

std::pair<std::vector<double>, RevinState> revin_normalize(const std::vector<double>& x, int64_t n_channels,
                                                           int64_t len, double eps) {
    if (len < 1) throw ContractError("revin_normalize needs at least one time step");
    if (static_cast<int64_t>(x.size()) != n_channels * len)
        throw DimError("revin_normalize: buffer holds " + std::to_string(x.size()) + " values, expected " +
                       std::to_string(n_channels * len));
    RevinState state;
    state.eps = eps;
    std::vector<double> out(x.size());
    for (int64_t c = 0; c < n_channels; ++c) {
        const double* row = x.data() + c * len;
        double mean = 0.0;
        for (int64_t t = 0; t < len; ++t) mean += row[t];
        mean /= static_cast<double>(len);
        double var = 0.0;
        for (int64_t t = 0; t < len; ++t) {
            const double d = row[t] - mean;
            var += d * d;
        }
        var /= static_cast<double>(len);
        const double sigma = std::sqrt(var + eps);
        state.mu.push_back(mean);
        state.sigma.push_back(sigma);
        double* orow = out.data() + c * len;
        for (int64_t t = 0; t < len; ++t) orow[t] = (row[t] - mean) / sigma;
    }
    return {std::move(out), std::move(state)};
}

std::vector<double> revin_denormalize(const std::vector<double>& y_norm, int64_t n_channels, int64_t width,
                                      const RevinState& state) {
    if (static_cast<int64_t>(state.mu.size()) != n_channels)
        throw DimError("revin_denormalize: state covers " + std::to_string(state.mu.size()) +
                       " channels, output has " + std::to_string(n_channels));
    if (static_cast<int64_t>(y_norm.size()) != n_channels * width)
        throw DimError("revin_denormalize: buffer holds " + std::to_string(y_norm.size()) + " values, expected " +
                       std::to_string(n_channels * width));
    std::vector<double> out(y_norm.size());
    for (int64_t c = 0; c < n_channels; ++c) {
        const double mu = state.mu[static_cast<size_t>(c)];
        const double sigma = state.sigma[static_cast<size_t>(c)];
        const double* row = y_norm.data() + c * width;
        double* orow = out.data() + c * width;
        for (int64_t t = 0; t < width; ++t) orow[t] = row[t] * sigma + mu;
    }
    return out;
}

} // namespace lcast
