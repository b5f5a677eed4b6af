#ifndef LCAST_SAMPLING_HPP
#define LCAST_SAMPLING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcast/errors.hpp"
#include "lcast/rng.hpp"

namespace lcast {

// N disjoint patches of exactly P steps covering [0, T). Patch i owns time
// steps [i*P, (i+1)*P). All indices are 0-based.
struct PatchGrid {
    int64_t patch_len = 0;
    int64_t n_patches = 0;
    int64_t total_steps = 0;

    int64_t patch_start(int64_t i) const { return i * patch_len; }
};

PatchGrid make_patch_grid(int64_t total_steps, int64_t patch_len);

enum class SampleStrategy { Standard, Contiguous, Disjoint, Mixed };

std::string strategy_name(SampleStrategy s);
SampleStrategy strategy_from_name(const std::string& name);

// Maps the sampling knob in {0, 0.5, 1} onto disjoint / mixed / contiguous.
// Total on exactly these three values.
SampleStrategy strategy_from_separate_ratio(double ratio);

// A partition of the patch indices into inputs and targets, with the derived
// time-index sets.
struct IndexPlan {
    PatchGrid grid;
    std::vector<int64_t> input_patches;  // sorted ascending
    std::vector<int64_t> target_patches; // sorted ascending, complement of input
    SampleStrategy strategy = SampleStrategy::Standard;

    int64_t n_input() const { return static_cast<int64_t>(input_patches.size()); }
    int64_t n_target() const { return static_cast<int64_t>(target_patches.size()); }
    std::vector<int64_t> input_time_indices() const;
    std::vector<int64_t> target_time_indices() const;

    std::string to_json() const;

    // Builds a plan from an explicit target set (imputation protocol); only
    // the partition invariants are enforced, not |input| == L/P.
    static IndexPlan from_targets(const PatchGrid& grid, std::vector<int64_t> targets, SampleStrategy tag);
};

// Draws a plan with |input_patches| = lookback / P.
//   standard:   targets are the last (N - L/P) patches; deterministic.
//   contiguous: targets are one run, uniform over feasible offsets.
//   disjoint:   targets are a uniform random subset.
//   mixed:      two runs of ceil(m/2) and floor(m/2), uniform non-colliding
//               placements (needs m >= 2).
IndexPlan sample_plan(const PatchGrid& grid, int64_t lookback, SampleStrategy strategy, Rng& rng);

// ---- reversible instance normalization ---------------------------------------

struct RevinState {
    std::vector<double> mu;    // per channel
    std::vector<double> sigma; // per channel, sqrt(var + eps)
    double eps = 1e-5;
};

// Normalizes a channel-major C x L input block with per-channel statistics
// over exactly those L steps (population variance). Target values never
// touch the statistics.
std::pair<std::vector<double>, RevinState> revin_normalize(const std::vector<double>& x, int64_t n_channels,
                                                           int64_t len, double eps = 1e-5);

// y = y_norm * sigma_c + mu_c, channel-major C x W.
std::vector<double> revin_denormalize(const std::vector<double>& y_norm, int64_t n_channels, int64_t width,
                                      const RevinState& state);

} // namespace lcast

#endif
