#ifndef LCAST_DATA_HPP
#define LCAST_DATA_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcast/errors.hpp"
#include "lcast/rng.hpp"

namespace lcast {

// Channel-major multivariate series: values[c * length + t].
struct MultivariateSeries {
    int64_t n_channels = 0;
    int64_t length = 0;
    std::vector<double> values;
    std::vector<std::string> channel_names;
    std::vector<std::string> timestamps; // empty when the source had no date column
    std::string frequency_hint;          // e.g. "1h", "15m"; empty if unknown

    double at(int64_t channel, int64_t t) const { return values[static_cast<size_t>(channel * length + t)]; }
    double& at(int64_t channel, int64_t t) { return values[static_cast<size_t>(channel * length + t)]; }
};

struct SplitRange {
    int64_t begin = 0;
    int64_t end = 0; // exclusive
    int64_t size() const { return end - begin; }
};

enum class Split { Train, Val, Test };

// Chronological, contiguous, disjoint train/val/test views of one series.
struct DatasetBundle {
    SplitRange train, val, test;
    std::array<double, 3> split_ratio{};
    const SplitRange& range(Split s) const {
        switch (s) {
            case Split::Train: return train;
            case Split::Val: return val;
            default: return test;
        }
    }
};

struct Window {
    std::vector<double> values; // channel-major, C x width
    int64_t n_channels = 0;
    int64_t width = 0;
    int64_t origin = 0; // absolute start index in the source series

    double at(int64_t channel, int64_t t) const { return values[static_cast<size_t>(channel * width + t)]; }
    double& at(int64_t channel, int64_t t) { return values[static_cast<size_t>(channel * width + t)]; }
};

// CSV ingestion: UTF-8, comma separated, '.' decimal point, optional header
// row, optional leading date column. Any unparsable or non-finite cell is a
// hard error.
MultivariateSeries load_csv(const std::string& path);

// Boundaries at floor(T * cumulative_ratio); ratios must sum to 1 within 1e-9
// and every split must be nonempty.
DatasetBundle chronological_split(const MultivariateSeries& series, const std::array<double, 3>& ratio);

// Per-channel mean/std over the train split only, for the optional global
// standardization knob (off by default).
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
};
ChannelStats train_split_stats(const MultivariateSeries& series, const DatasetBundle& bundle);
MultivariateSeries standardize(const MultivariateSeries& series, const ChannelStats& stats);

// ---- synthetic generator ----------------------------------------------------

struct SineComponent {
    double amplitude = 1.0;
    double period = 24.0;
    double phase = 0.0;
};

// Copies the deterministic part of an earlier channel, delayed by `lag` steps.
struct Coupling {
    int64_t source = 0;
    int64_t lag = 0;
    double weight = 1.0;
};

struct ChannelSpec {
    std::string name;
    std::vector<SineComponent> sines;
    double trend = 0.0;
    double noise_std = 0.0;
    std::vector<Coupling> couplings;
};

struct SynthSpec {
    std::vector<ChannelSpec> channels;
    int64_t length = 0;
    uint64_t seed = 0;
    std::string frequency = "1h";
    std::string start = "2020-01-01T00:00:00";
};

// x_c(t) = sum_i A_i sin(2 pi t / p_i + phi_i) + trend * t
//        + sum_j w_j * det_{src_j}(t - lag_j) + noise_std * eps(c, t)
// where det is the deterministic part (couplings never copy noise) and eps
// is N(0,1) drawn in (channel, t) order from seed_for(seed, "synth").
MultivariateSeries synth_generate(const SynthSpec& spec);

// ---- windows -----------------------------------------------------------------

// Start offsets (absolute) of full windows inside a split; the last
// incomplete window is dropped.
std::vector<int64_t> window_origins(const DatasetBundle& bundle, Split split, int64_t width, int64_t stride);

Window extract_window(const MultivariateSeries& series, int64_t origin, int64_t width);

// Timestamp helpers shared with the CSV writer.
int64_t parse_frequency_seconds(const std::string& freq);
int64_t parse_iso_timestamp(const std::string& ts);
std::string format_iso_timestamp(int64_t epoch_s);

} // namespace lcast

#endif
