#include "lcast/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lcast {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* begin = t.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + t.size();
}

} // namespace

MultivariateSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_line(line));
    }
    if (rows.empty()) throw DataError(path + ": file is empty");

    const size_t n_cols = rows[0].size();
    for (size_t r = 0; r < rows.size(); ++r)
        if (rows[r].size() != n_cols)
            throw DataError(path + ": ragged row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " cells, expected " + std::to_string(n_cols));

    // Header detection: the first row is a header if any cell beyond the first
    // fails numeric parse, or if at least two cells fail (a lone non-numeric
    // first cell is a date value, not a name).
    double tmp;
    size_t first_row_fail = 0;
    bool non_first_fail = false;
    for (size_t c = 0; c < n_cols; ++c) {
        if (!parse_double(rows[0][c], tmp)) {
            ++first_row_fail;
            if (c > 0) non_first_fail = true;
        }
    }
    const bool has_header = non_first_fail || first_row_fail >= 2;
    const size_t first_data = has_header ? 1 : 0;
    if (rows.size() - first_data < 2)
        throw DataError(path + ": too few rows (need at least 2 data rows, got " +
                        std::to_string(rows.size() - first_data) + ")");

    const bool has_date_col = !parse_double(rows[first_data][0], tmp);
    const size_t chan_begin = has_date_col ? 1 : 0;
    if (chan_begin >= n_cols) throw DataError(path + ": no numeric channels found");

    MultivariateSeries series;
    series.n_channels = static_cast<int64_t>(n_cols - chan_begin);
    series.length = static_cast<int64_t>(rows.size() - first_data);
    series.values.assign(static_cast<size_t>(series.n_channels * series.length), 0.0);

    for (size_t c = chan_begin; c < n_cols; ++c) {
        if (has_header)
            series.channel_names.push_back(trim(rows[0][c]));
        else
            series.channel_names.push_back("ch" + std::to_string(c - chan_begin));
    }

    for (size_t r = first_data; r < rows.size(); ++r) {
        const int64_t t = static_cast<int64_t>(r - first_data);
        if (has_date_col) series.timestamps.push_back(trim(rows[r][0]));
        for (size_t c = chan_begin; c < n_cols; ++c) {
            double v;
            if (!parse_double(rows[r][c], v))
                throw DataError(path + ": non-numeric cell at row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1) + ": '" + trim(rows[r][c]) + "'");
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1));
            series.at(static_cast<int64_t>(c - chan_begin), t) = v;
        }
    }
    return series;
}

DatasetBundle chronological_split(const MultivariateSeries& series, const std::array<double, 3>& ratio) {
    double sum = ratio[0] + ratio[1] + ratio[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " + std::to_string(sum));
    const int64_t t = series.length;
    const auto b1 = static_cast<int64_t>(std::floor(static_cast<double>(t) * ratio[0]));
    const auto b2 = static_cast<int64_t>(std::floor(static_cast<double>(t) * (ratio[0] + ratio[1])));
    DatasetBundle bundle;
    bundle.train = {0, b1};
    bundle.val = {b1, b2};
    bundle.test = {b2, t};
    bundle.split_ratio = ratio;
    if (bundle.train.size() <= 0 || bundle.val.size() <= 0 || bundle.test.size() <= 0)
        throw ConfigError("split produces an empty range: train " + std::to_string(bundle.train.size()) + ", val " +
                          std::to_string(bundle.val.size()) + ", test " + std::to_string(bundle.test.size()));
    return bundle;
}

ChannelStats train_split_stats(const MultivariateSeries& series, const DatasetBundle& bundle) {
    ChannelStats stats;
    const int64_t n = bundle.train.size();
    for (int64_t c = 0; c < series.n_channels; ++c) {
        double mean = 0.0;
        for (int64_t t = bundle.train.begin; t < bundle.train.end; ++t) mean += series.at(c, t);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t t = bundle.train.begin; t < bundle.train.end; ++t) {
            const double d = series.at(c, t) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        stats.mean.push_back(mean);
        stats.std_dev.push_back(std::max(std::sqrt(var), 1e-8));
    }
    return stats;
}

MultivariateSeries standardize(const MultivariateSeries& series, const ChannelStats& stats) {
    if (static_cast<int64_t>(stats.mean.size()) != series.n_channels)
        throw DimError("standardize: stats cover " + std::to_string(stats.mean.size()) + " channels, series has " +
                       std::to_string(series.n_channels));
    MultivariateSeries out = series;
    for (int64_t c = 0; c < series.n_channels; ++c)
        for (int64_t t = 0; t < series.length; ++t)
            out.at(c, t) = (series.at(c, t) - stats.mean[static_cast<size_t>(c)]) / stats.std_dev[static_cast<size_t>(c)];
    return out;
}

// ---- synthetic generator -----------------------------------------------------

namespace {

double deterministic_value(const SynthSpec& spec, int64_t channel, int64_t t) {
    const ChannelSpec& ch = spec.channels[static_cast<size_t>(channel)];
    double v = 0.0;
    for (const SineComponent& s : ch.sines)
        v += s.amplitude * std::sin(kTwoPi * static_cast<double>(t) / s.period + s.phase);
    v += ch.trend * static_cast<double>(t);
    for (const Coupling& cp : ch.couplings)
        v += cp.weight * deterministic_value(spec, cp.source, t - cp.lag);
    return v;
}

// Civil-date helpers for the generated timestamp column.
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t& y, int64_t& m, int64_t& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = yoe + era * 400;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

} // namespace

int64_t parse_frequency_seconds(const std::string& freq) {
    if (freq.empty()) throw ConfigError("empty frequency string");
    size_t i = 0;
    while (i < freq.size() && std::isdigit(static_cast<unsigned char>(freq[i]))) ++i;
    if (i == 0 || i + 1 != freq.size()) throw ConfigError("bad frequency '" + freq + "', expected forms like 1h, 15m");
    const int64_t n = std::stoll(freq.substr(0, i));
    switch (freq[i]) {
        case 's': return n;
        case 'm': return n * 60;
        case 'h': return n * 3600;
        case 'd': return n * 86400;
        default: throw ConfigError("bad frequency unit in '" + freq + "'");
    }
}

int64_t parse_iso_timestamp(const std::string& ts) {
    long long y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    const int got = std::sscanf(ts.c_str(), "%lld-%lld-%lldT%lld:%lld:%lld", &y, &mo, &d, &h, &mi, &s);
    if (got < 3) throw ConfigError("bad ISO-8601 timestamp '" + ts + "'");
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_iso_timestamp(int64_t epoch_s) {
    int64_t days = epoch_s / 86400;
    int64_t rem = epoch_s % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int64_t y, m, d;
    civil_from_days(days, y, m, d);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lldT%02lld:%02lld:%02lld", static_cast<long long>(y),
                  static_cast<long long>(m), static_cast<long long>(d), static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

MultivariateSeries synth_generate(const SynthSpec& spec) {
    if (spec.length < 1) throw ConfigError("synthetic series length must be at least 1");
    if (spec.channels.empty()) throw ConfigError("synthetic spec needs at least one channel");
    for (size_t c = 0; c < spec.channels.size(); ++c) {
        for (const SineComponent& s : spec.channels[c].sines)
            if (s.period <= 0) throw ConfigError("sine period must be positive");
        for (const Coupling& cp : spec.channels[c].couplings)
            if (cp.source < 0 || cp.source >= static_cast<int64_t>(c))
                throw ConfigError("coupling in channel " + std::to_string(c) +
                                  " must reference an earlier channel, got " + std::to_string(cp.source));
    }

    MultivariateSeries series;
    series.n_channels = static_cast<int64_t>(spec.channels.size());
    series.length = spec.length;
    series.values.assign(static_cast<size_t>(series.n_channels * series.length), 0.0);
    series.frequency_hint = spec.frequency;

    Rng rng = make_rng(spec.seed, "synth");
    for (int64_t c = 0; c < series.n_channels; ++c) {
        const ChannelSpec& ch = spec.channels[static_cast<size_t>(c)];
        series.channel_names.push_back(ch.name.empty() ? "ch" + std::to_string(c) : ch.name);
        for (int64_t t = 0; t < series.length; ++t) {
            double v = deterministic_value(spec, c, t);
            if (ch.noise_std > 0.0) v += ch.noise_std * normal(rng);
            series.at(c, t) = v;
        }
    }

    const int64_t step = parse_frequency_seconds(spec.frequency);
    const int64_t start = parse_iso_timestamp(spec.start);
    series.timestamps.reserve(static_cast<size_t>(series.length));
    for (int64_t t = 0; t < series.length; ++t) series.timestamps.push_back(format_iso_timestamp(start + t * step));
    return series;
}

// ---- windows -------------------------------------------------------------------

std::vector<int64_t> window_origins(const DatasetBundle& bundle, Split split, int64_t width, int64_t stride) {
    if (width <= 0) throw ConfigError("window width must be positive");
    if (stride <= 0) throw ConfigError("window stride must be positive");
    const SplitRange& r = bundle.range(split);
    if (width > r.size())
        throw ConfigError("window width " + std::to_string(width) + " exceeds split length " +
                          std::to_string(r.size()));
    std::vector<int64_t> origins;
    for (int64_t o = r.begin; o + width <= r.end; o += stride) origins.push_back(o);
    return origins;
}

Window extract_window(const MultivariateSeries& series, int64_t origin, int64_t width) {
    if (origin < 0 || origin + width > series.length)
        throw IndexError("window [" + std::to_string(origin) + ", " + std::to_string(origin + width) +
                         ") out of range for series length " + std::to_string(series.length));
    Window w;
    w.n_channels = series.n_channels;
    w.width = width;
    w.origin = origin;
    w.values.resize(static_cast<size_t>(series.n_channels * width));
    for (int64_t c = 0; c < series.n_channels; ++c)
        std::copy_n(series.values.data() + c * series.length + origin, width, w.values.data() + c * width);
    return w;
}

} // namespace lcast
