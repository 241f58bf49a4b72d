#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// Overlapping fixed-length segments of a signal, one mean-subtracted
/// segment per sample row.  Segment i starts at i * (seg_len - overlap).
inline SampleSet lag_map(const Eigen::VectorXd& signal, int seg_len, int overlap) {
    const Eigen::Index len = signal.size();
    if (len < 1 || !signal.allFinite())
        throw InvalidInputError("lag_map: signal must be non-empty and finite");
    if (seg_len < 1)
        throw ParameterError("lag_map: segment length must be >= 1");
    if (seg_len > len)
        throw ParameterError("lag_map: segment length " + std::to_string(seg_len) +
                             " exceeds signal length " + std::to_string(len));
    if (overlap < 0 || overlap >= seg_len)
        throw ParameterError("lag_map: overlap must be in [0, seg_len)");

    const Eigen::Index hop = seg_len - overlap;
    const Eigen::Index count = (len - seg_len) / hop + 1;
    SampleSet out;
    out.data.resize(count, seg_len);
    for (Eigen::Index i = 0; i < count; ++i) {
        const Eigen::VectorXd seg = signal.segment(i * hop, seg_len);
        out.data.row(i) = (seg.array() - seg.mean()).transpose();
    }
    return out;
}

/// Two synchronized channels; `sample_rate` is known only when the
/// source carried timestamps (or was generated at a declared rate).
struct TwoChannel {
    Eigen::VectorXd ch1, ch2;
    std::optional<double> sample_rate;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

inline double parse_field(const std::string& field, long line_no) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw FormatError("non-numeric field '" + field + "'", line_no);
    return v;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

/// Reads a two-channel CSV: header `t,ch1,ch2` (timestamps in seconds)
/// or `ch1,ch2`.  With timestamps, the sample rate is derived from the
/// span; otherwise the caller must supply it.
inline TwoChannel load_two_channel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open '" + path + "'");

    std::string line;
    long line_no = 0;
    if (!std::getline(in, line))
        throw FormatError("empty file '" + path + "'", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = detail::split_csv_line(line);
    bool has_time = false;
    if (header.size() == 3 && detail::lower(header[0]) == "t" &&
        detail::lower(header[1]) == "ch1" && detail::lower(header[2]) == "ch2")
        has_time = true;
    else if (header.size() == 2 && detail::lower(header[0]) == "ch1" &&
             detail::lower(header[1]) == "ch2")
        has_time = false;
    else
        throw FormatError("expected header 't,ch1,ch2' or 'ch1,ch2'", 1);

    const std::size_t want = has_time ? 3u : 2u;
    std::vector<double> t, c1, c2;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != want)
            throw FormatError("expected " + std::to_string(want) + " fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
        std::size_t f = 0;
        if (has_time) t.push_back(detail::parse_field(fields[f++], line_no));
        c1.push_back(detail::parse_field(fields[f++], line_no));
        c2.push_back(detail::parse_field(fields[f++], line_no));
    }
    if (c1.empty())
        throw FormatError("no data rows in '" + path + "'", line_no);

    TwoChannel out;
    out.ch1 = Eigen::Map<const Eigen::VectorXd>(c1.data(), static_cast<Eigen::Index>(c1.size()));
    out.ch2 = Eigen::Map<const Eigen::VectorXd>(c2.data(), static_cast<Eigen::Index>(c2.size()));
    if (has_time && t.size() >= 2) {
        const double span = t.back() - t.front();
        if (!(span > 0.0))
            throw FormatError("timestamps must increase", line_no);
        out.sample_rate = static_cast<double>(t.size() - 1) / span;
    }
    return out;
}

/// Deterministic two-channel surrogate: channel 2 carries a spike train
/// at the common rate; channel 1 carries the same train plus a weaker
/// train at the sensor-specific rate.  Spikes are Gaussian bumps of
/// width `spike_sigma` centered at (k + 1/2) / freq.  The default width
/// keeps every window of a few hundred milliseconds on the bump flanks:
/// with very narrow spikes, all windows that miss a spike become
/// identical after mean removal, the lag-map trajectory pinches through
/// that one point, and the leading diffusion coordinate oscillates at
/// twice the traversal rate instead of the rate itself.
inline TwoChannel surrogate_ecg(Eigen::Index n_samples, double rate, double common_freq,
                                double specific_freq, std::uint64_t seed,
                                double noise_amp = 0.02, double specific_amp = 0.4,
                                double spike_sigma = 0.06) {
    if (n_samples < 1)
        throw ParameterError("surrogate_ecg: n_samples must be >= 1");
    if (!(rate > 0.0))
        throw ParameterError("surrogate_ecg: rate must be positive");
    if (!(common_freq > 0.0) || !(specific_freq > 0.0) ||
        common_freq >= rate / 2.0 || specific_freq >= rate / 2.0)
        throw ParameterError("surrogate_ecg: frequencies must lie in (0, rate/2)");
    if (common_freq == specific_freq)
        throw ParameterError("surrogate_ecg: common and specific frequencies must differ");
    if (noise_amp < 0.0 || !(specific_amp > 0.0) || !(spike_sigma > 0.0))
        throw ParameterError("surrogate_ecg: bad amplitude or width");

    const double duration = static_cast<double>(n_samples) / rate;
    const auto train = [&](double freq, double t) {
        // Centers further than two spacings away contribute below
        // rounding for any width up to about a third of the spacing.
        const double kf = t * freq - 0.5;
        const long k0 = std::lround(kf);
        const long last = static_cast<long>(std::ceil(duration * freq - 0.5)) - 1;
        double acc = 0.0;
        for (long k = k0 - 2; k <= k0 + 2; ++k) {
            if (k < 0 || k > last) continue;
            const double dt = t - (static_cast<double>(k) + 0.5) / freq;
            acc += std::exp(-dt * dt / (2.0 * spike_sigma * spike_sigma));
        }
        return acc;
    };

    const CounterRng rng(seed);
    const CounterRng noise1 = rng.substream(1);
    const CounterRng noise2 = rng.substream(2);
    TwoChannel out;
    out.ch1.resize(n_samples);
    out.ch2.resize(n_samples);
    out.sample_rate = rate;
    for (Eigen::Index i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double common = train(common_freq, t);
        out.ch2(i) = common + noise_amp * noise2.normal(static_cast<std::uint64_t>(i));
        out.ch1(i) = common + specific_amp * train(specific_freq, t) +
                     noise_amp * noise1.normal(static_cast<std::uint64_t>(i));
    }
    return out;
}

}  // namespace latentfuse
