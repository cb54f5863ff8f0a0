#include "stresskit/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>

#include "stresskit/error.hpp"

namespace stresskit::signal {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::size_t samples_for(double seconds, double rate_hz) {
    return static_cast<std::size_t>(std::llround(seconds * rate_hz));
}

void check_window(const WindowConfig& w) {
    if (!(w.window_seconds >= 0.0) || !std::isfinite(w.window_seconds)) {
        throw Error(ErrorCode::InvalidConfig, "window_seconds must be finite and non-negative");
    }
    if (!(w.overlap_fraction >= 0.0 && w.overlap_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "overlap_fraction must lie in [0, 1)");
    }
}

void check_series(const SignalSeries& s) {
    if (!(s.sampling_rate_hz > 0.0) || !std::isfinite(s.sampling_rate_hz)) {
        throw Error(ErrorCode::InvalidConfig, "sampling rate of '" + s.channel_name + "' must be positive");
    }
    if (s.values.empty()) throw Error(ErrorCode::SeriesTooShort, "'" + s.channel_name + "' is empty");
    for (double v : s.values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "'" + s.channel_name + "' has a non-finite sample");
    }
}

bool parse_number(std::string_view text, double& out) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

SignalSeries load_signal(const std::filesystem::path& path, const std::string& channel_name,
                         std::optional<double> rate_hz) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<double> times;
    SignalSeries s;
    s.channel_name = channel_name;
    std::size_t width = 0;
    bool first = true;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        std::vector<double> nums(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_number(cells[c], nums[c]);
        const bool header_allowed = first;
        first = false;
        if (!numeric) {
            if (header_allowed) continue;
            throw Error(ErrorCode::MalformedCsv, path.string() + ":" + std::to_string(line_no) + ": not a number");
        }
        if (width == 0) width = cells.size();
        if (width > 2) {
            throw Error(ErrorCode::MalformedCsv, path.string() + ": expected 1 or 2 columns, got " + std::to_string(width));
        }
        if (cells.size() != width) {
            throw Error(ErrorCode::MalformedCsv, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                     std::to_string(width) + " columns");
        }
        if (width == 2) times.push_back(nums[0]);
        s.values.push_back(nums.back());
    }
    if (s.values.size() < 2) throw Error(ErrorCode::SeriesTooShort, "'" + path.string() + "' holds fewer than 2 samples");
    if (width == 2) {
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) {
                throw Error(ErrorCode::MalformedCsv, "time stamps in '" + path.string() + "' must increase");
            }
        }
        s.sampling_rate_hz = static_cast<double>(times.size() - 1) / (times.back() - times.front());
    } else {
        if (!rate_hz) throw Error(ErrorCode::InvalidConfig, "'" + path.string() + "' has one column; a rate is required");
        s.sampling_rate_hz = *rate_hz;
    }
    check_series(s);
    return s;
}

WindowStats summarize(const double* first, std::size_t n) {
    WindowStats st;
    st.min = *std::min_element(first, first + n);
    st.max = *std::max_element(first, first + n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += first[i];
    st.mean = sum / static_cast<double>(n);
    // Rounding can push the mean a hair outside [min, max] on near-constant input.
    st.mean = std::clamp(st.mean, st.min, st.max);
    if (st.min == st.max) {
        st.mean = st.min;
        st.std = 0.0;
        return st;
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = first[i] - st.mean;
        ss += d * d;
    }
    st.std = std::sqrt(ss / static_cast<double>(n));
    return st;
}

std::vector<WindowSpan> window_spans(std::size_t n_samples, double rate_hz, const WindowConfig& w) {
    check_window(w);
    if (w.window_seconds == 0.0) {
        if (n_samples == 0) throw Error(ErrorCode::SeriesTooShort, "empty series");
        return {{0, n_samples}};
    }
    const std::size_t length = samples_for(w.window_seconds, rate_hz);
    if (length < 2) {
        throw Error(ErrorCode::InvalidConfig, "window must span at least 2 samples");
    }
    const double hop_seconds = w.window_seconds * (1.0 - w.overlap_fraction);
    if (samples_for(hop_seconds, rate_hz) < 1) {
        throw Error(ErrorCode::InvalidConfig, "window hop is shorter than one sample");
    }
    std::vector<WindowSpan> spans;
    for (std::size_t k = 0;; ++k) {
        const std::size_t start = samples_for(static_cast<double>(k) * hop_seconds, rate_hz);
        if (start + length > n_samples) break;
        spans.push_back({start, length});
    }
    if (spans.empty()) {
        throw Error(ErrorCode::SeriesTooShort, std::to_string(n_samples) + " samples cannot fill one " +
                                                   std::to_string(length) + "-sample window");
    }
    return spans;
}

std::vector<WindowStats> window_stats(const SignalSeries& s, const WindowConfig& w) {
    check_series(s);
    std::vector<WindowStats> out;
    for (const auto& span : window_spans(s.values.size(), s.sampling_rate_hz, w)) {
        out.push_back(summarize(s.values.data() + span.start, span.length));
    }
    return out;
}

std::vector<double> periodogram(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 4) throw Error(ErrorCode::SeriesTooShort, "periodogram needs at least 4 samples");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);

    const std::size_t n_bins = n / 2 + 1;
    std::unique_ptr<double, decltype(&fftw_free)> in(fftw_alloc_real(n), &fftw_free);
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(fftw_alloc_complex(n_bins), &fftw_free);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = values[i] - mean;
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> power(n_bins - 1);
    for (std::size_t k = 1; k < n_bins; ++k) {
        const double re = out.get()[k][0];
        const double im = out.get()[k][1];
        power[k - 1] = (re * re + im * im) / static_cast<double>(n);
    }
    return power;
}

double periodogram_peak_frequency(const SignalSeries& s) {
    check_series(s);
    if (s.values.size() < 4) throw Error(ErrorCode::SeriesTooShort, "periodogram needs at least 4 samples");
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    if (*lo == *hi) throw Error(ErrorCode::ConstantSignal, "'" + s.channel_name + "' is constant");
    const auto power = periodogram(s.values);
    // Bins within rounding noise of the maximum count as tied.
    const double top = *std::max_element(power.begin(), power.end());
    std::size_t best = 0;
    while (power[best] < top * (1.0 - 1e-9)) ++best;
    return static_cast<double>(best + 1) * s.sampling_rate_hz / static_cast<double>(s.values.size());
}

EdaDecomposition decompose_eda(const SignalSeries& s, double median_window_seconds) {
    check_series(s);
    const std::size_t window = samples_for(median_window_seconds, s.sampling_rate_hz);
    if (!(median_window_seconds > 0.0) || window < 3) {
        throw Error(ErrorCode::WindowTooSmall, "median window must cover at least 3 samples");
    }
    const std::size_t half = window / 2;
    const std::size_t n = s.values.size();
    EdaDecomposition d;
    d.median_window_seconds = median_window_seconds;
    d.tonic.resize(n);
    d.phasic.resize(n);
    std::vector<double> buf;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n, i + half + 1);
        buf.assign(s.values.begin() + static_cast<std::ptrdiff_t>(a),
                   s.values.begin() + static_cast<std::ptrdiff_t>(b));
        const std::size_t m = buf.size() / 2;
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m), buf.end());
        double median = buf[m];
        if (buf.size() % 2 == 0) {
            const double below = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m));
            median = below + (median - below) / 2.0;
        }
        d.tonic[i] = median;
        d.phasic[i] = s.values[i] - median;
    }
    return d;
}

double heart_rate_regular(double n_large_squares) {
    if (!(n_large_squares > 0.0) || !std::isfinite(n_large_squares)) {
        throw Error(ErrorCode::NonPositiveInput, "number of large squares must be positive");
    }
    return 300.0 / n_large_squares;
}

double heart_rate_irregular(long r_peaks_in_6s) {
    if (r_peaks_in_6s < 0) throw Error(ErrorCode::NonPositiveInput, "R-peak count must be non-negative");
    return 10.0 * static_cast<double>(r_peaks_in_6s);
}

std::vector<std::string> feature_names_for(const std::vector<std::string>& channel_names) {
    static const char* stats[] = {"min", "max", "mean", "std"};
    std::vector<std::string> names;
    for (const auto& raw : channel_names) {
        const std::string ch = lower(raw);
        for (const char* st : stats) names.push_back(ch + "_" + st);
        if (ch == "bvp") names.push_back("bvp_peak_freq");
        if (ch == "eda") {
            for (const char* part : {"tonic", "phasic"}) {
                for (const char* st : stats) names.push_back(ch + "_" + part + "_" + st);
            }
        }
    }
    names.emplace_back("age");
    names.emplace_back("weight");
    return names;
}

FeatureRows extract_features(const std::vector<SignalSeries>& channels, const WindowConfig& w,
                             const StaticAttributes& attrs, double eda_median_window_seconds) {
    if (channels.empty()) throw Error(ErrorCode::InvalidConfig, "no channels given");
    if (!std::isfinite(attrs.age) || !std::isfinite(attrs.weight)) {
        throw Error(ErrorCode::NonFiniteValue, "age and weight must be finite");
    }
    check_window(w);
    std::vector<std::string> names;
    for (const auto& ch : channels) {
        check_series(ch);
        names.push_back(ch.channel_name);
    }
    const double reference = channels.front().duration_seconds();
    for (const auto& ch : channels) {
        const double tolerance = std::max(1.0 / ch.sampling_rate_hz, 1.0 / channels.front().sampling_rate_hz);
        if (std::abs(ch.duration_seconds() - reference) > tolerance + 1e-9) {
            throw Error(ErrorCode::MismatchedDuration, "'" + ch.channel_name + "' spans " +
                                                           std::to_string(ch.duration_seconds()) + " s, expected " +
                                                           std::to_string(reference) + " s");
        }
    }

    // EDA is decomposed over the whole recording so the median window sees full context.
    std::vector<std::unique_ptr<EdaDecomposition>> eda(channels.size());
    std::vector<std::vector<WindowSpan>> spans(channels.size());
    std::size_t n_windows = SIZE_MAX;
    for (std::size_t c = 0; c < channels.size(); ++c) {
        if (lower(channels[c].channel_name) == "eda") {
            eda[c] = std::make_unique<EdaDecomposition>(decompose_eda(channels[c], eda_median_window_seconds));
        }
        spans[c] = window_spans(channels[c].values.size(), channels[c].sampling_rate_hz, w);
        n_windows = std::min(n_windows, spans[c].size());
    }

    FeatureRows out;
    out.feature_names = feature_names_for(names);
    std::vector<double> row;
    for (std::size_t k = 0; k < n_windows; ++k) {
        row.clear();
        bool dropped = false;
        for (std::size_t c = 0; c < channels.size() && !dropped; ++c) {
            const auto& ch = channels[c];
            const auto span = spans[c][k];
            const double* block = ch.values.data() + span.start;
            const auto push = [&row](const WindowStats& st) {
                row.insert(row.end(), {st.min, st.max, st.mean, st.std});
            };
            push(summarize(block, span.length));
            const std::string name = lower(ch.channel_name);
            if (name == "bvp") {
                const auto [lo, hi] = std::minmax_element(block, block + span.length);
                if (span.length < 4 || *lo == *hi) {
                    dropped = true;
                    break;
                }
                SignalSeries piece{std::vector<double>(block, block + span.length), ch.sampling_rate_hz, ch.channel_name};
                row.push_back(periodogram_peak_frequency(piece));
            }
            if (eda[c]) {
                push(summarize(eda[c]->tonic.data() + span.start, span.length));
                push(summarize(eda[c]->phasic.data() + span.start, span.length));
            }
        }
        if (dropped) {
            ++out.dropped_windows;
            continue;
        }
        row.push_back(attrs.age);
        row.push_back(attrs.weight);
        out.values.insert(out.values.end(), row.begin(), row.end());
        ++out.rows;
    }
    return out;
}

}  // namespace stresskit::signal
