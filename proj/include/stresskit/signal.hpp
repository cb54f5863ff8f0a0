#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stresskit::signal {

struct SignalSeries {
    std::vector<double> values;
    double sampling_rate_hz = 1.0;
    std::string channel_name;

    [[nodiscard]] double duration_seconds() const {
        return static_cast<double>(values.size()) / sampling_rate_hz;
    }
};

/// Raw channel CSV: either (t_seconds, value) columns, with the rate taken from the
/// time stamps, or a single value column that needs `rate_hz`. A header row is optional.
SignalSeries load_signal(const std::filesystem::path& path, const std::string& channel_name,
                         std::optional<double> rate_hz = std::nullopt);

struct WindowConfig {
    double window_seconds = 30.0;
    double overlap_fraction = 0.5;
};

struct WindowStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population (divisor N)
};

struct EdaDecomposition {
    std::vector<double> tonic;
    std::vector<double> phasic;
    double median_window_seconds = 4.0;
};

/// Summary statistics of a contiguous block of samples.
WindowStats summarize(const double* first, std::size_t n);

/// Sample-index bounds of each window: [start, start + length).
struct WindowSpan {
    std::size_t start;
    std::size_t length;
};
std::vector<WindowSpan> window_spans(std::size_t n_samples, double rate_hz, const WindowConfig& w);

std::vector<WindowStats> window_stats(const SignalSeries& s, const WindowConfig& w);

/// Periodogram |DFT|^2 / N of the mean-removed series for bins 1..N/2 (DC excluded).
std::vector<double> periodogram(const std::vector<double>& values);

/// Frequency of the largest non-DC periodogram bin; ties (within a relative 1e-9) go to
/// the lower frequency.
double periodogram_peak_frequency(const SignalSeries& s);

/// Moving-median tonic estimate (centered, shrinking at the edges) and the residual
/// phasic part. tonic[i] + phasic[i] reproduces the input sample.
EdaDecomposition decompose_eda(const SignalSeries& s, double median_window_seconds = 4.0);

/// Beats per minute from large ECG-grid squares between consecutive QRS complexes.
double heart_rate_regular(double n_large_squares);

/// Beats per minute from the R-peak count in a 6 second strip.
double heart_rate_irregular(long r_peaks_in_6s);

struct StaticAttributes {
    double age = 0.0;
    double weight = 0.0;
};

struct FeatureRows {
    std::vector<std::string> feature_names;
    std::vector<double> values;  // row-major
    std::size_t rows = 0;
    std::size_t dropped_windows = 0;
};

/// Channel-name driven feature layout: every channel gives <name>_{min,max,mean,std};
/// a channel named "bvp" adds bvp_peak_freq; a channel named "eda" adds
/// eda_tonic_* and eda_phasic_* statistics. age and weight close each row.
std::vector<std::string> feature_names_for(const std::vector<std::string>& channel_names);

FeatureRows extract_features(const std::vector<SignalSeries>& channels, const WindowConfig& w,
                             const StaticAttributes& attrs, double eda_median_window_seconds = 4.0);

}  // namespace stresskit::signal
