#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ramangeo/errors.hpp"

namespace ramangeo::spectra {

/// A parsed spectrum file: strictly increasing wavenumbers (cm^-1), matching
/// intensities, and the ##KEY=VALUE header map.
struct RawSpectrum {
    std::vector<double> wavenumbers;
    std::vector<double> intensities;
    std::map<std::string, std::string> metadata;

    double support_min() const { return wavenumbers.front(); }
    double support_max() const { return wavenumbers.back(); }
};

struct SpectralWindow {
    double w_min = 0.0;
    double w_max = 0.0;
};

/// Fixed-length values on the uniform grid over the global window, in [0, 1],
/// exactly zero outside the source spectrum's support.
struct ProcessedSpectrum {
    std::vector<double> values;
    std::string source_id;
};

/// Parse the RRUFF-style text layout: "##KEY=VALUE" headers, "wavenumber,
/// intensity" data rows, optional "##END=" terminator. Duplicate wavenumbers
/// are collapsed by averaging. CRLF and LF line endings are equivalent.
RawSpectrum parse_spectrum_file(const std::string& text);

/// Streaming envelope of spectrum supports; associative, order-independent.
class WindowAccumulator {
public:
    void add(const RawSpectrum& raw);
    bool empty() const { return !seen_; }
    SpectralWindow finish() const;

private:
    bool seen_ = false;
    double min_ = 0.0;
    double max_ = 0.0;
};

SpectralWindow global_window(const std::vector<RawSpectrum>& corpus);

/// (x - min) / (max - min); throws DegenerateSpectrumError when max == min.
std::vector<double> minmax_normalize(const std::vector<double>& intensities);

/// C2 piecewise-cubic interpolant with not-a-knot end conditions.
/// Reproduces polynomials up to degree three exactly.
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y);

    /// Evaluate inside [x.front(), x.back()]; extrapolation is refused.
    double eval(double t) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, m_; // m_ = second derivatives at the knots
};

/// Normalize intensities, fit the spline, evaluate on the uniform grid
/// t_i = w_min + i * (w_max - w_min) / (G - 1); grid points outside the raw
/// support are exactly zero, in-support values are clamped to [0, 1].
ProcessedSpectrum resample_to_grid(const RawSpectrum& raw, const SpectralWindow& window, int grid_size);

/// On-disk processed dataset: raw float32 rows plus a JSON sidecar with the
/// grid definition and per-row sample metadata.
struct ProcessedDataset {
    int grid_size = 0;
    SpectralWindow window;
    std::vector<std::string> ids;
    std::vector<std::string> countries;
    std::vector<std::string> minerals;
    std::vector<std::vector<float>> rows;
    std::vector<std::pair<std::string, std::string>> skipped; // (id, reason)
    std::string config_hash;
};

/// Writes <base>.bin and <base>.json.
void save_dataset(const ProcessedDataset& dataset, const std::string& base_path);
ProcessedDataset load_dataset(const std::string& base_path);

} // namespace ramangeo::spectra
