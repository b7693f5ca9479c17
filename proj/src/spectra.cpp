#include "ramangeo/spectra.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "ramangeo/io.hpp"

namespace ramangeo::spectra {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view token, std::size_t line_no) {
    token = trim(token);
    if (token.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": empty numeric field");
    }
    double value = 0.0;
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed number '" +
                         std::string(token) + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
    }
    return value;
}

} // namespace

RawSpectrum parse_spectrum_file(const std::string& text) {
    RawSpectrum out;
    std::vector<double> w, y;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool ended = false;
    while (pos <= text.size() && !ended) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        line = trim(line);
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }

        if (line.starts_with("##")) {
            std::string_view body = line.substr(2);
            const std::size_t eq = body.find('=');
            const std::string key(trim(eq == std::string_view::npos ? body : body.substr(0, eq)));
            if (key == "END") {
                ended = true;
                break;
            }
            const std::string value(
                eq == std::string_view::npos ? std::string_view{} : trim(body.substr(eq + 1)));
            out.metadata[key] = value;
            continue;
        }

        const std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected 'wavenumber, intensity', got '" + std::string(line) + "'");
        }
        w.push_back(parse_number(line.substr(0, comma), line_no));
        y.push_back(parse_number(line.substr(comma + 1), line_no));
        if (pos > text.size()) break;
    }

    if (w.empty()) throw EmptyError("spectrum has no data rows");

    // collapse exact duplicate wavenumbers by averaging their intensities
    std::size_t i = 0;
    while (i < w.size()) {
        std::size_t j = i + 1;
        double acc = y[i];
        while (j < w.size() && w[j] == w[i]) {
            acc += y[j];
            ++j;
        }
        out.wavenumbers.push_back(w[i]);
        out.intensities.push_back(acc / static_cast<double>(j - i));
        i = j;
    }

    for (std::size_t k = 1; k < out.wavenumbers.size(); ++k) {
        if (out.wavenumbers[k] <= out.wavenumbers[k - 1]) {
            throw OrderingError("wavenumbers not strictly increasing at point " + std::to_string(k) +
                                " (" + std::to_string(out.wavenumbers[k - 1]) + " then " +
                                std::to_string(out.wavenumbers[k]) + ")");
        }
    }
    return out;
}

void WindowAccumulator::add(const RawSpectrum& raw) {
    if (raw.wavenumbers.empty()) return;
    if (!seen_) {
        min_ = raw.support_min();
        max_ = raw.support_max();
        seen_ = true;
    } else {
        min_ = std::min(min_, raw.support_min());
        max_ = std::max(max_, raw.support_max());
    }
}

SpectralWindow WindowAccumulator::finish() const {
    if (!seen_) throw EmptyError("global window of an empty corpus");
    return {min_, max_};
}

SpectralWindow global_window(const std::vector<RawSpectrum>& corpus) {
    WindowAccumulator acc;
    for (const auto& raw : corpus) acc.add(raw);
    return acc.finish();
}

std::vector<double> minmax_normalize(const std::vector<double>& intensities) {
    if (intensities.empty()) throw EmptyError("minmax_normalize: empty input");
    const auto [mn, mx] = std::minmax_element(intensities.begin(), intensities.end());
    if (*mx == *mn) {
        throw DegenerateSpectrumError("constant intensities (value " + std::to_string(*mn) +
                                      ") cannot be min-max normalized");
    }
    const double lo = *mn, range = *mx - *mn;
    std::vector<double> out(intensities.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (intensities[i] - lo) / range;
    return out;
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 4) {
        throw InsufficientDataError("cubic spline needs at least 4 points, got " +
                                    std::to_string(n));
    }
    if (y_.size() != n) throw DimensionError("spline: x and y lengths differ");
    for (std::size_t i = 1; i < n; ++i) {
        if (x_[i] <= x_[i - 1]) throw OrderingError("spline: x must be strictly increasing");
    }

    // Solve for second derivatives M with not-a-knot end conditions. The
    // boundary rows are folded into the first/last interior equations via
    //   M_0     = (1 + h0/h1) M_1     - (h0/h1) M_2
    //   M_{n-1} = (1 + h(n-2)/h(n-3)) M_{n-2} - (h(n-2)/h(n-3)) M_{n-3}
    // leaving a tridiagonal system in M_1 .. M_{n-2}.
    std::vector<double> h(n - 1), d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        d[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    const std::size_t m = n - 2; // unknowns M_1..M_{n-2}
    std::vector<double> lower(m, 0.0), diag(m, 0.0), upper(m, 0.0), rhs(m, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const std::size_t r = i - 1;
        lower[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i];
        rhs[r] = 6.0 * (d[i] - d[i - 1]);
    }
    const double r0 = h[0] / h[1];
    diag[0] += h[0] * (1.0 + r0);
    upper[0] -= h[0] * r0;
    const double rn = h[n - 2] / h[n - 3];
    diag[m - 1] += h[n - 2] * (1.0 + rn);
    lower[m - 1] -= h[n - 2] * rn;

    // Thomas algorithm
    for (std::size_t r = 1; r < m; ++r) {
        const double f = lower[r] / diag[r - 1];
        diag[r] -= f * upper[r - 1];
        rhs[r] -= f * rhs[r - 1];
    }
    std::vector<double> sol(m);
    sol[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t r = m - 1; r-- > 0;) {
        sol[r] = (rhs[r] - upper[r] * sol[r + 1]) / diag[r];
    }

    m_.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) m_[r + 1] = sol[r];
    m_[0] = (1.0 + r0) * m_[1] - r0 * m_[2];
    m_[n - 1] = (1.0 + rn) * m_[n - 2] - rn * m_[n - 3];
}

double CubicSpline::eval(double t) const {
    if (t < x_.front() || t > x_.back()) {
        throw ValueError("spline: " + std::to_string(t) + " outside [" +
                         std::to_string(x_.front()) + ", " + std::to_string(x_.back()) +
                         "], extrapolation refused");
    }
    // interval index: largest i with x_[i] <= t, clamped to the last interval
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    i = (i == 0) ? 0 : i - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;

    const double hsz = x_[i + 1] - x_[i];
    const double s = t - x_[i];
    const double slope = (y_[i + 1] - y_[i]) / hsz;
    return y_[i] + s * (slope - hsz * (2.0 * m_[i] + m_[i + 1]) / 6.0) + s * s * m_[i] / 2.0 +
           s * s * s * (m_[i + 1] - m_[i]) / (6.0 * hsz);
}

ProcessedSpectrum resample_to_grid(const RawSpectrum& raw, const SpectralWindow& window,
                                   int grid_size) {
    if (window.w_min >= window.w_max) throw ValueError("resample: window w_min >= w_max");
    if (grid_size < 8) {
        throw ValueError("resample: grid size must be >= 8, got " + std::to_string(grid_size));
    }

    const std::vector<double> normalized = minmax_normalize(raw.intensities);
    const CubicSpline spline(raw.wavenumbers, normalized);

    ProcessedSpectrum out;
    out.values.assign(static_cast<std::size_t>(grid_size), 0.0);
    const double span = window.w_max - window.w_min;
    const double lo = raw.support_min();
    const double hi = raw.support_max();

    // half-ulp slack so support endpoints that coincide with grid points are
    // not lost to rounding in the grid formula
    const double slack = 1e-12 * (std::fabs(lo) + std::fabs(hi) + span);
    std::size_t covered = 0;
    for (int i = 0; i < grid_size; ++i) {
        const double t = window.w_min + span * (static_cast<double>(i) / (grid_size - 1));
        if (t < lo - slack || t > hi + slack) continue;
        out.values[static_cast<std::size_t>(i)] =
            std::clamp(spline.eval(std::clamp(t, lo, hi)), 0.0, 1.0);
        ++covered;
    }
    if (covered == 0) {
        throw AllZeroError("spectrum support [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] contributes no grid points inside window [" +
                           std::to_string(window.w_min) + ", " + std::to_string(window.w_max) + "]");
    }
    return out;
}

void save_dataset(const ProcessedDataset& dataset, const std::string& base_path) {
    std::vector<std::uint8_t> bin;
    bin.reserve(dataset.rows.size() * static_cast<std::size_t>(dataset.grid_size) * 4);
    for (const auto& row : dataset.rows) {
        if (row.size() != static_cast<std::size_t>(dataset.grid_size)) {
            throw DimensionError("dataset row length " + std::to_string(row.size()) +
                                 " != grid size " + std::to_string(dataset.grid_size));
        }
        for (float v : row) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) {
                bin.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF));
            }
        }
    }
    write_binary_file(base_path + ".bin", bin.data(), bin.size());

    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < dataset.ids.size(); ++i) {
        rows.push_back({{"id", dataset.ids[i]},
                        {"country", dataset.countries[i]},
                        {"mineral", dataset.minerals[i]}});
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& [id, reason] : dataset.skipped) {
        skipped.push_back({{"id", id}, {"reason", reason}});
    }
    const nlohmann::json sidecar = {
        {"schema_version", 1},
        {"grid_size", dataset.grid_size},
        {"window", {{"w_min", dataset.window.w_min}, {"w_max", dataset.window.w_max}}},
        {"rows", rows},
        {"skipped", skipped},
        {"config_hash", dataset.config_hash}};
    write_text_file(base_path + ".json", sidecar.dump(2) + "\n");
}

ProcessedDataset load_dataset(const std::string& base_path) {
    ProcessedDataset out;
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_text_file(base_path + ".json"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("unreadable dataset sidecar: " + std::string(e.what()));
    }
    out.grid_size = sidecar.at("grid_size").get<int>();
    out.window.w_min = sidecar.at("window").at("w_min").get<double>();
    out.window.w_max = sidecar.at("window").at("w_max").get<double>();
    out.config_hash = sidecar.value("config_hash", "");
    for (const auto& row : sidecar.at("rows")) {
        out.ids.push_back(row.at("id").get<std::string>());
        out.countries.push_back(row.at("country").get<std::string>());
        out.minerals.push_back(row.value("mineral", ""));
    }
    for (const auto& s : sidecar.at("skipped")) {
        out.skipped.emplace_back(s.at("id").get<std::string>(), s.at("reason").get<std::string>());
    }

    const auto bin = read_binary_file(base_path + ".bin");
    const std::size_t row_bytes = static_cast<std::size_t>(out.grid_size) * 4;
    if (row_bytes == 0 || bin.size() != out.ids.size() * row_bytes) {
        throw IoError("dataset binary size " + std::to_string(bin.size()) +
                      " does not match sidecar (" + std::to_string(out.ids.size()) + " rows x " +
                      std::to_string(row_bytes) + " bytes)");
    }
    out.rows.resize(out.ids.size());
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        out.rows[r].resize(static_cast<std::size_t>(out.grid_size));
        for (std::size_t c = 0; c < out.rows[r].size(); ++c) {
            const std::uint8_t* p = bin.data() + r * row_bytes + c * 4;
            const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                       (static_cast<std::uint32_t>(p[1]) << 8) |
                                       (static_cast<std::uint32_t>(p[2]) << 16) |
                                       (static_cast<std::uint32_t>(p[3]) << 24);
            out.rows[r][c] = std::bit_cast<float>(bits);
        }
    }
    return out;
}

} // namespace ramangeo::spectra
