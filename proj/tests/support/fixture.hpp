#pragma once

// Separable-by-construction synthetic dataset: each class is a Gaussian peak
// at a class-specific grid position with small jitter and baseline noise.

#include <cmath>
#include <string>
#include <vector>

#include "ramangeo/rng.hpp"
#include "ramangeo/train.hpp"

namespace testsupport {

inline ramangeo::train::Dataset gaussian_fixture(int samples, int grid_size, int classes,
                                                 std::uint64_t seed) {
    using namespace ramangeo;
    train::Dataset data;
    data.grid_size = static_cast<std::size_t>(grid_size);
    for (int c = 0; c < classes; ++c) {
        data.class_labels.push_back("Peakland-" + std::to_string(c));
    }
    Rng rng = seeded_rng(seed);
    for (int s = 0; s < samples; ++s) {
        const int c = s % classes;
        const double center =
            grid_size * (static_cast<double>(c + 1) / (classes + 1) +
                         0.02 * (uniform_real(rng) - 0.5));
        const double width = grid_size * (0.02 + 0.01 * uniform_real(rng));
        std::vector<float> row(static_cast<std::size_t>(grid_size));
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < grid_size; ++i) {
            const double d = (i - center) / width;
            const double v = std::exp(-0.5 * d * d) + 0.03 * uniform_real(rng);
            row[static_cast<std::size_t>(i)] = static_cast<float>(v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (auto& v : row) {
            v = static_cast<float>((v - lo) / (hi - lo));
        }
        data.x.push_back(std::move(row));
        data.y.push_back(c);
        data.ids.push_back("fixture-" + std::to_string(s));
    }
    return data;
}

} // namespace testsupport
