#pragma once

#include <cmath>
#include <vector>

#include "hsps/errors.hpp"

namespace hsps {

// Inclusive arithmetic range min, min + step, ..., up to max.
struct SweepRange {
    double min = 0.1;
    double max = 3.0;
    double step = 0.05;
};

inline std::vector<double> sweep_values(const SweepRange& range)
{
    if (!(range.step > 0) || !(range.min > 0) || !(range.max >= range.min)) {
        throw ValidationError("sweep range needs 0 < min <= max and step > 0");
    }
    const auto count = static_cast<long>(std::floor((range.max - range.min) / range.step + 1e-9)) + 1;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        values.push_back(range.min + static_cast<double>(k) * range.step);
    }
    return values;
}

}  // namespace hsps
