#pragma once

#include <span>
#include <vector>

namespace offdrive {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double q);

struct Quartiles {
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
};

// Throws ContractError on empty input.
Quartiles iqr_summary(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

}  // namespace offdrive
