#pragma once

#include <span>
#include <string>
#include <vector>

namespace mmfuse {

// argmax-correct fraction; ties resolve to the lowest index
double top1_accuracy(std::span<const double> scores, int64_t rows, int64_t cols,
                     std::span<const int> labels);

// mean over categories (with at least one positive) of average precision of
// one-vs-rest scores ranked over the whole evaluation set; ties broken by
// stable sort on sample index
double mean_average_precision(std::span<const double> scores, int64_t rows, int64_t cols,
                              std::span<const int> labels);

struct MetricsRow {
    int epoch = 0;
    std::string split;
    double top1_accuracy = 0.0;
    double map = 0.0;
    double loss = 0.0;
    double rho_v = 1.0;
    double k_v = 1.0;
    double r = 0.0;
};

// shortest round-trip decimal representation
std::string format_double(double v);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

double pearson_correlation(std::span<const double> x, std::span<const double> y);
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace mmfuse
