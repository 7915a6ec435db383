#include "mmfuse/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "mmfuse/common.hpp"

namespace mmfuse {

double top1_accuracy(std::span<const double> scores, int64_t rows, int64_t cols,
                     std::span<const int> labels) {
    if (static_cast<int64_t>(scores.size()) != rows * cols ||
        static_cast<int64_t>(labels.size()) != rows || rows == 0)
        throw ShapeError("top1_accuracy: size mismatch");
    int64_t hits = 0;
    for (int64_t i = 0; i < rows; ++i) {
        const double* row = scores.data() + i * cols;
        int64_t best = 0;
        for (int64_t j = 1; j < cols; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(rows);
}

double mean_average_precision(std::span<const double> scores, int64_t rows, int64_t cols,
                              std::span<const int> labels) {
    if (static_cast<int64_t>(scores.size()) != rows * cols ||
        static_cast<int64_t>(labels.size()) != rows || rows == 0)
        throw ShapeError("mean_average_precision: size mismatch");
    double ap_sum = 0.0;
    int64_t classes_with_pos = 0;
    std::vector<int64_t> order(static_cast<size_t>(rows));
    for (int64_t k = 0; k < cols; ++k) {
        int64_t positives = 0;
        for (int64_t i = 0; i < rows; ++i)
            if (labels[static_cast<size_t>(i)] == k) ++positives;
        if (positives == 0) continue;
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
            return scores[static_cast<size_t>(a * cols + k)] >
                   scores[static_cast<size_t>(b * cols + k)];
        });
        int64_t hits = 0;
        double ap = 0.0;
        for (int64_t rank = 0; rank < rows; ++rank) {
            if (labels[static_cast<size_t>(order[static_cast<size_t>(rank)])] == k) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        ap_sum += ap / static_cast<double>(positives);
        ++classes_with_pos;
    }
    return ap_sum / static_cast<double>(classes_with_pos);
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string metrics_csv_header() { return "epoch,split,top1_accuracy,mAP,loss,rho_v,k_v,r"; }

std::string metrics_csv_row(const MetricsRow& row) {
    std::string s = std::to_string(row.epoch);
    s += "," + row.split;
    s += "," + format_double(row.top1_accuracy);
    s += "," + format_double(row.map);
    s += "," + format_double(row.loss);
    s += "," + format_double(row.rho_v);
    s += "," + format_double(row.k_v);
    s += "," + format_double(row.r);
    return s;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = metrics_csv_header() + "\n";
    for (const auto& r : rows) out += metrics_csv_row(r) + "\n";
    return out;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ShapeError("pearson_correlation: need two series of equal length >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);  // NaN when a series is constant
}

namespace {

std::vector<double> ranks_with_ties(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
    auto rx = ranks_with_ties(x);
    auto ry = ranks_with_ties(y);
    return pearson_correlation(rx, ry);
}

}  // namespace mmfuse
