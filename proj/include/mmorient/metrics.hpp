#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mmorient {

struct ClassCounts {
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t false_negative = 0;
};

struct ConfusionCounts {
    std::vector<ClassCounts> per_class;
    std::size_t total = 0;
    std::size_t correct = 0;
};

/// Single-label multiclass counts. Throws std::invalid_argument on empty or
/// unequal-length input, or a class index outside [0, classes).
ConfusionCounts confusion_counts(std::span<const int> predicted, std::span<const int> labels,
                                 std::size_t classes);

// Per-class precision, recall and F1 are 0 wherever their denominator is 0.
double accuracy(std::span<const int> predicted, std::span<const int> labels, std::size_t classes);
/// Macro-averaged over all `classes`.
double precision(std::span<const int> predicted, std::span<const int> labels, std::size_t classes);
/// Macro-averaged over all `classes`.
double recall(std::span<const int> predicted, std::span<const int> labels, std::size_t classes);
/// F1 of globally pooled TP/FP/FN.
double micro_f1(std::span<const int> predicted, std::span<const int> labels, std::size_t classes);
/// Unweighted mean of per-class F1 over all `classes`.
double macro_f1(std::span<const int> predicted, std::span<const int> labels, std::size_t classes);

struct MetricReport {
    std::string task;
    std::size_t samples = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    ConfusionCounts counts;
};

/// Metrics over the pairs whose label is not masked (negative).
/// Throws std::invalid_argument when no labelled pair remains.
MetricReport task_report(const std::string& task, std::span<const int> predicted,
                         std::span<const int> labels, std::size_t classes);

}  // namespace mmorient
