#include "mmorient/metrics.hpp"

#include <stdexcept>

namespace mmorient {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double class_f1(const ClassCounts& c) {
    return ratio(2 * c.true_positive, 2 * c.true_positive + c.false_positive + c.false_negative);
}

}  // namespace

ConfusionCounts confusion_counts(std::span<const int> predicted, std::span<const int> labels,
                                 std::size_t classes) {
    if (predicted.size() != labels.size()) {
        throw std::invalid_argument("metrics: predictions and labels differ in length");
    }
    if (predicted.empty()) throw std::invalid_argument("metrics: empty input");
    ConfusionCounts counts;
    counts.per_class.resize(classes);
    counts.total = predicted.size();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const int p = predicted[i];
        const int y = labels[i];
        if (p < 0 || y < 0 || static_cast<std::size_t>(p) >= classes ||
            static_cast<std::size_t>(y) >= classes) {
            throw std::invalid_argument("metrics: class index out of range at position " +
                                        std::to_string(i));
        }
        if (p == y) {
            ++counts.correct;
            ++counts.per_class[static_cast<std::size_t>(p)].true_positive;
        } else {
            ++counts.per_class[static_cast<std::size_t>(p)].false_positive;
            ++counts.per_class[static_cast<std::size_t>(y)].false_negative;
        }
    }
    return counts;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels, std::size_t classes) {
    const auto c = confusion_counts(predicted, labels, classes);
    return ratio(c.correct, c.total);
}

double precision(std::span<const int> predicted, std::span<const int> labels, std::size_t classes) {
    const auto c = confusion_counts(predicted, labels, classes);
    double sum = 0.0;
    for (const auto& k : c.per_class) sum += ratio(k.true_positive, k.true_positive + k.false_positive);
    return sum / static_cast<double>(classes);
}

double recall(std::span<const int> predicted, std::span<const int> labels, std::size_t classes) {
    const auto c = confusion_counts(predicted, labels, classes);
    double sum = 0.0;
    for (const auto& k : c.per_class) sum += ratio(k.true_positive, k.true_positive + k.false_negative);
    return sum / static_cast<double>(classes);
}

double micro_f1(std::span<const int> predicted, std::span<const int> labels, std::size_t classes) {
    const auto c = confusion_counts(predicted, labels, classes);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& k : c.per_class) {
        tp += k.true_positive;
        fp += k.false_positive;
        fn += k.false_negative;
    }
    return ratio(2 * tp, 2 * tp + fp + fn);
}

double macro_f1(std::span<const int> predicted, std::span<const int> labels, std::size_t classes) {
    const auto c = confusion_counts(predicted, labels, classes);
    double sum = 0.0;
    for (const auto& k : c.per_class) sum += class_f1(k);
    return sum / static_cast<double>(classes);
}

MetricReport task_report(const std::string& task, std::span<const int> predicted,
                         std::span<const int> labels, std::size_t classes) {
    if (predicted.size() != labels.size()) {
        throw std::invalid_argument("metrics: predictions and labels differ in length");
    }
    std::vector<int> p;
    std::vector<int> y;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        p.push_back(predicted[i]);
        y.push_back(labels[i]);
    }
    if (y.empty()) throw std::invalid_argument("metrics: no labelled samples for task '" + task + "'");
    MetricReport r;
    r.task = task;
    r.samples = y.size();
    r.accuracy = accuracy(p, y, classes);
    r.precision = precision(p, y, classes);
    r.recall = recall(p, y, classes);
    r.micro_f1 = micro_f1(p, y, classes);
    r.macro_f1 = macro_f1(p, y, classes);
    r.counts = confusion_counts(p, y, classes);
    return r;
}

}  // namespace mmorient
