#include <cmath>
#include <random>
#include <stdexcept>

#include "mmorient/dataio.hpp"
#include "mmorient/errors.hpp"
#include "mmorient/taskfeat.hpp"

namespace mmorient {

namespace {

constexpr const char* kFillerWords[] = {
    "when", "you", "the", "meme", "my", "face", "monday", "cat", "dog", "weekend",
    "boss", "exam", "coffee", "friends", "nobody", "everyone", "me", "trying", "to", "be",
    "after", "before", "internet", "phone", "time", "really", "just", "that", "moment", "again"};

// Offset that cluster `cls` of a `classes`-way task contributes along the
// task's axis: classes sit at equal spacing `separation`, centred on zero.
double class_offset(int cls, std::size_t classes, double separation) {
    return (static_cast<double>(cls) - 0.5 * static_cast<double>(classes - 1)) * separation;
}

}  // namespace

DatasetBundle generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.samples == 0 || cfg.tokens == 0 || cfg.regions == 0 || cfg.token_width == 0 ||
        cfg.region_width == 0 || cfg.joint_width == 0 || cfg.toxicity_width == 0) {
        throw std::invalid_argument("generate_synthetic: all dimensions must be positive");
    }
    if (cfg.tasks.empty()) throw std::invalid_argument("generate_synthetic: no tasks");
    for (const auto& t : cfg.tasks) {
        if (t.classes < 2) throw std::invalid_argument("generate_synthetic: task with < 2 classes");
        if (cfg.samples < t.classes) {
            throw std::invalid_argument("generate_synthetic: fewer samples than classes of '" +
                                        t.name + "'");
        }
    }
    if (!(cfg.absent_rate >= 0.0 && cfg.absent_rate < 1.0)) {
        throw std::invalid_argument("generate_synthetic: absent_rate must be in [0, 1)");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_index = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    const std::size_t n = cfg.samples;
    const std::size_t task_count = cfg.tasks.size();

    // Balanced labels: class i mod C, then a seeded Fisher-Yates shuffle.
    std::vector<std::vector<int>> labels(task_count, std::vector<int>(n));
    for (std::size_t t = 0; t < task_count; ++t) {
        auto& col = labels[t];
        for (std::size_t i = 0; i < n; ++i) col[i] = static_cast<int>(i % cfg.tasks[t].classes);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(col[i], col[draw_index(i + 1)]);
    }

    auto fill_row = [&](std::span<double> row, std::size_t sample) {
        for (auto& v : row) v = noise(rng);
        for (std::size_t t = 0; t < task_count; ++t) {
            row[t % row.size()] +=
                class_offset(labels[t][sample], cfg.tasks[t].classes, cfg.separation);
        }
    };

    DatasetBundle b;
    b.tasks = cfg.tasks;
    b.joint_txt = Matrix(n, cfg.joint_width);
    b.joint_img = Matrix(n, cfg.joint_width);
    b.toxicity = Matrix(n, cfg.toxicity_width);
    b.token_feats = Tensor3(n, cfg.tokens, cfg.token_width);
    b.region_feats = Tensor3(n, cfg.regions, cfg.region_width);
    b.sentiment.resize(n);

    const auto lexicon_words = default_lexicon().words();
    std::vector<double> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        fill_row(b.joint_txt.row(i), i);
        fill_row(b.joint_img.row(i), i);
        fill_row(b.toxicity.row(i), i);
        scratch.resize(cfg.token_width);
        for (std::size_t r = 0; r < cfg.tokens; ++r) {
            fill_row(scratch, i);
            for (std::size_t c = 0; c < cfg.token_width; ++c) b.token_feats(i, r, c) = scratch[c];
        }
        scratch.resize(cfg.region_width);
        for (std::size_t r = 0; r < cfg.regions; ++r) {
            fill_row(scratch, i);
            for (std::size_t c = 0; c < cfg.region_width; ++c) b.region_feats(i, r, c) = scratch[c];
        }
        b.sentiment[i] = static_cast<std::uint8_t>(draw_index(kSentimentCodes));

        SampleRecord rec;
        rec.id = "syn" + std::to_string(i);
        const std::size_t words = 6 + draw_index(7);
        std::string text;
        for (std::size_t w = 0; w < words; ++w) {
            if (!text.empty()) text.push_back(' ');
            if (unit(rng) < 0.3) {
                text += lexicon_words[draw_index(lexicon_words.size())];
            } else {
                text += kFillerWords[draw_index(std::size(kFillerWords))];
            }
            if (w == 0 && unit(rng) < 0.2) text = "@user" + std::to_string(i) + " " + text;
        }
        if (unit(rng) < 0.2) text += " http://example.com/" + std::to_string(i);
        if (unit(rng) < 0.3) text += " !!";
        rec.raw_text = text;
        rec.cleaned_text = clean_text(text);
        rec.labels.resize(task_count);
        for (std::size_t t = 0; t < task_count; ++t) {
            const bool absent = cfg.absent_rate > 0.0 && unit(rng) < cfg.absent_rate;
            rec.labels[t] = absent ? kAbsentLabel : labels[t][i];
        }
        b.records.push_back(std::move(rec));
    }
    b.validate();
    return b;
}

double nearest_centroid_accuracy(const Matrix& features, const DatasetBundle& bundle,
                                 std::size_t task) {
    const std::size_t classes = bundle.tasks.at(task).classes;
    Matrix centroids(classes, features.cols());
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        const int label = bundle.records[i].labels[task];
        if (label == kAbsentLabel) continue;
        auto dst = centroids.row(static_cast<std::size_t>(label));
        const auto src = features.row(i);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) continue;
        for (auto& v : centroids.row(c)) v /= static_cast<double>(counts[c]);
    }
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        const int label = bundle.records[i].labels[task];
        if (label == kAbsentLabel) continue;
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t c = 0; c < classes; ++c) {
            if (counts[c] == 0) continue;
            double dist = 0.0;
            for (std::size_t j = 0; j < features.cols(); ++j) {
                const double d = features(i, j) - centroids(c, j);
                dist += d * d;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        correct += (best == static_cast<std::size_t>(label)) ? 1 : 0;
        ++total;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace mmorient
