#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmorient/matrix.hpp"

namespace mmorient {

struct TaskSpec {
    std::string name;
    std::size_t classes = 0;

    bool operator==(const TaskSpec&) const = default;
};

/// sentiment(3), humor(4), sarcasm(4), offensiveness(4), motivational(2).
std::vector<TaskSpec> default_task_specs();

/// Label value for a task the sample is not annotated for.
inline constexpr int kAbsentLabel = -1;

struct SampleRecord {
    std::string id;
    std::string raw_text;
    std::string cleaned_text;
    /// One entry per task, parallel to DatasetBundle::tasks; kAbsentLabel when unlabeled.
    std::vector<int> labels;

    bool operator==(const SampleRecord&) const = default;
};

/// Aligned per-sample feature tensors plus labels. Leading dimension of every
/// tensor is the sample count.
struct DatasetBundle {
    Matrix joint_txt;      // N×D
    Matrix joint_img;      // N×D
    Tensor3 token_feats;   // N×L_txt×d_txt
    Tensor3 region_feats;  // N×L_img×d_img
    Matrix toxicity;       // N×d_tox
    std::vector<std::uint8_t> sentiment;  // N codes in [0, 4]
    std::vector<SampleRecord> records;
    std::vector<TaskSpec> tasks;

    std::size_t size() const { return records.size(); }

    /// Throws DataError naming the first violated invariant.
    void validate() const;
};

/// Exact equality, comparing tensor payloads bit for bit.
bool bitwise_equal(const DatasetBundle& a, const DatasetBundle& b);

/// Lowercases, removes URLs and @usernames, drops symbols other than
/// sentence punctuation and collapses whitespace. Idempotent.
std::string clean_text(std::string_view raw);

/// Reads and validates a bundle directory. Errors are DataError with the
/// offending file (and index, where one applies) in the message.
DatasetBundle load_bundle(const std::filesystem::path& dir);

/// Writes every file of the bundle into `dir` (created if needed).
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Bundle subset in the order given by `indices`.
DatasetBundle select_samples(const DatasetBundle& bundle, const std::vector<std::size_t>& indices);

struct SyntheticConfig {
    std::size_t samples = 512;
    std::size_t tokens = 6;         // L_txt
    std::size_t regions = 5;        // L_img
    std::size_t token_width = 8;    // d_txt
    std::size_t region_width = 12;  // d_img
    std::size_t joint_width = 8;    // D
    std::size_t toxicity_width = 8;
    std::vector<TaskSpec> tasks = default_task_specs();
    /// Distance between adjacent class means along each task's axis.
    double separation = 6.0;
    /// Probability that any (sample, task) label is left absent.
    double absent_rate = 0.0;
};

/// Deterministic for a given (config, seed). Class-conditional Gaussian
/// clusters in every tensor family so labels are learnable.
DatasetBundle generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Nearest-centroid accuracy of task `task` using the rows of `features`.
/// Samples with an absent label are skipped.
double nearest_centroid_accuracy(const Matrix& features, const DatasetBundle& bundle,
                                 std::size_t task);

namespace tensor_io {

inline constexpr char kMagic[4] = {'M', 'M', 'O', 'R'};
inline constexpr std::uint32_t kVersion = 1;

void write_f64(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
               std::span<const double> payload);
void write_u8(const std::filesystem::path& path, const std::vector<std::uint64_t>& dims,
              std::span<const std::uint8_t> payload);

struct F64Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> payload;
};
struct U8Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;
};

F64Tensor read_f64(const std::filesystem::path& path);
U8Tensor read_u8(const std::filesystem::path& path);

}  // namespace tensor_io

}  // namespace mmorient
