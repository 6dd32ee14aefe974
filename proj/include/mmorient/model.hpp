#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmorient/cmrl.hpp"
#include "mmorient/dataio.hpp"
#include "mmorient/hima.hpp"
#include "mmorient/matrix.hpp"

namespace mmorient {

/// Shapes and fixed hyperparameters of the multitask network.
struct ModelConfig {
    std::size_t token_width = 768;    // d_txt
    std::size_t region_width = 2048;  // d_img
    std::size_t joint_width = 512;    // D
    std::size_t task_width = 783;     // |T|
    std::size_t beta = 200;
    std::size_t conv_out = 512;       // C
    std::vector<std::size_t> mlp_hidden = {64, 32};
    std::vector<TaskSpec> tasks = default_task_specs();
    Thresholds thresholds;

    /// Widths taken from the bundle; the rest from the arguments.
    static ModelConfig for_bundle(const DatasetBundle& bundle, std::size_t beta,
                                  std::size_t conv_out, std::vector<std::size_t> mlp_hidden,
                                  const Thresholds& thresholds = {});

    std::size_t attention_width() const { return 2 * token_width + 2 * region_width; }
    std::size_t relation_width() const { return 4 * conv_out; }
    std::size_t fused_width() const { return attention_width() + relation_width() + task_width; }
    std::size_t hidden_width() const {
        return mlp_hidden.empty() ? fused_width() : mlp_hidden.back();
    }

    /// Throws ShapeError if the bundle's tensor widths differ from this config.
    void check_bundle(const DatasetBundle& bundle) const;

    bool operator==(const ModelConfig&) const = default;
};

struct Dense {
    Matrix w;  // in×out
    Matrix b;  // 1×out
};

struct ModelParams {
    HimaParams hima_txt;
    HimaParams hima_img;
    CmrlParams cmrl;
    std::vector<Dense> mlp;
    std::vector<Dense> heads;  // one per task

    static ModelParams zeros(const ModelConfig& config);
    /// Seeded initialization; task heads start at zero.
    static ModelParams init(const ModelConfig& config, std::uint64_t seed);
};

struct NamedTensor {
    std::string name;
    Matrix* tensor;
};
struct ConstNamedTensor {
    std::string name;
    const Matrix* tensor;
};

/// Every trainable tensor with a stable name, in a fixed order.
std::vector<NamedTensor> named_tensors(ModelParams& params, const ModelConfig& config);
std::vector<ConstNamedTensor> named_tensors(const ModelParams& params, const ModelConfig& config);

bool bitwise_equal(const ModelParams& a, const ModelParams& b, const ModelConfig& config);

struct Model {
    ModelConfig config;
    ModelParams params;
};

/// Binary snapshot: magic "MMOS", version, tensor directory, float64 payloads.
/// Thresholds travel as the tensor "config.thresholds".
void save_snapshot(const Model& model, const std::filesystem::path& path);

/// Reconstructs config and params from the tensor directory.
Model load_snapshot(const std::filesystem::path& path);

/// Loads and checks every tensor against the shapes `expected` implies;
/// mismatches raise ShapeError naming the tensor.
Model load_snapshot(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace mmorient
