#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmorient/cmrl.hpp"
#include "mmorient/dataio.hpp"
#include "mmorient/hima.hpp"
#include "mmorient/model.hpp"

namespace mmorient {

/// Gathered model inputs for one mini-batch.
struct Batch {
    std::vector<Matrix> tokens;   // B × (L_txt×d_txt)
    std::vector<Matrix> regions;  // B × (L_img×d_img)
    Matrix joint_txt;             // B×D
    Matrix joint_img;             // B×D
    Matrix task_features;         // B×|T|
    std::vector<std::vector<int>> labels;  // B × tasks, kAbsentLabel when masked

    std::size_t size() const { return tokens.size(); }
};

/// `task_features` is the N×|T| output of build_task_features for the bundle.
Batch make_batch(const DatasetBundle& bundle, const Matrix& task_features,
                 std::span<const std::size_t> indices);

struct FusedLayout {
    std::size_t attention = 0;  // |Z|
    std::size_t relation = 0;   // |H|
    std::size_t task = 0;       // |T|
    std::size_t total() const { return attention + relation + task; }
};

/// Row-wise Z ∥ H ∥ T. Throws ShapeError when row counts differ or the
/// widths disagree with `layout`.
Matrix fuse(const Matrix& attention, const Matrix& relation, const Matrix& task,
            const FusedLayout& layout);

struct ForwardState {
    HimaState hima;
    CmrlState cmrl;
    Matrix fused;                      // B×|M|
    std::vector<Matrix> mlp_pre;       // per layer, before GELU
    std::vector<Matrix> mlp_act;       // per layer, after GELU
    std::vector<Matrix> logits;        // per task, B×C_i
    std::vector<Matrix> probs;         // per task, B×C_i

    const Matrix& hidden() const { return mlp_act.empty() ? fused : mlp_act.back(); }
};

ForwardState forward(const ModelConfig& config, const ModelParams& params, const Batch& batch);

struct Prediction {
    std::vector<std::vector<double>> probs;  // per task
    std::vector<int> classes;                // per task argmax
};

std::vector<Prediction> predictions(const ForwardState& state);

/// Batch-mean of −log ŷ[label] for each task; masked entries contribute 0.
/// Probabilities are clamped below at 1e-12 before the log.
std::vector<double> per_task_losses(const std::vector<Matrix>& probs,
                                    const std::vector<std::vector<int>>& labels);
/// Sum of per_task_losses.
double multitask_loss(const std::vector<Matrix>& probs, const std::vector<std::vector<int>>& labels);

/// Loss of the batch and its gradient with respect to every parameter.
double loss_and_gradient(const ModelConfig& config, const ModelParams& params, const Batch& batch,
                         ModelParams& grads);

double batch_loss(const ModelConfig& config, const ModelParams& params, const Batch& batch);

struct TrainConfig {
    std::size_t batch_size = 128;
    double learning_rate = 0.05;
    double momentum = 0.0;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    /// Run a gradient check on the first batch of every epoch; a failure
    /// raises NumericError.
    bool grad_check = false;
};

/// Mini-batch gradient descent with optional classical momentum:
/// v ← μ·v + g, θ ← θ − η·v.
class Optimizer {
public:
    Optimizer(const ModelConfig& config, double learning_rate, double momentum);

    /// Computes the batch gradient, applies one step and returns the loss.
    /// Throws NumericError (parameters untouched) when the loss is non-finite.
    double step(ModelParams& params, const Batch& batch);

private:
    ModelConfig config_;
    double learning_rate_;
    double momentum_;
    ModelParams velocity_;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;               // sample-weighted mean of batch losses
    std::vector<double> micro_f1;    // per task, on the training bundle after the epoch

    bool operator==(const EpochRecord&) const = default;
};

/// One JSON object per line: {"epoch":..,"loss":..,"micro_f1":{task: value}}.
std::string history_line(const EpochRecord& record, const std::vector<TaskSpec>& tasks);

struct TrainResult {
    ModelParams params;
    std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded shuffles per epoch, per-batch graphs, history after every epoch.
TrainResult train(const ModelConfig& config, ModelParams params, const DatasetBundle& bundle,
                  const Matrix& task_features, const TrainConfig& train_config,
                  const EpochCallback& on_epoch = {});

struct EvalResult {
    std::vector<std::vector<int>> predicted;  // task × N
    std::vector<std::vector<int>> labels;     // task × N (kAbsentLabel when masked)
};

/// Predictions over consecutive batches of `batch_size` in bundle order.
EvalResult evaluate(const ModelConfig& config, const ModelParams& params,
                    const DatasetBundle& bundle, const Matrix& task_features,
                    std::size_t batch_size);

}  // namespace mmorient
