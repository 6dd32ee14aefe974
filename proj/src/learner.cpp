#include "mmorient/learner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "mmorient/errors.hpp"
#include "mmorient/gradcheck.hpp"
#include "mmorient/metrics.hpp"
#include "mmorient/numerics.hpp"

namespace mmorient {

namespace {

constexpr double kProbFloor = 1e-12;

FusedLayout layout_of(const ModelConfig& c) {
    return {c.attention_width(), c.relation_width(), c.task_width};
}

Matrix gelu_of(const Matrix& pre) {
    Matrix out = pre;
    for (auto& v : out.values()) v = gelu(v);
    return out;
}

Matrix affine(const Matrix& in, const Dense& layer) {
    Matrix out = matmul(in, layer.w);
    add_row_vector(out, layer.b);
    return out;
}

void check_labels(const std::vector<Matrix>& probs, const std::vector<std::vector<int>>& labels) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k].size() != probs.size()) {
            throw ShapeError("loss: sample " + std::to_string(k) + " has " +
                             std::to_string(labels[k].size()) + " labels for " +
                             std::to_string(probs.size()) + " tasks");
        }
    }
}

}  // namespace

Batch make_batch(const DatasetBundle& bundle, const Matrix& task_features,
                 std::span<const std::size_t> indices) {
    if (task_features.rows() != bundle.size()) {
        throw ShapeError("make_batch: task features do not cover the bundle");
    }
    Batch b;
    b.tokens.reserve(indices.size());
    b.regions.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= bundle.size()) throw std::out_of_range("make_batch: sample index out of range");
        b.tokens.push_back(bundle.token_feats.slice(i));
        b.regions.push_back(bundle.region_feats.slice(i));
        b.labels.push_back(bundle.records[i].labels);
    }
    b.joint_txt = gather_rows(bundle.joint_txt, indices);
    b.joint_img = gather_rows(bundle.joint_img, indices);
    b.task_features = gather_rows(task_features, indices);
    return b;
}

Matrix fuse(const Matrix& attention, const Matrix& relation, const Matrix& task,
            const FusedLayout& layout) {
    if (attention.cols() != layout.attention || relation.cols() != layout.relation ||
        task.cols() != layout.task) {
        throw ShapeError("fuse: component widths " + std::to_string(attention.cols()) + "/" +
                         std::to_string(relation.cols()) + "/" + std::to_string(task.cols()) +
                         " do not match " + std::to_string(layout.attention) + "/" +
                         std::to_string(layout.relation) + "/" + std::to_string(layout.task));
    }
    return hconcat({&attention, &relation, &task});
}

ForwardState forward(const ModelConfig& config, const ModelParams& params, const Batch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("forward: empty batch");
    ForwardState st;
    st.hima = hima_forward(batch.tokens, batch.regions, params.hima_txt, params.hima_img);
    st.cmrl = cmrl_forward(batch.joint_txt, batch.joint_img, config.thresholds, params.cmrl);
    st.fused = fuse(st.hima.joint, st.cmrl.joint, batch.task_features, layout_of(config));

    const Matrix* in = &st.fused;
    for (const auto& layer : params.mlp) {
        st.mlp_pre.push_back(affine(*in, layer));
        st.mlp_act.push_back(gelu_of(st.mlp_pre.back()));
        in = &st.mlp_act.back();
    }
    for (const auto& head : params.heads) {
        st.logits.push_back(affine(*in, head));
        const Matrix& logits = st.logits.back();
        Matrix probs(logits.rows(), logits.cols());
        for (std::size_t k = 0; k < logits.rows(); ++k) {
            const auto p = softmax(logits.row(k));
            std::copy(p.begin(), p.end(), probs.row(k).begin());
        }
        st.probs.push_back(std::move(probs));
    }
    return st;
}

std::vector<Prediction> predictions(const ForwardState& state) {
    const std::size_t b = state.fused.rows();
    std::vector<Prediction> out(b);
    for (std::size_t k = 0; k < b; ++k) {
        for (const auto& probs : state.probs) {
            const auto row = probs.row(k);
            out[k].probs.emplace_back(row.begin(), row.end());
            out[k].classes.push_back(
                static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    }
    return out;
}

std::vector<double> per_task_losses(const std::vector<Matrix>& probs,
                                    const std::vector<std::vector<int>>& labels) {
    check_labels(probs, labels);
    std::vector<double> losses(probs.size(), 0.0);
    if (labels.empty()) return losses;
    for (std::size_t t = 0; t < probs.size(); ++t) {
        for (std::size_t k = 0; k < labels.size(); ++k) {
            const int y = labels[k][t];
            if (y == kAbsentLabel) continue;
            losses[t] -= std::log(std::max(probs[t](k, static_cast<std::size_t>(y)), kProbFloor));
        }
        losses[t] /= static_cast<double>(labels.size());
    }
    return losses;
}

double multitask_loss(const std::vector<Matrix>& probs,
                      const std::vector<std::vector<int>>& labels) {
    double total = 0.0;
    for (double l : per_task_losses(probs, labels)) total += l;
    return total;
}

double batch_loss(const ModelConfig& config, const ModelParams& params, const Batch& batch) {
    return multitask_loss(forward(config, params, batch).probs, batch.labels);
}

double loss_and_gradient(const ModelConfig& config, const ModelParams& params, const Batch& batch,
                         ModelParams& grads) {
    const ForwardState st = forward(config, params, batch);
    const double loss = multitask_loss(st.probs, batch.labels);
    grads = ModelParams::zeros(config);

    const std::size_t b = batch.size();
    const double scale = 1.0 / static_cast<double>(b);
    const Matrix& hidden = st.hidden();
    Matrix grad_hidden(b, hidden.cols());
    for (std::size_t t = 0; t < params.heads.size(); ++t) {
        const Matrix& probs = st.probs[t];
        Matrix grad_logits(b, probs.cols());
        for (std::size_t k = 0; k < b; ++k) {
            const int y = batch.labels[k][t];
            if (y == kAbsentLabel) continue;
            const auto label = static_cast<std::size_t>(y);
            // The clamp makes the loss term constant, hence zero gradient.
            if (probs(k, label) < kProbFloor) continue;
            for (std::size_t c = 0; c < probs.cols(); ++c) {
                grad_logits(k, c) = scale * (probs(k, c) - (c == label ? 1.0 : 0.0));
            }
        }
        axpy(1.0, matmul_tn(hidden, grad_logits), grads.heads[t].w);
        axpy(1.0, column_sums(grad_logits), grads.heads[t].b);
        axpy(1.0, matmul_nt(grad_logits, params.heads[t].w), grad_hidden);
    }

    Matrix grad = std::move(grad_hidden);
    for (std::size_t l = params.mlp.size(); l-- > 0;) {
        const Matrix& pre = st.mlp_pre[l];
        const Matrix& in = l == 0 ? st.fused : st.mlp_act[l - 1];
        auto g = grad.values();
        const auto p = pre.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= gelu_derivative(p[i]);
        axpy(1.0, matmul_tn(in, grad), grads.mlp[l].w);
        axpy(1.0, column_sums(grad), grads.mlp[l].b);
        grad = matmul_nt(grad, params.mlp[l].w);
    }

    const FusedLayout layout = layout_of(config);
    hima_backward(columns(grad, 0, layout.attention), st.hima, params.hima_txt, params.hima_img,
                  grads.hima_txt, grads.hima_img);
    cmrl_backward(columns(grad, layout.attention, layout.relation), st.cmrl, params.cmrl,
                  grads.cmrl);
    return loss;
}

Optimizer::Optimizer(const ModelConfig& config, double learning_rate, double momentum)
    : config_(config),
      learning_rate_(learning_rate),
      momentum_(momentum),
      velocity_(ModelParams::zeros(config)) {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must be in [0, 1)");
    }
}

double Optimizer::step(ModelParams& params, const Batch& batch) {
    ModelParams grads;
    const double loss = loss_and_gradient(config_, params, batch, grads);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss (" + std::to_string(loss) + ")");
    auto g = named_tensors(grads, config_);
    auto v = named_tensors(velocity_, config_);
    auto p = named_tensors(params, config_);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!all_finite(g[i].tensor->values())) {
            throw NumericError("non-finite gradient in tensor '" + g[i].name + "'");
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto vel = v[i].tensor->values();
        const auto grad = g[i].tensor->values();
        auto par = p[i].tensor->values();
        for (std::size_t j = 0; j < vel.size(); ++j) {
            vel[j] = momentum_ * vel[j] + grad[j];
            par[j] -= learning_rate_ * vel[j];
        }
    }
    return loss;
}

std::string history_line(const EpochRecord& record, const std::vector<TaskSpec>& tasks) {
    nlohmann::ordered_json f1 = nlohmann::ordered_json::object();
    for (std::size_t t = 0; t < tasks.size() && t < record.micro_f1.size(); ++t) {
        f1[tasks[t].name] = record.micro_f1[t];
    }
    nlohmann::ordered_json line;
    line["epoch"] = record.epoch;
    line["loss"] = record.loss;
    line["micro_f1"] = f1;
    return line.dump();
}

EvalResult evaluate(const ModelConfig& config, const ModelParams& params,
                    const DatasetBundle& bundle, const Matrix& task_features,
                    std::size_t batch_size) {
    if (bundle.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be >= 1");
    const std::size_t tasks = config.tasks.size();
    EvalResult r;
    r.predicted.assign(tasks, std::vector<int>(bundle.size()));
    r.labels.assign(tasks, std::vector<int>(bundle.size()));
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < bundle.size(); start += batch_size) {
        const std::size_t end = std::min(bundle.size(), start + batch_size);
        idx.clear();
        for (std::size_t i = start; i < end; ++i) idx.push_back(i);
        const Batch batch = make_batch(bundle, task_features, idx);
        const auto preds = predictions(forward(config, params, batch));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            for (std::size_t t = 0; t < tasks; ++t) {
                r.predicted[t][idx[k]] = preds[k].classes[t];
                r.labels[t][idx[k]] = batch.labels[k][t];
            }
        }
    }
    return r;
}

TrainResult train(const ModelConfig& config, ModelParams params, const DatasetBundle& bundle,
                  const Matrix& task_features, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
    if (tc.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(tc.learning_rate > 0.0) && tc.epochs > 0) {
        throw std::invalid_argument("train: learning rate must be > 0");
    }
    config.check_bundle(bundle);
    TrainResult result;
    Optimizer optimizer(config, tc.learning_rate, tc.momentum);
    std::mt19937_64 rng(tc.seed);
    std::vector<std::size_t> order(bundle.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Batch batch = make_batch(bundle, task_features, idx);
            if (tc.grad_check && start == 0) {
                GradCheckOptions opts;
                opts.coords_per_tensor = 4;
                opts.seed = tc.seed + epoch;
                const auto reports = check_gradients(config, params, batch, opts);
                if (!gradients_pass(reports, opts.tolerance)) {
                    throw NumericError("gradient check failed at epoch " + std::to_string(epoch));
                }
            }
            try {
                loss_sum += optimizer.step(params, batch) * static_cast<double>(idx.size());
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                   ", batch starting at position " + std::to_string(start));
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(order.size());
        const auto eval = evaluate(config, params, bundle, task_features, tc.batch_size);
        for (std::size_t t = 0; t < config.tasks.size(); ++t) {
            double f1 = 0.0;
            try {
                f1 = task_report(config.tasks[t].name, eval.predicted[t], eval.labels[t],
                                 config.tasks[t].classes)
                         .micro_f1;
            } catch (const std::invalid_argument&) {
                // Task without a single label in this bundle.
            }
            rec.micro_f1.push_back(f1);
        }
        if (on_epoch) on_epoch(rec);
        result.history.push_back(std::move(rec));
    }
    result.params = std::move(params);
    return result;
}

}  // namespace mmorient
