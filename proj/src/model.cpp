#include "mmorient/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "mmorient/errors.hpp"
#include "mmorient/taskfeat.hpp"

namespace mmorient {

ModelConfig ModelConfig::for_bundle(const DatasetBundle& bundle, std::size_t beta,
                                    std::size_t conv_out, std::vector<std::size_t> mlp_hidden,
                                    const Thresholds& thresholds) {
    ModelConfig c;
    c.token_width = bundle.token_feats.cols();
    c.region_width = bundle.region_feats.cols();
    c.joint_width = bundle.joint_txt.cols();
    c.task_width = task_feature_width(bundle.toxicity.cols());
    c.beta = beta;
    c.conv_out = conv_out;
    c.mlp_hidden = std::move(mlp_hidden);
    c.tasks = bundle.tasks;
    c.thresholds = thresholds;
    return c;
}

void ModelConfig::check_bundle(const DatasetBundle& bundle) const {
    auto expect = [](const char* what, std::size_t want, std::size_t got) {
        if (want != got) {
            throw ShapeError(std::string("model/bundle mismatch: ") + what + " is " +
                             std::to_string(got) + " in the bundle but " + std::to_string(want) +
                             " in the model");
        }
    };
    expect("token width", token_width, bundle.token_feats.cols());
    expect("region width", region_width, bundle.region_feats.cols());
    expect("joint width", joint_width, bundle.joint_txt.cols());
    expect("task feature width", task_width, task_feature_width(bundle.toxicity.cols()));
    expect("task count", tasks.size(), bundle.tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t] != bundle.tasks[t]) {
            throw ShapeError("model/bundle mismatch: task " + std::to_string(t) + " is '" +
                             bundle.tasks[t].name + "'(" + std::to_string(bundle.tasks[t].classes) +
                             ") in the bundle but '" + tasks[t].name + "'(" +
                             std::to_string(tasks[t].classes) + ") in the model");
        }
    }
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
    ModelParams p;
    p.hima_txt = HimaParams::zeros(c.token_width, c.beta);
    p.hima_img = HimaParams::zeros(c.region_width, c.beta);
    p.cmrl = CmrlParams::zeros(c.joint_width, c.conv_out);
    std::size_t in = c.fused_width();
    for (std::size_t h : c.mlp_hidden) {
        p.mlp.push_back({Matrix(in, h), Matrix(1, h)});
        in = h;
    }
    for (const auto& t : c.tasks) p.heads.push_back({Matrix(in, t.classes), Matrix(1, t.classes)});
    return p;
}

ModelParams ModelParams::init(const ModelConfig& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p = zeros(c);
    p.hima_txt = HimaParams::init(c.token_width, c.beta, rng);
    p.hima_img = HimaParams::init(c.region_width, c.beta, rng);
    p.cmrl = CmrlParams::init(c.joint_width, c.conv_out, rng);
    for (auto& layer : p.mlp) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.w.rows() + layer.w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& v : layer.w.values()) v = dist(rng);
    }
    return p;
}

namespace {

template <typename Params, typename Entry>
std::vector<Entry> collect(Params& p, const ModelConfig& c) {
    std::vector<Entry> out;
    auto hima = [&out](const std::string& prefix, auto& h) {
        out.push_back({prefix + ".w1", &h.w1});
        out.push_back({prefix + ".b1", &h.b1});
        out.push_back({prefix + ".u1", &h.u1});
        out.push_back({prefix + ".w2", &h.w2});
        out.push_back({prefix + ".b2", &h.b2});
        out.push_back({prefix + ".u2", &h.u2});
    };
    hima("hima.txt", p.hima_txt);
    hima("hima.img", p.hima_img);
    for (GraphKind kind : kGraphKinds) {
        auto& conv = p.cmrl.conv[static_cast<std::size_t>(kind)];
        const std::string prefix = "cmrl." + std::string(graph_name(kind));
        out.push_back({prefix + ".w", &conv.w});
        out.push_back({prefix + ".b", &conv.b});
    }
    for (std::size_t i = 0; i < p.mlp.size(); ++i) {
        out.push_back({"mlp." + std::to_string(i) + ".w", &p.mlp[i].w});
        out.push_back({"mlp." + std::to_string(i) + ".b", &p.mlp[i].b});
    }
    for (std::size_t i = 0; i < p.heads.size(); ++i) {
        const std::string name = i < c.tasks.size() ? c.tasks[i].name : std::to_string(i);
        out.push_back({"head." + name + ".w", &p.heads[i].w});
        out.push_back({"head." + name + ".b", &p.heads[i].b});
    }
    return out;
}

}  // namespace

std::vector<NamedTensor> named_tensors(ModelParams& params, const ModelConfig& config) {
    return collect<ModelParams, NamedTensor>(params, config);
}

std::vector<ConstNamedTensor> named_tensors(const ModelParams& params, const ModelConfig& config) {
    return collect<const ModelParams, ConstNamedTensor>(params, config);
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b, const ModelConfig& config) {
    const auto ta = named_tensors(a, config);
    const auto tb = named_tensors(b, config);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (!bitwise_equal(*ta[i].tensor, *tb[i].tensor)) return false;
    }
    return true;
}

}  // namespace mmorient
