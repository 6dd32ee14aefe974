#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmorient/cmrl.hpp"
#include "mmorient/dataio.hpp"
#include "mmorient/errors.hpp"
#include "mmorient/gradcheck.hpp"
#include "mmorient/learner.hpp"
#include "mmorient/metrics.hpp"
#include "mmorient/model.hpp"
#include "mmorient/numerics.hpp"
#include "mmorient/taskfeat.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mmorient::cli {

namespace {

/// Raised when a gradient check fails; carries the report already printed.
struct GradCheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::string lexicon;
};

struct ThresholdOptions {
    Thresholds values;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--thr-txt-txt", values.txt_txt, "Similarity threshold of the txt-txt graph")
            ->capture_default_str();
        cmd.add_option("--thr-img-img", values.img_img, "Similarity threshold of the img-img graph")
            ->capture_default_str();
        cmd.add_option("--thr-txt-img", values.txt_img,
                       "Threshold of the graph with text nodes and image edges")
            ->capture_default_str();
        cmd.add_option("--thr-img-txt", values.img_txt,
                       "Threshold of the graph with image nodes and text edges")
            ->capture_default_str();
    }
};

struct GenSynthOptions {
    std::string out;
    bool force = false;
    SyntheticConfig data;
};

struct TrainOptions {
    std::string data;
    std::string snapshot;
    std::string history;
    TrainConfig train;
    std::size_t beta = 200;
    std::size_t conv_out = 512;
    std::vector<std::size_t> mlp_hidden = {64, 32};
    ThresholdOptions thresholds;
};

struct EvalOptions {
    std::string data;
    std::string snapshot;
    std::string out;
    std::size_t batch_size = 128;
};

struct GradCheckCliOptions {
    std::string data;
    std::size_t batch_size = 4;
    std::size_t beta = 5;
    std::size_t conv_out = 8;
    std::vector<std::size_t> mlp_hidden = {16, 8};
    std::size_t coords = 25;
    double eps = 1e-5;
    double tolerance = 1e-4;
    double head_scale = 0.5;
    std::string corrupt;
    ThresholdOptions thresholds;
};

struct BuildGraphsOptions {
    std::string data;
    std::string out;
    std::size_t limit = 0;
    ThresholdOptions thresholds;
};

// Sibling path used for write-then-rename.
fs::path staging_path(const fs::path& target) {
    return target.parent_path() /
           (target.filename().string() + ".tmp-" + std::to_string(::getpid()));
}

void ensure_parent(const fs::path& target) {
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
}

void write_text_atomically(const fs::path& target, const std::string& content) {
    ensure_parent(target);
    const fs::path tmp = staging_path(target);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

const EmotionLexicon& lexicon_for(const GlobalOptions& g, std::optional<EmotionLexicon>& storage) {
    if (g.lexicon.empty()) return default_lexicon();
    storage = EmotionLexicon::load(g.lexicon);
    return *storage;
}

std::string fixed(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

int cmd_gen_synth(const GenSynthOptions& o, const GlobalOptions& g, std::ostream& out) {
    const fs::path target(o.out);
    if (fs::exists(target) && !o.force) {
        throw DataError("output exists: " + target.string() + " (use --force to overwrite)");
    }
    const DatasetBundle bundle = generate_synthetic(o.data, g.seed);

    ensure_parent(target);
    const fs::path tmp = staging_path(target);
    fs::remove_all(tmp);
    try {
        write_bundle(bundle, tmp);
        if (fs::exists(target)) fs::remove_all(target);
        fs::rename(tmp, target);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }

    const auto& d = o.data;
    out << "wrote " << bundle.size() << " samples to " << target.string() << "\n";
    out << "dims: tokens " << d.tokens << "x" << d.token_width << ", regions " << d.regions << "x"
        << d.region_width << ", joint " << d.joint_width << ", toxicity " << d.toxicity_width
        << ", task features " << task_feature_width(d.toxicity_width) << "\n";
    for (std::size_t t = 0; t < bundle.tasks.size(); ++t) {
        std::vector<std::size_t> hist(bundle.tasks[t].classes, 0);
        std::size_t absent = 0;
        for (const auto& r : bundle.records) {
            if (r.labels[t] == kAbsentLabel) ++absent;
            else hist[static_cast<std::size_t>(r.labels[t])]++;
        }
        out << bundle.tasks[t].name << ":";
        for (std::size_t c = 0; c < hist.size(); ++c) out << " " << c << "=" << hist[c];
        out << " absent=" << absent << "\n";
    }
    return kSuccess;
}

int cmd_train(const TrainOptions& o, const GlobalOptions& g, std::ostream& out) {
    const DatasetBundle bundle = load_bundle(o.data);
    std::optional<EmotionLexicon> lex_storage;
    const Matrix task_feats = build_task_features(bundle, lexicon_for(g, lex_storage));
    const ModelConfig config =
        ModelConfig::for_bundle(bundle, o.beta, o.conv_out, o.mlp_hidden, o.thresholds.values);

    TrainConfig tc = o.train;
    tc.seed = g.seed;
    const fs::path snapshot(o.snapshot);
    const fs::path history = o.history.empty() ? fs::path(o.snapshot + ".history.jsonl")
                                               : fs::path(o.history);

    std::string history_text;
    const auto result = train(config, ModelParams::init(config, g.seed), bundle, task_feats, tc,
                              [&](const EpochRecord& rec) {
                                  const auto line = history_line(rec, config.tasks);
                                  history_text += line + "\n";
                                  out << line << "\n" << std::flush;
                              });

    ensure_parent(snapshot);
    const fs::path tmp = staging_path(snapshot);
    save_snapshot({config, result.params}, tmp);
    write_text_atomically(history, history_text);
    fs::rename(tmp, snapshot);
    out << "snapshot: " << snapshot.string() << "\nhistory: " << history.string() << "\n";
    return kSuccess;
}

int cmd_eval(const EvalOptions& o, const GlobalOptions& g, std::ostream& out) {
    const DatasetBundle bundle = load_bundle(o.data);
    if (bundle.size() == 0) throw DataError("evaluation split is empty: " + o.data);
    const Model model = load_snapshot(o.snapshot);
    model.config.check_bundle(bundle);
    std::optional<EmotionLexicon> lex_storage;
    const Matrix task_feats = build_task_features(bundle, lexicon_for(g, lex_storage));

    const auto result = evaluate(model.config, model.params, bundle, task_feats, o.batch_size);

    std::ostringstream records;
    out << std::left << std::setw(16) << "task" << std::right << std::setw(8) << "n"
        << std::setw(10) << "accuracy" << std::setw(11) << "precision" << std::setw(9) << "recall"
        << std::setw(10) << "micro_f1" << std::setw(10) << "macro_f1" << "\n";
    for (std::size_t t = 0; t < model.config.tasks.size(); ++t) {
        const auto& task = model.config.tasks[t];
        const bool any = std::any_of(result.labels[t].begin(), result.labels[t].end(),
                                     [](int l) { return l >= 0; });
        if (!any) {
            out << std::left << std::setw(16) << task.name << std::right << std::setw(8) << 0
                << "  (no labelled samples)\n";
            continue;
        }
        const auto r = task_report(task.name, result.predicted[t], result.labels[t], task.classes);
        out << std::left << std::setw(16) << r.task << std::right << std::setw(8) << r.samples
            << std::setw(10) << fixed(r.accuracy) << std::setw(11) << fixed(r.precision)
            << std::setw(9) << fixed(r.recall) << std::setw(10) << fixed(r.micro_f1)
            << std::setw(10) << fixed(r.macro_f1) << "\n";
        json rec;
        rec["task"] = r.task;
        rec["samples"] = r.samples;
        rec["accuracy"] = r.accuracy;
        rec["precision"] = r.precision;
        rec["recall"] = r.recall;
        rec["micro_f1"] = r.micro_f1;
        rec["macro_f1"] = r.macro_f1;
        records << rec.dump() << "\n";
    }
    if (!o.out.empty()) write_text_atomically(o.out, records.str());
    return kSuccess;
}

int cmd_grad_check(const GradCheckCliOptions& o, const GlobalOptions& g, std::ostream& out) {
    if (o.batch_size == 0) throw std::invalid_argument("--batch-size must be >= 1");
    DatasetBundle bundle;
    if (o.data.empty()) {
        SyntheticConfig desk;
        desk.samples = std::max<std::size_t>(o.batch_size, 4);
        bundle = generate_synthetic(desk, g.seed);
    } else {
        bundle = load_bundle(o.data);
    }
    if (bundle.size() < o.batch_size) {
        throw DataError("grad-check needs " + std::to_string(o.batch_size) + " samples, bundle has " +
                        std::to_string(bundle.size()));
    }
    std::optional<EmotionLexicon> lex_storage;
    const Matrix task_feats = build_task_features(bundle, lexicon_for(g, lex_storage));
    const ModelConfig config =
        ModelConfig::for_bundle(bundle, o.beta, o.conv_out, o.mlp_hidden, o.thresholds.values);

    ModelParams params = ModelParams::init(config, g.seed);
    // Zero heads would block every upstream gradient and make the check vacuous.
    std::mt19937_64 rng(g.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> dist(0.0, o.head_scale);
    for (auto& head : params.heads) {
        for (auto& v : head.w.values()) v = dist(rng);
        for (auto& v : head.b.values()) v = dist(rng);
    }

    std::vector<std::size_t> idx(o.batch_size);
    std::iota(idx.begin(), idx.end(), 0);
    const Batch batch = make_batch(bundle, task_feats, idx);

    GradCheckOptions opts;
    opts.eps = o.eps;
    opts.coords_per_tensor = o.coords;
    opts.seed = g.seed;
    opts.tolerance = o.tolerance;

    GradientFn analytic;
    if (!o.corrupt.empty()) {
        const auto names = named_tensors(params, config);
        const auto it = std::find_if(names.begin(), names.end(),
                                     [&](const NamedTensor& t) { return t.name == o.corrupt; });
        if (it == names.end()) throw std::invalid_argument("unknown tensor: " + o.corrupt);
        const auto victim = static_cast<std::size_t>(it - names.begin());
        analytic = [victim](const ModelConfig& c, const ModelParams& p, const Batch& b,
                            ModelParams& grads) {
            loss_and_gradient(c, p, b, grads);
            for (auto& v : named_tensors(grads, c)[victim].tensor->values()) v = 2.0 * v + 1e-3;
        };
    }

    const auto reports = check_gradients(config, params, batch, opts, analytic);
    std::size_t name_width = 0;
    for (const auto& r : reports) name_width = std::max(name_width, r.name.size());
    const GradCheckReport* worst = nullptr;
    for (const auto& r : reports) {
        if (!worst || r.max_relative_error > worst->max_relative_error) worst = &r;
        std::ostringstream err;
        err << std::scientific << std::setprecision(3) << r.max_relative_error;
        out << std::left << std::setw(static_cast<int>(name_width) + 2) << r.name << "max_rel_err "
            << err.str() << "  coords " << r.coords.size() << "  "
            << (r.max_relative_error <= opts.tolerance ? "PASS" : "FAIL") << "\n";
    }
    const bool ok = gradients_pass(reports, opts.tolerance);
    out << "grad-check: " << reports.size() << " tensors, worst "
        << (worst ? worst->name : std::string("-")) << " "
        << (worst ? worst->max_relative_error : 0.0) << ", " << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) throw GradCheckFailure("gradient check failed");
    return kSuccess;
}

int cmd_build_graphs(const BuildGraphsOptions& o, std::ostream& out) {
    DatasetBundle bundle = load_bundle(o.data);
    if (o.limit > 0 && o.limit < bundle.size()) {
        std::vector<std::size_t> idx(o.limit);
        std::iota(idx.begin(), idx.end(), 0);
        bundle = select_samples(bundle, idx);
    }
    const auto graphs = build_relation_graphs(bundle.joint_txt, bundle.joint_img, o.thresholds.values);
    std::ostringstream rows;
    for (const auto& graph : graphs) {
        std::map<std::size_t, std::size_t> degrees;
        std::size_t isolated = 0;
        for (const auto& n : graph.neighbors) {
            degrees[n.size()]++;
            isolated += n.empty();
        }
        json hist = json::object();
        for (const auto& [deg, count] : degrees) hist[std::to_string(deg)] = count;
        json row;
        row["graph"] = std::string(graph_name(graph.kind));
        row["threshold"] = graph.threshold;
        row["nodes"] = graph.neighbors.size();
        row["edges"] = edge_count(graph.neighbors);
        row["isolated"] = isolated;
        row["degree_histogram"] = hist;
        rows << row.dump() << "\n";
    }
    out << rows.str();
    if (!o.out.empty()) write_text_atomically(o.out, rows.str());
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multimodal multitask meme classifier: synthesis, training, evaluation"};
    app.name("mmorient");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags win");

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Seed for data synthesis, initialization and shuffling")
        ->capture_default_str();
    app.add_option("--threads", global.threads, "Worker thread cap (0 = hardware concurrency)")
        ->capture_default_str();
    app.add_option("--lexicon", global.lexicon, "Emotion lexicon file (default: built-in)")
        ->check(CLI::ExistingFile);

    GenSynthOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic dataset bundle");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_flag("--force", gen.force, "Replace an existing output directory");
    gen_cmd->add_option("--samples", gen.data.samples)->capture_default_str();
    gen_cmd->add_option("--tokens", gen.data.tokens)->capture_default_str();
    gen_cmd->add_option("--regions", gen.data.regions)->capture_default_str();
    gen_cmd->add_option("--token-width", gen.data.token_width)->capture_default_str();
    gen_cmd->add_option("--region-width", gen.data.region_width)->capture_default_str();
    gen_cmd->add_option("--joint-width", gen.data.joint_width)->capture_default_str();
    gen_cmd->add_option("--toxicity-width", gen.data.toxicity_width)->capture_default_str();
    gen_cmd->add_option("--separation", gen.data.separation, "Class-mean offset in every tensor family")
        ->capture_default_str();
    gen_cmd->add_option("--absent-rate", gen.data.absent_rate, "Fraction of masked labels")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train on a bundle and write a snapshot");
    train_cmd->add_option("--data", tr.data, "Bundle directory")->required();
    train_cmd->add_option("--snapshot", tr.snapshot, "Snapshot output path")->required();
    train_cmd->add_option("--history", tr.history, "History output (default <snapshot>.history.jsonl)");
    train_cmd->add_option("--epochs", tr.train.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", tr.train.batch_size)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--lr", tr.train.learning_rate)->capture_default_str();
    train_cmd->add_option("--momentum", tr.train.momentum)->capture_default_str();
    train_cmd->add_option("--beta", tr.beta, "Attention hidden width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--conv-out", tr.conv_out, "Output channels per relation graph")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--mlp-hidden", tr.mlp_hidden, "Comma-separated hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_flag("--grad-check", tr.train.grad_check,
                        "Check gradients on the first batch of every epoch");
    tr.thresholds.add_to(*train_cmd);

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Report per-task metrics of a snapshot on a bundle");
    eval_cmd->add_option("--data", ev.data, "Bundle directory")->required();
    eval_cmd->add_option("--snapshot", ev.snapshot, "Snapshot path")->required();
    eval_cmd->add_option("--out", ev.out, "Write one JSON record per task to this file");
    eval_cmd->add_option("--batch-size", ev.batch_size, "Evaluation batch (sets the batch-bias population)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    GradCheckCliOptions gc;
    auto* gc_cmd = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
    gc_cmd->add_option("--data", gc.data, "Bundle directory (default: synthetic desk bundle)");
    gc_cmd->add_option("--batch-size", gc.batch_size)->capture_default_str();
    gc_cmd->add_option("--beta", gc.beta)->check(CLI::PositiveNumber)->capture_default_str();
    gc_cmd->add_option("--conv-out", gc.conv_out)->check(CLI::PositiveNumber)->capture_default_str();
    gc_cmd->add_option("--mlp-hidden", gc.mlp_hidden)->delimiter(',')->capture_default_str();
    gc_cmd->add_option("--coords", gc.coords, "Coordinates per tensor (0 = all)")
        ->capture_default_str();
    gc_cmd->add_option("--eps", gc.eps)->capture_default_str();
    gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
    gc_cmd->add_option("--head-scale", gc.head_scale, "Std-dev of the random head weights")
        ->capture_default_str();
    gc_cmd->add_option("--corrupt", gc.corrupt)->group("");
    gc.thresholds.add_to(*gc_cmd);

    BuildGraphsOptions bg;
    auto* bg_cmd = app.add_subcommand("build-graphs", "Report the four relation graphs of a bundle");
    bg_cmd->add_option("--data", bg.data, "Bundle directory")->required();
    bg_cmd->add_option("--out", bg.out, "Also write the report to this file");
    bg_cmd->add_option("--limit", bg.limit, "Use only the first N samples (0 = all)");
    bg.thresholds.add_to(*bg_cmd);

    try {
        // CLI11 consumes arguments from the back and without the program name.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty()) reversed.pop_back();
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    try {
        if (global.threads > 0) set_max_threads(global.threads);
        if (gc.coords > 0 && gc.coords < 25 && *gc_cmd) {
            err << "warning: fewer than 25 coordinates per tensor\n";
        }
        if (*gen_cmd) return cmd_gen_synth(gen, global, out);
        if (*train_cmd) return cmd_train(tr, global, out);
        if (*eval_cmd) return cmd_eval(ev, global, out);
        if (*gc_cmd) return cmd_grad_check(gc, global, out);
        if (*bg_cmd) return cmd_build_graphs(bg, out);
    } catch (const GradCheckFailure& e) {
        err << "error: " << e.what() << "\n";
        return kGradCheckFailure;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsage;
}

}  // namespace mmorient::cli
