// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "desk.hpp"
#include "mmorient/cmrl.hpp"
#include "mmorient/gradcheck.hpp"
#include "mmorient/hima.hpp"
#include "mmorient/metrics.hpp"
#include "oracles.hpp"

using namespace mmorient;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& criterion) {
    Outcome o;
    try {
        o = criterion();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> row_of(const Matrix& m, std::size_t r) {
    const auto s = m.row(r);
    return {s.begin(), s.end()};
}

HimaParams random_hima(std::size_t d, std::size_t beta, std::mt19937_64& rng) {
    HimaParams p = HimaParams::zeros(d, beta);
    for (Matrix* m : {&p.w1, &p.b1, &p.u1, &p.w2, &p.b2, &p.u2})
        *m = oracle::random_matrix(m->rows(), m->cols(), rng, 0.6);
    return p;
}

CmrlParams random_cmrl(std::size_t d, std::size_t c, std::mt19937_64& rng) {
    CmrlParams p = CmrlParams::zeros(d, c);
    for (auto& conv : p.conv) {
        conv.w = oracle::random_matrix(2 * d, c, rng, 0.5);
        conv.b = oracle::random_matrix(1, c, rng, 0.5);
    }
    return p;
}

Matrix clustered(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    const auto centers = oracle::random_matrix(3, d, rng);
    Matrix x = oracle::random_matrix(n, d, rng, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng() % 3;
        for (std::size_t j = 0; j < d; ++j) x(i, j) += centers(c, j);
    }
    return x;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

// Graph thresholds low enough that random desk batches have edges.
const Thresholds kDenseThresholds{0.3, 0.2, 0.4, 0.1};

Outcome gradient_verification() {
    const auto start = Clock::now();
    const auto bundle = generate_synthetic(desk::data_config(4), 13);
    const auto feats = build_task_features(bundle, default_lexicon());
    const auto config = desk::model_config(bundle);
    auto params = ModelParams::init(config, 13);
    desk::randomize_heads(params, 14);
    const auto batch = desk::whole_batch(bundle, feats);
    GradCheckOptions opts;  // every coordinate, eps 1e-5, denominator floor 1e-5
    const auto reports = check_gradients(config, params, batch, opts);
    const auto worst = std::max_element(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        return a.max_relative_error < b.max_relative_error;
    });
    std::size_t coords = 0;
    double abs_diff = 0.0;
    for (const auto& r : reports) {
        coords += r.coords.size();
        for (std::size_t i = 0; i < r.coords.size(); ++i)
            abs_diff = std::max(abs_diff, std::abs(r.analytic[i] - r.numeric[i]));
    }
    const double elapsed = seconds_since(start);
    const bool ok = gradients_pass(reports, 1e-4) && elapsed <= 60.0;
    return {ok, std::to_string(reports.size()) + " tensors, " + std::to_string(coords) +
                    " coordinates, worst " + worst->name + fmt(" %.3e", worst->max_relative_error) +
                    " (limit 1e-4; |a-n|/max(|a|,|n|,1e-5)), max |a-n| " + fmt("%.2e, ", abs_diff) +
                    fmt("%.2f s", elapsed) + " (limit 60 s)"};
}

Outcome initial_loss() {
    const double closed_form = std::log(3.0) + 3 * std::log(4.0) + std::log(2.0);
    SyntheticConfig cfg;
    cfg.samples = 128;
    const auto bundle = generate_synthetic(cfg, 7);
    const auto feats = build_task_features(bundle, default_lexicon());
    const auto config = ModelConfig::for_bundle(bundle, 200, 512, {64, 32});
    std::vector<std::size_t> idx(bundle.size());
    std::iota(idx.begin(), idx.end(), 0);
    const double loss = batch_loss(config, ModelParams::init(config, 7), make_batch(bundle, feats, idx));
    const double err = std::abs(loss - closed_form);
    return {err <= 1e-6, fmt("loss %.12f", loss) + fmt(" vs ln3+3ln4+ln2 = %.12f", closed_form) +
                             fmt(", |diff| %.2e (limit 1e-6)", err)};
}

Outcome learnability() {
    set_max_threads(1);
    SyntheticConfig cfg;
    cfg.samples = 512;
    cfg.separation = 6.0;
    const auto bundle = generate_synthetic(cfg, 7);
    double probe = 1.0;
    for (std::size_t t = 0; t < bundle.tasks.size(); ++t)
        probe = std::min(probe, nearest_centroid_accuracy(bundle.joint_txt, bundle, t));
    const auto feats = build_task_features(bundle, default_lexicon());
    const auto config = ModelConfig::for_bundle(bundle, 200, 512, {64, 32});
    TrainConfig tc;  // batch 128, lr 0.05, no momentum
    tc.epochs = 50;
    tc.seed = 7;

    const auto start = Clock::now();
    const auto first = train(config, ModelParams::init(config, 7), bundle, feats, tc);
    const double elapsed = seconds_since(start);
    const auto second = train(config, ModelParams::init(config, 7), bundle, feats, tc);
    set_max_threads(0);

    const auto& final_f1 = first.history.back().micro_f1;
    const double worst = *std::min_element(final_f1.begin(), final_f1.end());
    const bool identical = first.history == second.history;
    const bool loss_drops = first.history[9].loss < first.history[0].loss;
    const bool ok = worst >= 0.95 && elapsed <= 120.0 && identical && loss_drops;
    std::string detail = "centroid probe " + fmt("%.3f", probe) + ", final micro-F1";
    for (std::size_t t = 0; t < final_f1.size(); ++t) detail += " " + config.tasks[t].name + fmt("=%.4f", final_f1[t]);
    detail += " (min 0.95), " + fmt("%.1f s single-threaded", elapsed) + " (limit 120 s), history " +
              (identical ? "bit-identical" : "DIFFERS") + " across two runs, loss epoch10 " +
              fmt("%.4f", first.history[9].loss) + " < epoch1 " + fmt("%.4f", first.history[0].loss);
    return {ok, detail};
}

Outcome noise_isolation() {
    std::mt19937_64 rng(101);
    const std::size_t txt_img = static_cast<std::size_t>(GraphKind::TxtImg);
    int held = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 14;
        const auto xt = clustered(n, 8, rng);
        const auto xi = clustered(n, 8, rng);
        const auto params = random_cmrl(8, 8, rng);
        const auto graphs = build_relation_graphs(xt, xi, kDenseThresholds);
        const auto base = cmrl_forward(xt, xi, graphs, params);
        Matrix noisy = xi;
        std::normal_distribution<double> noise(0.0, 1.0 + static_cast<double>(trial % 5));
        for (auto& v : noisy.values()) v += noise(rng);
        const auto moved = cmrl_forward(xt, noisy, graphs, params);
        held += bitwise_equal(moved.out[txt_img], base.out[txt_img]) &&
                !bitwise_equal(moved.out[static_cast<std::size_t>(GraphKind::ImgImg)],
                               base.out[static_cast<std::size_t>(GraphKind::ImgImg)]);
    }
    return {held == 100, std::to_string(held) +
                             "/100 trials with txt-img block bitwise unchanged under image noise "
                             "(img-img block changed as a control)"};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(202);
    double s1 = 0, s2 = 0, conv = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng() % 11, beta = 1 + rng() % 8, l = 1 + rng() % 8;
        const auto p = random_hima(d, beta, rng);
        const auto rows = oracle::random_matrix(l, d, rng);
        const auto r = stage1_attention(rows, p);
        const auto o = oracle::attention_pool(oracle::to_mat(rows), oracle::to_mat(p.w1), oracle::to_vec(p.b1),
                                              oracle::to_vec(p.u1));
        s1 = std::max({s1, max_abs_diff(r.pooled, o.pooled), max_abs_diff(r.attention, o.weights)});
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng() % 11, beta = 1 + rng() % 8, b = 1 + rng() % 8;
        const auto p = random_hima(d, beta, rng);
        const auto t = oracle::random_matrix(b, d, rng);
        const auto r = stage2_attention(t, p);
        const auto o = oracle::attention_pool(oracle::to_mat(t), oracle::to_mat(p.w2), oracle::to_vec(p.b2),
                                              oracle::to_vec(p.u2));
        s2 = std::max({s2, max_abs_diff(r.batch_bias, o.pooled), max_abs_diff(r.weights, o.weights)});
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 10, d = 2 + rng() % 7, c = 1 + rng() % 8;
        const auto x = clustered(n, d, rng);
        const auto params = random_cmrl(d, c, rng).conv[0];
        const auto adj = build_adjacency(x, 0.2);
        std::vector<std::vector<std::size_t>> lists(n);
        for (std::size_t i = 0; i < n; ++i) lists[i].assign(adj[i].begin(), adj[i].end());
        for (std::size_t k = 0; k < n; ++k) {
            const auto expected = oracle::sage_conv(k, oracle::to_mat(x), lists, oracle::to_mat(params.w),
                                                    oracle::to_vec(params.b));
            conv = std::max(conv, max_abs_diff(graph_sage_conv(k, x, adj, params), expected));
        }
    }
    const bool ok = s1 <= 1e-10 && s2 <= 1e-10 && conv <= 1e-10;
    return {ok, fmt("max |diff| stage1 %.2e", s1) + fmt(", stage2 %.2e", s2) + fmt(", graph conv %.2e", conv) +
                    " over 100 random configs each (limit 1e-10)"};
}

Outcome structural_invariants() {
    std::mt19937_64 rng(303);
    int cases = 0, violations = 0;
    auto check = [&](bool ok) {
        ++cases;
        violations += !ok;
    };
    // Attention normalization.
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t b = 1 + rng() % 6, d = 2 + rng() % 6, l = 1 + rng() % 7;
        std::vector<Matrix> batch;
        for (std::size_t i = 0; i < b; ++i) batch.push_back(oracle::random_matrix(l, d, rng));
        const auto st = hima_modality_forward(batch, random_hima(d, 1 + rng() % 6, rng));
        bool ok = std::abs(std::accumulate(st.weights.begin(), st.weights.end(), 0.0) - 1.0) <= 1e-9;
        for (const auto& att : st.attention) ok &= std::abs(std::accumulate(att.begin(), att.end(), 0.0) - 1.0) <= 1e-9;
        check(ok);
    }
    // Adjacency symmetry and irreflexivity.
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 20;
        const auto adj = build_adjacency(clustered(n, 2 + rng() % 6, rng), -0.5 + 0.15 * static_cast<double>(rng() % 10));
        bool ok = adj.size() == n;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::uint32_t j : adj[i])
                ok &= j != i && std::binary_search(adj[j].begin(), adj[j].end(), static_cast<std::uint32_t>(i));
        check(ok);
    }
    // Unit-or-zero conv blocks, with some all-zero parameter sets mixed in.
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 8, d = 2 + rng() % 5, c = 1 + rng() % 6;
        auto params = random_cmrl(d, c, rng);
        if (trial % 7 == 0) params.conv[trial % 4] = ConvParams::zeros(d, c);
        const auto st = cmrl_forward(clustered(n, d, rng), clustered(n, d, rng), Thresholds{}, params);
        bool ok = true;
        for (std::size_t g = 0; g < 4; ++g)
            for (std::size_t k = 0; k < n; ++k) {
                const auto out = st.out[g].row(k);
                const double norm = std::sqrt(std::inner_product(out.begin(), out.end(), out.begin(), 0.0));
                ok &= norm == 0.0 || std::abs(norm - 1.0) <= 1e-9;
            }
        check(ok);
    }
    // CMRL permutation equivariance, exact.
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 12, d = 2 + rng() % 6, c = 2 + rng() % 5;
        const auto xt = clustered(n, d, rng), xi = clustered(n, d, rng);
        const auto params = random_cmrl(d, c, rng);
        const auto perm = random_permutation(n, rng);
        const auto base = cmrl_forward(xt, xi, kDenseThresholds, params);
        const auto moved = cmrl_forward(gather_rows(xt, perm), gather_rows(xi, perm), kDenseThresholds, params);
        bool ok = true;
        for (std::size_t i = 0; i < n; ++i) ok &= row_of(moved.joint, i) == row_of(base.joint, perm[i]);
        check(ok);
    }
    // Each sample's Z_k invariant to the order of the rest of the batch, exact.
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = 2 + rng() % 6;
        std::vector<Matrix> txt, img;
        for (std::size_t i = 0; i < b; ++i) {
            txt.push_back(oracle::random_matrix(6, 8, rng));
            img.push_back(oracle::random_matrix(5, 12, rng));
        }
        const auto pt = random_hima(8, 5, rng), pi = random_hima(12, 5, rng);
        const auto perm = random_permutation(b, rng);
        std::vector<Matrix> txt_p, img_p;
        for (std::size_t i : perm) {
            txt_p.push_back(txt[i]);
            img_p.push_back(img[i]);
        }
        const auto base = hima_forward(txt, img, pt, pi);
        const auto moved = hima_forward(txt_p, img_p, pt, pi);
        bool ok = true;
        for (std::size_t i = 0; i < b; ++i) ok &= row_of(moved.joint, i) == row_of(base.joint, perm[i]);
        check(ok);
    }
    return {violations == 0 && cases >= 500,
            std::to_string(cases) + " cases (minimum 500), " + std::to_string(violations) +
                " violations: attention sums, adjacency symmetry/irreflexivity, unit-or-zero blocks, "
                "relation permutation equivariance, batch-order invariance of Z_k"};
}

Outcome metric_oracle() {
    std::mt19937_64 rng(404);
    auto random_case = [&](std::vector<int>& pred, std::vector<int>& label) {
        const int classes = 2 + static_cast<int>(rng() % 5);
        const std::size_t n = 1 + rng() % 80;
        const bool skilled = rng() % 2;
        pred.clear();
        label.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const int l = static_cast<int>(rng() % static_cast<unsigned>(classes));
            label.push_back(l);
            pred.push_back(skilled && rng() % 3 ? l : static_cast<int>(rng() % static_cast<unsigned>(classes)));
        }
        return classes;
    };
    double worst = 0.0;
    std::vector<int> pred, label;
    for (int trial = 0; trial < 200; ++trial) {
        const int c = random_case(pred, label);
        const auto cls = static_cast<std::size_t>(c);
        const auto o = oracle::metrics(pred, label, c);
        worst = std::max({worst, std::abs(accuracy(pred, label, cls) - o.accuracy),
                          std::abs(precision(pred, label, cls) - o.precision),
                          std::abs(recall(pred, label, cls) - o.recall),
                          std::abs(micro_f1(pred, label, cls) - o.micro_f1),
                          std::abs(macro_f1(pred, label, cls) - o.macro_f1)});
    }
    double identity = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto cls = static_cast<std::size_t>(random_case(pred, label));
        identity = std::max(identity, std::abs(micro_f1(pred, label, cls) - accuracy(pred, label, cls)));
    }
    return {worst <= 1e-12 && identity <= 1e-12,
            fmt("max |diff| vs confusion-matrix oracle %.2e over 200 cases", worst) +
                fmt(", max |micro-F1 - accuracy| %.2e over 500 cases (limit 1e-12)", identity)};
}

Outcome complexity() {
    set_max_threads(1);
    std::mt19937_64 rng(505);
    auto timed = [&](std::size_t n) -> double {
        const auto x = oracle::random_matrix(n, 512, rng);
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 5; ++rep) {
            const auto start = Clock::now();
            const auto adj = build_adjacency(x, 0.8);
            best = std::min(best, seconds_since(start));
            if (adj.size() != n) return std::numeric_limits<double>::quiet_NaN();
        }
        return best;
    };
    const double t1 = timed(1024);
    const double t2 = timed(2048);
    set_max_threads(0);
    const double ratio = t2 / t1;
    return {ratio >= 3.0 && ratio <= 6.0, fmt("graph build %.4f s at 1024 nodes, ", t1) +
                                              fmt("%.4f s at 2048 (D=512, 1 thread, min of 5), ", t2) +
                                              fmt("ratio %.2f (allowed [3, 6])", ratio)};
}

Outcome round_trips() {
    const auto root = std::filesystem::temp_directory_path() / ("mmorient-accept-" + std::to_string(::getpid()));
    std::filesystem::create_directories(root);
    std::mt19937_64 rng(606);
    int bundles = 0, snapshots = 0;
    for (int i = 0; i < 20; ++i) {
        SyntheticConfig cfg;
        cfg.samples = 4 + rng() % 40;
        cfg.tokens = 1 + rng() % 7;
        cfg.regions = 1 + rng() % 7;
        cfg.token_width = 3 + rng() % 10;
        cfg.region_width = 3 + rng() % 14;
        cfg.joint_width = 3 + rng() % 8;
        cfg.toxicity_width = 1 + rng() % 10;
        cfg.absent_rate = (i % 3 == 0) ? 0.25 : 0.0;
        const auto bundle = generate_synthetic(cfg, rng());
        const auto dir = root / ("bundle" + std::to_string(i));
        write_bundle(bundle, dir);
        bundles += bitwise_equal(bundle, load_bundle(dir));

        ModelConfig mc = ModelConfig::for_bundle(bundle, 1 + rng() % 9, 1 + rng() % 9,
                                                 {1 + rng() % 12, 1 + rng() % 6},
                                                 Thresholds{0.1 * static_cast<double>(rng() % 10), 0.8, 0.85, 0.75});
        if (i % 4 == 0) mc.mlp_hidden = {};
        auto params = ModelParams::init(mc, rng());
        desk::randomize_heads(params, rng());
        const auto path = root / ("model" + std::to_string(i) + ".snap");
        save_snapshot({mc, params}, path);
        const auto loaded = load_snapshot(path);
        snapshots += loaded.config == mc && bitwise_equal(loaded.params, params, mc);
    }
    std::filesystem::remove_all(root);
    return {bundles == 20 && snapshots == 20, std::to_string(bundles) + "/20 bundles and " +
                                                  std::to_string(snapshots) +
                                                  "/20 snapshots reload bitwise identical"};
}

}  // namespace

int main() {
    report("gradient-verification", gradient_verification);
    report("initial-loss", initial_loss);
    report("synthetic-learnability", learnability);
    report("noise-isolation", noise_isolation);
    report("oracle-equivalence", oracle_equivalence);
    report("structural-invariants", structural_invariants);
    report("metric-oracle", metric_oracle);
    report("complexity", complexity);
    report("format-round-trips", round_trips);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
