#include "mmorient/hima.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmorient/errors.hpp"
#include "mmorient/numerics.hpp"

namespace mmorient {

namespace {

void glorot_uniform(Matrix& m, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : m.values()) v = dist(rng);
}

void uniform(Matrix& m, double limit, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : m.values()) v = dist(rng);
}

// rows·W + b, then GELU. Returns (pre-activation, activation).
std::pair<Matrix, Matrix> affine_gelu(const Matrix& rows, const Matrix& w, const Matrix& b) {
    Matrix pre = matmul(rows, w);
    add_row_vector(pre, b);
    Matrix act = pre;
    for (auto& v : act.values()) v = gelu(v);
    return {std::move(pre), std::move(act)};
}

// Scores hidden·u per row.
std::vector<double> context_scores(const Matrix& hidden, const Matrix& u) {
    std::vector<double> scores(hidden.rows());
    for (std::size_t i = 0; i < hidden.rows(); ++i) scores[i] = dot(hidden.row(i), u.row(0));
    return scores;
}

// Row indices sorted by row content. Sums taken in this order do not depend on
// how the rows were arranged, so permuting the input permutes the attention
// weights exactly and leaves the pooled vector bit-identical.
std::vector<std::size_t> content_order(const Matrix& rows) {
    std::vector<std::size_t> order(rows.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&rows](std::size_t a, std::size_t b) {
        const auto ra = rows.row(a);
        const auto rb = rows.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    return order;
}

struct Pooled {
    std::vector<double> weights;
    std::vector<double> pooled;
};

// weights = softmax(scores); pooled = Σ weights_i rows_i.
Pooled softmax_pool(const Matrix& rows, const std::vector<double>& scores) {
    const auto order = content_order(rows);
    const double peak = *std::max_element(scores.begin(), scores.end());
    Pooled r;
    r.weights.resize(scores.size());
    double denom = 0.0;
    for (std::size_t i : order) {
        r.weights[i] = std::exp(scores[i] - peak);
        denom += r.weights[i];
    }
    for (auto& w : r.weights) w /= denom;
    r.pooled.assign(rows.cols(), 0.0);
    for (std::size_t i : order) {
        const auto row = rows.row(i);
        for (std::size_t j = 0; j < r.pooled.size(); ++j) r.pooled[j] += r.weights[i] * row[j];
    }
    return r;
}

// Backward through: pre = rows·W + b; hidden = gelu(pre); score = hidden·u;
// weights = softmax(score); out = Σ weights_i rows_i.
// Accumulates dW, db, du and returns dL/drows.
Matrix attention_pool_backward(std::span<const double> grad_out, const Matrix& rows,
                               const Matrix& pre, const Matrix& hidden,
                               const std::vector<double>& weights, const Matrix& w,
                               const Matrix& u, Matrix& grad_w, Matrix& grad_b, Matrix& grad_u) {
    const std::size_t n = rows.rows();
    Matrix grad_rows(n, rows.cols());
    std::vector<double> grad_weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        grad_weights[i] = dot(grad_out, rows.row(i));
        auto gr = grad_rows.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) gr[j] = weights[i] * grad_out[j];
    }
    const auto grad_scores = softmax_backward(weights, grad_weights);

    Matrix grad_pre(n, pre.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const double gs = grad_scores[i];
        const auto h = hidden.row(i);
        auto gu = grad_u.row(0);
        auto gp = grad_pre.row(i);
        for (std::size_t j = 0; j < gp.size(); ++j) {
            gu[j] += gs * h[j];
            gp[j] = gs * u(0, j) * gelu_derivative(pre(i, j));
        }
    }
    axpy(1.0, matmul_tn(rows, grad_pre), grad_w);
    axpy(1.0, column_sums(grad_pre), grad_b);
    axpy(1.0, matmul_nt(grad_pre, w), grad_rows);
    return grad_rows;
}

}  // namespace

HimaParams HimaParams::zeros(std::size_t width, std::size_t beta) {
    return {Matrix(width, beta), Matrix(1, beta), Matrix(1, beta),
            Matrix(width, beta), Matrix(1, beta), Matrix(1, beta)};
}

HimaParams HimaParams::init(std::size_t width, std::size_t beta, std::mt19937_64& rng) {
    HimaParams p = zeros(width, beta);
    glorot_uniform(p.w1, rng);
    uniform(p.u1, 0.05, rng);
    glorot_uniform(p.w2, rng);
    uniform(p.u2, 0.05, rng);
    return p;
}

Stage1Result stage1_attention(const Matrix& rows, const HimaParams& params) {
    if (rows.rows() == 0) throw std::invalid_argument("stage1_attention: sample has no rows");
    const auto [pre, hidden] = affine_gelu(rows, params.w1, params.b1);
    auto [weights, pooled] = softmax_pool(rows, context_scores(hidden, params.u1));
    return {std::move(pooled), std::move(weights)};
}

Stage2Result stage2_attention(const Matrix& pooled, const HimaParams& params) {
    if (pooled.rows() == 0) throw std::invalid_argument("stage2_attention: empty batch");
    const auto [pre, hidden] = affine_gelu(pooled, params.w2, params.b2);
    auto [weights, bias] = softmax_pool(pooled, context_scores(hidden, params.u2));
    return {std::move(bias), std::move(weights)};
}

HimaModalityState hima_modality_forward(const std::vector<Matrix>& batch,
                                        const HimaParams& params) {
    if (batch.empty()) throw std::invalid_argument("hima_forward: empty batch");
    const std::size_t b = batch.size();
    const std::size_t d = params.width();
    HimaModalityState st;
    st.inputs = batch;
    st.pre1.resize(b);
    st.hidden1.resize(b);
    st.attention.resize(b);
    st.pooled = Matrix(b, d);
    for (const Matrix& rows : batch) {
        if (rows.rows() == 0) throw std::invalid_argument("stage1_attention: sample has no rows");
        if (rows.cols() != d) throw ShapeError("hima: feature width does not match W1");
    }
    parallel_for(b, [&](std::size_t y) {
        const Matrix& rows = batch[y];
        auto [pre, hidden] = affine_gelu(rows, params.w1, params.b1);
        auto [weights, t] = softmax_pool(rows, context_scores(hidden, params.u1));
        st.attention[y] = std::move(weights);
        std::copy(t.begin(), t.end(), st.pooled.row(y).begin());
        st.pre1[y] = std::move(pre);
        st.hidden1[y] = std::move(hidden);
    });

    auto [pre2, hidden2] = affine_gelu(st.pooled, params.w2, params.b2);
    auto [weights, bias] = softmax_pool(st.pooled, context_scores(hidden2, params.u2));
    st.weights = std::move(weights);
    st.batch_bias = std::move(bias);
    st.pre2 = std::move(pre2);
    st.hidden2 = std::move(hidden2);

    st.z = Matrix(b, 2 * d);
    for (std::size_t k = 0; k < b; ++k) {
        auto z = st.z.row(k);
        const auto t = st.pooled.row(k);
        std::copy(t.begin(), t.end(), z.begin());
        std::copy(st.batch_bias.begin(), st.batch_bias.end(), z.begin() + static_cast<std::ptrdiff_t>(d));
    }
    return st;
}

void hima_modality_backward(const Matrix& grad_z, const HimaModalityState& st,
                            const HimaParams& params, HimaParams& grads) {
    const std::size_t b = st.pooled.rows();
    const std::size_t d = params.width();
    if (b == 0 || st.inputs.size() != b) {
        throw std::logic_error("hima_backward: missing forward state");
    }
    if (grad_z.rows() != b || grad_z.cols() != 2 * d) {
        throw ShapeError("hima_backward: upstream gradient shape mismatch");
    }

    // z_k = [t_k, s]: the batch bias s receives gradient from every sample.
    Matrix grad_pooled(b, d);
    std::vector<double> grad_bias(d, 0.0);
    for (std::size_t k = 0; k < b; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            grad_pooled(k, j) = grad_z(k, j);
            grad_bias[j] += grad_z(k, d + j);
        }
    }

    const Matrix grad_pooled_stage2 =
        attention_pool_backward(grad_bias, st.pooled, st.pre2, st.hidden2, st.weights, params.w2,
                                params.u2, grads.w2, grads.b2, grads.u2);
    axpy(1.0, grad_pooled_stage2, grad_pooled);

    for (std::size_t y = 0; y < b; ++y) {
        attention_pool_backward(grad_pooled.row(y), st.inputs[y], st.pre1[y], st.hidden1[y],
                                st.attention[y], params.w1, params.u1, grads.w1, grads.b1,
                                grads.u1);
    }
}

HimaState hima_forward(const std::vector<Matrix>& txt_batch, const std::vector<Matrix>& img_batch,
                       const HimaParams& txt_params, const HimaParams& img_params) {
    if (txt_batch.size() != img_batch.size()) {
        throw ShapeError("hima_forward: text and image batch sizes differ");
    }
    HimaState st;
    st.txt = hima_modality_forward(txt_batch, txt_params);
    st.img = hima_modality_forward(img_batch, img_params);
    st.joint = hconcat({&st.txt.z, &st.img.z});
    return st;
}

void hima_backward(const Matrix& grad_joint, const HimaState& st, const HimaParams& txt_params,
                   const HimaParams& img_params, HimaParams& txt_grads, HimaParams& img_grads) {
    const std::size_t wt = st.txt.z.cols();
    const std::size_t wi = st.img.z.cols();
    if (grad_joint.cols() != wt + wi) throw ShapeError("hima_backward: joint gradient width");
    hima_modality_backward(columns(grad_joint, 0, wt), st.txt, txt_params, txt_grads);
    hima_modality_backward(columns(grad_joint, wt, wi), st.img, img_params, img_grads);
}

}  // namespace mmorient
