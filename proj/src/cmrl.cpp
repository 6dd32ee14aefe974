#include "mmorient/cmrl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmorient/errors.hpp"
#include "mmorient/numerics.hpp"

namespace mmorient {

Modality node_modality(GraphKind kind) {
    return (kind == GraphKind::ImgImg || kind == GraphKind::ImgTxt) ? Modality::Image
                                                                    : Modality::Text;
}

Modality edge_modality(GraphKind kind) {
    return (kind == GraphKind::ImgImg || kind == GraphKind::TxtImg) ? Modality::Image
                                                                    : Modality::Text;
}

std::string_view graph_name(GraphKind kind) {
    switch (kind) {
        case GraphKind::ImgImg: return "img-img";
        case GraphKind::TxtTxt: return "txt-txt";
        case GraphKind::ImgTxt: return "img-txt";
        case GraphKind::TxtImg: return "txt-img";
    }
    return "?";
}

double Thresholds::for_graph(GraphKind kind) const {
    switch (kind) {
        case GraphKind::ImgImg: return img_img;
        case GraphKind::TxtTxt: return txt_txt;
        case GraphKind::ImgTxt: return img_txt;
        case GraphKind::TxtImg: return txt_img;
    }
    return txt_txt;
}

namespace {

std::vector<bool> zero_rows_of(const Matrix& x) {
    std::vector<bool> zero(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        bool all_zero = true;
        for (double v : x.row(i)) all_zero = all_zero && v == 0.0;
        zero[i] = all_zero;
    }
    return zero;
}

}  // namespace

Adjacency adjacency_from_similarity(const Matrix& similarity, const std::vector<bool>& zero_rows,
                                    double threshold) {
    const std::size_t n = similarity.rows();
    Adjacency adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (zero_rows[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (zero_rows[j] || !(similarity(i, j) >= threshold)) continue;
            adj[i].push_back(static_cast<std::uint32_t>(j));
            adj[j].push_back(static_cast<std::uint32_t>(i));
        }
    }
    // Pushes happen in increasing order of the partner index, so lists are sorted.
    return adj;
}

Adjacency build_adjacency(const Matrix& x, double threshold) {
    return adjacency_from_similarity(cosine_similarity_matrix(l2_normalize_rows(x)),
                                     zero_rows_of(x), threshold);
}

std::size_t edge_count(const Adjacency& adj) {
    std::size_t twice = 0;
    for (const auto& list : adj) twice += list.size();
    return twice / 2;
}

RelationGraphs build_relation_graphs(const Matrix& x_txt, const Matrix& x_img,
                                     const Thresholds& thresholds) {
    const Matrix sim_txt = cosine_similarity_matrix(l2_normalize_rows(x_txt));
    const Matrix sim_img = cosine_similarity_matrix(l2_normalize_rows(x_img));
    const auto zero_txt = zero_rows_of(x_txt);
    const auto zero_img = zero_rows_of(x_img);
    RelationGraphs graphs;
    for (GraphKind kind : kGraphKinds) {
        const bool by_text = edge_modality(kind) == Modality::Text;
        auto& g = graphs[static_cast<std::size_t>(kind)];
        g.kind = kind;
        g.threshold = thresholds.for_graph(kind);
        g.neighbors = adjacency_from_similarity(by_text ? sim_txt : sim_img,
                                                by_text ? zero_txt : zero_img, g.threshold);
    }
    return graphs;
}

ConvParams ConvParams::zeros(std::size_t in_width, std::size_t out_width) {
    return {Matrix(2 * in_width, out_width), Matrix(1, out_width)};
}

ConvParams ConvParams::init(std::size_t in_width, std::size_t out_width, std::mt19937_64& rng) {
    ConvParams p = zeros(in_width, out_width);
    const double limit = std::sqrt(6.0 / static_cast<double>(p.w.rows() + p.w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : p.w.values()) v = dist(rng);
    return p;
}

CmrlParams CmrlParams::zeros(std::size_t in_width, std::size_t out_width) {
    CmrlParams p;
    for (auto& c : p.conv) c = ConvParams::zeros(in_width, out_width);
    return p;
}

CmrlParams CmrlParams::init(std::size_t in_width, std::size_t out_width, std::mt19937_64& rng) {
    CmrlParams p;
    for (auto& c : p.conv) c = ConvParams::init(in_width, out_width, rng);
    return p;
}

namespace {

// Row k of [mean of neighbors, self]. Neighbor rows are summed in
// lexicographic order of their contents, which makes the result independent
// of node numbering (bitwise permutation equivariance).
void aggregate_row(std::size_t k, const Matrix& x, const Adjacency& adj, std::span<double> dst) {
    const std::size_t d = x.cols();
    std::vector<std::uint32_t> nbrs = adj[k];
    std::sort(nbrs.begin(), nbrs.end(), [&x](std::uint32_t a, std::uint32_t b) {
        const auto ra = x.row(a);
        const auto rb = x.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    for (std::size_t j = 0; j < d; ++j) dst[j] = 0.0;
    if (!nbrs.empty()) {
        for (auto n : nbrs) {
            const auto src = x.row(n);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        const double inv = static_cast<double>(nbrs.size());
        for (std::size_t j = 0; j < d; ++j) dst[j] /= inv;
    }
    const auto self = x.row(k);
    for (std::size_t j = 0; j < d; ++j) dst[d + j] = self[j];
}

void affine_row(std::span<const double> in, const ConvParams& p, std::span<double> out) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = p.b(0, c);
    for (std::size_t r = 0; r < in.size(); ++r) {
        const double v = in[r];
        const auto wr = p.w.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += v * wr[c];
    }
}

void normalize_into(std::span<const double> in, std::span<double> out) {
    const double norm = l2_norm(in);
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = norm == 0.0 ? 0.0 : in[c] / norm;
}

void check_conv_shapes(const Matrix& x, const Adjacency& adj, const ConvParams& params) {
    if (params.w.rows() != 2 * x.cols()) {
        throw ShapeError("graph_sage_conv: W has " + std::to_string(params.w.rows()) +
                         " rows, expected " + std::to_string(2 * x.cols()));
    }
    if (adj.size() != x.rows()) throw ShapeError("graph_sage_conv: adjacency size != node count");
}

}  // namespace

std::vector<double> graph_sage_conv(std::size_t k, const Matrix& x, const Adjacency& adj,
                                    const ConvParams& params) {
    if (k >= x.rows()) throw std::out_of_range("graph_sage_conv: node index out of range");
    check_conv_shapes(x, adj, params);
    std::vector<double> concat(2 * x.cols());
    aggregate_row(k, x, adj, concat);
    std::vector<double> pre(params.w.cols());
    affine_row(concat, params, pre);
    std::vector<double> out(pre.size());
    normalize_into(pre, out);
    return out;
}

CmrlState cmrl_forward(const Matrix& x_txt, const Matrix& x_img, const Thresholds& thresholds,
                       const CmrlParams& params) {
    if (x_txt.rows() != x_img.rows()) throw ShapeError("cmrl_forward: row counts differ");
    return cmrl_forward(x_txt, x_img, build_relation_graphs(x_txt, x_img, thresholds), params);
}

CmrlState cmrl_forward(const Matrix& x_txt, const Matrix& x_img, const RelationGraphs& graphs,
                       const CmrlParams& params) {
    if (x_txt.rows() != x_img.rows()) throw ShapeError("cmrl_forward: row counts differ");
    const std::size_t n = x_txt.rows();
    CmrlState st;
    st.graphs = graphs;
    std::size_t total_width = 0;
    for (GraphKind kind : kGraphKinds) {
        const std::size_t g = static_cast<std::size_t>(kind);
        const Matrix& x = node_modality(kind) == Modality::Text ? x_txt : x_img;
        const ConvParams& p = params.conv[g];
        check_conv_shapes(x, graphs[g].neighbors, p);
        st.concat[g] = Matrix(n, 2 * x.cols());
        st.pre[g] = Matrix(n, p.w.cols());
        st.out[g] = Matrix(n, p.w.cols());
        parallel_for(n, [&](std::size_t k) {
            aggregate_row(k, x, graphs[g].neighbors, st.concat[g].row(k));
            affine_row(st.concat[g].row(k), p, st.pre[g].row(k));
            normalize_into(st.pre[g].row(k), st.out[g].row(k));
        });
        total_width += p.w.cols();
    }
    st.joint = Matrix(n, total_width);
    for (std::size_t k = 0; k < n; ++k) {
        auto dst = st.joint.row(k).begin();
        for (const auto& block : st.out) {
            const auto src = block.row(k);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return st;
}

void cmrl_backward(const Matrix& grad_joint, const CmrlState& st, const CmrlParams& params,
                   CmrlParams& grads) {
    const std::size_t n = st.joint.rows();
    if (st.joint.empty()) throw std::logic_error("cmrl_backward: missing forward state");
    if (grad_joint.rows() != n || grad_joint.cols() != st.joint.cols()) {
        throw ShapeError("cmrl_backward: upstream gradient shape mismatch");
    }
    std::size_t offset = 0;
    for (std::size_t g = 0; g < 4; ++g) {
        const std::size_t width = params.conv[g].w.cols();
        Matrix grad_pre(n, width);
        for (std::size_t k = 0; k < n; ++k) {
            const auto pre = st.pre[g].row(k);
            const auto y = st.out[g].row(k);
            const double norm = l2_norm(pre);
            if (norm == 0.0) continue;
            double inner = 0.0;
            for (std::size_t c = 0; c < width; ++c) inner += y[c] * grad_joint(k, offset + c);
            for (std::size_t c = 0; c < width; ++c) {
                grad_pre(k, c) = (grad_joint(k, offset + c) - y[c] * inner) / norm;
            }
        }
        axpy(1.0, matmul_tn(st.concat[g], grad_pre), grads.conv[g].w);
        axpy(1.0, column_sums(grad_pre), grads.conv[g].b);
        offset += width;
    }
}

}  // namespace mmorient
