#pragma once

// Cross-modal relation learning.
//
// Four relation graphs are built over the samples of a batch. Graph (m1, m2)
// takes its node features from modality m1 and its edges from thresholded
// cosine similarity of modality m2. Each graph gets one mean-aggregating
// GraphSAGE convolution; the per-graph outputs are concatenated into H_k.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "mmorient/matrix.hpp"

namespace mmorient {

enum class Modality { Text, Image };

/// Graph order matches the concatenation order of H_k.
enum class GraphKind : std::size_t { ImgImg = 0, TxtTxt = 1, ImgTxt = 2, TxtImg = 3 };

inline constexpr std::array<GraphKind, 4> kGraphKinds = {GraphKind::ImgImg, GraphKind::TxtTxt,
                                                         GraphKind::ImgTxt, GraphKind::TxtImg};

Modality node_modality(GraphKind kind);
Modality edge_modality(GraphKind kind);
/// "img-img", "txt-txt", "img-txt", "txt-img".
std::string_view graph_name(GraphKind kind);

struct Thresholds {
    double txt_txt = 0.7;
    double img_img = 0.8;
    double txt_img = 0.85;
    double img_txt = 0.75;

    double for_graph(GraphKind kind) const;
    bool operator==(const Thresholds&) const = default;
};

/// Sorted neighbor lists; symmetric and without self-loops.
using Adjacency = std::vector<std::vector<std::uint32_t>>;

/// Edge (i, j), i ≠ j, iff cosine(X_i, X_j) ≥ threshold. All-zero rows get no edges.
Adjacency build_adjacency(const Matrix& x, double threshold);

/// Same rule applied to a precomputed similarity matrix.
Adjacency adjacency_from_similarity(const Matrix& similarity, const std::vector<bool>& zero_rows,
                                    double threshold);

std::size_t edge_count(const Adjacency& adj);

struct RelationGraph {
    GraphKind kind = GraphKind::ImgImg;
    double threshold = 0.0;
    Adjacency neighbors;

    bool operator==(const RelationGraph&) const = default;
};

using RelationGraphs = std::array<RelationGraph, 4>;

RelationGraphs build_relation_graphs(const Matrix& x_txt, const Matrix& x_img,
                                     const Thresholds& thresholds);

struct ConvParams {
    Matrix w;  // 2D×C
    Matrix b;  // 1×C

    static ConvParams zeros(std::size_t in_width, std::size_t out_width);
    static ConvParams init(std::size_t in_width, std::size_t out_width, std::mt19937_64& rng);
};

struct CmrlParams {
    std::array<ConvParams, 4> conv;  // indexed by GraphKind

    static CmrlParams zeros(std::size_t in_width, std::size_t out_width);
    static CmrlParams init(std::size_t in_width, std::size_t out_width, std::mt19937_64& rng);
};

/// normalize(concat(mean of neighbor rows of X, X_k)·W + b). The mean is
/// the zero vector when k has no neighbors. Throws std::out_of_range for k ≥ λ.
std::vector<double> graph_sage_conv(std::size_t k, const Matrix& x, const Adjacency& adj,
                                    const ConvParams& params);

struct CmrlState {
    RelationGraphs graphs;
    std::array<Matrix, 4> concat;  // λ×2D, [mean, self]
    std::array<Matrix, 4> pre;     // λ×C, before normalization
    std::array<Matrix, 4> out;     // λ×C, normalized
    Matrix joint;                  // λ×4C
};

CmrlState cmrl_forward(const Matrix& x_txt, const Matrix& x_img, const Thresholds& thresholds,
                       const CmrlParams& params);
/// Forward pass over prebuilt graphs (adjacency held fixed).
CmrlState cmrl_forward(const Matrix& x_txt, const Matrix& x_img, const RelationGraphs& graphs,
                       const CmrlParams& params);

/// Accumulates parameter gradients given dL/dH (λ×4C). Adjacency is a constant.
void cmrl_backward(const Matrix& grad_joint, const CmrlState& state, const CmrlParams& params,
                   CmrlParams& grads);

}  // namespace mmorient
