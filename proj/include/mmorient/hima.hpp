#pragma once

// Hierarchical interactive monomodal attention.
//
// Stage 1 attends over the L rows (tokens or regions) of one sample and
// returns their attention-weighted sum t_y. Stage 2 attends over the stage-1
// vectors of the whole batch and returns the batch bias s. Each sample's
// modality vector is z_k = [t_k, s]; the joint vector is Z_k = [z_txt, z_img].

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mmorient/matrix.hpp"

namespace mmorient {

struct HimaParams {
    Matrix w1;  // d×β
    Matrix b1;  // 1×β
    Matrix u1;  // 1×β
    Matrix w2;  // d×β
    Matrix b2;  // 1×β
    Matrix u2;  // 1×β

    static HimaParams zeros(std::size_t width, std::size_t beta);
    /// Glorot-uniform weights, zero biases, context vectors uniform in ±0.05.
    static HimaParams init(std::size_t width, std::size_t beta, std::mt19937_64& rng);

    std::size_t width() const { return w1.rows(); }
    std::size_t beta() const { return w1.cols(); }
};

struct Stage1Result {
    std::vector<double> pooled;     // t_y, length d
    std::vector<double> attention;  // length L
};

/// Throws std::invalid_argument when `rows` has no rows.
Stage1Result stage1_attention(const Matrix& rows, const HimaParams& params);

struct Stage2Result {
    std::vector<double> batch_bias;  // s, length d
    std::vector<double> weights;     // p, length B
};

/// `pooled` holds one stage-1 vector per row.
Stage2Result stage2_attention(const Matrix& pooled, const HimaParams& params);

/// Forward state of one modality over a batch, kept for the backward pass.
struct HimaModalityState {
    std::vector<Matrix> inputs;    // B × (L×d)
    std::vector<Matrix> pre1;      // B × (L×β), v·W1 + b1
    std::vector<Matrix> hidden1;   // B × (L×β), gelu(pre1)
    std::vector<std::vector<double>> attention;  // B × L
    Matrix pooled;                 // B×d, t_y
    Matrix pre2;                   // B×β
    Matrix hidden2;                // B×β
    std::vector<double> weights;   // p, length B
    std::vector<double> batch_bias;  // s, length d
    Matrix z;                      // B×2d, rows [t_k, s]
};

HimaModalityState hima_modality_forward(const std::vector<Matrix>& batch, const HimaParams& params);

/// Accumulates parameter gradients into `grads` given dL/dz (B×2d).
void hima_modality_backward(const Matrix& grad_z, const HimaModalityState& state,
                            const HimaParams& params, HimaParams& grads);

struct HimaState {
    HimaModalityState txt;
    HimaModalityState img;
    Matrix joint;  // B × (2·d_txt + 2·d_img)
};

HimaState hima_forward(const std::vector<Matrix>& txt_batch, const std::vector<Matrix>& img_batch,
                       const HimaParams& txt_params, const HimaParams& img_params);

/// Splits dL/dZ between the modalities and accumulates into the grads.
void hima_backward(const Matrix& grad_joint, const HimaState& state, const HimaParams& txt_params,
                   const HimaParams& img_params, HimaParams& txt_grads, HimaParams& img_grads);

}  // namespace mmorient
