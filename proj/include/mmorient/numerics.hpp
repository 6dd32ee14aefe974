#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmorient/matrix.hpp"

namespace mmorient {

double erf(double x);

/// Exact GELU: ½·x·(1 + erf(x/√2)).
double gelu(double x);
/// d/dx gelu(x) = Φ(x) + x·φ(x).
double gelu_derivative(double x);

/// Numerically stable softmax (max-subtracted). Throws std::invalid_argument on empty input.
std::vector<double> softmax(std::span<const double> logits);
/// Vector-Jacobian product of softmax: given y = softmax(v) and dL/dy, returns dL/dv.
std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> grad_probs);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Unit-normalizes every row; all-zero rows stay zero.
Matrix l2_normalize_rows(const Matrix& m);

/// S = N·Nᵀ for row-normalized N. Exactly symmetric.
Matrix cosine_similarity_matrix(const Matrix& normalized);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(θ+ε)−f(θ−ε))/(2ε) at every coordinate.
/// Throws NumericError when an evaluation is non-finite.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta,
                                         double eps);
/// Same, restricted to `coords`; the result is parallel to `coords`.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta,
                                         double eps, std::span<const std::size_t> coords);

/// |a − n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning rounding noise into large relative errors.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckReport {
    std::string name;
    double max_relative_error = 0.0;
    std::vector<std::size_t> coords;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

/// Worker cap for `parallel_for`; 1 runs everything on the calling thread.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, n) split into contiguous chunks over at most
/// max_threads() workers. Each index is processed exactly once, so results
/// that depend only on i are independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mmorient
