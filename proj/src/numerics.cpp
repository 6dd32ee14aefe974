#include "mmorient/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "mmorient/errors.hpp"

namespace mmorient {

namespace {
std::atomic<std::size_t> g_max_threads{1};
}

double erf(double x) { return std::erf(x); }

double gelu(double x) { return 0.5 * x * (1.0 + erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    return cdf + x * pdf;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_probs) {
    const double inner = dot(probs, grad_probs);
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_probs[i] - inner);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        const double norm = l2_norm(r);
        if (norm == 0.0) continue;
        for (auto& v : r) v /= norm;
    }
    return out;
}

Matrix cosine_similarity_matrix(const Matrix& normalized) {
    const std::size_t n = normalized.rows();
    Matrix s(n, n);
    parallel_for(n, [&](std::size_t i) {
        const auto ri = normalized.row(i);
        for (std::size_t j = i; j < n; ++j) s(i, j) = dot(ri, normalized.row(j));
    });
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
    }
    return s;
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta,
                                         double eps) {
    std::vector<std::size_t> coords(theta.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    return finite_diff_gradient(f, theta, eps, coords);
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta,
                                         double eps, std::span<const std::size_t> coords) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_gradient: eps must be positive");
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(coords.size());
    for (std::size_t c = 0; c < coords.size(); ++c) {
        const std::size_t i = coords[c];
        const double saved = point[i];
        point[i] = saved + eps;
        const double up = f(point);
        point[i] = saved - eps;
        const double down = f(point);
        point[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_gradient: non-finite loss at coordinate " +
                               std::to_string(i));
        }
        grad[c] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

void set_max_threads(std::size_t n) { g_max_threads = std::max<std::size_t>(1, n); }

std::size_t max_threads() { return g_max_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
}

}  // namespace mmorient
