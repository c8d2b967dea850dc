#pragma once

#include <cmath>
#include <cstddef>

#include "flmr/nn/mlp.hpp"
#include "flmr/rng.hpp"

namespace testutil {

// |a - b| within rel of the larger magnitude, with an absolute floor for
// entries near the finite-difference noise level.
inline bool close(double a, double b, double rel, double floor) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

inline std::size_t total_params(const flmr::nn::ModelParams& p) {
    std::size_t n = 0;
    for (const auto& layer : p.layers) {
        n += static_cast<std::size_t>(layer.w.size()) + static_cast<std::size_t>(layer.b.size());
    }
    return n;
}

// Flat index into the (column-major) parameter tensors, layer by layer,
// weights before biases. The same walk works for ParamGrads.
inline double* param_slot(flmr::nn::ModelParams& p, std::size_t index) {
    for (auto& layer : p.layers) {
        const auto wn = static_cast<std::size_t>(layer.w.size());
        if (index < wn) {
            return layer.w.data() + index;
        }
        index -= wn;
        const auto bn = static_cast<std::size_t>(layer.b.size());
        if (index < bn) {
            return layer.b.data() + index;
        }
        index -= bn;
    }
    return nullptr;
}

inline double grad_slot(const flmr::nn::ParamGrads& g, std::size_t index) {
    for (const auto& layer : g.layers) {
        const auto wn = static_cast<std::size_t>(layer.w.size());
        if (index < wn) {
            return layer.w.data()[index];
        }
        index -= wn;
        const auto bn = static_cast<std::size_t>(layer.b.size());
        if (index < bn) {
            return layer.b.data()[index];
        }
        index -= bn;
    }
    return 0.0;
}

inline Eigen::MatrixXd random_matrix(flmr::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = rng.uniform(lo, hi);
        }
    }
    return m;
}

inline Eigen::VectorXd random_vector(flmr::Rng& rng, Eigen::Index n, double lo = -1.0,
                                     double hi = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = rng.uniform(lo, hi);
    }
    return v;
}

inline bool params_equal(const flmr::nn::ModelParams& a, const flmr::nn::ModelParams& b) {
    if (a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].w.rows() != b.layers[l].w.rows() ||
            a.layers[l].w.cols() != b.layers[l].w.cols() ||
            a.layers[l].b.size() != b.layers[l].b.size()) {
            return false;
        }
        if (!(a.layers[l].w.array() == b.layers[l].w.array()).all() ||
            !(a.layers[l].b.array() == b.layers[l].b.array()).all()) {
            return false;
        }
    }
    return true;
}

}  // namespace testutil
