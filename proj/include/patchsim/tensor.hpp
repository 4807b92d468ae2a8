#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"

namespace patchsim {

// Dense row-major float32 array with an optional gradient buffer of the
// same shape. The single value type of the numeric core.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> values;
    std::vector<float> grad;  // empty until alloc_grad()

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        values.assign(numel_of(shape), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> v) : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != numel_of(shape))
            throw ShapeError("tensor value count does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return values.size(); }

    int dim(std::size_t k) const { return shape.at(k); }

    void alloc_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0f);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f);
    }
    bool has_grad() const { return grad.size() == values.size() && !values.empty(); }

    bool all_finite() const {
        for (float v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
        os << ']';
        return os.str();
    }
};

inline void require_shape(const Tensor& t, const std::vector<int>& expect, const char* what) {
    if (t.shape != expect) {
        Tensor e(expect);
        throw ShapeError(std::string(what) + ": expected shape " + e.shape_str() + ", got " +
                         t.shape_str());
    }
}

// Dot product with 64-bit accumulation.
inline double dot(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return acc;
}

inline double l2_norm(const float* v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += static_cast<double>(v[k]) * static_cast<double>(v[k]);
    return std::sqrt(acc);
}

// Norm guard below which a vector normalizes to zero instead of blowing up;
// a zero descriptor gives cosine 0 against everything.
inline constexpr double kNormEpsilon = 1e-8;

// Returns the norm it divided by, or 0.0 when the guard fired (output zeroed).
inline double l2_normalize_inplace(float* v, std::size_t n) {
    double norm = l2_norm(v, n);
    if (norm < kNormEpsilon) {
        for (std::size_t k = 0; k < n; ++k) v[k] = 0.0f;
        return 0.0;
    }
    for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<float>(v[k] / norm);
    return norm;
}

inline Tensor l2_normalize(const Tensor& v) {
    Tensor out = v;
    out.grad.clear();
    l2_normalize_inplace(out.values.data(), out.numel());
    return out;
}

// d(v/||v||)/dv applied to an upstream gradient. `unit` is the normalized
// vector, `norm` the original norm (0 means the guard fired: zero gradient).
inline void l2_normalize_backward(const float* unit, double norm, const float* d_out, float* d_in,
                                  std::size_t n) {
    if (norm <= 0.0) {
        for (std::size_t k = 0; k < n; ++k) d_in[k] = 0.0f;
        return;
    }
    double proj = dot(unit, d_out, n);
    for (std::size_t k = 0; k < n; ++k)
        d_in[k] = static_cast<float>((static_cast<double>(d_out[k]) - proj * unit[k]) / norm);
}

}  // namespace patchsim
