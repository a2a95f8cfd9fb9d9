#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "credassign/errors.hpp"

namespace credassign {

/// Dense row-major N-dimensional array. The single value type passed between
/// all modules. Instantiated for float (training) and double (gradient-check
/// mode); see Tensor / TensorD aliases below.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(numel_of(shape), fill);
    }

    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape))
            throw DimensionError("tensor data length does not match shape product");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0)
                throw DimensionError("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    // 4-D accessors, used by tests and reference loops. The hot paths index
    // raw buffers directly.
    T& at(int a, int b, int c, int d) {
        return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    T at(int a, int b, int c, int d) const {
        return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    T& at(int a, int b) { return data[static_cast<std::size_t>(a) * shape[1] + b]; }
    T at(int a, int b) const { return data[static_cast<std::size_t>(a) * shape[1] + b]; }

    void fill(T v) { data.assign(data.size(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    /// Throws NumericError naming `what` if any entry is NaN or Inf.
    void check_finite(const char* what) const {
        if (!all_finite())
            throw NumericError(std::string("non-finite values in ") + what);
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
std::string shape_str(const TensorT<T>& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

template <typename T>
void require_shape(const TensorT<T>& t, const std::vector<int>& want, const char* what) {
    if (t.shape != want) {
        std::string msg = std::string(what) + ": expected shape [";
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (i) msg += ",";
            msg += std::to_string(want[i]);
        }
        msg += "], got " + shape_str(t);
        throw DimensionError(msg);
    }
}

template <typename T>
T dot_all(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) throw DimensionError("dot_all: shape mismatch");
    T s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

template <typename T>
T frobenius_norm(const TensorT<T>& a) {
    T s = 0;
    for (T v : a.data) s += v * v;
    return std::sqrt(s);
}

/// sign with sign(0) = 0, applied elementwise everywhere in the codebase.
template <typename T>
inline T sign_of(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

} // namespace credassign
