#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace exq {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Sparse row with strictly increasing indices and nonzero finite values.
struct SparseVector {
    std::size_t dim = 0;
    std::vector<std::size_t> indices;
    std::vector<double> values;

    double norm2() const {
        double s = 0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }

    double dot(const SparseVector& other) const {
        double s = 0;
        std::size_t i = 0, j = 0;
        while (i < indices.size() && j < other.indices.size()) {
            if (indices[i] == other.indices[j]) {
                s += values[i] * other.values[j];
                ++i; ++j;
            } else if (indices[i] < other.indices[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        return s;
    }

    double get(std::size_t idx) const {
        for (std::size_t i = 0; i < indices.size(); ++i)
            if (indices[i] == idx) return values[i];
        return 0.0;
    }

    std::vector<double> to_dense() const {
        std::vector<double> out(dim, 0.0);
        for (std::size_t i = 0; i < indices.size(); ++i) out[indices[i]] = values[i];
        return out;
    }

    static SparseVector from_dense(const std::vector<double>& x, double eps = 0.0) {
        SparseVector sv;
        sv.dim = x.size();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(x[i]) > eps) {
                sv.indices.push_back(i);
                sv.values.push_back(x[i]);
            }
        }
        return sv;
    }

    void check() const {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= dim) throw Error("SparseVector: index out of range");
            if (i > 0 && indices[i] <= indices[i - 1])
                throw Error("SparseVector: indices not strictly increasing");
            if (!std::isfinite(values[i]) || values[i] == 0.0)
                throw Error("SparseVector: value not finite nonzero");
        }
    }
};

inline double l2_distance(const SparseVector& a, const SparseVector& b) {
    double s = 0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() || j < b.indices.size()) {
        if (j >= b.indices.size() || (i < a.indices.size() && a.indices[i] < b.indices[j])) {
            s += a.values[i] * a.values[i];
            ++i;
        } else if (i >= a.indices.size() || b.indices[j] < a.indices[i]) {
            s += b.values[j] * b.values[j];
            ++j;
        } else {
            double d = a.values[i] - b.values[j];
            s += d * d;
            ++i; ++j;
        }
    }
    return std::sqrt(s);
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("l2_distance: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit_of_prob(double p) {
    constexpr double eps = 1e-12;
    p = std::min(1.0 - eps, std::max(eps, p));
    return std::log(p / (1.0 - p));
}

}  // namespace exq
