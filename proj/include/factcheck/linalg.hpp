#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "factcheck/errors.hpp"

namespace factcheck {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for the small stance/retrieval heads.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    Vec row(std::size_t r) const {
        return Vec(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                   data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    bool operator==(const Mat&) const = default;
};

double dot(const Vec& u, const Vec& v);
double norm(const Vec& v);

// u.v / (|u||v|); throws ZeroVector when either norm is zero, ShapeMismatch on
// dimension disagreement.
double cosine_similarity(const Vec& u, const Vec& v);

void normalize_in_place(Vec& v);

Vec softmax(const Vec& logits);
double logsumexp(const Vec& xs);

// y = x * m  (x: 1 x rows, m: rows x cols)
Vec vecmat(const Vec& x, const Mat& m);
// y = m * x  (m: rows x cols, x: cols)
Vec matvec(const Mat& m, const Vec& x);

}  // namespace factcheck
