#include "factcheck/linalg.hpp"

#include <algorithm>
#include <string>

namespace factcheck {

double dot(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) {
        throw ShapeMismatch("dot: dimension mismatch " + std::to_string(u.size()) + " vs " +
                            std::to_string(v.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine_similarity(const Vec& u, const Vec& v) {
    const double d = dot(u, v);
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw ZeroVector();
    return d / (nu * nv);
}

void normalize_in_place(Vec& v) {
    const double n = norm(v);
    if (n == 0.0) throw ZeroVector("cannot normalize the zero vector");
    for (double& x : v) x /= n;
}

double logsumexp(const Vec& xs) {
    if (xs.empty()) throw EmptyBatch("logsumexp over an empty set");
    const double m = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

Vec softmax(const Vec& logits) {
    const double lse = logsumexp(logits);
    Vec out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
    return out;
}

Vec vecmat(const Vec& x, const Mat& m) {
    if (x.size() != m.rows) {
        throw ShapeMismatch("vecmat: vector size " + std::to_string(x.size()) + " vs rows " +
                            std::to_string(m.rows));
    }
    Vec y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += xr * m.at(r, c);
    }
    return y;
}

Vec matvec(const Mat& m, const Vec& x) {
    if (x.size() != m.cols) {
        throw ShapeMismatch("matvec: vector size " + std::to_string(x.size()) + " vs cols " +
                            std::to_string(m.cols));
    }
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += m.at(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

}  // namespace factcheck
