#pragma once

// Shared gradient-check machinery for the stance head: random smooth
// instances plus a worst-case relative error between analytic gradients and
// central finite differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "factcheck/verification.hpp"
#include "oracles.hpp"

namespace gradcheck {

inline factcheck::Mat unit_rows(factcheck::Rng& rng, std::size_t rows, std::size_t cols) {
    factcheck::Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        factcheck::Vec row(cols);
        for (double& x : row) x = rng.next_gaussian();
        factcheck::normalize_in_place(row);
        for (std::size_t j = 0; j < cols; ++j) m.at(i, j) = row[j];
    }
    return m;
}

// Independent forward pass through the fusion layer, also recording how close
// the instance sits to a LeakyReLU kink or a max pool tie.
struct FusionProbe {
    factcheck::Vec pooled;
    double min_abs_u = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
};

inline FusionProbe probe_fusion(const factcheck::Mat& claim, const factcheck::Mat& evidence,
                                const factcheck::StanceDetectorParams& params) {
    const factcheck::Mat attended = factcheck::cross_attend(claim, evidence);
    const std::size_t n = claim.rows;
    const std::size_t d = claim.cols;
    FusionProbe probe;
    probe.pooled.assign(d, 0.0);
    factcheck::Mat activated(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        factcheck::Vec z(2 * d);
        for (std::size_t k = 0; k < d; ++k) {
            z[k] = attended.at(i, k) * claim.at(i, k);
            z[d + k] = attended.at(i, k) - claim.at(i, k);
        }
        for (std::size_t j = 0; j < d; ++j) {
            double u = params.fuse_bias[j];
            for (std::size_t k = 0; k < 2 * d; ++k) u += z[k] * params.fuse_weight.at(k, j);
            probe.min_abs_u = std::min(probe.min_abs_u, std::fabs(u));
            activated.at(i, j) = u > 0.0 ? u : params.leaky_slope * u;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double value = activated.at(i, j);
            if (value > best) {
                second = best;
                best = value;
            } else if (value > second) {
                second = value;
            }
        }
        probe.pooled[j] = best;
        if (n > 1) probe.min_margin = std::min(probe.min_margin, best - second);
    }
    return probe;
}

struct GradInstance {
    factcheck::ClaimEvidenceEncoding encoding;
    factcheck::StanceDetectorParams params;
    factcheck::TruthfulnessLabel gold = factcheck::TruthfulnessLabel::Supported;
};

// Finite differences are only trustworthy away from the kinks and pool ties,
// so candidate instances that land within 1e-4 of either get redrawn.
inline bool smooth_enough(const GradInstance& inst) {
    auto check = [&](const std::vector<factcheck::Mat>& items) {
        for (const factcheck::Mat& e : items) {
            const FusionProbe probe = probe_fusion(inst.encoding.claim, e, inst.params);
            if (probe.min_abs_u < 1e-4) return false;
            if (probe.min_margin < 1e-4) return false;
        }
        return true;
    };
    return check(inst.encoding.text_evidence) && check(inst.encoding.image_evidence);
}

inline GradInstance random_instance(factcheck::Rng& rng) {
    using factcheck::kAllLabels;
    while (true) {
        GradInstance inst;
        const std::size_t d = 2 + rng.next_index(7);
        const std::size_t n = 1 + rng.next_index(4);
        inst.encoding.claim = unit_rows(rng, n, d);
        std::size_t text_items = rng.next_index(3);
        const std::size_t image_items = rng.next_index(3);
        if (text_items + image_items == 0) text_items = 1;
        for (std::size_t t = 0; t < text_items; ++t) {
            inst.encoding.text_evidence.push_back(unit_rows(rng, 1 + rng.next_index(4), d));
        }
        for (std::size_t t = 0; t < image_items; ++t) {
            inst.encoding.image_evidence.push_back(unit_rows(rng, 1 + rng.next_index(4), d));
        }
        inst.params = factcheck::StanceDetectorParams::random_init(d, rng, 0.4);
        for (double& b : inst.params.fuse_bias) b = 0.1 * rng.next_gaussian();
        for (double& b : inst.params.cls_bias) b = 0.1 * rng.next_gaussian();
        inst.gold = kAllLabels[rng.next_index(kAllLabels.size())];
        if (smooth_enough(inst)) return inst;
    }
}

inline double worst_grad_error(GradInstance& inst) {
    using factcheck::StanceGradients;
    const std::size_t d = inst.params.dim();
    StanceGradients analytic = StanceGradients::zeros(d);
    factcheck::stance_loss_and_grad(inst.encoding, inst.gold, inst.params, &analytic);
    const auto loss = [&]() {
        return factcheck::stance_loss_and_grad(inst.encoding, inst.gold, inst.params, nullptr);
    };

    double worst = 0.0;
    auto probe_tensor = [&](std::vector<double>& slots, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const double fd = oracles::central_diff(loss, slots[i]);
            worst = std::max(worst, oracles::rel_err(fd, grads[i]));
        }
    };
    probe_tensor(inst.params.fuse_weight.data, analytic.fuse_weight.data);
    probe_tensor(inst.params.fuse_bias, analytic.fuse_bias);
    probe_tensor(inst.params.cls_weight.data, analytic.cls_weight.data);
    probe_tensor(inst.params.cls_bias, analytic.cls_bias);
    return worst;
}

}  // namespace gradcheck
