#pragma once

// Training losses over unit embeddings: anchor cross-entropy against class
// basis vectors (IOE), supervised contrastive with adaptive temperature
// (DAC), and the mask sparsity penalty (HAT). Losses treat embeddings as
// free vectors; unit norm is the caller's contract, which keeps analytic
// gradients directly comparable to finite differences.

#include <cmath>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/numerics.hpp"

namespace dcnet {

struct Batch {
    std::vector<Vec> embeddings;
    std::vector<int> labels;  // indices into the anchor list in use
};

struct LossWithGrad {
    double loss = 0.0;
    std::vector<Vec> grad;  // per embedding
};

// Mean over the batch of -log softmax_{c(i)}(z_i . mu_j / tau) with the
// softmax running over the provided anchor set.
inline LossWithGrad loss_ioe(const Batch& batch, const std::vector<Vec>& anchors,
                             double tau) {
    if (!(tau > 0.0)) throw configuration_error("loss_ioe: tau must be positive");
    if (batch.embeddings.empty())
        throw degenerate_input_error("loss_ioe: empty batch");
    if (anchors.empty()) throw configuration_error("loss_ioe: no anchor vectors");
    const std::size_t n = batch.embeddings.size();
    const std::size_t c = anchors.size();
    LossWithGrad out;
    out.grad.assign(n, Vec(batch.embeddings[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = batch.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= c)
            throw configuration_error("loss_ioe: label " + std::to_string(label) +
                                      " has no anchor vector");
        const Vec& z = batch.embeddings[i];
        Vec logits(c);
        double mx = -1e300;
        for (std::size_t j = 0; j < c; ++j) {
            logits[j] = dot(z, anchors[j]) / tau;
            mx = std::max(mx, logits[j]);
        }
        double lse = 0.0;
        for (std::size_t j = 0; j < c; ++j) lse += std::exp(logits[j] - mx);
        lse = mx + std::log(lse);
        out.loss += lse - logits[static_cast<std::size_t>(label)];
        // d/dz of (lse - logit_c) = (1/tau) (sum_j p_j mu_j - mu_c)
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(logits[j] - lse);
            const double coef = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
                                (tau * static_cast<double>(n));
            for (std::size_t k = 0; k < z.size(); ++k)
                out.grad[i][k] += coef * anchors[j][k];
        }
    }
    out.loss /= static_cast<double>(n);
    return out;
}

// Supervised contrastive loss: for each anchor i with positives P(i),
//   -(1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{j != i} exp(z_i.z_j/tau) ),
// averaged over anchors with non-empty P(i). Anchors without positives are
// skipped as anchors but still appear in other anchors' sums.
inline LossWithGrad loss_dac(const Batch& batch, double tau) {
    if (!(tau > 0.0)) throw configuration_error("loss_dac: tau must be positive");
    const std::size_t n = batch.embeddings.size();
    if (n < 2) throw degenerate_batch_error("loss_dac: needs at least 2 samples");
    const std::size_t d = batch.embeddings[0].size();

    std::vector<std::vector<std::size_t>> positives(n);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && batch.labels[j] == batch.labels[i]) positives[i].push_back(j);
        if (!positives[i].empty()) ++valid;
    }
    if (valid == 0)
        throw degenerate_batch_error("loss_dac: no anchor has a positive pair");

    LossWithGrad out;
    out.grad.assign(n, Vec(d, 0.0));
    const double inv_valid = 1.0 / static_cast<double>(valid);

    for (std::size_t i = 0; i < n; ++i) {
        if (positives[i].empty()) continue;
        const Vec& zi = batch.embeddings[i];
        Vec logits(n, 0.0);
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            logits[j] = dot(zi, batch.embeddings[j]) / tau;
            mx = std::max(mx, logits[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum += std::exp(logits[j] - mx);
        const double lse = mx + std::log(sum);
        const double inv_p = 1.0 / static_cast<double>(positives[i].size());

        for (std::size_t p : positives[i]) out.loss += inv_valid * inv_p * (lse - logits[p]);

        // Anchor-side gradient: (1/tau) (sum_j q_ij z_j - (1/|P|) sum_p z_p).
        // Other-side: dl_i/dz_k = (z_i/tau) (q_ik - [k in P(i)]/|P|).
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double q = std::exp(logits[j] - lse);
            const double mark = batch.labels[j] == batch.labels[i] ? inv_p : 0.0;
            const double coef = inv_valid * (q - mark) / tau;
            for (std::size_t k = 0; k < d; ++k) {
                out.grad[i][k] += coef * batch.embeddings[j][k];
                out.grad[j][k] += coef * zi[k];
            }
        }
    }
    return out;
}

// omega: mean cosine between each embedding and its class anchor. Inputs are
// unit vectors so the dot product is the cosine.
inline double aggregation_degree(const std::vector<Vec>& embeddings,
                                 const std::vector<int>& labels,
                                 const std::vector<Vec>& anchors) {
    if (embeddings.empty()) throw degenerate_input_error("aggregation_degree: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= anchors.size())
            throw configuration_error("aggregation_degree: label without anchor");
        s += dot(embeddings[i], anchors[static_cast<std::size_t>(c)]);
    }
    return s / static_cast<double>(embeddings.size());
}

struct AggregationState {
    double omega_current = 0.0;
    std::vector<double> omega_history;
    double omega_avg = 0.0;
    double tau_ioe = 0.05;
    double tau0 = 0.2;
    double tau_current = 0.2;
    double tau_min = 0.05;
    double tau_max = 1.0;
    bool last_update_fallback = false;  // set when omega_avg <= 0 forced tau0
};

// tau^{(t)} = tau0 * omega_t / omega_avg against the average over strictly
// prior tasks, clamped; then omega_t joins the history. With no usable
// history (first task, or degenerate omega_avg) the temperature falls back
// to tau0 and the fallback is recorded.
inline AggregationState update_temperature(AggregationState state, double omega_t) {
    if (state.omega_avg > 0.0) {
        const double raw = state.tau0 * omega_t / state.omega_avg;
        state.tau_current = std::min(state.tau_max, std::max(state.tau_min, raw));
        state.last_update_fallback = false;
    } else {
        state.tau_current = state.tau0;
        state.last_update_fallback = true;
    }
    state.omega_current = omega_t;
    state.omega_history.push_back(omega_t);
    double s = 0.0;
    for (double w : state.omega_history) s += w;
    state.omega_avg = s / static_cast<double>(state.omega_history.size());
    return state;
}

// L_HAT = sum_l sum_i g_{l,i} (1 - alpha_{l,i}) / sum_l sum_i (1 - alpha_{l,i}).
struct HatPenalty {
    double value = 0.0;
    double free_capacity = 0.0;  // the denominator
};

inline HatPenalty hat_regularizer(const std::vector<Vec>& gates,
                                  const std::vector<Vec>& accumulated) {
    if (gates.size() != accumulated.size())
        throw configuration_error("hat_regularizer: layer count mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < gates.size(); ++l) {
        if (gates[l].size() != accumulated[l].size())
            throw configuration_error("hat_regularizer: layer width mismatch");
        for (std::size_t i = 0; i < gates[l].size(); ++i) {
            const double free = 1.0 - accumulated[l][i];
            num += gates[l][i] * free;
            den += free;
        }
    }
    if (!(den > 0.0))
        throw capacity_exhausted_error("hat_regularizer: no free capacity remains");
    return HatPenalty{num / den, den};
}

// dL_HAT / d(gate value) = (1 - alpha) / free_capacity.
inline std::vector<Vec> hat_regularizer_gate_grads(const std::vector<Vec>& accumulated,
                                                   double free_capacity) {
    std::vector<Vec> g(accumulated.size());
    for (std::size_t l = 0; l < accumulated.size(); ++l) {
        g[l].resize(accumulated[l].size());
        for (std::size_t i = 0; i < accumulated[l].size(); ++i)
            g[l][i] = (1.0 - accumulated[l][i]) / free_capacity;
    }
    return g;
}

enum class Phase { ioe_only, ioe_dac };

inline std::string phase_name(Phase p) { return p == Phase::ioe_only ? "ioe" : "dac"; }

struct LossBreakdown {
    double ioe = 0.0;
    double dac = 0.0;
    double hat = 0.0;
    double total = 0.0;
    double lambda = 0.0;      // effective DAC coefficient for this phase
    double lambda_hat = 0.0;
};

// total = ioe + lambda * dac + lambda_hat * hat, with the DAC coefficient
// forced to zero during the IOE-only phase.
inline LossBreakdown total_loss(double ioe, double dac, double hat, double lambda,
                                double lambda_hat, Phase phase) {
    LossBreakdown b;
    b.ioe = ioe;
    b.dac = dac;
    b.hat = hat;
    b.lambda = phase == Phase::ioe_only ? 0.0 : lambda;
    b.lambda_hat = lambda_hat;
    b.total = b.ioe + b.lambda * b.dac + b.lambda_hat * b.hat;
    return b;
}

}  // namespace dcnet
