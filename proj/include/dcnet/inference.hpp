#pragma once

// Per-task OOD heads over frozen masked features, the concatenated-softmax
// decision rule, and the accuracy matrix metrics. Each task is scored under
// its own stored binary mask; the prediction is the global argmax over the
// concatenation of all per-task softmax outputs, ties resolved toward the
// lower task id.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/io.hpp"
#include "dcnet/model.hpp"
#include "dcnet/numerics.hpp"
#include "dcnet/tasks.hpp"

namespace dcnet {

struct OodHead {
    int task_id = 0;
    std::size_t class_count = 0;
    Mat w;  // class_count x feature_dim
    Vec b;

    Vec logits(const Vec& features) const {
        Vec out = matvec(w, features);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
        return out;
    }
};

struct HeadConfig {
    std::size_t epochs = 300;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-3;
};

struct HeadTrainResult {
    OodHead head;
    std::vector<double> loss_curve;  // mean cross-entropy per epoch
};

// Full-batch softmax regression with momentum and cosine decay. Full-batch
// keeps the loss curve smooth and the result exactly reproducible.
inline HeadTrainResult train_head_on_features(int task_id, const std::vector<Vec>& feats,
                                              const std::vector<int>& labels,
                                              std::size_t class_count, const HeadConfig& cfg,
                                              std::uint64_t seed) {
    if (feats.empty() || feats.size() != labels.size())
        throw configuration_error("train_head: empty or mismatched dataset");
    if (class_count < 1) throw configuration_error("train_head: class_count must be >= 1");
    const std::size_t d = feats[0].size();
    const std::size_t n = feats.size();

    HeadTrainResult res;
    res.head.task_id = task_id;
    res.head.class_count = class_count;
    res.head.w = Mat(class_count, d);
    res.head.b = Vec(class_count, 0.0);
    RngStream rng(seed, stream_id(0x0D0Du, static_cast<std::uint64_t>(task_id)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& x : res.head.w.data) x = rng.uniform(-bound, bound);

    Mat vw(class_count, d);
    Vec vb(class_count, 0.0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Mat gw(class_count, d);
        Vec gb(class_count, 0.0);
        double loss = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            Vec lg = res.head.logits(feats[s]);
            double mx = lg[0];
            for (double v : lg) mx = std::max(mx, v);
            double sum = 0.0;
            for (double v : lg) sum += std::exp(v - mx);
            const double lse = mx + std::log(sum);
            const int y = labels[s];
            if (y < 0 || static_cast<std::size_t>(y) >= class_count)
                throw configuration_error("train_head: label out of range");
            loss += lse - lg[static_cast<std::size_t>(y)];
            for (std::size_t c = 0; c < class_count; ++c) {
                const double p = std::exp(lg[c] - lse);
                const double coef = (p - (static_cast<std::size_t>(c) ==
                                                  static_cast<std::size_t>(y)
                                              ? 1.0
                                              : 0.0)) /
                                    static_cast<double>(n);
                gb[c] += coef;
                double* row = gw.data.data() + c * d;
                for (std::size_t k = 0; k < d; ++k) row[k] += coef * feats[s][k];
            }
        }
        loss /= static_cast<double>(n);
        res.loss_curve.push_back(loss);
        const double lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        for (std::size_t k = 0; k < gw.data.size(); ++k) {
            const double g = gw.data[k] + cfg.weight_decay * res.head.w.data[k];
            vw.data[k] = cfg.momentum * vw.data[k] + g;
            res.head.w.data[k] -= lr * vw.data[k];
        }
        for (std::size_t c = 0; c < class_count; ++c) {
            vb[c] = cfg.momentum * vb[c] + gb[c];
            res.head.b[c] -= lr * vb[c];
        }
    }
    return res;
}

// Head training over the frozen encoder with this task's stored mask.
inline HeadTrainResult train_head(int task_id, const MaskedNetwork& net,
                                  const std::vector<Vec>& mask, const TaskDataset& data,
                                  const HeadConfig& cfg, std::uint64_t seed) {
    if (data.train_size() == 0) throw configuration_error("train_head: empty dataset");
    std::vector<Vec> feats;
    std::vector<int> labels;
    feats.reserve(data.train_size());
    for (std::size_t k = 0; k < data.train_size(); ++k) {
        feats.push_back(net.forward(data.train_input(k), mask).features);
        labels.push_back(data.train_label(k));
    }
    return train_head_on_features(task_id, feats, labels, data.class_count, cfg, seed);
}

enum class ScoreVariant { max_softmax, energy };

inline ScoreVariant score_variant_from_name(const std::string& name) {
    if (name == "max-softmax") return ScoreVariant::max_softmax;
    if (name == "energy") return ScoreVariant::energy;
    throw configuration_error("unknown score variant: " + name);
}

struct DecisionRecord {
    int predicted_task = 0;
    int predicted_global_class = 0;
    std::vector<double> per_task_max_score;
    std::vector<int> per_task_argmax;  // local class pick per head
    int true_label = -1;               // global class
};

// Concatenated-softmax decision: every head is evaluated under its own
// task mask; the global argmax over concatenated softmax outputs wins, with
// earlier tasks keeping ties. The energy variant is a config-selected
// ablation that ranks tasks by log-sum-exp of logits instead.
inline DecisionRecord decide(const Vec& x, const MaskedNetwork& net,
                             const std::vector<std::vector<Vec>>& task_masks,
                             const std::vector<OodHead>& heads,
                             const std::vector<int>& global_offsets,
                             ScoreVariant variant = ScoreVariant::max_softmax) {
    if (heads.empty()) throw configuration_error("decide: no heads");
    if (task_masks.size() < heads.size() || global_offsets.size() < heads.size())
        throw configuration_error("decide: masks/offsets missing for some task");
    DecisionRecord rec;
    double best = -1e300;
    for (std::size_t t = 0; t < heads.size(); ++t) {
        const Vec features = net.forward(x, task_masks[t]).features;
        const Vec lg = heads[t].logits(features);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < lg.size(); ++c)
            if (lg[c] > lg[arg]) arg = c;
        double task_score;
        if (variant == ScoreVariant::max_softmax) {
            const Vec probs = softmax(lg, 1.0);
            task_score = probs[arg];
        } else {
            double mx = lg[0];
            for (double v : lg) mx = std::max(mx, v);
            double sum = 0.0;
            for (double v : lg) sum += std::exp(v - mx);
            task_score = mx + std::log(sum);
        }
        rec.per_task_max_score.push_back(task_score);
        rec.per_task_argmax.push_back(static_cast<int>(arg));
        if (task_score > best) {
            best = task_score;
            rec.predicted_task = static_cast<int>(t);
            rec.predicted_global_class = global_offsets[t] + static_cast<int>(arg);
        }
    }
    return rec;
}

struct AccMatrix {
    // rows[N-1] holds R_{N,t} for t = 1..N.
    std::vector<std::vector<double>> rows;
};

struct EvalResult {
    std::vector<double> cil_acc;     // per task, via the decision rule
    std::vector<double> oracle_acc;  // per task, true task id given
    std::vector<DecisionRecord> records;  // task-major over test splits
    std::vector<int> record_task;
};

// Scores the test splits of tasks 1..N (N = heads trained so far).
inline EvalResult evaluate(const TaskStream& stream, const MaskedNetwork& net,
                           const std::vector<std::vector<Vec>>& task_masks,
                           const std::vector<OodHead>& heads,
                           const std::vector<int>& global_offsets,
                           ScoreVariant variant = ScoreVariant::max_softmax) {
    EvalResult res;
    for (std::size_t t = 0; t < heads.size(); ++t) {
        const TaskDataset& ds = stream.tasks[t];
        std::size_t correct = 0, oracle_correct = 0;
        for (std::size_t k = 0; k < ds.test_size(); ++k) {
            DecisionRecord rec = decide(ds.test_input(k), net, task_masks, heads,
                                        global_offsets, variant);
            const int truth = ds.global_label_offset + ds.test_label(k);
            rec.true_label = truth;
            if (rec.predicted_global_class == truth) ++correct;
            if (rec.per_task_argmax[t] == ds.test_label(k)) ++oracle_correct;
            res.records.push_back(std::move(rec));
            res.record_task.push_back(static_cast<int>(t));
        }
        const double denom = static_cast<double>(ds.test_size());
        res.cil_acc.push_back(static_cast<double>(correct) / denom);
        res.oracle_acc.push_back(static_cast<double>(oracle_correct) / denom);
    }
    return res;
}

// A_last = mean of the final row; A_inc = mean over N of row means.
inline std::pair<double, double> a_last_a_inc(const AccMatrix& r) {
    if (r.rows.empty()) throw configuration_error("a_last_a_inc: empty matrix");
    for (std::size_t n = 0; n < r.rows.size(); ++n)
        if (r.rows[n].size() != n + 1)
            throw configuration_error("a_last_a_inc: matrix incomplete at row " +
                                      std::to_string(n + 1));
    double a_inc = 0.0;
    for (const auto& row : r.rows) {
        double s = 0.0;
        for (double v : row) s += v;
        a_inc += s / static_cast<double>(row.size());
    }
    a_inc /= static_cast<double>(r.rows.size());
    const auto& last = r.rows.back();
    double s = 0.0;
    for (double v : last) s += v;
    return {s / static_cast<double>(last.size()), a_inc};
}

// One row per scored test sample; scores listed per task in task order.
inline std::string predictions_csv(const EvalResult& res, std::size_t task_count) {
    std::ostringstream out;
    out << "sample_id,true_task,true_class,pred_task,pred_class";
    for (std::size_t t = 0; t < task_count; ++t) out << ",score_t" << (t + 1);
    out << "\n";
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const auto& rec = res.records[i];
        out << i << "," << (res.record_task[i] + 1) << "," << rec.true_label << ","
            << (rec.predicted_task + 1) << "," << rec.predicted_global_class;
        for (std::size_t t = 0; t < task_count; ++t)
            out << "," << fmt17(t < rec.per_task_max_score.size()
                                    ? rec.per_task_max_score[t]
                                    : 0.0);
        out << "\n";
    }
    return out.str();
}

}  // namespace dcnet
