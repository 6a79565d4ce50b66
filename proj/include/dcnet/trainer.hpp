#pragma once

// End-to-end task-sequence training: per task, extend the basis, run the
// anchor-loss phase, measure aggregation once, update the temperature, run
// the contrastive phase, binarize and accumulate masks, then train the
// task's OOD head. Parameters claimed by earlier tasks are provably frozen:
// their gradients are gated to zero and the trainer re-asserts bit equality
// after every task. All randomness derives from the run seed and (task,
// epoch, purpose) indices, so any suffix of a run can be reproduced from a
// task-boundary checkpoint.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dcnet/basis.hpp"
#include "dcnet/config.hpp"
#include "dcnet/errors.hpp"
#include "dcnet/inference.hpp"
#include "dcnet/io.hpp"
#include "dcnet/model.hpp"
#include "dcnet/numerics.hpp"
#include "dcnet/objective.hpp"
#include "dcnet/tasks.hpp"

namespace dcnet {

struct MetricsRow {
    int task = 0;          // 1-based in emitted CSV
    std::size_t epoch = 0; // 1-based within task, spans both phases
    Phase phase = Phase::ioe_only;
    double ioe = 0.0;
    double dac = 0.0;
    double hat = 0.0;
    double total = 0.0;
    double omega = 0.0;
    double tau = 0.0;
};

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "task,epoch,phase,ioe,dac,hat,total,omega,tau\n";
    for (const auto& r : rows)
        out << r.task << "," << r.epoch << "," << phase_name(r.phase) << "," << fmt17(r.ioe)
            << "," << fmt17(r.dac) << "," << fmt17(r.hat) << "," << fmt17(r.total) << ","
            << fmt17(r.omega) << "," << fmt17(r.tau) << "\n";
    return out.str();
}

struct RunState {
    ExperimentConfig cfg;
    int completed_tasks = 0;
    MaskedNetwork net;
    MaskState mask;  // gate logits of the task in progress + accumulated masks
    std::vector<std::vector<Vec>> task_masks;
    BasisSet basis;
    AggregationState agg;
    AccMatrix acc;
    std::vector<OodHead> heads;
    std::vector<int> global_offsets;
    std::vector<double> omega_start;   // measured at DAC start, soft gates
    std::vector<double> omega_end;     // measured after the task, binary mask
    std::vector<double> tau_per_task;  // temperature used during DAC
    std::vector<double> saturation;    // accumulated-mask fill after each task
    std::vector<double> head_final_loss;
    std::vector<double> oracle_acc_last;  // within-task accuracies at the final stage
    std::vector<MetricsRow> metrics;
    std::vector<std::string> events;
    EvalResult last_eval;

    void event(const std::string& e) { events.push_back(e); }
};

inline RunState init_state(const ExperimentConfig& cfg) {
    cfg.validate();
    RunState st;
    st.cfg = cfg;
    st.net = MaskedNetwork(cfg.net, cfg.seed);
    st.basis.dim = cfg.net.embed_dim;
    st.agg.tau_ioe = cfg.train.tau_ioe;
    st.agg.tau0 = cfg.train.tau0;
    st.agg.tau_current = cfg.train.tau0;
    st.agg.tau_min = cfg.train.tau_min;
    st.agg.tau_max = cfg.train.tau_max;
    // Accumulated masks start empty; gate logits are installed per task.
    const auto widths = cfg.net.encoder_widths();
    for (std::size_t w : widths) st.mask.accumulated.push_back(Vec(w, 0.0));
    return st;
}

namespace detail {

struct EmbeddedSet {
    std::vector<Vec> embeddings;
    std::vector<int> labels;  // local class ids
};

inline EmbeddedSet embed_train_set(const MaskedNetwork& net, const std::vector<Vec>& gates,
                                   const TaskDataset& data) {
    EmbeddedSet set;
    set.embeddings.reserve(data.train_size());
    for (std::size_t k = 0; k < data.train_size(); ++k) {
        set.embeddings.push_back(net.forward(data.train_input(k), gates).embedding);
        set.labels.push_back(data.train_label(k));
    }
    return set;
}

// Parameters protected by the accumulated masks before this task, flattened
// in the same order as MaskedNetwork::flatten_params (projection never
// protected).
inline std::vector<bool> frozen_coordinates(const MaskedNetwork& net,
                                            const std::vector<Vec>& accumulated) {
    std::vector<bool> frozen;
    const auto& enc = net.encoder();
    for (std::size_t l = 0; l < enc.size(); ++l) {
        for (std::size_t i = 0; i < enc[l].weights.rows; ++i)
            for (std::size_t j = 0; j < enc[l].weights.cols; ++j) {
                const double in_mask = (l == 0) ? 1.0 : accumulated[l - 1][j];
                frozen.push_back(std::min(accumulated[l][i], in_mask) == 1.0);
            }
        for (std::size_t i = 0; i < enc[l].bias.size(); ++i)
            frozen.push_back(accumulated[l][i] == 1.0);
    }
    const auto& proj = net.projection();
    for (std::size_t k = 0; k < proj.weights.data.size() + proj.bias.size(); ++k)
        frozen.push_back(false);
    return frozen;
}

}  // namespace detail

// One task of the training algorithm. The dataset's train split is released
// at the end; later tasks cannot read it.
inline void run_task(RunState& st, TaskDataset& data) {
    const ExperimentConfig& cfg = st.cfg;
    const int t = st.completed_tasks;
    if (data.task_id != t)
        throw configuration_error("run_task: expected task " + std::to_string(t) +
                                  ", got " + std::to_string(data.task_id));
    const int expected_offset = static_cast<int>(
        st.global_offsets.empty()
            ? 0
            : st.global_offsets.back() +
                  static_cast<int>(st.heads.empty() ? 0 : st.heads.back().class_count));
    if (data.global_label_offset != expected_offset)
        throw configuration_error("run_task: label spaces overlap or skip at task " +
                                  std::to_string(t));
    if (data.train_size() < 2)
        throw configuration_error("run_task: task needs at least 2 train samples");

    const bool use_basis = cfg.train.ioe_mode == "basis";
    st.global_offsets.push_back(data.global_label_offset);

    // Anchor directions exist before any gradient step touches the task.
    if (use_basis) {
        st.basis = extend(st.basis, data.class_count, cfg.basis);
        st.event("t=" + std::to_string(t) + " basis_extend");
    }
    std::vector<Vec> anchors;
    if (use_basis)
        anchors = cfg.train.ioe_all_bases ? st.basis.vectors : st.basis.task_block(t);

    // Labels index the anchor list: local ids unless all bases are in play.
    const int label_shift = (use_basis && cfg.train.ioe_all_bases)
                                ? data.global_label_offset
                                : 0;

    const std::vector<bool> frozen = detail::frozen_coordinates(st.net, st.mask.accumulated);
    const Vec params_before = st.net.flatten_params();

    st.mask.gate_logits =
        st.net.fresh_mask(cfg.seed, t, cfg.train.s_max).gate_logits;
    SgdOptimizer opt(st.net, st.mask, cfg.train.momentum);
    const double lambda_hat =
        t == 0 ? cfg.train.lambda_hat_first : cfg.train.lambda_hat_later;
    const std::size_t total_epochs = cfg.train.epochs_ioe + cfg.train.epochs_dac;
    const std::size_t n_train = data.train_size();

    bool tau_set_for_task = false;
    double task_tau = cfg.train.tau0;

    for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
        const Phase phase = epoch < cfg.train.epochs_ioe ? Phase::ioe_only : Phase::ioe_dac;

        // Aggregation is measured once, right before the first DAC epoch.
        if (phase == Phase::ioe_dac && !tau_set_for_task) {
            if (use_basis) {
                st.mask.scale = cfg.train.s_max;
                const auto set = detail::embed_train_set(st.net, soft_gates(st.mask), data);
                std::vector<int> anchor_labels = set.labels;
                for (int& l : anchor_labels) l += label_shift;
                const double omega =
                    aggregation_degree(set.embeddings, anchor_labels, anchors);
                st.omega_start.push_back(omega);
                st.event("t=" + std::to_string(t) + " omega_measured");
                if (cfg.train.fixed_tau) {
                    st.agg.omega_current = omega;
                    st.agg.omega_history.push_back(omega);
                    double s = 0.0;
                    for (double w : st.agg.omega_history) s += w;
                    st.agg.omega_avg = s / static_cast<double>(st.agg.omega_history.size());
                    st.agg.tau_current = st.agg.tau0;
                    st.event("t=" + std::to_string(t) + " tau_updated fixed");
                } else if (cfg.train.omega_includes_current) {
                    st.agg.omega_current = omega;
                    st.agg.omega_history.push_back(omega);
                    double s = 0.0;
                    for (double w : st.agg.omega_history) s += w;
                    st.agg.omega_avg = s / static_cast<double>(st.agg.omega_history.size());
                    const double raw = st.agg.tau0 * omega / st.agg.omega_avg;
                    st.agg.tau_current =
                        std::min(st.agg.tau_max, std::max(st.agg.tau_min, raw));
                    st.event("t=" + std::to_string(t) + " tau_updated inclusive");
                } else {
                    st.agg = update_temperature(st.agg, omega);
                    st.event("t=" + std::to_string(t) + " tau_updated");
                }
            } else {
                st.omega_start.push_back(0.0);
                st.agg.tau_current = st.agg.tau0;
                st.event("t=" + std::to_string(t) + " tau_updated supcon");
            }
            task_tau = st.agg.tau_current;
            st.tau_per_task.resize(static_cast<std::size_t>(t) + 1, 0.0);
            st.tau_per_task[static_cast<std::size_t>(t)] = task_tau;
            tau_set_for_task = true;
        }

        RngStream shuffle_rng(cfg.seed, stream_id(0x5F1Eu, static_cast<std::uint64_t>(t),
                                                  epoch));
        std::vector<std::size_t> order(n_train);
        for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        const double lr = cosine_lr(cfg.train.lr, epoch, total_epochs);
        std::size_t n_batches = 0;
        for (std::size_t b0 = 0; b0 < n_train; b0 += cfg.train.batch_size)
            if (n_train - b0 >= 2) ++n_batches;

        double sum_ioe = 0.0, sum_dac = 0.0, sum_hat = 0.0, sum_total = 0.0,
               sum_omega = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t b0 = 0; b0 < n_train; b0 += cfg.train.batch_size) {
            const std::size_t b1 = std::min(n_train, b0 + cfg.train.batch_size);
            if (b1 - b0 < 2) break;  // a trailing singleton cannot form pairs

            const double progress =
                n_batches > 1
                    ? static_cast<double>(batch_index) / static_cast<double>(n_batches - 1)
                    : 1.0;
            st.mask.scale = anneal_scale(progress, cfg.train.s_max);
            const std::vector<Vec> gates = soft_gates(st.mask);

            Batch batch;
            std::vector<ForwardTrace> traces;
            traces.reserve(b1 - b0);
            for (std::size_t k = b0; k < b1; ++k) {
                traces.push_back(st.net.forward(data.train_input(order[k]), gates));
                batch.embeddings.push_back(traces.back().embedding);
                batch.labels.push_back(data.train_label(order[k]));
            }

            // A tail batch can lack positive pairs entirely; the contrastive
            // term is skipped for it rather than raised as an error.
            bool has_positive = false;
            for (std::size_t k = 0; k < batch.labels.size() && !has_positive; ++k)
                for (std::size_t m = k + 1; m < batch.labels.size(); ++m)
                    if (batch.labels[k] == batch.labels[m]) {
                        has_positive = true;
                        break;
                    }

            // Loss pieces and embedding gradients.
            LossWithGrad primary;   // anchor loss, or zero in supcon mode
            LossWithGrad contrast;  // DAC / supcon term
            contrast.grad.assign(batch.embeddings.size(), Vec(cfg.net.embed_dim, 0.0));
            double omega_batch = 0.0;
            if (use_basis) {
                Batch anchor_batch = batch;
                for (int& l : anchor_batch.labels) l += label_shift;
                primary = loss_ioe(anchor_batch, anchors, cfg.train.tau_ioe);
                omega_batch = aggregation_degree(anchor_batch.embeddings,
                                                 anchor_batch.labels, anchors);
                if (phase == Phase::ioe_dac && has_positive)
                    contrast = loss_dac(batch, task_tau);
            } else {
                primary.grad.assign(batch.embeddings.size(), Vec(cfg.net.embed_dim, 0.0));
                if (has_positive) contrast = loss_dac(batch, st.agg.tau0);
            }
            const HatPenalty hat = hat_regularizer(gates, st.mask.accumulated);
            const LossBreakdown breakdown =
                use_basis ? total_loss(primary.loss, contrast.loss, hat.value,
                                       cfg.train.lambda, lambda_hat, phase)
                          : total_loss(0.0, contrast.loss, hat.value, cfg.train.lambda,
                                       lambda_hat, Phase::ioe_dac);

            // Backprop through the network.
            ParamGrads grads = st.net.zero_grads();
            const double contrast_coef = breakdown.lambda;
            for (std::size_t k = 0; k < batch.embeddings.size(); ++k) {
                Vec dz(cfg.net.embed_dim, 0.0);
                for (std::size_t j = 0; j < dz.size(); ++j)
                    dz[j] = primary.grad[k][j] + contrast_coef * contrast.grad[k][j];
                st.net.accumulate_backward(traces[k], gates, dz, grads);
            }
            // Sparsity penalty acts on gate values only.
            const auto hat_g = hat_regularizer_gate_grads(st.mask.accumulated,
                                                          hat.free_capacity);
            for (std::size_t l = 0; l < grads.gate.size(); ++l)
                for (std::size_t i = 0; i < grads.gate[l].size(); ++i)
                    grads.gate[l][i] += lambda_hat * hat_g[l][i];
            const auto logit_grads =
                gate_value_to_logit_grads(gates, st.mask.scale, grads.gate);

            // Weight decay before gating so protected parameters never decay.
            const auto& enc = st.net.encoder();
            for (std::size_t l = 0; l < enc.size(); ++l) {
                for (std::size_t k = 0; k < enc[l].weights.data.size(); ++k)
                    grads.enc_w[l].data[k] +=
                        cfg.train.weight_decay * enc[l].weights.data[k];
                for (std::size_t k = 0; k < enc[l].bias.size(); ++k)
                    grads.enc_b[l][k] += cfg.train.weight_decay * enc[l].bias[k];
            }
            for (std::size_t k = 0; k < st.net.projection().weights.data.size(); ++k)
                grads.proj_w.data[k] +=
                    cfg.train.weight_decay * st.net.projection().weights.data[k];
            for (std::size_t k = 0; k < st.net.projection().bias.size(); ++k)
                grads.proj_b[k] += cfg.train.weight_decay * st.net.projection().bias[k];

            gate_gradients(grads, st.mask.accumulated);
            opt.step(st.net, grads, lr);
            opt.step_gates(st.mask, logit_grads, lr * cfg.train.gate_lr_scale);

            sum_ioe += breakdown.ioe;
            sum_dac += breakdown.dac;
            sum_hat += breakdown.hat;
            sum_total += breakdown.total;
            sum_omega += omega_batch;
            ++batch_index;
            if (phase == Phase::ioe_dac && batch_index == 1 && epoch == cfg.train.epochs_ioe)
                st.event("t=" + std::to_string(t) + " dac_step");
        }

        const double nb = static_cast<double>(std::max<std::size_t>(1, batch_index));
        MetricsRow row;
        row.task = t + 1;
        row.epoch = epoch + 1;
        row.phase = phase;
        row.ioe = sum_ioe / nb;
        row.dac = sum_dac / nb;
        row.hat = sum_hat / nb;
        row.total = sum_total / nb;
        row.omega = sum_omega / nb;
        row.tau = st.agg.tau_current;
        st.metrics.push_back(row);
    }

    // A run without a contrastive phase still records its aggregation state.
    if (!tau_set_for_task) {
        if (use_basis) {
            st.mask.scale = cfg.train.s_max;
            const auto set = detail::embed_train_set(st.net, soft_gates(st.mask), data);
            std::vector<int> anchor_labels = set.labels;
            for (int& l : anchor_labels) l += label_shift;
            st.omega_start.push_back(
                aggregation_degree(set.embeddings, anchor_labels, anchors));
        } else {
            st.omega_start.push_back(0.0);
        }
        st.tau_per_task.resize(static_cast<std::size_t>(t) + 1, 0.0);
        st.tau_per_task[static_cast<std::size_t>(t)] = st.agg.tau_current;
    }

    // Task wrap-up: binarize, accumulate, self-check the freeze contract.
    const std::vector<Vec> bin = binarize_gates(st.mask.gate_logits);
    st.task_masks.push_back(bin);
    st.mask = accumulate(st.mask, bin);
    st.saturation.push_back(saturation_fraction(st.mask.accumulated));
    st.event("t=" + std::to_string(t) + " mask_accumulated");

    const Vec params_after = st.net.flatten_params();
    for (std::size_t k = 0; k < frozen.size(); ++k)
        if (frozen[k] && params_before[k] != params_after[k])
            throw evaluation_error("frozen parameter moved during task " +
                                   std::to_string(t) + " at coordinate " +
                                   std::to_string(k));

    HeadTrainResult head =
        train_head(t, st.net, bin, data, cfg.head, cfg.seed);
    st.head_final_loss.push_back(head.loss_curve.empty() ? 0.0 : head.loss_curve.back());
    st.heads.push_back(std::move(head.head));
    st.event("t=" + std::to_string(t) + " head_trained");

    if (use_basis) {
        const auto set = detail::embed_train_set(st.net, bin, data);
        std::vector<int> anchor_labels = set.labels;
        for (int& l : anchor_labels) l += label_shift;
        st.omega_end.push_back(aggregation_degree(set.embeddings, anchor_labels, anchors));
    } else {
        st.omega_end.push_back(0.0);
    }

    data.release_train();
    ++st.completed_tasks;
}

inline void evaluate_stage(RunState& st, const TaskStream& stream) {
    st.last_eval = evaluate(stream, st.net, st.task_masks, st.heads, st.global_offsets,
                            score_variant_from_name(st.cfg.train.score_variant));
    st.acc.rows.push_back(st.last_eval.cil_acc);
    st.oracle_acc_last = st.last_eval.oracle_acc;
    st.event("t=" + std::to_string(st.completed_tasks - 1) + " evaluated");
}

// ---------------------------------------------------------------------------
// Checkpoints: everything needed to continue the run at a task boundary.
// ---------------------------------------------------------------------------
inline constexpr const char* kCheckpointMagic = "DCNETCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const RunState& st, const std::string& path) {
    BinWriter w;
    w.u32(kCheckpointVersion);
    w.str(config_hash(st.cfg));
    w.u64(static_cast<std::uint64_t>(st.completed_tasks));
    st.net.save(w);
    w.u64(st.mask.accumulated.size());
    for (const auto& v : st.mask.accumulated) w.vec(v);
    w.u64(st.task_masks.size());
    for (const auto& tm : st.task_masks) {
        w.u64(tm.size());
        for (const auto& v : tm) w.vec(v);
    }
    w.str(save_basis(st.basis));
    w.f64(st.agg.omega_current);
    w.vec(st.agg.omega_history);
    w.f64(st.agg.omega_avg);
    w.f64(st.agg.tau_current);
    w.u64(st.agg.last_update_fallback ? 1 : 0);
    w.u64(st.heads.size());
    for (const auto& h : st.heads) {
        w.u64(static_cast<std::uint64_t>(h.task_id));
        w.u64(h.class_count);
        w.u64(h.w.rows);
        w.u64(h.w.cols);
        w.vec(h.w.data);
        w.vec(h.b);
    }
    w.u64(st.global_offsets.size());
    for (int o : st.global_offsets) w.u64(static_cast<std::uint64_t>(o));
    w.u64(st.acc.rows.size());
    for (const auto& row : st.acc.rows) w.vec(row);
    w.vec(st.omega_start);
    w.vec(st.omega_end);
    w.vec(st.tau_per_task);
    w.vec(st.saturation);
    w.vec(st.head_final_loss);
    w.vec(st.oracle_acc_last);
    w.save(path, kCheckpointMagic);
}

inline RunState load_checkpoint(const std::string& path, const ExperimentConfig& cfg) {
    BinReader r = BinReader::load(path, kCheckpointMagic);
    const std::uint32_t ver = r.u32();
    if (ver != kCheckpointVersion)
        throw checkpoint_error("checkpoint version " + std::to_string(ver) +
                               " unsupported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
    const std::string hash = r.str();
    if (hash != config_hash(cfg))
        throw checkpoint_error("checkpoint was produced by a different configuration");
    RunState st = init_state(cfg);
    st.completed_tasks = static_cast<int>(r.u64());
    st.net = MaskedNetwork::load(r);
    if (!(st.net.spec() == cfg.net))
        throw checkpoint_error("checkpoint network shape does not match configuration");
    st.mask.accumulated.clear();
    const std::uint64_t nacc = r.u64();
    for (std::uint64_t i = 0; i < nacc; ++i) st.mask.accumulated.push_back(r.vec());
    const std::uint64_t ntm = r.u64();
    for (std::uint64_t i = 0; i < ntm; ++i) {
        std::vector<Vec> tm;
        const std::uint64_t nl = r.u64();
        for (std::uint64_t l = 0; l < nl; ++l) tm.push_back(r.vec());
        st.task_masks.push_back(std::move(tm));
    }
    st.basis = load_basis(r.str());
    st.agg.omega_current = r.f64();
    st.agg.omega_history = r.vec();
    st.agg.omega_avg = r.f64();
    st.agg.tau_current = r.f64();
    st.agg.last_update_fallback = r.u64() != 0;
    const std::uint64_t nheads = r.u64();
    for (std::uint64_t i = 0; i < nheads; ++i) {
        OodHead h;
        h.task_id = static_cast<int>(r.u64());
        h.class_count = r.u64();
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        h.w = Mat(rows, cols);
        h.w.data = r.vec();
        h.b = r.vec();
        if (h.w.data.size() != rows * cols)
            throw checkpoint_error("checkpoint head shape mismatch");
        st.heads.push_back(std::move(h));
    }
    const std::uint64_t noff = r.u64();
    for (std::uint64_t i = 0; i < noff; ++i)
        st.global_offsets.push_back(static_cast<int>(r.u64()));
    const std::uint64_t nrows = r.u64();
    for (std::uint64_t i = 0; i < nrows; ++i) st.acc.rows.push_back(r.vec());
    st.omega_start = r.vec();
    st.omega_end = r.vec();
    st.tau_per_task = r.vec();
    st.saturation = r.vec();
    st.head_final_loss = r.vec();
    st.oracle_acc_last = r.vec();
    return st;
}

// Runs tasks [first_task, T), evaluating and checkpointing at each boundary.
// checkpoint_dir may be empty to skip checkpoint files.
inline void run_sequence_from(RunState& st, TaskStream& stream, int first_task,
                              const std::string& checkpoint_dir) {
    for (std::size_t t = static_cast<std::size_t>(first_task); t < stream.tasks.size();
         ++t) {
        run_task(st, stream.tasks[t]);
        evaluate_stage(st, stream);
        if (!checkpoint_dir.empty())
            save_checkpoint(st, checkpoint_dir + "/task_" +
                                    std::to_string(st.completed_tasks) + ".ckpt");
    }
}

inline RunState run_sequence(const ExperimentConfig& cfg, TaskStream& stream,
                             const std::string& checkpoint_dir = "") {
    RunState st = init_state(cfg);
    run_sequence_from(st, stream, 0, checkpoint_dir);
    return st;
}

// Test-split embeddings under each task's own stored mask, for export.
inline std::string embeddings_csv(const TaskStream& stream, const RunState& st) {
    std::ostringstream out;
    out << "sample_id,task,class";
    for (std::size_t j = 0; j < st.cfg.net.embed_dim; ++j) out << ",e" << j;
    out << "\n";
    std::size_t sid = 0;
    for (std::size_t t = 0; t < st.task_masks.size() && t < stream.tasks.size(); ++t) {
        const TaskDataset& ds = stream.tasks[t];
        for (std::size_t k = 0; k < ds.test_size(); ++k) {
            const Vec z = st.net.forward(ds.test_input(k), st.task_masks[t]).embedding;
            out << sid++ << "," << (t + 1) << ","
                << (ds.global_label_offset + ds.test_label(k));
            for (double v : z) out << "," << fmt17(v);
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace dcnet
