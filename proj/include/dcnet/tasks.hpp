#pragma once

// Synthetic task streams with disjoint label spaces. Three generator
// families (gaussian-ring, spirals, shells) with controllable separation
// and noise. Standardization statistics come from train splits only.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/io.hpp"
#include "dcnet/numerics.hpp"

namespace dcnet {

struct StreamSpec {
    std::string generator = "gaussian-ring";  // gaussian-ring | spirals | shells
    std::size_t tasks = 5;
    std::size_t classes_per_task = 2;
    std::size_t samples_per_class = 200;
    std::size_t input_dim = 8;
    double noise = 0.1;
    double separation = 3.0;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
};

struct TaskDataset {
    int task_id = 0;
    std::size_t class_count = 0;
    int global_label_offset = 0;
    std::vector<Vec> inputs;
    std::vector<int> labels;  // local, in [0, class_count)
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;

    // Train reads are counted and can be revoked: after a task finishes the
    // trainer releases its train split, making exemplar reuse a hard error.
    mutable std::uint64_t train_reads = 0;
    bool train_released = false;

    std::size_t train_size() const { return train_idx.size(); }
    std::size_t test_size() const { return test_idx.size(); }

    const Vec& train_input(std::size_t k) const {
        if (train_released)
            throw precondition_error("train split of task " + std::to_string(task_id) +
                                     " was released (exemplar-free contract)");
        ++train_reads;
        return inputs[train_idx[k]];
    }
    int train_label(std::size_t k) const {
        if (train_released)
            throw precondition_error("train split of task " + std::to_string(task_id) +
                                     " was released (exemplar-free contract)");
        return labels[train_idx[k]];
    }
    const Vec& test_input(std::size_t k) const { return inputs[test_idx[k]]; }
    int test_label(std::size_t k) const { return labels[test_idx[k]]; }

    void release_train() { train_released = true; }
};

struct TaskStream {
    StreamSpec spec;
    std::vector<TaskDataset> tasks;
    std::size_t total_classes() const { return spec.tasks * spec.classes_per_task; }
};

namespace detail {

// Class mean placement per family; raw point synthesis before noise.
inline Vec synth_point(const StreamSpec& spec, std::size_t global_class,
                       std::size_t total_classes, RngStream& rng) {
    Vec x(spec.input_dim, 0.0);
    const double tau = 2.0 * 3.14159265358979323846;
    if (spec.generator == "gaussian-ring") {
        const double ang = tau * static_cast<double>(global_class) /
                           static_cast<double>(total_classes);
        x[0] = spec.separation * std::cos(ang);
        x[1] = spec.separation * std::sin(ang);
    } else if (spec.generator == "spirals") {
        const double phase = tau * static_cast<double>(global_class) /
                             static_cast<double>(total_classes);
        const double t = rng.uniform();
        const double r = spec.separation * (0.3 + 0.7 * t);
        const double ang = phase + 1.5 * tau * t;
        x[0] = r * std::cos(ang);
        x[1] = r * std::sin(ang);
    } else if (spec.generator == "shells") {
        const double r = spec.separation * (1.0 + 0.6 * static_cast<double>(global_class));
        Vec u = unit_normalize(rng.normal_vec(spec.input_dim));
        for (std::size_t k = 0; k < spec.input_dim; ++k) x[k] = r * u[k];
    } else {
        throw configuration_error("unknown generator: " + spec.generator);
    }
    for (std::size_t k = 0; k < spec.input_dim; ++k) x[k] += spec.noise * rng.normal();
    return x;
}

}  // namespace detail

inline TaskStream make_stream(const StreamSpec& spec) {
    if (spec.tasks < 1) throw configuration_error("stream: tasks must be >= 1");
    if (spec.classes_per_task < 1)
        throw configuration_error("stream: classes_per_task must be >= 1");
    if (spec.samples_per_class < 2)
        throw configuration_error("stream: samples_per_class must be >= 2");
    if (spec.input_dim < 2) throw configuration_error("stream: input_dim must be >= 2");
    if (!(spec.noise >= 0.0)) throw configuration_error("stream: noise must be >= 0");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw configuration_error("stream: train_fraction must lie in (0,1)");

    const std::size_t total = spec.tasks * spec.classes_per_task;
    TaskStream stream;
    stream.spec = spec;
    stream.tasks.reserve(spec.tasks);

    for (std::size_t t = 0; t < spec.tasks; ++t) {
        TaskDataset ds;
        ds.task_id = static_cast<int>(t);
        ds.class_count = spec.classes_per_task;
        ds.global_label_offset = static_cast<int>(t * spec.classes_per_task);
        for (std::size_t c = 0; c < spec.classes_per_task; ++c) {
            const std::size_t g = t * spec.classes_per_task + c;
            RngStream rng(spec.seed, stream_id(0x7A5C5u, t, c));
            const std::size_t n_train = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(
                       spec.train_fraction * static_cast<double>(spec.samples_per_class))));
            std::vector<std::size_t> order(spec.samples_per_class);
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
            const std::size_t base = ds.inputs.size();
            for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
                ds.inputs.push_back(detail::synth_point(spec, g, total, rng));
                ds.labels.push_back(static_cast<int>(c));
            }
            for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
                if (i < n_train)
                    ds.train_idx.push_back(base + order[i]);
                else
                    ds.test_idx.push_back(base + order[i]);
            }
        }
        stream.tasks.push_back(std::move(ds));
    }

    // Per-coordinate standardization from pooled train statistics.
    Vec mean(spec.input_dim, 0.0);
    std::size_t n = 0;
    for (const auto& ds : stream.tasks)
        for (std::size_t k : ds.train_idx) {
            for (std::size_t j = 0; j < spec.input_dim; ++j) mean[j] += ds.inputs[k][j];
            ++n;
        }
    for (double& m : mean) m /= static_cast<double>(n);
    Vec var(spec.input_dim, 0.0);
    for (const auto& ds : stream.tasks)
        for (std::size_t k : ds.train_idx)
            for (std::size_t j = 0; j < spec.input_dim; ++j) {
                const double d = ds.inputs[k][j] - mean[j];
                var[j] += d * d;
            }
    Vec scale(spec.input_dim, 1.0);
    for (std::size_t j = 0; j < spec.input_dim; ++j) {
        const double sd = std::sqrt(var[j] / static_cast<double>(n));
        scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;  // constant coordinate left unscaled
    }
    for (auto& ds : stream.tasks)
        for (auto& x : ds.inputs)
            for (std::size_t j = 0; j < spec.input_dim; ++j)
                x[j] = (x[j] - mean[j]) * scale[j];

    return stream;
}

struct ClassStats {
    std::vector<Vec> means;             // per class
    std::vector<std::size_t> counts;
    Mat pooled_cov;                     // shared, unbiased (divisor N - C)
};

// Pooled-covariance statistics over labeled points. Works on any labeled
// point set (raw inputs or learned embeddings).
inline ClassStats class_statistics(const std::vector<Vec>& points,
                                   const std::vector<int>& labels,
                                   std::size_t n_classes) {
    if (points.empty() || points.size() != labels.size())
        throw degenerate_input_error("class_statistics: empty or mismatched input");
    const std::size_t d = points[0].size();
    ClassStats st;
    st.means.assign(n_classes, Vec(d, 0.0));
    st.counts.assign(n_classes, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= n_classes)
            throw configuration_error("class_statistics: label out of range");
        for (std::size_t j = 0; j < d; ++j) st.means[c][j] += points[i][j];
        ++st.counts[c];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (st.counts[c] < 2)
            throw degenerate_input_error("class_statistics: class " + std::to_string(c) +
                                         " has fewer than 2 samples");
        for (double& m : st.means[c]) m /= static_cast<double>(st.counts[c]);
    }
    if (points.size() <= n_classes)
        throw degenerate_input_error("class_statistics: not enough samples for pooled covariance");
    st.pooled_cov = Mat(d, d);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec dev = sub(points[i], st.means[static_cast<std::size_t>(labels[i])]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) st.pooled_cov(a, b) += dev[a] * dev[b];
    }
    const double divisor = static_cast<double>(points.size() - n_classes);
    for (double& x : st.pooled_cov.data) x /= divisor;
    return st;
}

// Train-split statistics with global labels.
inline ClassStats class_statistics(const TaskStream& stream) {
    std::vector<Vec> pts;
    std::vector<int> labels;
    for (const auto& ds : stream.tasks)
        for (std::size_t k = 0; k < ds.train_size(); ++k) {
            pts.push_back(ds.train_input(k));
            labels.push_back(ds.global_label_offset + ds.train_label(k));
        }
    return class_statistics(pts, labels, stream.total_classes());
}

// Columnar text export; load reconstructs the exact sample values and split
// membership (train-index ordering is not part of the format).
inline std::string save_stream(const TaskStream& s) {
    std::ostringstream out;
    out << "dcnet-stream 1\n";
    out << "generator " << s.spec.generator << "\n";
    out << "dim " << s.spec.input_dim << "\n";
    out << "tasks " << s.spec.tasks << "\n";
    out << "classes_per_task " << s.spec.classes_per_task << "\n";
    out << "samples_per_class " << s.spec.samples_per_class << "\n";
    out << "noise " << fmt17(s.spec.noise) << "\n";
    out << "separation " << fmt17(s.spec.separation) << "\n";
    out << "train_fraction " << fmt17(s.spec.train_fraction) << "\n";
    out << "seed " << s.spec.seed << "\n";
    for (const auto& ds : s.tasks) {
        std::vector<int> split(ds.inputs.size(), 1);
        for (std::size_t k : ds.train_idx) split[k] = 0;
        for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
            out << ds.task_id << " " << ds.labels[i] << " "
                << (split[i] == 0 ? "train" : "test");
            for (double x : ds.inputs[i]) out << " " << fmt17(x);
            out << "\n";
        }
    }
    return out.str();
}

inline TaskStream load_stream(const std::string& text) {
    std::istringstream in(text);
    std::string tag, ver;
    in >> tag >> ver;
    if (tag != "dcnet-stream" || ver != "1")
        throw checkpoint_error("stream container: bad header");
    TaskStream s;
    auto expect = [&in](const char* key) {
        std::string k;
        in >> k;
        if (k != key)
            throw checkpoint_error(std::string("stream container: expected ") + key);
    };
    expect("generator");
    in >> s.spec.generator;
    expect("dim");
    in >> s.spec.input_dim;
    expect("tasks");
    in >> s.spec.tasks;
    expect("classes_per_task");
    in >> s.spec.classes_per_task;
    expect("samples_per_class");
    in >> s.spec.samples_per_class;
    expect("noise");
    in >> s.spec.noise;
    expect("separation");
    in >> s.spec.separation;
    expect("train_fraction");
    in >> s.spec.train_fraction;
    expect("seed");
    in >> s.spec.seed;
    if (!in) throw checkpoint_error("stream container: bad header fields");
    s.tasks.resize(s.spec.tasks);
    for (std::size_t t = 0; t < s.spec.tasks; ++t) {
        s.tasks[t].task_id = static_cast<int>(t);
        s.tasks[t].class_count = s.spec.classes_per_task;
        s.tasks[t].global_label_offset = static_cast<int>(t * s.spec.classes_per_task);
    }
    int task, label;
    std::string split;
    while (in >> task >> label >> split) {
        if (task < 0 || static_cast<std::size_t>(task) >= s.spec.tasks)
            throw checkpoint_error("stream container: task id out of range");
        Vec x(s.spec.input_dim);
        for (auto& v : x) in >> v;
        if (!in) throw checkpoint_error("stream container: truncated row");
        auto& ds = s.tasks[static_cast<std::size_t>(task)];
        const std::size_t idx = ds.inputs.size();
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(label);
        if (split == "train")
            ds.train_idx.push_back(idx);
        else if (split == "test")
            ds.test_idx.push_back(idx);
        else
            throw checkpoint_error("stream container: bad split tag " + split);
    }
    return s;
}

}  // namespace dcnet
