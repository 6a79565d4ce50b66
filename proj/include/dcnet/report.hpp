#pragma once

// Run reports: a deterministic JSON artifact, a human-readable summary, and
// a config diff between two reports. The JSON carries no wall-clock data;
// identical seed + config runs serialize to identical bytes.

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcnet/basis.hpp"
#include "dcnet/config.hpp"
#include "dcnet/inference.hpp"
#include "dcnet/io.hpp"
#include "dcnet/trainer.hpp"

namespace dcnet {

// Canonical config text as a key -> string-value object; values keep their
// canonical formatting so diffs compare exact bytes.
inline nlohmann::json config_object(const ExperimentConfig& cfg) {
    nlohmann::json obj = nlohmann::json::object();
    std::istringstream in(canonical_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        obj[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return obj;
}

inline nlohmann::json report_json(const RunState& st) {
    nlohmann::json r;
    r["format"] = "dcnet-report";
    r["version"] = 1;
    r["seed"] = st.cfg.seed;
    r["config_hash"] = config_hash(st.cfg);
    r["config"] = config_object(st.cfg);
    r["task_count"] = st.completed_tasks;

    std::size_t classes = 0;
    for (const auto& h : st.heads) classes += h.class_count;
    r["classes_total"] = classes;

    r["acc_matrix"] = st.acc.rows;
    if (!st.acc.rows.empty()) {
        const auto [a_last, a_inc] = a_last_a_inc(st.acc);
        r["a_last"] = a_last;
        r["a_inc"] = a_inc;
        r["cil_per_task_last"] = st.acc.rows.back();
    }
    r["oracle_per_task_last"] = st.oracle_acc_last;
    r["omega_start"] = st.omega_start;
    r["omega_end"] = st.omega_end;
    r["tau_per_task"] = st.tau_per_task;
    r["mask_saturation"] = st.saturation;
    r["head_final_loss"] = st.head_final_loss;

    if (st.basis.size() >= 2) {
        const OrthogonalityReport o = orthogonality_report(st.basis);
        r["orthogonality"] = {{"max_abs_cosine", o.max_abs_cosine},
                              {"mean_abs_cosine", o.mean_abs_cosine},
                              {"vector_count", st.basis.size()}};
    }
    r["events"] = st.events;
    return r;
}

namespace detail {

inline std::string acc_cell(const nlohmann::json& v) {
    return fmt_fixed(v.get<double>(), 4);
}

}  // namespace detail

// Plain-text rendering of a report for terminals.
inline std::string report_human(const nlohmann::json& r) {
    std::ostringstream out;
    out << "run report (seed " << r.value("seed", 0ULL) << ", config "
        << r.value("config_hash", std::string("?")) << ")\n";
    out << "tasks: " << r.value("task_count", 0) << "  classes: "
        << r.value("classes_total", 0) << "\n";
    if (r.contains("a_last"))
        out << "A_last " << detail::acc_cell(r["a_last"]) << "  A_inc "
            << detail::acc_cell(r["a_inc"]) << "\n";
    if (r.contains("acc_matrix") && !r["acc_matrix"].empty()) {
        out << "accuracy matrix (rows: after task N, cols: task t):\n";
        for (const auto& row : r["acc_matrix"]) {
            out << " ";
            for (const auto& v : row) out << " " << detail::acc_cell(v);
            out << "\n";
        }
    }
    auto trajectory = [&out, &r](const char* key, const char* label) {
        if (!r.contains(key) || r[key].empty()) return;
        out << label << ":";
        for (const auto& v : r[key]) out << " " << detail::acc_cell(v);
        out << "\n";
    };
    trajectory("omega_start", "omega (contrastive start)");
    trajectory("omega_end", "omega (task end)");
    trajectory("tau_per_task", "tau per task");
    trajectory("mask_saturation", "mask saturation");
    if (r.contains("orthogonality"))
        out << "anchor coherence: max "
            << fmt_fixed(r["orthogonality"]["max_abs_cosine"].get<double>(), 4) << ", mean "
            << fmt_fixed(r["orthogonality"]["mean_abs_cosine"].get<double>(), 4) << " over "
            << r["orthogonality"]["vector_count"].get<std::size_t>() << " vectors\n";
    return out.str();
}

// Config keys whose values differ between two reports, one line each.
inline std::vector<std::string> report_config_diff(const nlohmann::json& a,
                                                   const nlohmann::json& b) {
    std::vector<std::string> lines;
    const nlohmann::json ca = a.value("config", nlohmann::json::object());
    const nlohmann::json cb = b.value("config", nlohmann::json::object());
    for (auto it = ca.begin(); it != ca.end(); ++it) {
        if (!cb.contains(it.key()))
            lines.push_back(it.key() + ": " + it.value().get<std::string>() + " -> (absent)");
        else if (cb[it.key()] != it.value())
            lines.push_back(it.key() + ": " + it.value().get<std::string>() + " -> " +
                            cb[it.key()].get<std::string>());
    }
    for (auto it = cb.begin(); it != cb.end(); ++it)
        if (!ca.contains(it.key()))
            lines.push_back(it.key() + ": (absent) -> " + it.value().get<std::string>());
    return lines;
}

}  // namespace dcnet
