#pragma once

// Command-line front end. Six verbs share one option set (--config, --seed,
// --out, --workers, --verbose); every failure surfaces as a single
// machine-readable "error: <code>: <message>" line on stderr and a nonzero
// exit. Timing lives only in manifest.json, so the data artifacts of two
// identical runs match byte for byte.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcnet/config.hpp"
#include "dcnet/errors.hpp"
#include "dcnet/inference.hpp"
#include "dcnet/io.hpp"
#include "dcnet/report.hpp"
#include "dcnet/tasks.hpp"
#include "dcnet/theory.hpp"
#include "dcnet/trainer.hpp"

namespace dcnet::cli {

struct Options {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    bool out_set = false;
    std::size_t workers = 1;
    bool verbose = false;
    std::string diff_path;
};

inline ExperimentConfig effective_config(const Options& o) {
    // No config file means the documented defaults, with the same derived
    // bindings (net input dim, stream seeds) as a parsed file.
    ExperimentConfig cfg =
        o.config_path.empty() ? parse_config("") : parse_config(read_text_file(o.config_path));
    if (o.seed_set) {
        cfg.seed = o.seed;
        cfg.data.seed = o.seed;
        cfg.basis.seed = o.seed;
    }
    if (o.out_set) cfg.out_dir = o.out;
    cfg.validate();
    return cfg;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_manifest(const std::string& dir, const std::string& verb,
                           const ExperimentConfig& cfg, const Options& o,
                           const std::vector<std::string>& files, double wall_seconds) {
    nlohmann::json m;
    m["artifact"] = "dcnet-" + verb;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    m["workers"] = o.workers;
    m["checkpoint_version"] = kCheckpointVersion;
    m["report_version"] = 1;
    m["files"] = files;
    m["wall_seconds"] = wall_seconds;  // the only nondeterministic field
    write_text_file(dir + "/manifest.json", m.dump(2) + "\n");
}

inline int verb_gen_data(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = effective_config(o);
    const TaskStream stream = make_stream(cfg.data);
    write_text_file(cfg.out_dir + "/stream.txt", save_stream(stream));
    write_manifest(cfg.out_dir, "gen-data", cfg, o, {"stream.txt"}, seconds_since(t0));
    std::size_t train = 0, test = 0;
    for (const auto& t : stream.tasks) {
        train += t.train_size();
        test += t.test_size();
    }
    std::cout << "stream: " << stream.tasks.size() << " tasks x "
              << cfg.data.classes_per_task << " classes, dim " << cfg.data.input_dim << ", "
              << train << " train / " << test << " test samples -> " << cfg.out_dir
              << "/stream.txt\n";
    return 0;
}

inline int verb_train(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = effective_config(o);
    TaskStream stream = make_stream(cfg.data);
    RunState st = run_sequence(cfg, stream, cfg.out_dir + "/checkpoints");

    const nlohmann::json rep = report_json(st);
    write_text_file(cfg.out_dir + "/metrics.csv", metrics_csv(st.metrics));
    write_text_file(cfg.out_dir + "/report.json", rep.dump(2) + "\n");
    write_text_file(cfg.out_dir + "/predictions.csv",
                    predictions_csv(st.last_eval, st.task_masks.size()));
    write_text_file(cfg.out_dir + "/embeddings.csv", embeddings_csv(stream, st));
    std::vector<std::string> files = {"metrics.csv", "report.json", "predictions.csv",
                                      "embeddings.csv"};
    for (int t = 1; t <= st.completed_tasks; ++t)
        files.push_back("checkpoints/task_" + std::to_string(t) + ".ckpt");
    write_manifest(cfg.out_dir, "train", cfg, o, files, seconds_since(t0));

    std::cout << report_human(rep);
    if (o.verbose) {
        std::cout << "events:\n";
        for (const auto& e : st.events) std::cout << "  " << e << "\n";
    }
    std::cout << "artifacts -> " << cfg.out_dir << "\n";
    return 0;
}

inline std::string latest_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path ckdir = fs::path(dir) / "checkpoints";
    if (!fs::is_directory(ckdir))
        throw missing_artifact_error("no checkpoints directory under " + dir);
    int best = 0;
    for (const auto& entry : fs::directory_iterator(ckdir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("task_", 0) != 0 || name.size() < 11) continue;
        if (name.substr(name.size() - 5) != ".ckpt") continue;
        try {
            best = std::max(best, std::stoi(name.substr(5, name.size() - 10)));
        } catch (const std::exception&) {
        }
    }
    if (best == 0) throw missing_artifact_error("no task checkpoints under " + dir);
    return (ckdir / ("task_" + std::to_string(best) + ".ckpt")).string();
}

inline int verb_eval(const Options& o) {
    const ExperimentConfig cfg = effective_config(o);
    const std::string ckpt = latest_checkpoint(cfg.out_dir);
    const RunState st = load_checkpoint(ckpt, cfg);
    const TaskStream stream = make_stream(cfg.data);
    const EvalResult res = evaluate(stream, st.net, st.task_masks, st.heads,
                                    st.global_offsets,
                                    score_variant_from_name(cfg.train.score_variant));
    write_text_file(cfg.out_dir + "/predictions.csv",
                    predictions_csv(res, st.task_masks.size()));
    double cil = 0.0, oracle = 0.0;
    for (double a : res.cil_acc) cil += a;
    for (double a : res.oracle_acc) oracle += a;
    const double n = static_cast<double>(res.cil_acc.size());
    std::cout << "checkpoint: " << ckpt << " (" << st.completed_tasks << " tasks)\n";
    for (std::size_t t = 0; t < res.cil_acc.size(); ++t)
        std::cout << "task " << (t + 1) << ": cil " << fmt_fixed(res.cil_acc[t], 4)
                  << "  within-task " << fmt_fixed(res.oracle_acc[t], 4) << "\n";
    std::cout << "mean: cil " << fmt_fixed(cil / n, 4) << "  within-task "
              << fmt_fixed(oracle / n, 4) << "\n";
    return 0;
}

inline int verb_verify_bounds(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = effective_config(o);
    const auto reports =
        verify_bounds(cfg.seed, cfg.theory.specs, cfg.theory.mc_samples, o.workers);
    const auto tv = verify_tv_pairs(cfg.seed, cfg.theory.tv_pairs, cfg.theory.mc_samples);
    write_text_file(cfg.out_dir + "/bounds.csv", bounds_csv(reports));
    write_text_file(cfg.out_dir + "/tv_pairs.csv", tv_pairs_csv(tv));
    write_manifest(cfg.out_dir, "verify-bounds", cfg, o, {"bounds.csv", "tv_pairs.csv"},
                   seconds_since(t0));

    std::size_t bound_fail = 0, tv_fail = 0;
    for (const auto& r : reports)
        if (!r.all_pass()) {
            ++bound_fail;
            if (o.verbose)
                std::cout << "spec " << r.spec_id << " (dim " << r.dim << ", k " << r.k
                          << ", T " << r.t << "): D " << fmt17(r.empirical_d) << " lemma1 "
                          << fmt17(r.lemma1) << " theorem1 " << fmt17(r.theorem1)
                          << " lower " << fmt17(r.lower_bound) << "\n";
        }
    for (const auto& p : tv)
        if (!p.tv.pass) ++tv_fail;
    std::cout << "gap bounds: " << reports.size() << " specs, " << bound_fail
              << " failures\n";
    std::cout << "tv/pinsker: " << tv.size() << " pairs, " << tv_fail << " failures\n";
    std::cout << "artifacts -> " << cfg.out_dir << "\n";
    return (bound_fail + tv_fail) == 0 ? 0 : 1;
}

// Central differences at one step size cannot serve every coordinate: stiff
// directions need a small h (truncation falls as h^2) while near-zero
// gradients need a large h (cancellation noise falls as 1/h). Each
// coordinate may pass at any step of the ladder; a genuinely wrong analytic
// gradient fails at all of them.
template <typename F>
double ladder_grad_check(F&& f, const Vec& x, const Vec& analytic) {
    constexpr double kFloor = 1e-5;
    Vec rel(x.size(), 2.0);
    for (const double h : {1e-5, 3e-6, 1e-6}) {
        const Vec numeric = finite_diff_gradient(f, x, h);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double r = std::abs(analytic[k] - numeric[k]) /
                             std::max({std::abs(analytic[k]), std::abs(numeric[k]), kFloor});
            rel[k] = std::min(rel[k], r);
        }
    }
    double worst = 0.0;
    for (double r : rel) worst = std::max(worst, r);
    return worst;
}

// Analytic gradients of the training losses against central differences on
// randomized small networks. Exercised more heavily in the test suite; this
// verb is the user-facing spot check.
inline int verb_grad_check(const Options& o) {
    const std::uint64_t seed = o.seed_set ? o.seed : 1;
    const double tol = 1e-4;
    double worst = 0.0;
    std::string worst_what = "none";
    const std::size_t batches = 50;

    for (std::size_t b = 0; b < batches; ++b) {
        RngStream rng(seed, stream_id(0x6C4Du, b));
        NetworkSpec spec;
        spec.input_dim = 3 + rng.uniform_index(3);
        spec.hidden_widths = {5 + rng.uniform_index(4)};
        spec.feature_dim = 6 + rng.uniform_index(4);
        spec.embed_dim = 4 + rng.uniform_index(4);
        spec.activation = Activation::tanh_fn;  // smooth, safe for central FD
        MaskedNetwork net(spec, seed + b);

        MaskState mask;
        // Scales above ~12 already saturate the gates; pushing further only
        // inflates the finite-difference truncation error of the probe.
        mask.scale = 1.0 + rng.uniform(0.0, 11.0);
        for (std::size_t w : spec.encoder_widths()) {
            Vec logits(w), acc(w, 0.0);
            for (double& x : logits) x = rng.uniform(-1.0, 1.0);
            for (std::size_t i = 0; i + 1 < w; ++i) acc[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
            mask.gate_logits.push_back(std::move(logits));
            mask.accumulated.push_back(std::move(acc));
        }

        const std::size_t classes = 2 + rng.uniform_index(2);
        const std::size_t n = classes + 1 + rng.uniform_index(4);
        std::vector<Vec> anchors;
        for (std::size_t c = 0; c < classes; ++c)
            anchors.push_back(unit_normalize(rng.normal_vec(spec.embed_dim)));
        std::vector<Vec> xs;
        std::vector<int> labels;
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(rng.normal_vec(spec.input_dim));
            labels.push_back(static_cast<int>(i % classes));  // guarantees positives
        }
        const double tau_i = 0.2 + rng.uniform(0.0, 0.3);
        const double tau_d = 0.2 + rng.uniform(0.0, 0.3);
        const double lambda = 1.0, lambda_hat = 1.5;

        auto batch_loss = [&](const MaskedNetwork& netx, const MaskState& maskx) {
            const auto gates = soft_gates(maskx);
            Batch batch;
            for (const auto& x : xs) batch.embeddings.push_back(netx.forward(x, gates).embedding);
            batch.labels = labels;
            const double ioe = loss_ioe(batch, anchors, tau_i).loss;
            const double dac = loss_dac(batch, tau_d).loss;
            const double hat = hat_regularizer(gates, maskx.accumulated).value;
            return ioe + lambda * dac + lambda_hat * hat;
        };

        // Analytic parameter + gate gradients at the base point.
        const auto gates = soft_gates(mask);
        Batch batch;
        std::vector<ForwardTrace> traces;
        for (const auto& x : xs) {
            traces.push_back(net.forward(x, gates));
            batch.embeddings.push_back(traces.back().embedding);
        }
        batch.labels = labels;
        const auto ioe = loss_ioe(batch, anchors, tau_i);
        const auto dac = loss_dac(batch, tau_d);
        const auto hat = hat_regularizer(gates, mask.accumulated);
        ParamGrads grads = net.zero_grads();
        for (std::size_t i = 0; i < n; ++i) {
            Vec dz(spec.embed_dim);
            for (std::size_t j = 0; j < dz.size(); ++j)
                dz[j] = ioe.grad[i][j] + lambda * dac.grad[i][j];
            net.accumulate_backward(traces[i], gates, dz, grads);
        }
        const auto hat_g = hat_regularizer_gate_grads(mask.accumulated, hat.free_capacity);
        for (std::size_t l = 0; l < grads.gate.size(); ++l)
            for (std::size_t i = 0; i < grads.gate[l].size(); ++i)
                grads.gate[l][i] += lambda_hat * hat_g[l][i];
        const auto logit_grads = gate_value_to_logit_grads(gates, mask.scale, grads.gate);

        // Parameters.
        {
            MaskedNetwork probe = net;
            auto f = [&](const Vec& p) {
                probe.set_params(p);
                return batch_loss(probe, mask);
            };
            const double err = ladder_grad_check(f, net.flatten_params(),
                                                 net.flatten_grads(grads));
            if (err > worst) {
                worst = err;
                worst_what = "parameters, batch " + std::to_string(b);
            }
        }
        // Gate logits.
        {
            Vec flat, analytic;
            for (const auto& l : mask.gate_logits) flat.insert(flat.end(), l.begin(), l.end());
            for (const auto& l : logit_grads) analytic.insert(analytic.end(), l.begin(), l.end());
            MaskState probe = mask;
            auto f = [&](const Vec& e) {
                std::size_t k = 0;
                for (auto& layer : probe.gate_logits)
                    for (double& x : layer) x = e[k++];
                return batch_loss(net, probe);
            };
            const double err = ladder_grad_check(f, flat, analytic);
            if (err > worst) {
                worst = err;
                worst_what = "gate logits, batch " + std::to_string(b);
            }
        }
    }

    const bool ok = worst <= tol;
    std::cout << "gradient check: " << batches << " random batches, max relative error "
              << fmt17(worst) << " (worst at " << worst_what << "), tolerance "
              << fmt17(tol) << ": " << (ok ? "OK" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

inline int verb_report(const Options& o) {
    const std::string dir = o.out_set ? o.out : "run-out";
    const std::string path = dir + "/report.json";
    if (!std::filesystem::exists(path))
        throw missing_artifact_error("no report at " + path);
    const nlohmann::json rep = nlohmann::json::parse(read_text_file(path));
    std::cout << report_human(rep);
    if (!o.diff_path.empty()) {
        std::string other = o.diff_path;
        if (std::filesystem::is_directory(other)) other += "/report.json";
        if (!std::filesystem::exists(other))
            throw missing_artifact_error("no report at " + other);
        const nlohmann::json orep = nlohmann::json::parse(read_text_file(other));
        const auto lines = report_config_diff(rep, orep);
        if (lines.empty())
            std::cout << "config diff: identical\n";
        else {
            std::cout << "config diff (this -> other):\n";
            for (const auto& l : lines) std::cout << "  " << l << "\n";
        }
    }
    return 0;
}

inline int run(int argc, char** argv) {
    CLI::App app{"desk-scale class-incremental learner with hyperspherical anchors"};
    app.require_subcommand(1);

    Options o;
    app.add_option("--config", o.config_path, "key=value config file");
    auto* seed_opt = app.add_option("--seed", o.seed, "override the run seed");
    auto* out_opt = app.add_option("--out", o.out, "artifact directory");
    app.add_option("--workers", o.workers, "worker threads for the theory lab")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
    app.add_flag("--verbose", o.verbose, "chattier output");

    auto* gen = app.add_subcommand("gen-data", "generate and save a task stream");
    auto* train = app.add_subcommand("train", "run the full task sequence");
    auto* eval = app.add_subcommand("eval", "evaluate the latest checkpoint");
    auto* bounds = app.add_subcommand("verify-bounds",
                                      "numerically verify the separability bounds");
    auto* gradc = app.add_subcommand("grad-check",
                                     "compare analytic gradients to finite differences");
    auto* report = app.add_subcommand("report", "print a saved run report");
    report->add_option("--diff", o.diff_path, "second report (file or run dir) to diff");
    for (auto* sub : {gen, train, eval, bounds, gradc, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    o.seed_set = seed_opt->count() > 0;
    o.out_set = out_opt->count() > 0;

    try {
        if (gen->parsed()) return verb_gen_data(o);
        if (train->parsed()) return verb_train(o);
        if (eval->parsed()) return verb_eval(o);
        if (bounds->parsed()) return verb_verify_bounds(o);
        if (gradc->parsed()) return verb_grad_check(o);
        if (report->parsed()) return verb_report(o);
    } catch (const dcnet::error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace dcnet::cli
