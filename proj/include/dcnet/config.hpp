#pragma once

// Flat key=value configuration with dotted section prefixes. Unknown keys
// and malformed values are hard errors naming the key and line. Every field
// has a documented default, so an empty config is a valid run.

#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dcnet/basis.hpp"
#include "dcnet/errors.hpp"
#include "dcnet/inference.hpp"
#include "dcnet/io.hpp"
#include "dcnet/model.hpp"
#include "dcnet/tasks.hpp"

namespace dcnet {

struct TrainConfig {
    std::size_t epochs_ioe = 120;  // DAC joins when these end
    std::size_t epochs_dac = 80;
    std::size_t batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double gate_lr_scale = 1.0;  // gate logits step at lr * this
    double s_max = 100.0;
    double lambda = 1.0;
    double lambda_hat_first = 1.5;
    double lambda_hat_later = 1.0;
    double tau_ioe = 0.05;
    double tau0 = 0.2;
    double tau_min = 0.05;
    double tau_max = 1.0;
    bool fixed_tau = false;           // ablation: DAC always at tau0
    std::string ioe_mode = "basis";   // basis | supcon (no-anchor ablation)
    bool ioe_all_bases = false;       // denominator over all learned classes
    bool omega_includes_current = false;
    std::string score_variant = "max-softmax";
};

struct TheoryConfig {
    std::size_t specs = 200;
    std::size_t mc_samples = 100000;
    std::size_t tv_pairs = 100;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "run-out";
    StreamSpec data;
    NetworkSpec net;
    GeneratorConfig basis;
    TrainConfig train;
    HeadConfig head;
    TheoryConfig theory;

    void validate() const {
        net.validate();
        if (net.input_dim != data.input_dim)
            throw configuration_error("config: net input dim is bound to data.input_dim");
        if (train.batch_size < 2)
            throw configuration_error("config: train.batch_size must be >= 2 for DAC");
        if (train.epochs_ioe < 1)
            throw configuration_error("config: train.epochs_ioe must be >= 1");
        if (!(train.tau_ioe > 0.0) || !(train.tau0 > 0.0))
            throw configuration_error("config: temperatures must be positive");
        if (train.ioe_mode != "basis" && train.ioe_mode != "supcon")
            throw configuration_error("config: train.ioe_mode must be basis or supcon");
        score_variant_from_name(train.score_variant);
    }
};

namespace detail {

struct KvEntry {
    std::string value;
    int line = 0;
    bool consumed = false;
};

inline std::map<std::string, KvEntry> parse_kv(const std::string& text) {
    std::map<std::string, KvEntry> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const char* ws = " \t\r\n";
            const std::size_t a = s.find_first_not_of(ws);
            if (a == std::string::npos) return std::string();
            const std::size_t b = s.find_last_not_of(ws);
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw configuration_error("config line " + std::to_string(lineno) +
                                      ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw configuration_error("config line " + std::to_string(lineno) +
                                      ": empty key");
        if (kv.count(key))
            throw configuration_error("config line " + std::to_string(lineno) +
                                      ": duplicate key '" + key + "'");
        kv[key] = KvEntry{value, lineno, false};
    }
    return kv;
}

class KvReader {
public:
    explicit KvReader(std::map<std::string, KvEntry> kv) : kv_(std::move(kv)) {}

    template <typename T, typename Parse>
    void read(const char* key, T& dst, Parse parse) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return;
        it->second.consumed = true;
        try {
            dst = parse(it->second.value);
        } catch (const error&) {
            throw;
        } catch (...) {
            throw configuration_error("config line " + std::to_string(it->second.line) +
                                      ": bad value for '" + std::string(key) + "'");
        }
    }

    void read_u64(const char* key, std::uint64_t& dst) {
        read(key, dst, [](const std::string& v) { return parse_unsigned(v); });
    }
    void read_size(const char* key, std::size_t& dst) {
        read(key, dst,
             [](const std::string& v) { return static_cast<std::size_t>(parse_unsigned(v)); });
    }
    void read_double(const char* key, double& dst) {
        read(key, dst, [](const std::string& v) {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        });
    }
    void read_bool(const char* key, bool& dst) {
        read(key, dst, [key](const std::string& v) {
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw configuration_error(std::string("config: '") + key +
                                      "' must be true or false");
        });
    }
    void read_string(const char* key, std::string& dst) {
        read(key, dst, [](const std::string& v) { return v; });
    }
    void read_size_list(const char* key, std::vector<std::size_t>& dst) {
        read(key, dst, [](const std::string& v) {
            std::vector<std::size_t> out;
            std::istringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty())
                    out.push_back(static_cast<std::size_t>(parse_unsigned(item)));
            return out;
        });
    }

    void reject_unconsumed() const {
        for (const auto& [key, entry] : kv_)
            if (!entry.consumed)
                throw configuration_error("config line " + std::to_string(entry.line) +
                                          ": unknown key '" + key + "'");
    }

private:
    static std::uint64_t parse_unsigned(const std::string& v) {
        std::size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(u);
    }

    std::map<std::string, KvEntry> kv_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    detail::KvReader r(detail::parse_kv(text));
    ExperimentConfig c;

    r.read_u64("run.seed", c.seed);
    r.read_string("run.out", c.out_dir);

    r.read_string("data.generator", c.data.generator);
    r.read_size("data.tasks", c.data.tasks);
    r.read_size("data.classes_per_task", c.data.classes_per_task);
    r.read_size("data.samples_per_class", c.data.samples_per_class);
    r.read_size("data.input_dim", c.data.input_dim);
    r.read_double("data.noise", c.data.noise);
    r.read_double("data.separation", c.data.separation);
    r.read_double("data.train_fraction", c.data.train_fraction);

    r.read_size_list("net.hidden", c.net.hidden_widths);
    r.read_size("net.feature_dim", c.net.feature_dim);
    r.read_size("net.embed_dim", c.net.embed_dim);
    std::string act = activation_name(c.net.activation);
    r.read_string("net.activation", act);
    c.net.activation = activation_from_name(act);

    r.read_double("basis.max_cosine", c.basis.max_cosine);
    r.read_double("basis.step_size", c.basis.step_size);
    std::size_t iters_sz = static_cast<std::size_t>(c.basis.max_iterations);
    r.read_size("basis.max_iterations", iters_sz);
    c.basis.max_iterations = static_cast<int>(iters_sz);
    std::size_t restarts = static_cast<std::size_t>(c.basis.restarts);
    r.read_size("basis.restarts", restarts);
    c.basis.restarts = static_cast<int>(restarts);

    r.read_size("train.epochs_ioe", c.train.epochs_ioe);
    r.read_size("train.epochs_dac", c.train.epochs_dac);
    r.read_size("train.batch_size", c.train.batch_size);
    r.read_double("train.lr", c.train.lr);
    r.read_double("train.momentum", c.train.momentum);
    r.read_double("train.weight_decay", c.train.weight_decay);
    r.read_double("train.gate_lr_scale", c.train.gate_lr_scale);
    r.read_double("train.s_max", c.train.s_max);
    r.read_double("train.lambda", c.train.lambda);
    r.read_double("train.lambda_hat_first", c.train.lambda_hat_first);
    r.read_double("train.lambda_hat_later", c.train.lambda_hat_later);
    r.read_double("train.tau_ioe", c.train.tau_ioe);
    r.read_double("train.tau0", c.train.tau0);
    r.read_double("train.tau_min", c.train.tau_min);
    r.read_double("train.tau_max", c.train.tau_max);
    r.read_bool("train.fixed_tau", c.train.fixed_tau);
    r.read_string("train.ioe_mode", c.train.ioe_mode);
    r.read_bool("train.ioe_all_bases", c.train.ioe_all_bases);
    r.read_bool("train.omega_includes_current", c.train.omega_includes_current);
    r.read_string("train.score_variant", c.train.score_variant);

    r.read_size("head.epochs", c.head.epochs);
    r.read_double("head.lr", c.head.lr);
    r.read_double("head.momentum", c.head.momentum);
    r.read_double("head.weight_decay", c.head.weight_decay);

    r.read_size("theory.specs", c.theory.specs);
    r.read_size("theory.mc_samples", c.theory.mc_samples);
    r.read_size("theory.tv_pairs", c.theory.tv_pairs);

    r.reject_unconsumed();

    // The network's input width is always the data dimensionality; the basis
    // seed follows the run seed so one seed drives the whole run.
    c.net.input_dim = c.data.input_dim;
    c.data.seed = c.seed;
    c.basis.seed = c.seed;
    c.validate();
    return c;
}

// Canonical serialization: every effective value, sorted keys. This is what
// gets hashed into the manifest and echoed into reports.
inline std::string canonical_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "basis.max_cosine = " << fmt17(c.basis.max_cosine) << "\n";
    out << "basis.max_iterations = " << c.basis.max_iterations << "\n";
    out << "basis.restarts = " << c.basis.restarts << "\n";
    out << "basis.step_size = " << fmt17(c.basis.step_size) << "\n";
    out << "data.classes_per_task = " << c.data.classes_per_task << "\n";
    out << "data.generator = " << c.data.generator << "\n";
    out << "data.input_dim = " << c.data.input_dim << "\n";
    out << "data.noise = " << fmt17(c.data.noise) << "\n";
    out << "data.samples_per_class = " << c.data.samples_per_class << "\n";
    out << "data.separation = " << fmt17(c.data.separation) << "\n";
    out << "data.tasks = " << c.data.tasks << "\n";
    out << "data.train_fraction = " << fmt17(c.data.train_fraction) << "\n";
    out << "head.epochs = " << c.head.epochs << "\n";
    out << "head.lr = " << fmt17(c.head.lr) << "\n";
    out << "head.momentum = " << fmt17(c.head.momentum) << "\n";
    out << "head.weight_decay = " << fmt17(c.head.weight_decay) << "\n";
    out << "net.activation = " << activation_name(c.net.activation) << "\n";
    out << "net.embed_dim = " << c.net.embed_dim << "\n";
    out << "net.feature_dim = " << c.net.feature_dim << "\n";
    out << "net.hidden = ";
    for (std::size_t i = 0; i < c.net.hidden_widths.size(); ++i)
        out << (i ? "," : "") << c.net.hidden_widths[i];
    out << "\n";
    out << "run.seed = " << c.seed << "\n";
    out << "theory.mc_samples = " << c.theory.mc_samples << "\n";
    out << "theory.specs = " << c.theory.specs << "\n";
    out << "theory.tv_pairs = " << c.theory.tv_pairs << "\n";
    out << "train.batch_size = " << c.train.batch_size << "\n";
    out << "train.epochs_dac = " << c.train.epochs_dac << "\n";
    out << "train.epochs_ioe = " << c.train.epochs_ioe << "\n";
    out << "train.fixed_tau = " << (c.train.fixed_tau ? "true" : "false") << "\n";
    out << "train.gate_lr_scale = " << fmt17(c.train.gate_lr_scale) << "\n";
    out << "train.ioe_all_bases = " << (c.train.ioe_all_bases ? "true" : "false") << "\n";
    out << "train.ioe_mode = " << c.train.ioe_mode << "\n";
    out << "train.lambda = " << fmt17(c.train.lambda) << "\n";
    out << "train.lambda_hat_first = " << fmt17(c.train.lambda_hat_first) << "\n";
    out << "train.lambda_hat_later = " << fmt17(c.train.lambda_hat_later) << "\n";
    out << "train.lr = " << fmt17(c.train.lr) << "\n";
    out << "train.momentum = " << fmt17(c.train.momentum) << "\n";
    out << "train.omega_includes_current = "
        << (c.train.omega_includes_current ? "true" : "false") << "\n";
    out << "train.s_max = " << fmt17(c.train.s_max) << "\n";
    out << "train.score_variant = " << c.train.score_variant << "\n";
    out << "train.tau0 = " << fmt17(c.train.tau0) << "\n";
    out << "train.tau_ioe = " << fmt17(c.train.tau_ioe) << "\n";
    out << "train.tau_max = " << fmt17(c.train.tau_max) << "\n";
    out << "train.tau_min = " << fmt17(c.train.tau_min) << "\n";
    out << "train.weight_decay = " << fmt17(c.train.weight_decay) << "\n";
    return out.str();
}

inline std::string config_hash(const ExperimentConfig& c) {
    return fnv1a64_hex(canonical_config(c));
}

}  // namespace dcnet
