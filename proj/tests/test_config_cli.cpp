#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dcnet/cli.hpp"
#include "dcnet/config.hpp"
#include "dcnet/report.hpp"

using namespace dcnet;

namespace {

std::string config_error_message(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const configuration_error& e) {
        return e.what();
    }
    ADD_FAILURE() << "no configuration_error for: " << text;
    return {};
}

// Drives the real CLI entry point with captured stdout/stderr.
int run_cli(std::vector<std::string> args, std::string* out = nullptr,
            std::string* err = nullptr) {
    args.insert(args.begin(), "dcnet");
    std::vector<char*> argv;
    argv.reserve(args.size());
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream so, se;
    std::streambuf* old_out = std::cout.rdbuf(so.rdbuf());
    std::streambuf* old_err = std::cerr.rdbuf(se.rdbuf());
    int rc = -1;
    try {
        rc = cli::run(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    if (out) *out = so.str();
    if (err) *err = se.str();
    return rc;
}

const char* kTinyTrainConfig =
    "run.seed = 3\n"
    "data.tasks = 2\n"
    "data.classes_per_task = 2\n"
    "data.samples_per_class = 12\n"
    "data.input_dim = 5\n"
    "net.hidden = 16\n"
    "net.feature_dim = 16\n"
    "net.embed_dim = 8\n"
    "train.epochs_ioe = 3\n"
    "train.epochs_dac = 2\n"
    "train.batch_size = 8\n"
    "train.s_max = 25\n"
    "head.epochs = 30\n";

std::string write_tmp(const std::string& name, const std::string& content) {
    const std::string path = ::testing::TempDir() + name;
    write_text_file(path, content);
    return path;
}

}  // namespace

TEST(Config, EmptyTextYieldsDocumentedDefaults) {
    const ExperimentConfig c = parse_config("");
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.out_dir, "run-out");
    EXPECT_EQ(c.train.epochs_ioe, 120u);
    EXPECT_EQ(c.train.epochs_dac, 80u);
    EXPECT_EQ(c.train.batch_size, 32u);
    EXPECT_DOUBLE_EQ(c.train.lr, 0.05);
    EXPECT_DOUBLE_EQ(c.train.tau_ioe, 0.05);
    EXPECT_DOUBLE_EQ(c.train.tau0, 0.2);
    EXPECT_FALSE(c.train.fixed_tau);
    EXPECT_EQ(c.train.ioe_mode, "basis");
    EXPECT_EQ(c.train.score_variant, "max-softmax");
    EXPECT_EQ(c.theory.specs, 200u);
    EXPECT_EQ(c.theory.mc_samples, 100000u);
    EXPECT_EQ(c.theory.tv_pairs, 100u);
    EXPECT_EQ(c.net.input_dim, c.data.input_dim);
}

TEST(Config, ParsesValuesBindsSeedsIgnoresComments) {
    const ExperimentConfig c = parse_config(
        "# run setup\n"
        "run.seed = 42\n"
        "\n"
        "data.input_dim = 7\n"
        "data.noise = 0.3   # trailing comment\n"
        "net.hidden = 32,16\n"
        "train.fixed_tau = true\n");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.data.seed, 42u);
    EXPECT_EQ(c.basis.seed, 42u);
    EXPECT_EQ(c.data.input_dim, 7u);
    EXPECT_EQ(c.net.input_dim, 7u);
    EXPECT_DOUBLE_EQ(c.data.noise, 0.3);
    EXPECT_EQ(c.net.hidden_widths, (std::vector<std::size_t>{32, 16}));
    EXPECT_TRUE(c.train.fixed_tau);
}

TEST(Config, ErrorsNameTheOffendingLine) {
    EXPECT_EQ(config_error_message("data.tasks = 3\nbogus.key = 1\n"),
              "config line 2: unknown key 'bogus.key'");
    EXPECT_EQ(config_error_message("run.seed = 1\nrun.seed = 2\n"),
              "config line 2: duplicate key 'run.seed'");
    EXPECT_EQ(config_error_message("train.lr = abc\n"),
              "config line 1: bad value for 'train.lr'");
    EXPECT_EQ(config_error_message("train.lr = 0.05 extra\n"),
              "config line 1: bad value for 'train.lr'");
    EXPECT_EQ(config_error_message("hello\n"), "config line 1: expected key = value");
    EXPECT_EQ(config_error_message("= 3\n"), "config line 1: empty key");
    EXPECT_EQ(config_error_message("train.fixed_tau = yes\n"),
              "config: 'train.fixed_tau' must be true or false");
}

TEST(Config, ValidationRejectsUnusableCombinations) {
    EXPECT_THROW(parse_config("train.batch_size = 1\n"), configuration_error);
    EXPECT_THROW(parse_config("train.epochs_ioe = 0\n"), configuration_error);
    EXPECT_THROW(parse_config("train.tau0 = 0\n"), configuration_error);
    EXPECT_THROW(parse_config("train.ioe_mode = nonsense\n"), configuration_error);
    EXPECT_THROW(parse_config("train.score_variant = bogus\n"), configuration_error);
    EXPECT_THROW(parse_config("net.activation = sigmoid\n"), configuration_error);
}

TEST(Config, CanonicalFormIsSortedExactAndRoundTrips) {
    const ExperimentConfig c = parse_config("");
    const std::string canon = canonical_config(c);
    EXPECT_NE(canon.find("\ntrain.lr = 0.050000000000000003\n"), std::string::npos);
    EXPECT_NE(canon.find("\ntrain.tau0 = 0.20000000000000001\n"), std::string::npos);
    EXPECT_NE(canon.find("\nrun.seed = 1\n"), std::string::npos);
    EXPECT_NE(canon.find("\ntrain.fixed_tau = false\n"), std::string::npos);
    EXPECT_EQ(canon.rfind("basis.max_cosine = ", 0), 0u);  // first key sorts first

    std::vector<std::string> lines;
    std::istringstream in(canon);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    EXPECT_EQ(lines.size(), 44u);
    EXPECT_TRUE(std::is_sorted(lines.begin(), lines.end()));

    // Canonical text is itself a valid config describing the same experiment.
    const ExperimentConfig back = parse_config(canon);
    EXPECT_EQ(canonical_config(back), canon);
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIsHexAndInsensitiveToOutDir) {
    const std::string h = config_hash(parse_config(""));
    EXPECT_EQ(h.size(), 16u);
    EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
    EXPECT_EQ(config_hash(parse_config("run.out = elsewhere\n")), h);
    EXPECT_NE(config_hash(parse_config("run.seed = 2\n")), h);
}

TEST(Report, JsonCarriesRunSummaryAndDiffsConfigs) {
    const ExperimentConfig cfg = parse_config(kTinyTrainConfig);
    TaskStream stream = make_stream(cfg.data);
    const RunState st = run_sequence(cfg, stream);
    const nlohmann::json rep = report_json(st);

    EXPECT_EQ(rep.at("format"), "dcnet-report");
    EXPECT_EQ(rep.at("version"), 1);
    EXPECT_EQ(rep.at("seed"), 3u);
    EXPECT_EQ(rep.at("config_hash"), config_hash(cfg));
    EXPECT_EQ(rep.at("task_count"), 2);
    EXPECT_EQ(rep.at("classes_total"), 4u);
    EXPECT_EQ(rep.at("acc_matrix").size(), 2u);
    EXPECT_EQ(rep.at("tau_per_task").size(), 2u);
    const double a_last = rep.at("a_last").get<double>();
    EXPECT_GE(a_last, 0.0);
    EXPECT_LE(a_last, 1.0);
    EXPECT_EQ(rep.at("orthogonality").at("vector_count"), 4u);
    EXPECT_FALSE(rep.at("events").empty());
    EXPECT_EQ(rep.at("config").at("train.lr"), "0.050000000000000003");

    const std::string human = report_human(rep);
    EXPECT_NE(human.find("run report (seed 3"), std::string::npos);
    EXPECT_NE(human.find("A_last"), std::string::npos);

    EXPECT_TRUE(report_config_diff(rep, rep).empty());
    nlohmann::json other = rep;
    other["config"]["train.lr"] = "0.01";
    other["config"].erase("run.seed");
    const auto lines = report_config_diff(rep, other);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_NE(std::find(lines.begin(), lines.end(),
                        "run.seed: 3 -> (absent)"), lines.end());
    EXPECT_NE(std::find(lines.begin(), lines.end(),
                        "train.lr: 0.050000000000000003 -> 0.01"), lines.end());
}

TEST(Cli, GenDataWritesStreamAndManifest) {
    const std::string cfg = write_tmp("dcnet_cli_cfg.txt", kTinyTrainConfig);
    const std::string dir = ::testing::TempDir() + "dcnet_cli_gen";
    std::string out;
    ASSERT_EQ(run_cli({"--config", cfg, "--out", dir, "gen-data"}, &out), 0);
    EXPECT_NE(out.find("stream: 2 tasks"), std::string::npos);

    const TaskStream stream = load_stream(read_text_file(dir + "/stream.txt"));
    EXPECT_EQ(stream.tasks.size(), 2u);
    EXPECT_EQ(stream.tasks[0].train_size(), 18u);

    const nlohmann::json m = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    EXPECT_EQ(m.at("artifact"), "dcnet-gen-data");
    EXPECT_EQ(m.at("seed"), 3u);
    EXPECT_EQ(m.at("files"), nlohmann::json::array({"stream.txt"}));
    EXPECT_EQ(m.at("config_hash"), config_hash(parse_config(kTinyTrainConfig)));
}

TEST(Cli, TrainEvalAndReportShareArtifacts) {
    const std::string cfg = write_tmp("dcnet_cli_cfg.txt", kTinyTrainConfig);
    const std::string dir = ::testing::TempDir() + "dcnet_cli_train";
    std::string out;
    ASSERT_EQ(run_cli({"--config", cfg, "--out", dir, "train"}, &out), 0);
    EXPECT_NE(out.find("A_last"), std::string::npos);
    EXPECT_NE(out.find("artifacts -> " + dir), std::string::npos);
    for (const char* f : {"/metrics.csv", "/report.json", "/predictions.csv",
                          "/embeddings.csv", "/manifest.json", "/checkpoints/task_1.ckpt",
                          "/checkpoints/task_2.ckpt"})
        EXPECT_TRUE(std::filesystem::exists(dir + f)) << f;

    EXPECT_EQ(read_text_file(dir + "/metrics.csv")
                  .rfind("task,epoch,phase,ioe,dac,hat,total,omega,tau\n", 0),
              0u);
    const nlohmann::json rep = nlohmann::json::parse(read_text_file(dir + "/report.json"));
    EXPECT_EQ(rep.at("task_count"), 2);
    EXPECT_EQ(rep.at("seed"), 3u);

    ASSERT_EQ(run_cli({"--config", cfg, "--out", dir, "eval"}, &out), 0);
    EXPECT_NE(out.find("checkpoint: " + dir + "/checkpoints/task_2.ckpt"),
              std::string::npos);
    EXPECT_NE(out.find("mean: cil"), std::string::npos);

    ASSERT_EQ(run_cli({"--out", dir, "report"}, &out), 0);
    EXPECT_NE(out.find("run report (seed 3"), std::string::npos);

    // A seed override flows into data, basis, and the saved report.
    const std::string dir2 = ::testing::TempDir() + "dcnet_cli_train_s4";
    ASSERT_EQ(run_cli({"--config", cfg, "--out", dir2, "--seed", "4", "train"}, &out), 0);
    const nlohmann::json rep2 = nlohmann::json::parse(read_text_file(dir2 + "/report.json"));
    EXPECT_EQ(rep2.at("seed"), 4u);

    ASSERT_EQ(run_cli({"--out", dir, "report", "--diff", dir2}, &out), 0);
    EXPECT_NE(out.find("run.seed: 3 -> 4"), std::string::npos);
    ASSERT_EQ(run_cli({"--out", dir, "report", "--diff", dir}, &out), 0);
    EXPECT_NE(out.find("config diff: identical"), std::string::npos);
}

TEST(Cli, RepeatTrainRunsMatchByteForByte) {
    const std::string cfg = write_tmp("dcnet_cli_cfg.txt", kTinyTrainConfig);
    const std::string a = ::testing::TempDir() + "dcnet_cli_det_a";
    const std::string b = ::testing::TempDir() + "dcnet_cli_det_b";
    ASSERT_EQ(run_cli({"--config", cfg, "--out", a, "train"}), 0);
    ASSERT_EQ(run_cli({"--config", cfg, "--out", b, "train"}), 0);
    for (const char* f :
         {"/metrics.csv", "/report.json", "/predictions.csv", "/embeddings.csv"})
        EXPECT_EQ(read_text_file(a + f), read_text_file(b + f)) << f;
}

TEST(Cli, VerifyBoundsWritesCsvsAndIsWorkerInvariant) {
    const std::string cfg = write_tmp("dcnet_cli_theory.txt",
                                      "theory.specs = 4\n"
                                      "theory.mc_samples = 4000\n"
                                      "theory.tv_pairs = 3\n");
    const std::string a = ::testing::TempDir() + "dcnet_cli_bounds_a";
    const std::string b = ::testing::TempDir() + "dcnet_cli_bounds_b";
    std::string out;
    ASSERT_EQ(run_cli({"--config", cfg, "--out", a, "verify-bounds"}, &out), 0);
    EXPECT_NE(out.find("gap bounds: 4 specs, 0 failures"), std::string::npos);
    EXPECT_NE(out.find("tv/pinsker: 3 pairs, 0 failures"), std::string::npos);

    const std::string bounds = read_text_file(a + "/bounds.csv");
    EXPECT_EQ(bounds.rfind("spec_id,seed,dim,k,T,empirical_D,SE,lemma1,theorem1,"
                           "theorem1_max,lower_bound,E_out,E_out_SE,samples,pass_lemma1,"
                           "pass_theorem1,pass_lower,pass_relaxation\n",
                           0),
              0u);
    EXPECT_EQ(std::count(bounds.begin(), bounds.end(), '\n'), 5);
    const std::string tv = read_text_file(a + "/tv_pairs.csv");
    EXPECT_EQ(tv.rfind("pair_id,dim,tv,se,kl,pinsker_sqrt,pinsker_exp,pass\n", 0), 0u);
    EXPECT_EQ(std::count(tv.begin(), tv.end(), '\n'), 4);
    const nlohmann::json m = nlohmann::json::parse(read_text_file(a + "/manifest.json"));
    EXPECT_EQ(m.at("artifact"), "dcnet-verify-bounds");
    EXPECT_EQ(m.at("workers"), 1u);

    ASSERT_EQ(run_cli({"--config", cfg, "--out", b, "--workers", "3", "verify-bounds"}), 0);
    EXPECT_EQ(read_text_file(b + "/bounds.csv"), bounds);
    EXPECT_EQ(read_text_file(b + "/tv_pairs.csv"), tv);
}

TEST(Cli, GradCheckSpotTestPasses) {
    std::string out;
    ASSERT_EQ(run_cli({"grad-check"}, &out), 0);
    EXPECT_NE(out.find("50 random batches"), std::string::npos);
    EXPECT_NE(out.find(": OK"), std::string::npos);
}

TEST(Cli, FailuresAreMachineReadableOnStderr) {
    const std::string empty = ::testing::TempDir() + "dcnet_cli_empty";
    std::string out, err;
    EXPECT_EQ(run_cli({"--out", empty, "eval"}, &out, &err), 1);
    EXPECT_EQ(err, "error: missing-artifact: no checkpoints directory under " + empty + "\n");

    EXPECT_EQ(run_cli({"--config", empty + "/nope.cfg", "gen-data"}, &out, &err), 1);
    EXPECT_EQ(err,
              "error: missing-artifact: cannot open file: " + empty + "/nope.cfg\n");

    const std::string bad = write_tmp("dcnet_cli_bad.txt", "nope = 1\n");
    EXPECT_EQ(run_cli({"--config", bad, "gen-data"}, &out, &err), 1);
    EXPECT_EQ(err, "error: configuration: config line 1: unknown key 'nope'\n");

    EXPECT_EQ(run_cli({"--out", empty, "report"}, &out, &err), 1);
    EXPECT_EQ(err, "error: missing-artifact: no report at " + empty + "/report.json\n");

    EXPECT_NE(run_cli({"frobnicate"}, &out, &err), 0);
    EXPECT_NE(run_cli({}, &out, &err), 0);
}
