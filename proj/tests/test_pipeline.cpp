#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "lookahead/errors.hpp"
#include "lookahead/pipeline.hpp"
#include "lookahead/stargraph.hpp"
#include "lookahead/trainer.hpp"
#include "lookahead/vocab.hpp"

using namespace lookahead;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> tiny_star_manifest(const std::string& out_dir) {
    std::map<std::string, std::string> mf;
    mf["task"] = "star";
    mf["out_dir"] = out_dir;
    mf["seed"] = "1";
    mf["dtype"] = "fp64";
    mf["star.label_pool"] = "60";
    mf["star.train_count"] = "48";
    mf["star.test_count"] = "8";
    mf["model.n_layers"] = "1";
    mf["model.n_heads"] = "2";
    mf["model.d_model"] = "16";
    mf["model.d_ff"] = "32";
    mf["model.max_seq_len"] = "64";
    mf["train.epochs"] = "2";
    mf["train.batch_size"] = "16";
    mf["train.warmup_steps"] = "4";
    mf["train.lr"] = "0.003";
    return mf;
}

bool ran(const PipelineResult& r, const std::string& stage) {
    return std::find(r.ran.begin(), r.ran.end(), stage) != r.ran.end();
}

bool skipped(const PipelineResult& r, const std::string& stage) {
    return std::find(r.skipped.begin(), r.skipped.end(), stage) != r.skipped.end();
}

void write_star_tsv(const std::string& path, int count, std::uint64_t seed) {
    std::vector<TextExample> exs;
    for (const auto& inst : generate_star_dataset(2, 5, 40, count, seed)) {
        exs.push_back(linearize_star(inst));
    }
    write_dataset(path, exs);
}

} // namespace

TEST_CASE("manifest defaults carry the full legal key set") {
    const auto star = manifest_defaults("star");
    for (const char* key :
         {"task", "out_dir", "seed", "dtype", "star.degree", "star.path_len", "star.label_pool",
          "star.train_count", "star.test_count", "aug.schema", "aug.policy", "aug.p",
          "aug.fixed_offset", "aug.k_min", "aug.k_max", "aug.loss_scope", "aug.explicit_pos",
          "aug.zeta", "model.n_layers", "model.n_heads", "model.d_model", "model.d_ff",
          "model.max_seq_len", "model.init_std", "train.lr", "train.epochs", "train.batch_size",
          "train.warmup_steps", "train.grad_clip", "train.eval_every", "train.weight_decay",
          "eval.modes", "eval.max_new", "eval.strategy", "eval.temperature"}) {
        CAPTURE(key);
        CHECK(star.count(key) == 1);
    }
    CHECK(star.at("aug.policy") == "random");

    const auto scc = manifest_defaults("scc");
    CHECK(scc.count("scc.sizes") == 1);
    CHECK(scc.count("scc.edge_prob") == 1);
    CHECK(scc.count("star.degree") == 0);
    CHECK(scc.at("aug.policy") == "rule_based");

    CHECK_THROWS_AS(manifest_defaults("maze"), ConfigError);
}

TEST_CASE("pipeline rejects bad manifests") {
    CHECK_THROWS_AS(run_pipeline({}), ConfigError); // no task

    std::map<std::string, std::string> mf;
    mf["task"] = "star";
    CHECK_THROWS_AS(run_pipeline(mf), ConfigError); // no out_dir

    mf["out_dir"] = (fs::temp_directory_path() / "never_created").string();
    mf["star.pathlen"] = "7"; // misspelled key
    CHECK_THROWS_AS(run_pipeline(mf), ConfigError);
}

TEST_CASE("star pipeline end to end with stamp-based resumption") {
    const auto out = fs::temp_directory_path() / "pipe_star";
    fs::remove_all(out);
    auto mf = tiny_star_manifest(out.string());

    const auto first = run_pipeline(mf);
    for (const char* stage : {"gen", "augment", "train", "eval"}) {
        CAPTURE(stage);
        CHECK(ran(first, stage));
    }
    for (const char* rel :
         {"data/train.tsv", "data/test.tsv", "data/augmented.tsv", "data/vocab.txt",
          "data/augspec.txt", "train/ckpt.bin", "train/metrics.csv", "eval/results.csv",
          "eval/report.md", "manifest.txt"}) {
        CAPTURE(rel);
        CHECK(fs::exists(out / rel));
    }

    // a p=0.5 run is evaluated in all three modes
    const auto results = read_results_csv(first.results_csv_path);
    REQUIRE(results.size() == 3);
    std::vector<std::string> modes;
    for (const auto& r : results) {
        modes.push_back(r.mode);
        CHECK(r.task == "star");
        CHECK(r.variant == "random");
        CHECK(r.n_examples == 8);
    }
    CHECK(std::find(modes.begin(), modes.end(), "AutoReg") != modes.end());
    CHECK(std::find(modes.begin(), modes.end(), "Generated") != modes.end());
    CHECK(std::find(modes.begin(), modes.end(), "Specified") != modes.end());

    // identical manifest: everything is fresh, nothing re-runs
    const auto second = run_pipeline(mf);
    CHECK(second.ran.empty());
    CHECK(second.skipped.size() == 4);

    // an eval-only knob re-runs just the eval stage
    mf["eval.max_new"] = "96";
    const auto third = run_pipeline(mf);
    CHECK(third.ran == std::vector<std::string>{"eval"});
    CHECK(skipped(third, "gen"));
    CHECK(skipped(third, "augment"));
    CHECK(skipped(third, "train"));

    // a training knob re-runs train and everything downstream of it
    mf["train.epochs"] = "3";
    const auto fourth = run_pipeline(mf);
    CHECK(skipped(fourth, "gen"));
    CHECK(skipped(fourth, "augment"));
    CHECK(ran(fourth, "train"));
    CHECK(ran(fourth, "eval"));

    // the master seed feeds gen, so the whole chain cascades
    mf["seed"] = "2";
    const auto fifth = run_pipeline(mf);
    CHECK(fifth.skipped.empty());
    CHECK(fifth.ran.size() == 4);

    fs::remove_all(out);
}

TEST_CASE("augment_dataset covers extra corpora in the vocabulary") {
    const auto dir = fs::temp_directory_path() / "aug_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string train_tsv = (dir / "train.tsv").string();
    const std::string test_tsv = (dir / "test.tsv").string();

    write_star_tsv(train_tsv, 6, 100);
    write_star_tsv(test_tsv, 6, 200);

    AugSpec spec;
    spec.policy = Policy::random_span;
    spec.p = 0.5;
    const std::string aug_tsv = (dir / "augmented.tsv").string();
    const std::string vocab_txt = (dir / "vocab.txt").string();
    const std::string augspec_txt = (dir / "augspec.txt").string();
    augment_dataset("star", train_tsv, {test_tsv}, spec, 9, aug_tsv, vocab_txt, augspec_txt);

    CHECK(fs::exists(aug_tsv));
    CHECK(fs::exists(vocab_txt));
    CHECK(fs::exists(augspec_txt));

    // every held-out token must already be encodable
    const Vocab vocab = Vocab::load(vocab_txt);
    for (const auto& ex : read_dataset(test_tsv)) {
        CHECK_NOTHROW(vocab.encode(ex.prefix));
        CHECK_NOTHROW(vocab.encode(ex.completion));
    }

    // the stored spec matches what we passed in
    const auto back = AugSpec::parse([&] {
        std::ifstream in(augspec_txt);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }());
    CHECK(back.policy == Policy::random_span);
    CHECK(back.p == doctest::Approx(0.5));

    // rows round trip through the vocab we just wrote
    const auto rows = read_augmented(aug_tsv, vocab);
    CHECK(rows.size() == 6);

    CHECK_THROWS_AS(augment_dataset("maze", train_tsv, {}, spec, 9, aug_tsv, vocab_txt,
                                    augspec_txt),
                    ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("eval_checkpoint expands modes from the training mixture") {
    const auto dir = fs::temp_directory_path() / "evalckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string train_tsv = (dir / "train.tsv").string();
    const std::string test_tsv = (dir / "test.tsv").string();
    write_star_tsv(train_tsv, 8, 300);
    write_star_tsv(test_tsv, 4, 400);

    AugSpec spec;
    spec.p = 1.0; // pure next-token mixture
    const std::string aug_tsv = (dir / "augmented.tsv").string();
    const std::string vocab_txt = (dir / "vocab.txt").string();
    const std::string augspec_txt = (dir / "augspec.txt").string();
    augment_dataset("star", train_tsv, {test_tsv}, spec, 0, aug_tsv, vocab_txt, augspec_txt);

    const Vocab vocab = Vocab::load(vocab_txt);
    const auto rows = read_augmented(aug_tsv, vocab);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 8;
    tc.dtype = "fp64";
    ModelConfig mc;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.d_model = 16;
    mc.d_ff = 32;
    mc.max_seq_len = 64;
    const auto tres = train<double>(tc, mc, rows, vocab, spec, "star", (dir / "train").string());

    EvalOptions opts;
    const auto auto_rows = eval_checkpoint(tres.checkpoint_path, test_tsv, "", 5, opts);
    REQUIRE(auto_rows.size() == 1);
    CHECK(auto_rows[0].mode == "AutoReg");
    CHECK(auto_rows[0].variant == "NTP");
    CHECK(auto_rows[0].n_examples == 4);

    // explicit modes are honored; lookahead modes stay refused for p=1
    const auto ar_only = eval_checkpoint(tres.checkpoint_path, test_tsv, "ar", 5, opts);
    CHECK(ar_only.size() == 1);
    CHECK_THROWS_AS(eval_checkpoint(tres.checkpoint_path, test_tsv, "ar,tgen", 5, opts),
                    ConfigError);
    fs::remove_all(dir);
}
