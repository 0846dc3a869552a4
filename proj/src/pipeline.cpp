#include "lookahead/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lookahead/augment.hpp"
#include "lookahead/checkpoint.hpp"
#include "lookahead/errors.hpp"
#include "lookahead/evaluator.hpp"
#include "lookahead/kv.hpp"
#include "lookahead/rng.hpp"
#include "lookahead/trainer.hpp"

namespace fs = std::filesystem;

namespace lookahead {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("pipeline: cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out.good()) {
        throw ConfigError("pipeline: cannot write " + path.string());
    }
}

std::string stage_stamp(const std::string& name, const std::string& upstream,
                        const std::map<std::string, std::string>& subset) {
    const std::string blob = name + "\n" + upstream + "\n" + serialize_kv(subset);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(blob)));
    return buf;
}

bool stage_fresh(const fs::path& stamp_file, const std::string& stamp,
                 const std::vector<fs::path>& outputs) {
    std::ifstream in(stamp_file);
    if (!in) {
        return false;
    }
    std::string prev;
    std::getline(in, prev);
    if (prev != stamp) {
        return false;
    }
    return std::all_of(outputs.begin(), outputs.end(),
                       [](const fs::path& p) { return fs::exists(p); });
}

// Keys matching any prefix (or equal to one), for stage stamps.
std::map<std::string, std::string> pick(const std::map<std::string, std::string>& mf,
                                        const std::vector<std::string>& prefixes) {
    std::map<std::string, std::string> sub;
    for (const auto& [k, v] : mf) {
        for (const auto& p : prefixes) {
            if (k == p || (k.size() > p.size() && k.compare(0, p.size(), p) == 0)) {
                sub[k] = v;
                break;
            }
        }
    }
    return sub;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(part, &used);
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("pipeline: bad integer \"" + part + "\" in " + key);
        }
    }
    if (out.empty()) {
        throw ConfigError("pipeline: empty list in " + key);
    }
    return out;
}

AugSpec augspec_from_manifest(const std::map<std::string, std::string>& mf) {
    AugSpec spec;
    spec.schema = schema_from_string(kv_required(mf, "aug.schema"));
    spec.policy = policy_from_string(kv_required(mf, "aug.policy"));
    spec.p = kv_double_or(mf, "aug.p", spec.p);
    spec.fixed_offset = static_cast<int>(kv_long_or(mf, "aug.fixed_offset", spec.fixed_offset));
    spec.fixed_k_min = static_cast<int>(kv_long_or(mf, "aug.k_min", spec.fixed_k_min));
    spec.fixed_k_max = static_cast<int>(kv_long_or(mf, "aug.k_max", spec.fixed_k_max));
    spec.loss_scope = loss_scope_from_string(kv_required(mf, "aug.loss_scope"));
    spec.explicit_pos = kv_bool_or(mf, "aug.explicit_pos", spec.explicit_pos);
    spec.zeta_template = kv_or(mf, "aug.zeta", spec.zeta_template);
    spec.validate();
    return spec;
}

StarGraphInstance star_instance_from(const TextExample& ex) {
    const ParsedStar ps = parse_star(join_tokens(ex.prefix), join_tokens(ex.completion));
    StarGraphInstance inst;
    inst.edges = ps.edges;
    inst.start = ps.start;
    inst.goal = ps.goal;
    inst.path = ps.path;
    inst.path_len = static_cast<int>(ps.path.size());
    inst.degree = static_cast<int>(std::count_if(
        ps.edges.begin(), ps.edges.end(),
        [&](const std::pair<int, int>& e) { return e.first == ps.start; }));
    return inst;
}

struct Paths {
    fs::path out, data, train, eval, stamps;
    fs::path train_tsv, test_tsv, aug_tsv, vocab_txt, augspec_txt;
    fs::path ckpt, metrics, results_csv, report_md;
};

Paths layout(const std::string& out_dir) {
    Paths p;
    p.out = out_dir;
    p.data = p.out / "data";
    p.train = p.out / "train";
    p.eval = p.out / "eval";
    p.stamps = p.out / "stamps";
    p.train_tsv = p.data / "train.tsv";
    p.test_tsv = p.data / "test.tsv";
    p.aug_tsv = p.data / "augmented.tsv";
    p.vocab_txt = p.data / "vocab.txt";
    p.augspec_txt = p.data / "augspec.txt";
    p.ckpt = p.train / "ckpt.bin";
    p.metrics = p.train / "metrics.csv";
    p.results_csv = p.eval / "results.csv";
    p.report_md = p.eval / "report.md";
    return p;
}

void run_gen(const std::map<std::string, std::string>& mf, const Paths& p) {
    const std::string task = kv_required(mf, "task");
    const std::uint64_t seed = kv_u64_or(mf, "seed", 0);
    const std::uint64_t train_seed = derive_seed(seed, "gen-train");
    const std::uint64_t test_seed = derive_seed(seed, "gen-test");

    std::vector<TextExample> train_exs, test_exs;
    if (task == "star") {
        const int degree = static_cast<int>(kv_long_or(mf, "star.degree", 2));
        const int path_len = static_cast<int>(kv_long_or(mf, "star.path_len", 5));
        const int pool = static_cast<int>(kv_long_or(mf, "star.label_pool", 100));
        const int n_train = static_cast<int>(kv_long_or(mf, "star.train_count", 0));
        const int n_test = static_cast<int>(kv_long_or(mf, "star.test_count", 0));
        for (const auto& inst : generate_star_dataset(degree, path_len, pool, n_train, train_seed)) {
            train_exs.push_back(linearize_star(inst));
        }
        for (const auto& inst : generate_star_dataset(degree, path_len, pool, n_test, test_seed)) {
            test_exs.push_back(linearize_star(inst));
        }
    } else {
        const auto sizes = parse_int_list(kv_required(mf, "scc.sizes"), "scc.sizes");
        const double edge_prob = kv_double_or(mf, "scc.edge_prob", 0.3);
        const int n_train = static_cast<int>(kv_long_or(mf, "scc.train_count", 0));
        const int n_test = static_cast<int>(kv_long_or(mf, "scc.test_count", 0));
        for (const int n : sizes) {
            const auto ts = derive_seed(train_seed, static_cast<std::uint64_t>(n));
            const auto vs = derive_seed(test_seed, static_cast<std::uint64_t>(n));
            for (const auto& inst : generate_scc_dataset(n, edge_prob, n_train, ts)) {
                train_exs.push_back(linearize_scc(inst));
            }
            for (const auto& inst : generate_scc_dataset(n, edge_prob, n_test, vs)) {
                test_exs.push_back(linearize_scc(inst));
            }
        }
    }
    write_dataset(p.train_tsv.string(), train_exs);
    write_dataset(p.test_tsv.string(), test_exs);
}

void run_augment(const std::map<std::string, std::string>& mf, const Paths& p) {
    const AugSpec spec = augspec_from_manifest(mf);
    augment_dataset(kv_required(mf, "task"), p.train_tsv.string(), {p.test_tsv.string()}, spec,
                    kv_u64_or(mf, "seed", 0), p.aug_tsv.string(), p.vocab_txt.string(),
                    p.augspec_txt.string());
}

void run_train(const std::map<std::string, std::string>& mf, const Paths& p) {
    const std::string task = kv_required(mf, "task");
    const std::uint64_t seed = kv_u64_or(mf, "seed", 0);
    const Vocab vocab = Vocab::load(p.vocab_txt.string());
    const AugSpec spec = AugSpec::parse(read_file(p.augspec_txt));
    const auto rows = read_augmented(p.aug_tsv.string(), vocab);

    // Flatten the prefixed manifest keys into the trainer's config map.
    std::map<std::string, std::string> flat;
    auto move_key = [&](const char* from, const char* to) {
        auto it = mf.find(from);
        if (it != mf.end()) {
            flat[to] = it->second;
        }
    };
    move_key("train.lr", "lr");
    move_key("train.epochs", "epochs");
    move_key("train.batch_size", "batch_size");
    move_key("train.warmup_steps", "warmup_steps");
    move_key("train.grad_clip", "grad_clip");
    move_key("train.eval_every", "eval_every");
    move_key("train.weight_decay", "weight_decay");
    move_key("dtype", "dtype");
    move_key("model.n_layers", "n_layers");
    move_key("model.n_heads", "n_heads");
    move_key("model.d_model", "d_model");
    move_key("model.d_ff", "d_ff");
    move_key("model.max_seq_len", "max_seq_len");
    move_key("model.init_std", "init_std");
    flat["seed"] = std::to_string(derive_seed(seed, "train"));
    flat["loss_scope"] = to_string(spec.loss_scope);

    auto [tc, mc] = parse_train_config(flat);
    if (tc.dtype == "fp64") {
        train<double>(tc, mc, rows, vocab, spec, task, p.train.string());
    } else {
        train<float>(tc, mc, rows, vocab, spec, task, p.train.string());
    }
}

void run_eval(const std::map<std::string, std::string>& mf, const Paths& p) {
    const std::string task = kv_required(mf, "task");
    const std::uint64_t seed = kv_u64_or(mf, "seed", 0);

    EvalOptions opts;
    opts.max_new_tokens = static_cast<int>(kv_long_or(mf, "eval.max_new", 0));
    opts.temperature = kv_double_or(mf, "eval.temperature", 1.0);
    opts.sample_seed = derive_seed(seed, "eval-sample");
    const std::string strat = kv_or(mf, "eval.strategy", "greedy");
    if (strat == "greedy") {
        opts.strategy = Strategy::greedy;
    } else if (strat == "sample") {
        opts.strategy = Strategy::sample;
    } else {
        throw ConfigError("pipeline: eval.strategy must be greedy or sample");
    }

    const CheckpointMeta peek = peek_checkpoint(p.ckpt.string());
    if (peek.task != task) {
        throw ConfigError("pipeline: checkpoint was trained on task " + peek.task +
                          ", manifest says " + task);
    }
    const auto results = eval_checkpoint(p.ckpt.string(), p.test_tsv.string(),
                                         kv_or(mf, "eval.modes", ""), derive_seed(seed, "eval"),
                                         opts);
    write_results_csv(p.results_csv.string(), results);
    write_file(p.report_md, render_report_markdown(results));
}

} // namespace

void augment_dataset(const std::string& task, const std::string& train_tsv,
                     const std::vector<std::string>& extra_corpus_tsvs, const AugSpec& spec,
                     std::uint64_t seed, const std::string& aug_tsv,
                     const std::string& vocab_txt, const std::string& augspec_txt) {
    if (task != "star" && task != "scc") {
        throw ConfigError("augment_dataset: task must be star or scc, got \"" + task + "\"");
    }
    spec.validate();
    if (spec.schema != Schema::copy) {
        throw ConfigError("augment_dataset: the graph tasks augment with schema=copy");
    }

    const auto train_exs = read_dataset(train_tsv);
    std::vector<std::vector<std::string>> corpora;
    for (const auto& ex : train_exs) {
        corpora.push_back(ex.prefix);
        corpora.push_back(ex.completion);
    }
    for (const auto& extra : extra_corpus_tsvs) {
        for (const auto& ex : read_dataset(extra)) {
            corpora.push_back(ex.prefix);
            corpora.push_back(ex.completion);
        }
    }
    const Vocab vocab = build_vocab(corpora);

    const std::size_t count = train_exs.size();
    std::vector<Sequence> pref(count), comp(count);
    for (std::size_t i = 0; i < count; ++i) {
        pref[i] = vocab.encode(train_exs[i].prefix);
        comp[i] = vocab.encode(train_exs[i].completion);
    }
    auto make_original = [&](std::size_t i) {
        return make_unaugmented(pref[i], comp[i], spec.loss_scope);
    };

    std::vector<AugmentedSequence> rows;
    if (task == "star") {
        std::vector<StarGraphInstance> insts;
        insts.reserve(count);
        for (const auto& ex : train_exs) {
            insts.push_back(star_instance_from(ex));
        }
        rows = build_mixture(count, spec.p, derive_seed(seed, "augment"), make_original,
                             [&](std::size_t i, Rng& rng) {
                                 return augment_star_example(insts[i], vocab, spec, i, rng);
                             });
    } else {
        std::vector<SccInstance> insts;
        insts.reserve(count);
        for (const auto& ex : train_exs) {
            const ParsedScc ps = parse_scc(join_tokens(ex.prefix), join_tokens(ex.completion));
            insts.push_back(SccInstance{ps.graph, ps.trace});
        }
        rows = build_mixture(count, spec.p, derive_seed(seed, "augment"), make_original,
                             [&](std::size_t i, Rng& rng) {
                                 return augment_scc_example(insts[i], vocab, spec, rng);
                             });
    }

    write_augmented(aug_tsv, rows, vocab);
    vocab.save(vocab_txt);
    write_file(augspec_txt, spec.serialize());
}

std::vector<EvalResult> eval_checkpoint(const std::string& ckpt_path, const std::string& test_tsv,
                                        const std::string& modes_csv, std::uint64_t eval_seed,
                                        const EvalOptions& opts) {
    const CheckpointMeta meta = peek_checkpoint(ckpt_path);
    const std::string task = meta.task;
    if (task != "star" && task != "scc") {
        throw ConfigError("eval_checkpoint: checkpoint carries unknown task \"" + task + "\"");
    }

    std::string mode_list = modes_csv;
    if (mode_list.empty()) {
        mode_list = meta.augspec.p == 1.0 ? "ar" : "ar,tgen,tspec";
    }
    std::vector<DecodeMode> modes;
    std::stringstream ss(mode_list);
    std::string part;
    while (std::getline(ss, part, ',')) {
        modes.push_back(mode_from_string(part));
    }
    if (modes.empty()) {
        throw ConfigError("eval_checkpoint: no decode modes requested");
    }

    const auto test_exs = read_dataset(test_tsv);
    std::vector<EvalResult> results;
    auto run_modes = [&](auto model) {
        LogitsFn fn = [&model](const Sequence& ctx) { return model.logits_at_last(ctx); };
        if (task == "star") {
            std::vector<EvalItemStar> items;
            items.reserve(test_exs.size());
            for (const auto& ex : test_exs) {
                const ParsedStar ps = parse_star(join_tokens(ex.prefix), join_tokens(ex.completion));
                items.push_back(EvalItemStar{ex.prefix, ps.path});
            }
            for (const DecodeMode m : modes) {
                results.push_back(
                    eval_stargraph(fn, meta.vocab, items, meta.augspec, m, eval_seed, opts));
            }
        } else {
            std::vector<EvalItemScc> items;
            items.reserve(test_exs.size());
            for (const auto& ex : test_exs) {
                const ParsedScc ps = parse_scc(join_tokens(ex.prefix), join_tokens(ex.completion));
                items.push_back(EvalItemScc{ex.prefix, ps.graph.n, ps.trace});
            }
            for (const DecodeMode m : modes) {
                results.push_back(eval_scc(fn, meta.vocab, items, meta.augspec, m, eval_seed, opts));
            }
        }
    };
    if (meta.dtype == "fp64") {
        run_modes(load_checkpoint<double>(ckpt_path));
    } else {
        run_modes(load_checkpoint<float>(ckpt_path));
    }
    return results;
}

std::map<std::string, std::string> manifest_defaults(const std::string& task) {
    std::map<std::string, std::string> mf;
    mf["task"] = task;
    mf["out_dir"] = "";
    mf["seed"] = "0";
    mf["dtype"] = "fp32";

    if (task == "star") {
        mf["star.degree"] = "2";
        mf["star.path_len"] = "5";
        mf["star.label_pool"] = "100";
        mf["star.train_count"] = "50000";
        mf["star.test_count"] = "1000";
        mf["aug.policy"] = "random";
        mf["model.max_seq_len"] = "256";
    } else if (task == "scc") {
        mf["scc.sizes"] = "4,5,11,12,15";
        mf["scc.edge_prob"] = "0.3";
        mf["scc.train_count"] = "10000";
        mf["scc.test_count"] = "200";
        mf["aug.policy"] = "rule_based";
        mf["model.max_seq_len"] = "512";
    } else {
        throw ConfigError("manifest_defaults: unknown task \"" + task + "\"");
    }

    const AugSpec spec;
    mf["aug.schema"] = "copy";
    mf["aug.p"] = "0.5";
    mf["aug.fixed_offset"] = std::to_string(spec.fixed_offset);
    mf["aug.k_min"] = std::to_string(spec.fixed_k_min);
    mf["aug.k_max"] = std::to_string(spec.fixed_k_max);
    mf["aug.loss_scope"] = to_string(spec.loss_scope);
    mf["aug.explicit_pos"] = "0";
    mf["aug.zeta"] = spec.zeta_template;

    const ModelConfig mc;
    mf["model.n_layers"] = std::to_string(mc.n_layers);
    mf["model.n_heads"] = std::to_string(mc.n_heads);
    mf["model.d_model"] = std::to_string(mc.d_model);
    mf["model.d_ff"] = std::to_string(mc.d_ff);
    mf["model.init_std"] = "0.02";

    const TrainConfig tc;
    mf["train.lr"] = "0.0003";
    mf["train.epochs"] = std::to_string(tc.epochs);
    mf["train.batch_size"] = std::to_string(tc.batch_size);
    mf["train.warmup_steps"] = std::to_string(tc.warmup_steps);
    mf["train.grad_clip"] = "1";
    mf["train.eval_every"] = std::to_string(tc.eval_every);
    mf["train.weight_decay"] = "0.01";

    mf["eval.modes"] = "";
    mf["eval.max_new"] = "0";
    mf["eval.strategy"] = "greedy";
    mf["eval.temperature"] = "1";
    return mf;
}

PipelineResult run_pipeline(const std::map<std::string, std::string>& manifest) {
    const auto task_it = manifest.find("task");
    if (task_it == manifest.end()) {
        throw ConfigError("pipeline: manifest must set task");
    }
    std::map<std::string, std::string> mf = manifest_defaults(task_it->second);
    for (const auto& [k, v] : manifest) {
        if (mf.find(k) == mf.end()) {
            throw ConfigError("pipeline: unknown manifest key \"" + k + "\"");
        }
        mf[k] = v;
    }
    if (mf["out_dir"].empty()) {
        throw ConfigError("pipeline: manifest must set out_dir");
    }

    const Paths p = layout(mf["out_dir"]);
    fs::create_directories(p.data);
    fs::create_directories(p.train);
    fs::create_directories(p.eval);
    fs::create_directories(p.stamps);
    save_kv_file((p.out / "manifest.txt").string(), mf);

    PipelineResult res;
    res.results_csv_path = p.results_csv.string();
    res.report_md_path = p.report_md.string();

    struct Stage {
        const char* name;
        std::map<std::string, std::string> subset;
        std::vector<fs::path> outputs;
        std::function<void()> fn;
    };
    const std::string task = mf["task"];
    const std::vector<Stage> stages = {
        {"gen", pick(mf, {"task", "seed", task + "."}),
         {p.train_tsv, p.test_tsv},
         [&] { run_gen(mf, p); }},
        {"augment", pick(mf, {"aug."}),
         {p.aug_tsv, p.vocab_txt, p.augspec_txt},
         [&] { run_augment(mf, p); }},
        {"train", pick(mf, {"dtype", "model.", "train."}),
         {p.ckpt, p.metrics},
         [&] { run_train(mf, p); }},
        {"eval", pick(mf, {"eval."}),
         {p.results_csv, p.report_md},
         [&] { run_eval(mf, p); }},
    };

    std::string upstream;
    for (const auto& stage : stages) {
        const std::string stamp = stage_stamp(stage.name, upstream, stage.subset);
        const fs::path stamp_file = p.stamps / (std::string(stage.name) + ".stamp");
        if (stage_fresh(stamp_file, stamp, stage.outputs)) {
            res.skipped.push_back(stage.name);
        } else {
            stage.fn();
            write_file(stamp_file, stamp + "\n");
            res.ran.push_back(stage.name);
        }
        upstream = stamp;
    }
    return res;
}

} // namespace lookahead
