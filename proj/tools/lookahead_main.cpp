#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lookahead/augment.hpp"
#include "lookahead/checkpoint.hpp"
#include "lookahead/decoder.hpp"
#include "lookahead/errors.hpp"
#include "lookahead/evaluator.hpp"
#include "lookahead/kv.hpp"
#include "lookahead/pipeline.hpp"
#include "lookahead/rng.hpp"
#include "lookahead/scc.hpp"
#include "lookahead/stargraph.hpp"
#include "lookahead/trainer.hpp"
#include "lookahead/vocab.hpp"

namespace fs = std::filesystem;
using namespace lookahead;

namespace {

std::map<std::string, std::string> parse_set_flags(const std::vector<std::string>& sets) {
    std::map<std::string, std::string> kv;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got \"" + s + "\"");
        }
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return kv;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Star prompts decide after one path token. SCC prompts decide after the
// initial labeling, whose width is read straight off the prompt.
int auto_decision_rule(const std::string& task, const std::vector<std::string>& toks) {
    if (task == "star") {
        return 1;
    }
    bool counting = false;
    int n = 0;
    for (const auto& t : toks) {
        if (t == "initial_trace:") {
            counting = true;
            continue;
        }
        if (counting) {
            if (t == "trace") {
                break;
            }
            ++n;
        }
    }
    if (n == 0) {
        throw ConfigError("cannot infer the decision point from this prompt; "
                          "pass --decision-rule");
    }
    return n;
}

Strategy strategy_from(const std::string& s) {
    if (s == "greedy") {
        return Strategy::greedy;
    }
    if (s == "sample") {
        return Strategy::sample;
    }
    throw ConfigError("strategy must be greedy or sample, got \"" + s + "\"");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale laboratory for lookahead-token training on graph tasks"};
    app.require_subcommand(1);

    // gen-star
    struct {
        int degree = 2, path_len = 5, label_pool = 100, count = 0;
        std::uint64_t seed = 0;
        std::string out;
    } gs;
    auto* gen_star = app.add_subcommand("gen-star", "Generate a star-graph pathfinding dataset");
    gen_star->add_option("--degree", gs.degree, "arms leaving the start node");
    gen_star->add_option("--path-len", gs.path_len, "nodes on each arm, start included");
    gen_star->add_option("--label-pool", gs.label_pool, "node labels are drawn from [0,pool)");
    gen_star->add_option("--count", gs.count, "number of instances")->required();
    gen_star->add_option("--seed", gs.seed, "master seed");
    gen_star->add_option("--out", gs.out, "output TSV")->required();
    gen_star->callback([&] {
        std::vector<TextExample> exs;
        for (const auto& inst :
             generate_star_dataset(gs.degree, gs.path_len, gs.label_pool, gs.count, gs.seed)) {
            exs.push_back(linearize_star(inst));
        }
        write_dataset(gs.out, exs);
        std::printf("wrote %zu examples to %s\n", exs.size(), gs.out.c_str());
    });

    // gen-scc
    struct {
        int n = 5, count = 0;
        double edge_prob = 0.3;
        std::uint64_t seed = 0;
        std::string out;
    } gc;
    auto* gen_scc = app.add_subcommand("gen-scc", "Generate an SCC trace dataset");
    gen_scc->add_option("--n", gc.n, "nodes per graph");
    gen_scc->add_option("--edge-prob", gc.edge_prob, "independent edge probability");
    gen_scc->add_option("--count", gc.count, "number of instances")->required();
    gen_scc->add_option("--seed", gc.seed, "master seed");
    gen_scc->add_option("--out", gc.out, "output TSV")->required();
    gen_scc->callback([&] {
        std::vector<TextExample> exs;
        for (const auto& inst : generate_scc_dataset(gc.n, gc.edge_prob, gc.count, gc.seed)) {
            exs.push_back(linearize_scc(inst));
        }
        write_dataset(gc.out, exs);
        std::printf("wrote %zu examples to %s\n", exs.size(), gc.out.c_str());
    });

    // augment
    struct {
        std::string task, data, out_dir, schema = "copy", policy = "random";
        std::vector<std::string> extra;
        double p = 0.5;
        int fixed_offset = 2, k_min = 1, k_max = 4;
        std::string loss_scope = "completion_only", zeta;
        bool explicit_pos = false;
        std::uint64_t seed = 0;
    } au;
    auto* aug = app.add_subcommand("augment", "Insert lookahead spans into a dataset");
    aug->add_option("--task", au.task, "star or scc")->required();
    aug->add_option("--data", au.data, "raw dataset TSV")->required();
    aug->add_option("--extra-corpus", au.extra, "extra TSVs included in the vocabulary");
    aug->add_option("--out-dir", au.out_dir, "writes augmented.tsv, vocab.txt, augspec.txt")
        ->required();
    aug->add_option("--schema", au.schema, "copy or copy_pos");
    aug->add_option("--policy", au.policy, "fixed, random, or rule_based");
    aug->add_option("--p", au.p, "probability an example stays unaugmented");
    aug->add_option("--fixed-offset", au.fixed_offset, "fixed-policy span start");
    aug->add_option("--k-min", au.k_min, "fixed-policy minimum span length");
    aug->add_option("--k-max", au.k_max, "fixed-policy maximum span length");
    aug->add_option("--loss-scope", au.loss_scope, "all or completion_only");
    aug->add_option("--zeta", au.zeta, "position-sentence template");
    aug->add_flag("--explicit-pos", au.explicit_pos, "mark sentence positions in the suffix");
    aug->add_option("--seed", au.seed, "master seed");
    aug->callback([&] {
        AugSpec spec;
        spec.schema = schema_from_string(au.schema);
        spec.policy = policy_from_string(au.policy);
        spec.p = au.p;
        spec.fixed_offset = au.fixed_offset;
        spec.fixed_k_min = au.k_min;
        spec.fixed_k_max = au.k_max;
        spec.loss_scope = loss_scope_from_string(au.loss_scope);
        spec.explicit_pos = au.explicit_pos;
        if (!au.zeta.empty()) {
            spec.zeta_template = au.zeta;
        }
        fs::create_directories(au.out_dir);
        const fs::path out = au.out_dir;
        augment_dataset(au.task, au.data, au.extra, spec, au.seed, (out / "augmented.tsv").string(),
                        (out / "vocab.txt").string(), (out / "augspec.txt").string());
        std::printf("augmented %s into %s\n", au.data.c_str(), au.out_dir.c_str());
    });

    // train
    struct {
        std::string data, vocab, augspec, task, out_dir, config;
        std::vector<std::string> sets;
    } tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model on an augmented dataset");
    train_cmd->add_option("--data", tr.data, "augmented.tsv")->required();
    train_cmd->add_option("--vocab", tr.vocab, "vocab.txt")->required();
    train_cmd->add_option("--augspec", tr.augspec, "augspec.txt")->required();
    train_cmd->add_option("--task", tr.task, "star or scc")->required();
    train_cmd->add_option("--out-dir", tr.out_dir, "checkpoint and metrics directory")->required();
    train_cmd->add_option("--config", tr.config, "key=value training config file");
    train_cmd->add_option("--set", tr.sets, "override a config key, e.g. --set lr=0.001");
    train_cmd->callback([&] {
        const Vocab vocab = Vocab::load(tr.vocab);
        const AugSpec spec = AugSpec::parse(read_file(tr.augspec));
        const auto rows = read_augmented(tr.data, vocab);
        std::map<std::string, std::string> kvm;
        if (!tr.config.empty()) {
            kvm = load_kv_file(tr.config);
        }
        for (const auto& [k, v] : parse_set_flags(tr.sets)) {
            kvm[k] = v;
        }
        kvm["loss_scope"] = to_string(spec.loss_scope);
        auto [tc, mc] = parse_train_config(kvm);
        fs::create_directories(tr.out_dir);
        const TrainResult out = tc.dtype == "fp64"
                                    ? train<double>(tc, mc, rows, vocab, spec, tr.task, tr.out_dir)
                                    : train<float>(tc, mc, rows, vocab, spec, tr.task, tr.out_dir);
        std::printf("checkpoint %s\nmetrics %s\nsteps %ld\nfinal_loss %.6f\n",
                    out.checkpoint_path.c_str(), out.metrics_path.c_str(), out.steps,
                    out.final_loss);
    });

    // decode
    struct {
        std::string ckpt, mode = "ar", prompt, prompts_file, z, out;
        int decision_rule = -1, max_new = 256, z_cap = kZCap;
        std::string strategy = "greedy";
        double temperature = 1.0;
        std::uint64_t seed = 0;
    } de;
    auto* dec = app.add_subcommand("decode", "Run a checkpoint on prompts, JSONL out");
    dec->add_option("--ckpt", de.ckpt, "checkpoint file")->required();
    dec->add_option("--mode", de.mode, "ar, tgen, or tspec");
    dec->add_option("--prompt", de.prompt, "space-joined prompt tokens");
    dec->add_option("--prompts-file", de.prompts_file, "one prompt per line");
    dec->add_option("--z", de.z, "space-joined z tokens (tspec)");
    dec->add_option("--decision-rule", de.decision_rule,
                    "completion tokens before the span opens (default: inferred)");
    dec->add_option("--max-new", de.max_new, "continuation token budget");
    dec->add_option("--z-cap", de.z_cap, "span length cap before force-close");
    dec->add_option("--strategy", de.strategy, "greedy or sample");
    dec->add_option("--temperature", de.temperature, "sampling temperature");
    dec->add_option("--seed", de.seed, "sampling seed");
    dec->add_option("--out", de.out, "output file (default stdout)");
    dec->callback([&] {
        std::vector<std::string> prompts;
        if (!de.prompts_file.empty()) {
            std::ifstream in(de.prompts_file);
            if (!in) {
                throw ConfigError("cannot open " + de.prompts_file);
            }
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty()) {
                    prompts.push_back(line);
                }
            }
        } else if (!de.prompt.empty()) {
            prompts.push_back(de.prompt);
        } else {
            throw ConfigError("decode needs --prompt or --prompts-file");
        }

        const CheckpointMeta meta = peek_checkpoint(de.ckpt);
        std::unique_ptr<Model<float>> m32;
        std::unique_ptr<Model<double>> m64;
        LogitsFn fn;
        if (meta.dtype == "fp64") {
            m64 = std::make_unique<Model<double>>(load_checkpoint<double>(de.ckpt));
            fn = [&m = *m64](const Sequence& ctx) { return m.logits_at_last(ctx); };
        } else {
            m32 = std::make_unique<Model<float>>(load_checkpoint<float>(de.ckpt));
            fn = [&m = *m32](const Sequence& ctx) { return m.logits_at_last(ctx); };
        }

        std::ofstream out_file;
        if (!de.out.empty()) {
            out_file.open(de.out);
            if (!out_file) {
                throw ConfigError("cannot write " + de.out);
            }
        }
        std::ostream& os = de.out.empty() ? std::cout : out_file;

        const DecodeMode mode = mode_from_string(de.mode);
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            const auto ptoks = split_tokens(prompts[i]);
            DecodeRequest req;
            req.mode = mode;
            req.prompt = meta.vocab.encode(ptoks);
            req.max_new_tokens = de.max_new;
            req.z_cap = de.z_cap;
            req.strategy = strategy_from(de.strategy);
            req.temperature = de.temperature;
            req.sample_seed = derive_seed(de.seed, i);
            if (mode != DecodeMode::autoregressive) {
                req.decision_rule = de.decision_rule >= 0
                                        ? de.decision_rule
                                        : auto_decision_rule(meta.task, ptoks);
            }
            if (mode == DecodeMode::t_specified) {
                if (de.z.empty()) {
                    throw ConfigError("tspec mode needs --z");
                }
                req.specified_z = meta.vocab.encode(split_tokens(de.z));
            }
            const DecodeResult r = decode(fn, req);
            nlohmann::json j;
            j["prompt"] = join_tokens(ptoks);
            j["raw_output"] = join_tokens(meta.vocab.decode(r.raw));
            j["stripped_output"] = join_tokens(meta.vocab.decode(r.stripped));
            j["z_used"] = join_tokens(meta.vocab.decode(r.z));
            j["force_closed"] = r.force_closed;
            os << j.dump() << "\n";
        }
        if (!de.out.empty() && !out_file.good()) {
            throw ConfigError("write failed for " + de.out);
        }
    });

    // eval
    struct {
        std::string ckpt, test, modes, out, report, strategy = "greedy";
        std::uint64_t seed = 0;
        int max_new = 0;
        double temperature = 1.0;
    } ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on held-out data");
    eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--test", ev.test, "held-out dataset TSV")->required();
    eval_cmd->add_option("--modes", ev.modes, "comma list of ar,tgen,tspec (default: all legal)");
    eval_cmd->add_option("--seed", ev.seed, "master seed");
    eval_cmd->add_option("--max-new", ev.max_new, "continuation budget (0 = per-item)");
    eval_cmd->add_option("--strategy", ev.strategy, "greedy or sample");
    eval_cmd->add_option("--temperature", ev.temperature, "sampling temperature");
    eval_cmd->add_option("--out", ev.out, "results CSV path");
    eval_cmd->add_option("--report", ev.report, "markdown matrix path");
    eval_cmd->callback([&] {
        EvalOptions opts;
        opts.max_new_tokens = ev.max_new;
        opts.strategy = strategy_from(ev.strategy);
        opts.temperature = ev.temperature;
        opts.sample_seed = derive_seed(ev.seed, "eval-sample");
        const auto results =
            eval_checkpoint(ev.ckpt, ev.test, ev.modes, derive_seed(ev.seed, "eval"), opts);
        for (const auto& r : results) {
            std::printf("%s %s %s accuracy=%.4f n=%d malformed=%d\n", r.task.c_str(),
                        r.variant.c_str(), r.mode.c_str(), r.accuracy, r.n_examples, r.malformed);
        }
        if (!ev.out.empty()) {
            write_results_csv(ev.out, results);
        }
        if (!ev.report.empty()) {
            std::ofstream md(ev.report);
            md << render_report_markdown(results);
            if (!md.good()) {
                throw ConfigError("cannot write " + ev.report);
            }
        }
    });

    // report
    struct {
        std::vector<std::string> in;
        std::string out;
    } rp;
    auto* rep = app.add_subcommand("report", "Merge results CSVs into a markdown matrix");
    rep->add_option("--in", rp.in, "results CSV (repeatable)")->required();
    rep->add_option("--out", rp.out, "markdown path (default stdout)");
    rep->callback([&] {
        std::vector<EvalResult> all;
        for (const auto& path : rp.in) {
            for (auto& r : read_results_csv(path)) {
                all.push_back(std::move(r));
            }
        }
        const std::string md = render_report_markdown(all);
        if (rp.out.empty()) {
            std::cout << md;
        } else {
            std::ofstream out(rp.out);
            out << md;
            if (!out.good()) {
                throw ConfigError("cannot write " + rp.out);
            }
        }
    });

    // run
    struct {
        std::string manifest;
        std::vector<std::string> sets;
    } rn;
    auto* run_cmd = app.add_subcommand("run", "Full gen -> augment -> train -> eval pipeline");
    run_cmd->add_option("--manifest", rn.manifest, "key=value manifest file");
    run_cmd->add_option("--set", rn.sets, "override a manifest key, e.g. --set seed=7");
    run_cmd->callback([&] {
        std::map<std::string, std::string> mf;
        if (!rn.manifest.empty()) {
            mf = load_kv_file(rn.manifest);
        }
        for (const auto& [k, v] : parse_set_flags(rn.sets)) {
            mf[k] = v;
        }
        const PipelineResult pr = run_pipeline(mf);
        for (const auto& s : pr.ran) {
            std::printf("ran %s\n", s.c_str());
        }
        for (const auto& s : pr.skipped) {
            std::printf("skipped %s (up to date)\n", s.c_str());
        }
        std::printf("results %s\n", pr.results_csv_path.c_str());
        std::printf("report %s\n\n", pr.report_md_path.c_str());
        std::cout << read_file(pr.report_md_path);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
