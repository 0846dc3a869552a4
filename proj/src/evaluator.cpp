#include "lookahead/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lookahead/errors.hpp"
#include "lookahead/rng.hpp"

namespace lookahead {

namespace {

// ids -> token strings, cut at the first EOS.
std::vector<std::string> tokens_until_eos(const Vocab& vocab, const Sequence& ids) {
    std::vector<std::string> toks;
    for (TokenId id : ids) {
        if (id == kEosId) {
            break;
        }
        toks.push_back(vocab.token(id));
    }
    return toks;
}

// Same k cycle the augmenter applies under the fixed policy.
int fixed_k_for_index(const AugSpec& spec, std::size_t index) {
    const int cycle = spec.fixed_k_max - spec.fixed_k_min + 1;
    return spec.fixed_k_min + static_cast<int>(index % static_cast<std::size_t>(cycle));
}

void check_mode_pairing(const AugSpec& spec, DecodeMode mode) {
    if (spec.p == 1.0 && mode != DecodeMode::autoregressive) {
        throw ConfigError("eval: a p=1 model saw no lookahead tokens in training; "
                          "Generated and Specified modes do not apply to it");
    }
    if (mode == DecodeMode::t_specified && spec.schema != Schema::copy) {
        throw ConfigError("eval: specified z reconstruction is implemented for the "
                          "copy schema only");
    }
}

std::string format_accuracy(double a) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", a);
    return buf;
}

} // namespace

EvalItemStar make_eval_item(const StarGraphInstance& inst) {
    EvalItemStar item;
    item.prefix = linearize_star(inst).prefix;
    item.path = inst.path;
    return item;
}

EvalItemScc make_eval_item(const SccInstance& inst) {
    EvalItemScc item;
    item.prefix = linearize_scc(inst).prefix;
    item.n = inst.graph.n;
    item.trace = inst.trace;
    return item;
}

std::string variant_name(const AugSpec& spec) {
    if (spec.p == 1.0) {
        return "NTP";
    }
    return to_string(spec.policy);
}

EvalResult eval_stargraph(const LogitsFn& fn, const Vocab& vocab,
                          const std::vector<EvalItemStar>& items, const AugSpec& spec,
                          DecodeMode mode, std::uint64_t seed, const EvalOptions& opts) {
    check_mode_pairing(spec, mode);
    if (items.empty()) {
        throw ConfigError("eval_stargraph: no items");
    }

    EvalResult res;
    res.task = "star";
    res.variant = variant_name(spec);
    res.mode = mode_name(mode);
    res.n_examples = static_cast<int>(items.size());
    res.seed = seed;

    int hits = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const int path_len = static_cast<int>(item.path.size());

        // Completion layout: path nodes at even offsets, "," between them.
        std::vector<std::string> ctoks;
        ctoks.reserve(static_cast<std::size_t>(2 * path_len - 1));
        for (int j = 0; j < path_len; ++j) {
            if (j > 0) {
                ctoks.push_back(",");
            }
            ctoks.push_back(std::to_string(item.path[j]));
        }

        DecodeRequest req;
        req.mode = mode;
        req.prompt = vocab.encode(item.prefix);
        req.decision_rule = 1;
        req.strategy = opts.strategy;
        req.temperature = opts.temperature;
        req.sample_seed = derive_seed(opts.sample_seed, i);
        req.z_cap = opts.z_cap;
        req.max_new_tokens = opts.max_new_tokens > 0 ? opts.max_new_tokens : 4 * path_len + 32;

        if (mode == DecodeMode::t_specified) {
            Rng rng(derive_seed(seed, i));
            const int k = fixed_k_for_index(spec, i);
            const StarSpan span = choose_span_stargraph(path_len, spec.policy, spec.fixed_offset, k, rng);
            std::vector<std::string> ztoks(ctoks.begin() + 2 * span.start,
                                           ctoks.begin() + 2 * span.start + 2 * span.len - 1);
            req.specified_z = vocab.encode(ztoks);
        }

        const DecodeResult out = decode(fn, req);
        std::vector<int> predicted;
        if (!parse_path_tokens(tokens_until_eos(vocab, out.stripped), predicted)) {
            ++res.malformed;
            continue;
        }
        if (predicted == item.path) {
            ++hits;
        }
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(items.size());
    return res;
}

EvalResult eval_scc(const LogitsFn& fn, const Vocab& vocab,
                    const std::vector<EvalItemScc>& items, const AugSpec& spec,
                    DecodeMode mode, std::uint64_t seed, const EvalOptions& opts) {
    check_mode_pairing(spec, mode);
    if (items.empty()) {
        throw ConfigError("eval_scc: no items");
    }

    EvalResult res;
    res.task = "scc";
    res.variant = variant_name(spec);
    res.mode = mode_name(mode);
    res.n_examples = static_cast<int>(items.size());
    res.seed = seed;

    int hits = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const int n = item.n;
        const int m = static_cast<int>(item.trace.snapshots.size());
        const auto ctoks = scc_completion_tokens(item.trace);

        DecodeRequest req;
        req.mode = mode;
        req.prompt = vocab.encode(item.prefix);
        req.decision_rule = n;
        req.strategy = opts.strategy;
        req.temperature = opts.temperature;
        req.sample_seed = derive_seed(opts.sample_seed, i);
        req.z_cap = opts.z_cap;
        req.max_new_tokens = opts.max_new_tokens > 0 ? opts.max_new_tokens : (m + 2) * n + 40;

        if (mode == DecodeMode::t_specified) {
            Rng rng(derive_seed(seed, i));
            const int idx = choose_span_scc(item.trace, spec.policy, rng);
            const int s0 = scc_snapshot_token_offset(n, idx);
            std::vector<std::string> ztoks(ctoks.begin() + s0, ctoks.begin() + s0 + n);
            req.specified_z = vocab.encode(ztoks);
        }

        const DecodeResult out = decode(fn, req);
        const auto toks = tokens_until_eos(vocab, out.stripped);

        // Score the labeling after the last "|" against the true final one.
        auto bar = std::find(toks.rbegin(), toks.rend(), "|");
        if (bar == toks.rend()) {
            ++res.malformed;
            continue;
        }
        const std::vector<std::string> predicted(bar.base(), toks.end());
        const std::vector<std::string> expected(ctoks.end() - n, ctoks.end());
        if (predicted == expected) {
            ++hits;
        }
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(items.size());
    return res;
}

double star_accuracy(const std::vector<EvalItemStar>& items,
                     const std::function<std::vector<int>(std::size_t)>& predict) {
    if (items.empty()) {
        throw ConfigError("star_accuracy: no items");
    }
    int hits = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (predict(i) == items[i].path) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(items.size());
}

static const char* kCsvHeader = "task,variant,mode,accuracy,n_examples,seed,malformed";

void write_results_csv(const std::string& path, const std::vector<EvalResult>& results) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_results_csv: cannot open " + path);
    }
    out << kCsvHeader << "\n";
    char acc[64];
    for (const auto& r : results) {
        std::snprintf(acc, sizeof(acc), "%.17g", r.accuracy);
        out << r.task << ',' << r.variant << ',' << r.mode << ',' << acc << ','
            << r.n_examples << ',' << r.seed << ',' << r.malformed << "\n";
    }
    if (!out.good()) {
        throw ConfigError("write_results_csv: write failed for " + path);
    }
}

std::vector<EvalResult> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("read_results_csv: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw ConfigError("read_results_csv: bad header in " + path);
    }
    std::vector<EvalResult> results;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            fields.push_back(f);
        }
        if (fields.size() != 7) {
            throw ConfigError("read_results_csv: line " + std::to_string(lineno) +
                              ": expected 7 fields, got " + std::to_string(fields.size()));
        }
        EvalResult r;
        r.task = fields[0];
        r.variant = fields[1];
        r.mode = fields[2];
        try {
            r.accuracy = std::stod(fields[3]);
            r.n_examples = std::stoi(fields[4]);
            r.seed = std::stoull(fields[5]);
            r.malformed = std::stoi(fields[6]);
        } catch (const std::exception&) {
            throw ConfigError("read_results_csv: line " + std::to_string(lineno) +
                              ": bad numeric field");
        }
        results.push_back(std::move(r));
    }
    return results;
}

std::string render_report_markdown(const std::vector<EvalResult>& results) {
    // Canonical orders; anything unexpected is appended as seen.
    std::vector<std::string> variants = {"NTP", "fixed", "random", "rule_based"};
    std::vector<std::string> modes = {"AutoReg", "Generated", "Specified"};
    std::vector<std::string> tasks = {"star", "scc"};

    auto ensure = [](std::vector<std::string>& order, const std::string& v) {
        if (std::find(order.begin(), order.end(), v) == order.end()) {
            order.push_back(v);
        }
    };
    for (const auto& r : results) {
        ensure(variants, r.variant);
        ensure(modes, r.mode);
        ensure(tasks, r.task);
    }
    // Drop tasks with no results at all.
    tasks.erase(std::remove_if(tasks.begin(), tasks.end(),
                               [&](const std::string& t) {
                                   return std::none_of(results.begin(), results.end(),
                                                       [&](const EvalResult& r) { return r.task == t; });
                               }),
                tasks.end());

    auto lookup = [&](const std::string& task, const std::string& variant,
                      const std::string& mode) -> const EvalResult* {
        const EvalResult* found = nullptr;
        for (const auto& r : results) {
            if (r.task == task && r.variant == variant && r.mode == mode) {
                found = &r; // last one wins
            }
        }
        return found;
    };

    std::ostringstream md;
    md << "| variant | mode |";
    for (const auto& t : tasks) {
        md << ' ' << t << " |";
    }
    md << "\n|---|---|";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        md << "---|";
    }
    md << "\n";

    for (const auto& v : variants) {
        for (const auto& m : modes) {
            bool any = false;
            for (const auto& t : tasks) {
                if (lookup(t, v, m) != nullptr) {
                    any = true;
                }
            }
            if (!any) {
                continue;
            }
            md << "| " << v << " | " << m << " |";
            for (const auto& t : tasks) {
                const EvalResult* r = lookup(t, v, m);
                md << ' ' << (r ? format_accuracy(r->accuracy) : "--") << " |";
            }
            md << "\n";
        }
    }
    return md.str();
}

} // namespace lookahead
