#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lookahead/augment.hpp"
#include "lookahead/decoder.hpp"
#include "lookahead/scc.hpp"
#include "lookahead/stargraph.hpp"
#include "lookahead/vocab.hpp"

namespace lookahead {

// One cell of the results matrix.
struct EvalResult {
    std::string task;    // "star" or "scc"
    std::string variant; // "NTP" when p == 1, else the span policy name
    std::string mode;    // AutoReg / Generated / Specified
    double accuracy = 0.0;
    int n_examples = 0;
    std::uint64_t seed = 0;
    int malformed = 0; // outputs that failed to parse; scored as wrong
};

// Held-out items carry the prompt tokens plus the ground truth needed both
// for exact-match scoring and for building specified z spans.
struct EvalItemStar {
    std::vector<std::string> prefix;
    std::vector<int> path;
};

struct EvalItemScc {
    std::vector<std::string> prefix;
    int n = 0;
    SccTrace trace;
};

EvalItemStar make_eval_item(const StarGraphInstance& inst);
EvalItemScc make_eval_item(const SccInstance& inst);

// "NTP" for an unaugmented model (p == 1), otherwise the policy name.
std::string variant_name(const AugSpec& spec);

struct EvalOptions {
    Strategy strategy = Strategy::greedy;
    double temperature = 1.0;
    std::uint64_t sample_seed = 0;
    int max_new_tokens = 0; // 0: sized from the expected completion length
    int z_cap = kZCap;
};

// Decodes every item and scores exact match against the ground truth.
// Specified mode rebuilds z from the truth under the same span policy the
// model was trained with, seeded per item from `seed`. Pairing a p == 1
// (pure next-token) model with a lookahead mode is a config error.
EvalResult eval_stargraph(const LogitsFn& fn, const Vocab& vocab,
                          const std::vector<EvalItemStar>& items, const AugSpec& spec,
                          DecodeMode mode, std::uint64_t seed, const EvalOptions& opts = {});

EvalResult eval_scc(const LogitsFn& fn, const Vocab& vocab,
                    const std::vector<EvalItemScc>& items, const AugSpec& spec,
                    DecodeMode mode, std::uint64_t seed, const EvalOptions& opts = {});

// Shares the exact-match ruler with eval_stargraph: predict(i) proposes a
// path for items[i]. Lets baseline walkers be scored the same way as models.
double star_accuracy(const std::vector<EvalItemStar>& items,
                     const std::function<std::vector<int>(std::size_t)>& predict);

void write_results_csv(const std::string& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_results_csv(const std::string& path);

// Accuracy matrix, one row per variant x mode pair, one column per task.
// Cells without a result render as "--".
std::string render_report_markdown(const std::vector<EvalResult>& results);

} // namespace lookahead
