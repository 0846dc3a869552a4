#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lookahead/augment.hpp"
#include "lookahead/evaluator.hpp"

namespace lookahead {

// Stage chain gen -> augment -> train -> eval driven by one flat key=value
// manifest. Stages write under out_dir and record content stamps; a stage
// whose stamp and outputs are intact is skipped on re-runs, so interrupted
// experiments resume where they stopped.
struct PipelineResult {
    std::vector<std::string> ran;
    std::vector<std::string> skipped;
    std::string results_csv_path;
    std::string report_md_path;
};

// Desk-scale defaults for "star" or "scc". The returned map is also the
// complete legal key set: manifests with keys outside it are rejected.
std::map<std::string, std::string> manifest_defaults(const std::string& task);

// Standalone augment step, shared by the pipeline and the CLI: reads a raw
// dataset, builds the vocabulary over it plus any extra corpora (so held-out
// prompts stay encodable), applies the keep-or-augment mixture, and writes
// the augmented rows, the vocabulary, and the augmentation spec.
void augment_dataset(const std::string& task, const std::string& train_tsv,
                     const std::vector<std::string>& extra_corpus_tsvs, const AugSpec& spec,
                     std::uint64_t seed, const std::string& aug_tsv,
                     const std::string& vocab_txt, const std::string& augspec_txt);

// Runs a checkpoint over a held-out dataset, one result row per decode mode.
// The task, scalar type, vocabulary, and augmentation spec all come from the
// checkpoint itself. An empty modes string picks every mode the model's
// training mixture supports ("ar" for p=1, otherwise ar,tgen,tspec).
std::vector<EvalResult> eval_checkpoint(const std::string& ckpt_path, const std::string& test_tsv,
                                        const std::string& modes_csv, std::uint64_t eval_seed,
                                        const EvalOptions& opts);

// Requires task and out_dir; everything else falls back to the defaults.
PipelineResult run_pipeline(const std::map<std::string, std::string>& manifest);

} // namespace lookahead
