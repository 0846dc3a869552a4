#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lookahead/rng.hpp"
#include "lookahead/scc.hpp"
#include "lookahead/stargraph.hpp"
#include "lookahead/vocab.hpp"

namespace lookahead {

enum class Schema { copy, copy_pos };
enum class Policy { fixed, random_span, rule_based };
enum class LossScope { all, completion_only };

std::string to_string(Schema s);
std::string to_string(Policy p);
std::string to_string(LossScope s);
Schema schema_from_string(const std::string& s);
Policy policy_from_string(const std::string& s);
LossScope loss_scope_from_string(const std::string& s);

// Augmentation recipe: schema, span-selection policy, fixed-policy span
// parameters, mixture probability, and the positional template.
struct AugSpec {
    Schema schema = Schema::copy;
    Policy policy = Policy::random_span;
    int fixed_offset = 2;  // path index where a fixed-policy span starts
    int fixed_k_min = 1;   // fixed-policy span lengths cycle k_min..k_max
    int fixed_k_max = 4;
    double p = 0.5;        // probability an example is kept unaugmented
    std::string zeta_template = "I want the [{k}]-th sentence from here to be [{s}]";
    LossScope loss_scope = LossScope::completion_only;
    bool explicit_pos = false;

    void validate() const;               // throws ConfigError
    std::string serialize() const;       // flat key=value lines
    static AugSpec parse(const std::string& text);
};

struct SpanInfo {
    int open = -1;   // index of <T> in ids, -1 when unaugmented
    int close = -1;  // index of </T>
};

struct AugmentedSequence {
    Sequence ids;
    std::vector<std::uint8_t> loss_mask;  // aligned with ids
    SpanInfo span;
    Example origin;
    int prefix_len = 0;  // conditioning-prefix token count within ids
    bool is_augmented = false;
};

// y_1..y_d <T> y_s..y_{s+k-1} </T> y_{d+1}..y_T with 1-based positions and
// the constraint d < s <= T-k. Mask is the <T>-only rule; task drivers
// re-derive it when a narrower loss scope applies.
AugmentedSequence augment_copy(const Sequence& seq, int d, int s, int k);

// s_1..s_d <T> zeta(k, s_{d+k}) </T> s_{d+1}..s_n. The rendered template
// words are interned into `vocab` (it grows). With spec.explicit_pos, each
// sentence after the decision point is prefixed by a "[i]" marker token.
AugmentedSequence augment_copy_pos(Vocab& vocab, const std::vector<Sequence>& sentences,
                                   int d, int k, const AugSpec& spec);

// Contiguous run of path nodes, in path-index coordinates.
struct StarSpan {
    int start = 0;
    int len = 0;
};

// Legal spans live strictly inside (v_1, v_goal): path indices 2..n-2.
// fixed -> start at fixed_offset with the requested length clamped to fit;
// random -> uniform over every legal (start, len) pair.
StarSpan choose_span_stargraph(int path_len, Policy policy, int fixed_offset, int k, Rng& rng);
std::vector<int> star_span_labels(const std::vector<int>& path, StarSpan span);

// rule_based -> index of the first snapshot that differs from its
// predecessor (falls back to the last snapshot of a constant trace);
// random -> uniform over snapshots[1..]. Never selects snapshot 0.
int choose_span_scc(const SccTrace& trace, Policy policy, Rng& rng);

// mask[j] = 0 iff ids[j] is <T>, additionally 0 for j < prefix_len under
// completion_only. The close token stays unmasked: loss is computed on it.
std::vector<std::uint8_t> make_loss_mask(const Sequence& ids, LossScope scope, int prefix_len);

// Removes <T>..</T> runs inclusive (stray specials are dropped too, so any
// decoder output strips cleanly). Identity on sequences without specials.
Sequence strip_augmentation(const Sequence& ids);

// prefix ++ completion ++ EOS with an all-pass (scope-restricted) mask.
AugmentedSequence make_unaugmented(const Sequence& prefix, const Sequence& completion,
                                   LossScope scope);

// Star-graph driver: z is a copy span over path nodes (interior comma
// tokens included), inserted right after v_start. example_index drives the
// fixed-policy length cycle; rng feeds the random policy.
AugmentedSequence augment_star_example(const StarGraphInstance& inst, const Vocab& vocab,
                                       const AugSpec& spec, std::uint64_t example_index,
                                       Rng& rng);

// SCC driver: z is one whole snapshot (n tokens), inserted after t_1.
AugmentedSequence augment_scc_example(const SccInstance& inst, const Vocab& vocab,
                                      const AugSpec& spec, Rng& rng);

// Keep-or-augment mixture over `count` examples. Example i draws from its
// own stream derive_seed(seed, i): kept original with probability p, else
// make_augmented(i, stream). Parallel and serial builds agree.
std::vector<AugmentedSequence> build_mixture(
    std::size_t count, double p, std::uint64_t seed,
    const std::function<AugmentedSequence(std::size_t)>& make_original,
    const std::function<AugmentedSequence(std::size_t, Rng&)>& make_augmented);

// One record per line: is_augmented<TAB>space-joined tokens<TAB>mask digits.
void write_augmented(const std::string& path, const std::vector<AugmentedSequence>& rows,
                     const Vocab& vocab);
// Round-trips ids/mask/span/is_augmented; origin and prefix_len are not
// stored (training does not need them).
std::vector<AugmentedSequence> read_augmented(const std::string& path, const Vocab& vocab);

} // namespace lookahead
