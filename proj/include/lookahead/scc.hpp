#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lookahead/vocab.hpp"

namespace lookahead {

// Dense directed graph; self-loops allowed.
struct Digraph {
    int n = 0;
    std::vector<std::uint8_t> adj; // n*n row-major, entries 0/1

    std::uint8_t at(int u, int v) const { return adj[static_cast<std::size_t>(u) * n + v]; }
    void set(int u, int v, std::uint8_t x) { adj[static_cast<std::size_t>(u) * n + v] = x; }
};

// Execution trace of the component labeling. snapshots[0] is the initial
// identity labeling; one snapshot is emitted per DFS node-finish event, with
// scc_id entries rewritten to the component's minimum member when a root
// pops its component off the stack.
struct SccTrace {
    std::vector<std::vector<int>> snapshots;
    std::vector<int> final;
};

struct SccInstance {
    Digraph graph;
    SccTrace trace;
};

// Tarjan's algorithm with low-link values and an explicit stack. DFS roots
// are visited in ascending node order and neighbors explored in ascending
// order, so the trace is deterministic.
SccTrace run_tarjan_with_trace(const Digraph& graph);

// Independent verification oracle: i and j share a label iff each reaches
// the other under transitive closure; the label is the minimum member index.
std::vector<int> scc_oracle(const Digraph& graph);

// Erdos-Renyi digraph with self-loops permitted, deterministic in seed.
Digraph generate_digraph(int n, double edge_prob, std::uint64_t seed);

SccInstance make_scc_instance(const Digraph& graph);

// prefix:  strongly_connected_components: A: [[...]], initial_trace: [0 1 ...] trace | scc_id:
// completion:  snapshots "[a b c]" joined by ", ", then " | ", then the final labeling.
TextExample linearize_scc(const SccInstance& inst);

std::string scc_prefix_text(const SccInstance& inst);     // space-joined == canonical layout
std::string scc_completion_text(const SccInstance& inst);

// Completion token stream for a trace alone (snapshots, "|", final); the
// evaluator rebuilds ground truth from parsed traces with this.
std::vector<std::string> scc_completion_tokens(const SccTrace& trace);

struct ParsedScc {
    Digraph graph;
    SccTrace trace;
};
ParsedScc parse_scc(const std::string& prefix_text, const std::string& completion_text);

// Token-coordinate helpers for the augmenter. Every snapshot of an n-node
// graph occupies exactly n whitespace tokens ("[a", mids, "z]," or "z]").
int scc_snapshot_token_len(int n);
// Token offset of snapshot i (0-based) within the completion token stream.
int scc_snapshot_token_offset(int n, int snapshot_index);

std::vector<SccInstance> generate_scc_dataset(int n, double edge_prob, int count, std::uint64_t seed);

} // namespace lookahead
