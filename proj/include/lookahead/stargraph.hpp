#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lookahead/vocab.hpp"

namespace lookahead {

// Star graph G(d,n): a start node with d outgoing arms, each a chain of n-1
// nodes. Exactly one arm ends at the goal, so the start->goal path is unique
// and has n nodes including both endpoints.
struct StarGraphInstance {
    int degree = 0;
    int path_len = 0;
    std::vector<std::pair<int, int>> edges; // directed (u,v), shuffled presentation order
    int start = 0;
    int goal = 0;
    std::vector<int> path; // start ... goal, path_len nodes
};

// Deterministic in (d, n, label_pool, seed). Labels are drawn without
// replacement from [0, label_pool).
StarGraphInstance generate_star(int degree, int path_len, int label_pool, std::uint64_t seed);

// Textual form: edges "u,v" joined by "|", then "/", then "start,goal", then
// "=". The completion is the path nodes joined by ",". Each node label and
// each structural symbol is its own token.
TextExample linearize_star(const StarGraphInstance& inst);

// Compact single-string rendering, e.g. "3,8/3,8=" and "3,8".
std::string star_prefix_compact(const StarGraphInstance& inst);
std::string star_completion_compact(const StarGraphInstance& inst);

// Inverse of linearize_star. Recovers the edge multiset, start, goal, and
// path. Accepts both space-joined token text and the compact rendering.
struct ParsedStar {
    std::vector<std::pair<int, int>> edges;
    int start = 0;
    int goal = 0;
    std::vector<int> path;
};
ParsedStar parse_star(const std::string& prefix_text, const std::string& completion_text);

// True iff candidate equals the instance's unique path exactly.
bool verify_path(const StarGraphInstance& inst, const std::vector<int>& candidate);

// Splits a decoded completion token stream ("v , v , v ...") back into node
// labels. Returns false on malformed input.
bool parse_path_tokens(const std::vector<std::string>& tokens, std::vector<int>& out);

// Baseline decoder used to validate the scorer: follows edges correctly but
// picks the first hop uniformly at random, scoring 1/d in expectation.
std::vector<int> follow_random_first_arm(const StarGraphInstance& inst, class Rng& rng);

// Generates `count` instances with per-instance seeds derived from seed.
std::vector<StarGraphInstance> generate_star_dataset(int degree, int path_len, int label_pool,
                                                     int count, std::uint64_t seed);

} // namespace lookahead
