#include "lookahead/stargraph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lookahead/errors.hpp"
#include "lookahead/rng.hpp"

namespace lookahead {

StarGraphInstance generate_star(int degree, int path_len, int label_pool, std::uint64_t seed) {
    if (degree < 1) {
        throw ConfigError("generate_star: degree must be >= 1, got " + std::to_string(degree));
    }
    if (path_len < 2) {
        throw ConfigError("generate_star: path_len must be >= 2, got " + std::to_string(path_len));
    }
    const int node_count = degree * (path_len - 1) + 1;
    if (label_pool < node_count) {
        throw ConfigError("generate_star: label_pool " + std::to_string(label_pool) +
                          " too small for " + std::to_string(node_count) + " nodes");
    }

    Rng rng(seed);
    std::vector<int> labels(static_cast<std::size_t>(label_pool));
    std::iota(labels.begin(), labels.end(), 0);
    rng.shuffle(labels);
    labels.resize(static_cast<std::size_t>(node_count));

    StarGraphInstance inst;
    inst.degree = degree;
    inst.path_len = path_len;
    inst.start = labels[0];

    // Arm 0 carries the goal; the remaining arms are decoys of equal length.
    const int arm_len = path_len - 1;
    auto arm_node = [&](int arm, int idx) { return labels[static_cast<std::size_t>(1 + arm * arm_len + idx)]; };

    inst.path.push_back(inst.start);
    for (int j = 0; j < arm_len; ++j) {
        inst.path.push_back(arm_node(0, j));
    }
    inst.goal = inst.path.back();

    for (int arm = 0; arm < degree; ++arm) {
        inst.edges.emplace_back(inst.start, arm_node(arm, 0));
        for (int j = 0; j + 1 < arm_len; ++j) {
            inst.edges.emplace_back(arm_node(arm, j), arm_node(arm, j + 1));
        }
    }
    rng.shuffle(inst.edges);
    return inst;
}

TextExample linearize_star(const StarGraphInstance& inst) {
    TextExample ex;
    for (std::size_t i = 0; i < inst.edges.size(); ++i) {
        if (i > 0) {
            ex.prefix.push_back("|");
        }
        ex.prefix.push_back(std::to_string(inst.edges[i].first));
        ex.prefix.push_back(",");
        ex.prefix.push_back(std::to_string(inst.edges[i].second));
    }
    ex.prefix.push_back("/");
    ex.prefix.push_back(std::to_string(inst.start));
    ex.prefix.push_back(",");
    ex.prefix.push_back(std::to_string(inst.goal));
    ex.prefix.push_back("=");

    for (std::size_t i = 0; i < inst.path.size(); ++i) {
        if (i > 0) {
            ex.completion.push_back(",");
        }
        ex.completion.push_back(std::to_string(inst.path[i]));
    }
    return ex;
}

std::string star_prefix_compact(const StarGraphInstance& inst) {
    std::string out;
    for (const auto tok : linearize_star(inst).prefix) {
        out += tok;
    }
    return out;
}

std::string star_completion_compact(const StarGraphInstance& inst) {
    std::string out;
    for (const auto tok : linearize_star(inst).completion) {
        out += tok;
    }
    return out;
}

namespace {

// Lexes either space-joined tokens or the compact form into the same token
// stream: label digit runs and the single-character symbols , | / =.
std::vector<std::string> lex_star(const std::string& text) {
    if (text.find(' ') != std::string::npos) {
        return split_tokens(text);
    }
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c >= '0' && c <= '9') {
            std::size_t j = i;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
                ++j;
            }
            out.push_back(text.substr(i, j - i));
            i = j;
        } else if (c == ',' || c == '|' || c == '/' || c == '=') {
            out.push_back(std::string(1, c));
            ++i;
        } else {
            throw ConfigError("parse_star: unexpected character '" + std::string(1, c) + "'");
        }
    }
    return out;
}

int parse_label(const std::string& tok) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("parse_star: expected node label, got \"" + tok + "\"");
    }
    return std::stoi(tok);
}

} // namespace

ParsedStar parse_star(const std::string& prefix_text, const std::string& completion_text) {
    const auto toks = lex_star(prefix_text);
    ParsedStar out;
    std::size_t i = 0;
    auto expect = [&](const char* sym) {
        if (i >= toks.size() || toks[i] != sym) {
            throw ConfigError("parse_star: expected \"" + std::string(sym) + "\" at token " +
                              std::to_string(i));
        }
        ++i;
    };
    while (i < toks.size() && toks[i] != "/") {
        const int u = parse_label(toks[i++]);
        expect(",");
        if (i >= toks.size()) {
            throw ConfigError("parse_star: truncated edge");
        }
        const int v = parse_label(toks[i++]);
        out.edges.emplace_back(u, v);
        if (i < toks.size() && toks[i] == "|") {
            ++i;
        }
    }
    expect("/");
    out.start = parse_label(toks[i++]);
    expect(",");
    out.goal = parse_label(toks[i++]);
    expect("=");
    if (i != toks.size()) {
        throw ConfigError("parse_star: trailing tokens after '='");
    }

    const auto ctoks = lex_star(completion_text);
    for (std::size_t j = 0; j < ctoks.size(); ++j) {
        if (j % 2 == 0) {
            out.path.push_back(parse_label(ctoks[j]));
        } else if (ctoks[j] != ",") {
            throw ConfigError("parse_star: malformed path separator");
        }
    }
    return out;
}

bool verify_path(const StarGraphInstance& inst, const std::vector<int>& candidate) {
    return candidate == inst.path;
}

bool parse_path_tokens(const std::vector<std::string>& tokens, std::vector<int>& out) {
    out.clear();
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (j % 2 == 0) {
            const auto& tok = tokens[j];
            if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
                return false;
            }
            out.push_back(std::stoi(tok));
        } else if (tokens[j] != ",") {
            return false;
        }
    }
    return !out.empty() && tokens.size() % 2 == 1;
}

std::vector<int> follow_random_first_arm(const StarGraphInstance& inst, Rng& rng) {
    std::vector<int> firsts;
    for (const auto& [u, v] : inst.edges) {
        if (u == inst.start) {
            firsts.push_back(v);
        }
    }
    std::sort(firsts.begin(), firsts.end());
    std::vector<int> path{inst.start};
    int cur = firsts[static_cast<std::size_t>(rng.uniform_u64(firsts.size()))];
    path.push_back(cur);
    // Every non-start node has at most one outgoing edge, so just follow it.
    bool moved = true;
    while (moved) {
        moved = false;
        for (const auto& [u, v] : inst.edges) {
            if (u == cur) {
                cur = v;
                path.push_back(cur);
                moved = true;
                break;
            }
        }
    }
    return path;
}

std::vector<StarGraphInstance> generate_star_dataset(int degree, int path_len, int label_pool,
                                                     int count, std::uint64_t seed) {
    std::vector<StarGraphInstance> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out.push_back(generate_star(degree, path_len, label_pool,
                                    derive_seed(seed, static_cast<std::uint64_t>(i))));
    }
    return out;
}

} // namespace lookahead
