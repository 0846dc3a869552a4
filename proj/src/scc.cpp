#include "lookahead/scc.hpp"

#include <algorithm>
#include <numeric>

#include "lookahead/errors.hpp"
#include "lookahead/rng.hpp"

namespace lookahead {

namespace {

struct TarjanState {
    const Digraph* g = nullptr;
    int counter = 0;
    std::vector<int> index;
    std::vector<int> lowlink;
    std::vector<bool> on_stack;
    std::vector<int> stack;
    std::vector<int> scc_id;
    std::vector<std::vector<int>> snapshots;

    void visit(int v) {
        index[v] = lowlink[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;

        for (int w = 0; w < g->n; ++w) {
            if (!g->at(v, w)) {
                continue;
            }
            if (index[w] < 0) {
                visit(w);
                lowlink[v] = std::min(lowlink[v], lowlink[w]);
            } else if (on_stack[w]) {
                lowlink[v] = std::min(lowlink[v], index[w]);
            }
        }

        if (lowlink[v] == index[v]) {
            // v roots a component: pop it and relabel every member with the
            // minimum member index.
            std::vector<int> members;
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                members.push_back(w);
            } while (w != v);
            const int rep = *std::min_element(members.begin(), members.end());
            for (int m : members) {
                scc_id[m] = rep;
            }
        }
        // One snapshot per node-finish event.
        snapshots.push_back(scc_id);
    }
};

} // namespace

SccTrace run_tarjan_with_trace(const Digraph& graph) {
    const int n = graph.n;
    TarjanState st;
    st.g = &graph;
    st.index.assign(n, -1);
    st.lowlink.assign(n, -1);
    st.on_stack.assign(n, false);
    st.scc_id.resize(n);
    std::iota(st.scc_id.begin(), st.scc_id.end(), 0);

    for (int v = 0; v < n; ++v) {
        if (st.index[v] < 0) {
            st.visit(v);
        }
    }

    SccTrace trace;
    trace.snapshots = std::move(st.snapshots);
    trace.final = st.scc_id;
    return trace;
}

std::vector<int> scc_oracle(const Digraph& graph) {
    const int n = graph.n;
    // Transitive closure by repeated relaxation; n is small everywhere this
    // oracle runs.
    std::vector<std::uint8_t> reach(static_cast<std::size_t>(n) * n, 0);
    for (int u = 0; u < n; ++u) {
        reach[static_cast<std::size_t>(u) * n + u] = 1;
        for (int v = 0; v < n; ++v) {
            if (graph.at(u, v)) {
                reach[static_cast<std::size_t>(u) * n + v] = 1;
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        for (int u = 0; u < n; ++u) {
            if (!reach[static_cast<std::size_t>(u) * n + k]) {
                continue;
            }
            for (int v = 0; v < n; ++v) {
                if (reach[static_cast<std::size_t>(k) * n + v]) {
                    reach[static_cast<std::size_t>(u) * n + v] = 1;
                }
            }
        }
    }
    std::vector<int> label(n);
    for (int u = 0; u < n; ++u) {
        int rep = u;
        for (int v = 0; v < n; ++v) {
            if (reach[static_cast<std::size_t>(u) * n + v] && reach[static_cast<std::size_t>(v) * n + u]) {
                rep = std::min(rep, v);
            }
        }
        label[u] = rep;
    }
    return label;
}

Digraph generate_digraph(int n, double edge_prob, std::uint64_t seed) {
    if (n < 1) {
        throw ConfigError("generate_digraph: n must be >= 1");
    }
    if (edge_prob < 0.0 || edge_prob > 1.0) {
        throw ConfigError("generate_digraph: edge_prob must be in [0,1]");
    }
    Digraph g;
    g.n = n;
    g.adj.assign(static_cast<std::size_t>(n) * n, 0);
    Rng rng(seed);
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            if (edge_prob >= 1.0 || rng.bernoulli(edge_prob)) {
                g.set(u, v, 1);
            }
        }
    }
    return g;
}

SccInstance make_scc_instance(const Digraph& graph) {
    SccInstance inst;
    inst.graph = graph;
    inst.trace = run_tarjan_with_trace(graph);
    return inst;
}

namespace {

// Tokens of one labeling rendered "[a b ... z]"; `trailing_comma` fuses a
// "," onto the closing bracket, matching the trace layout.
std::vector<std::string> labeling_tokens(const std::vector<int>& lab, bool trailing_comma) {
    const int n = static_cast<int>(lab.size());
    std::vector<std::string> toks;
    toks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::string t = std::to_string(lab[i]);
        if (i == 0) {
            t = "[" + t;
        }
        if (i == n - 1) {
            t += "]";
            if (trailing_comma) {
                t += ",";
            }
        }
        toks.push_back(std::move(t));
    }
    return toks;
}

void append(std::vector<std::string>& dst, std::vector<std::string> src) {
    for (auto& t : src) {
        dst.push_back(std::move(t));
    }
}

} // namespace

TextExample linearize_scc(const SccInstance& inst) {
    const int n = inst.graph.n;
    TextExample ex;
    ex.prefix.push_back("strongly_connected_components:");
    ex.prefix.push_back("A:");
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            std::string t = std::to_string(static_cast<int>(inst.graph.at(r, c)));
            if (c == 0) {
                t = (r == 0 ? "[[" : "[") + t;
            }
            if (c == n - 1) {
                t += (r == n - 1) ? "]]," : "],";
            }
            ex.prefix.push_back(std::move(t));
        }
    }
    ex.prefix.push_back("initial_trace:");
    std::vector<int> identity(static_cast<std::size_t>(n));
    std::iota(identity.begin(), identity.end(), 0);
    append(ex.prefix, labeling_tokens(identity, false));
    ex.prefix.push_back("trace");
    ex.prefix.push_back("|");
    ex.prefix.push_back("scc_id:");

    ex.completion = scc_completion_tokens(inst.trace);
    return ex;
}

std::vector<std::string> scc_completion_tokens(const SccTrace& trace) {
    std::vector<std::string> toks;
    const auto& snaps = trace.snapshots;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        append(toks, labeling_tokens(snaps[i], i + 1 < snaps.size()));
    }
    toks.push_back("|");
    append(toks, labeling_tokens(trace.final, false));
    return toks;
}

std::string scc_prefix_text(const SccInstance& inst) {
    return join_tokens(linearize_scc(inst).prefix);
}

std::string scc_completion_text(const SccInstance& inst) {
    return join_tokens(linearize_scc(inst).completion);
}

int scc_snapshot_token_len(int n) {
    return n;
}

int scc_snapshot_token_offset(int n, int snapshot_index) {
    return snapshot_index * n;
}

namespace {

struct TokenShape {
    int opens = 0;   // leading '[' count
    int closes = 0;  // trailing ']' count
    bool comma = false;
    int value = 0;
};

TokenShape parse_value_token(const std::string& tok) {
    TokenShape sh;
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e && tok[b] == '[') {
        ++sh.opens;
        ++b;
    }
    if (e > b && tok[e - 1] == ',') {
        sh.comma = true;
        --e;
    }
    while (e > b && tok[e - 1] == ']') {
        ++sh.closes;
        --e;
    }
    const std::string digits = tok.substr(b, e - b);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("parse_scc: malformed value token \"" + tok + "\"");
    }
    sh.value = std::stoi(digits);
    return sh;
}

} // namespace

ParsedScc parse_scc(const std::string& prefix_text, const std::string& completion_text) {
    const auto ptoks = split_tokens(prefix_text);
    std::size_t i = 0;
    auto expect = [&](const char* word) {
        if (i >= ptoks.size() || ptoks[i] != word) {
            throw ConfigError("parse_scc: expected \"" + std::string(word) + "\"");
        }
        ++i;
    };
    expect("strongly_connected_components:");
    expect("A:");

    ParsedScc out;
    std::vector<std::vector<int>> rows;
    std::vector<int> row;
    while (i < ptoks.size() && ptoks[i] != "initial_trace:") {
        const auto sh = parse_value_token(ptoks[i++]);
        row.push_back(sh.value);
        if (sh.closes > 0) {
            rows.push_back(row);
            row.clear();
        }
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) {
        throw ConfigError("parse_scc: empty adjacency matrix");
    }
    out.graph.n = n;
    out.graph.adj.assign(static_cast<std::size_t>(n) * n, 0);
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(rows[r].size()) != n) {
            throw ConfigError("parse_scc: ragged adjacency matrix");
        }
        for (int c = 0; c < n; ++c) {
            if (rows[r][c] != 0 && rows[r][c] != 1) {
                throw ConfigError("parse_scc: adjacency entries must be 0/1");
            }
            out.graph.set(r, c, static_cast<std::uint8_t>(rows[r][c]));
        }
    }
    expect("initial_trace:");
    std::vector<int> init;
    while (i < ptoks.size() && ptoks[i] != "trace") {
        init.push_back(parse_value_token(ptoks[i++]).value);
    }
    expect("trace");
    expect("|");
    expect("scc_id:");
    if (static_cast<int>(init.size()) != n) {
        throw ConfigError("parse_scc: initial trace length mismatch");
    }

    const auto ctoks = split_tokens(completion_text);
    std::vector<std::vector<int>> labelings;
    std::vector<int> cur;
    bool saw_bar = false;
    std::size_t bar_index = 0;
    for (std::size_t j = 0; j < ctoks.size(); ++j) {
        if (ctoks[j] == "|") {
            if (!cur.empty()) {
                throw ConfigError("parse_scc: separator inside labeling");
            }
            saw_bar = true;
            bar_index = labelings.size();
            continue;
        }
        const auto sh = parse_value_token(ctoks[j]);
        cur.push_back(sh.value);
        if (sh.closes > 0) {
            if (static_cast<int>(cur.size()) != n) {
                throw ConfigError("parse_scc: labeling length mismatch");
            }
            labelings.push_back(cur);
            cur.clear();
        }
    }
    if (!saw_bar || bar_index != labelings.size() - 1) {
        throw ConfigError("parse_scc: completion must end with \"| final\"");
    }
    out.trace.final = labelings.back();
    labelings.pop_back();
    out.trace.snapshots = std::move(labelings);
    return out;
}

std::vector<SccInstance> generate_scc_dataset(int n, double edge_prob, int count, std::uint64_t seed) {
    std::vector<SccInstance> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out.push_back(make_scc_instance(
            generate_digraph(n, edge_prob, derive_seed(seed, static_cast<std::uint64_t>(i)))));
    }
    return out;
}

} // namespace lookahead
