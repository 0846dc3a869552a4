#include "lookahead/augment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lookahead/errors.hpp"

namespace lookahead {

std::string to_string(Schema s) {
    return s == Schema::copy ? "copy" : "copy_pos";
}

std::string to_string(Policy p) {
    switch (p) {
    case Policy::fixed: return "fixed";
    case Policy::random_span: return "random";
    default: return "rule_based";
    }
}

std::string to_string(LossScope s) {
    return s == LossScope::all ? "all" : "completion_only";
}

Schema schema_from_string(const std::string& s) {
    if (s == "copy") return Schema::copy;
    if (s == "copy_pos") return Schema::copy_pos;
    throw ConfigError("unknown schema \"" + s + "\"");
}

Policy policy_from_string(const std::string& s) {
    if (s == "fixed") return Policy::fixed;
    if (s == "random") return Policy::random_span;
    if (s == "rule_based") return Policy::rule_based;
    throw ConfigError("unknown policy \"" + s + "\"");
}

LossScope loss_scope_from_string(const std::string& s) {
    if (s == "all") return LossScope::all;
    if (s == "completion_only") return LossScope::completion_only;
    throw ConfigError("unknown loss_scope \"" + s + "\"");
}

void AugSpec::validate() const {
    if (p < 0.0 || p > 1.0) {
        throw ConfigError("aug spec: p must be in [0,1]");
    }
    if (fixed_k_min < 1 || fixed_k_max < fixed_k_min) {
        throw ConfigError("aug spec: need 1 <= fixed_k_min <= fixed_k_max");
    }
    if (fixed_offset < 2) {
        throw ConfigError("aug spec: fixed_offset must be >= 2 (spans start after v_1)");
    }
}

std::string AugSpec::serialize() const {
    char pbuf[32];
    std::snprintf(pbuf, sizeof pbuf, "%.17g", p);
    std::ostringstream out;
    out << "schema=" << to_string(schema) << "\n"
        << "policy=" << to_string(policy) << "\n"
        << "fixed_offset=" << fixed_offset << "\n"
        << "fixed_k_min=" << fixed_k_min << "\n"
        << "fixed_k_max=" << fixed_k_max << "\n"
        << "p=" << pbuf << "\n"
        << "loss_scope=" << to_string(loss_scope) << "\n"
        << "explicit_pos=" << (explicit_pos ? 1 : 0) << "\n"
        << "zeta_template=" << zeta_template << "\n";
    return out.str();
}

AugSpec AugSpec::parse(const std::string& text) {
    AugSpec spec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("aug spec: expected key=value, got \"" + line + "\"");
        }
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "schema") {
            spec.schema = schema_from_string(val);
        } else if (key == "policy") {
            spec.policy = policy_from_string(val);
        } else if (key == "fixed_offset") {
            spec.fixed_offset = std::stoi(val);
        } else if (key == "fixed_k_min") {
            spec.fixed_k_min = std::stoi(val);
        } else if (key == "fixed_k_max") {
            spec.fixed_k_max = std::stoi(val);
        } else if (key == "p") {
            spec.p = std::stod(val);
        } else if (key == "loss_scope") {
            spec.loss_scope = loss_scope_from_string(val);
        } else if (key == "explicit_pos") {
            spec.explicit_pos = (val == "1" || val == "true");
        } else if (key == "zeta_template") {
            spec.zeta_template = val;
        } else {
            throw ConfigError("aug spec: unknown key \"" + key + "\"");
        }
    }
    spec.validate();
    return spec;
}

AugmentedSequence augment_copy(const Sequence& seq, int d, int s, int k) {
    const int T = static_cast<int>(seq.size());
    if (d < 1 || k < 1 || !(d < s && s <= T - k)) {
        std::ostringstream msg;
        msg << "augment_copy: need 1 <= d < s <= T-k, got d=" << d << " s=" << s
            << " k=" << k << " T=" << T;
        throw ConfigError(msg.str());
    }
    AugmentedSequence out;
    out.ids.reserve(seq.size() + 2 + static_cast<std::size_t>(k));
    out.ids.insert(out.ids.end(), seq.begin(), seq.begin() + d);
    out.ids.push_back(kTOpenId);
    out.ids.insert(out.ids.end(), seq.begin() + (s - 1), seq.begin() + (s - 1 + k));
    out.ids.push_back(kTCloseId);
    out.ids.insert(out.ids.end(), seq.begin() + d, seq.end());
    out.span.open = d;
    out.span.close = d + k + 1;
    out.is_augmented = true;
    out.loss_mask = make_loss_mask(out.ids, LossScope::all, 0);
    return out;
}

namespace {

std::string render_zeta(const std::string& tmpl, int k, const std::string& sentence) {
    std::string out = tmpl;
    auto replace_all = [&out](const std::string& from, const std::string& to) {
        std::size_t pos = 0;
        while ((pos = out.find(from, pos)) != std::string::npos) {
            out.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("{k}", std::to_string(k));
    replace_all("{s}", sentence);
    return out;
}

} // namespace

AugmentedSequence augment_copy_pos(Vocab& vocab, const std::vector<Sequence>& sentences,
                                   int d, int k, const AugSpec& spec) {
    const int n = static_cast<int>(sentences.size());
    if (d < 1 || k < 1 || d + k > n) {
        std::ostringstream msg;
        msg << "augment_copy_pos: need 1 <= d, k >= 1, d+k <= " << n << ", got d=" << d
            << " k=" << k;
        throw ConfigError(msg.str());
    }
    const std::string target = join_tokens(vocab.decode(sentences[static_cast<std::size_t>(d + k - 1)]));
    const auto zeta_words = split_tokens(render_zeta(spec.zeta_template, k, target));
    Sequence zeta_ids;
    zeta_ids.reserve(zeta_words.size());
    for (const auto& w : zeta_words) {
        zeta_ids.push_back(vocab.add(w));
    }

    AugmentedSequence out;
    for (int i = 0; i < d; ++i) {
        const auto& s = sentences[static_cast<std::size_t>(i)];
        out.ids.insert(out.ids.end(), s.begin(), s.end());
    }
    out.span.open = static_cast<int>(out.ids.size());
    out.ids.push_back(kTOpenId);
    out.ids.insert(out.ids.end(), zeta_ids.begin(), zeta_ids.end());
    out.span.close = static_cast<int>(out.ids.size());
    out.ids.push_back(kTCloseId);
    for (int i = d; i < n; ++i) {
        if (spec.explicit_pos) {
            out.ids.push_back(vocab.add("[" + std::to_string(i - d + 1) + "]"));
        }
        const auto& s = sentences[static_cast<std::size_t>(i)];
        out.ids.insert(out.ids.end(), s.begin(), s.end());
    }
    out.is_augmented = true;
    out.loss_mask = make_loss_mask(out.ids, LossScope::all, 0);
    for (const auto& s : sentences) {
        out.origin.completion.insert(out.origin.completion.end(), s.begin(), s.end());
    }
    return out;
}

StarSpan choose_span_stargraph(int path_len, Policy policy, int fixed_offset, int k, Rng& rng) {
    const int n = path_len;
    if (n < 4) {
        throw ConfigError("choose_span_stargraph: path too short (need >= 4 nodes)");
    }
    const int lo = 2;
    const int hi = n - 2;
    if (policy == Policy::fixed) {
        if (fixed_offset < lo || fixed_offset > hi) {
            throw ConfigError("choose_span_stargraph: fixed_offset out of range for this path");
        }
        const int max_len = hi - fixed_offset + 1;
        return {fixed_offset, std::min(std::max(k, 1), max_len)};
    }
    if (policy == Policy::random_span) {
        const int w = hi - lo + 1;
        const std::uint64_t total = static_cast<std::uint64_t>(w) * (w + 1) / 2;
        std::uint64_t r = rng.uniform_u64(total);
        for (int i = 0; i < w; ++i) {
            const std::uint64_t lens = static_cast<std::uint64_t>(w - i);
            if (r < lens) {
                return {lo + i, static_cast<int>(r) + 1};
            }
            r -= lens;
        }
        throw NumericError("choose_span_stargraph: span draw out of range");
    }
    throw ConfigError("choose_span_stargraph: rule_based policy applies to trace tasks");
}

std::vector<int> star_span_labels(const std::vector<int>& path, StarSpan span) {
    return {path.begin() + span.start, path.begin() + span.start + span.len};
}

int choose_span_scc(const SccTrace& trace, Policy policy, Rng& rng) {
    const int m = static_cast<int>(trace.snapshots.size());
    if (m < 2) {
        throw ConfigError("choose_span_scc: need at least two snapshots");
    }
    if (policy == Policy::rule_based) {
        for (int i = 1; i < m; ++i) {
            if (trace.snapshots[static_cast<std::size_t>(i)] != trace.snapshots[static_cast<std::size_t>(i - 1)]) {
                return i;
            }
        }
        return m - 1;  // constant trace: fall back to the last snapshot
    }
    if (policy == Policy::random_span) {
        return 1 + static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(m - 1)));
    }
    throw ConfigError("choose_span_scc: fixed policy applies to path tasks");
}

std::vector<std::uint8_t> make_loss_mask(const Sequence& ids, LossScope scope, int prefix_len) {
    if (prefix_len < 0 || prefix_len > static_cast<int>(ids.size())) {
        throw ConfigError("make_loss_mask: prefix_len out of range");
    }
    std::vector<std::uint8_t> mask(ids.size(), 1);
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] == kTOpenId) {
            mask[j] = 0;
        } else if (scope == LossScope::completion_only && static_cast<int>(j) < prefix_len) {
            mask[j] = 0;
        }
    }
    return mask;
}

Sequence strip_augmentation(const Sequence& ids) {
    Sequence out;
    out.reserve(ids.size());
    bool in_span = false;
    for (TokenId id : ids) {
        if (id == kTOpenId) {
            in_span = true;
        } else if (id == kTCloseId) {
            in_span = false;
        } else if (!in_span) {
            out.push_back(id);
        }
    }
    return out;
}

AugmentedSequence make_unaugmented(const Sequence& prefix, const Sequence& completion,
                                   LossScope scope) {
    AugmentedSequence out;
    out.ids.reserve(prefix.size() + completion.size() + 1);
    out.ids.insert(out.ids.end(), prefix.begin(), prefix.end());
    out.ids.insert(out.ids.end(), completion.begin(), completion.end());
    out.ids.push_back(kEosId);
    out.prefix_len = static_cast<int>(prefix.size());
    out.loss_mask = make_loss_mask(out.ids, scope, out.prefix_len);
    out.origin = {prefix, completion};
    out.is_augmented = false;
    return out;
}

AugmentedSequence augment_star_example(const StarGraphInstance& inst, const Vocab& vocab,
                                       const AugSpec& spec, std::uint64_t example_index,
                                       Rng& rng) {
    if (spec.schema != Schema::copy) {
        throw ConfigError("augment_star_example: path tasks use the copy schema");
    }
    const TextExample tex = linearize_star(inst);
    const Sequence pids = vocab.encode(tex.prefix);
    const Sequence cids = vocab.encode(tex.completion);
    Sequence full;
    full.reserve(pids.size() + cids.size() + 1);
    full.insert(full.end(), pids.begin(), pids.end());
    full.insert(full.end(), cids.begin(), cids.end());
    full.push_back(kEosId);

    const int cycle = spec.fixed_k_max - spec.fixed_k_min + 1;
    const int k_fixed = spec.fixed_k_min + static_cast<int>(example_index % static_cast<std::uint64_t>(cycle));
    const StarSpan span = choose_span_stargraph(inst.path_len, spec.policy, spec.fixed_offset, k_fixed, rng);

    // Path node j sits at token offset prefix_len + 2j (comma tokens between
    // nodes); z covers the node run including interior commas.
    const int P = static_cast<int>(pids.size());
    const int d = P + 1;                       // keep prefix plus v_start
    const int s = P + 2 * span.start + 1;      // 1-based position of the first z token
    const int k_tok = 2 * span.len - 1;

    AugmentedSequence out = augment_copy(full, d, s, k_tok);
    out.prefix_len = P;
    out.loss_mask = make_loss_mask(out.ids, spec.loss_scope, P);
    out.origin = {pids, cids};
    return out;
}

AugmentedSequence augment_scc_example(const SccInstance& inst, const Vocab& vocab,
                                      const AugSpec& spec, Rng& rng) {
    if (spec.schema != Schema::copy) {
        throw ConfigError("augment_scc_example: trace tasks use the copy schema");
    }
    const TextExample tex = linearize_scc(inst);
    const Sequence pids = vocab.encode(tex.prefix);
    const Sequence cids = vocab.encode(tex.completion);
    Sequence full;
    full.reserve(pids.size() + cids.size() + 1);
    full.insert(full.end(), pids.begin(), pids.end());
    full.insert(full.end(), cids.begin(), cids.end());
    full.push_back(kEosId);

    const int n = inst.graph.n;
    const int idx = choose_span_scc(inst.trace, spec.policy, rng);
    const int P = static_cast<int>(pids.size());
    const int d = P + n;                       // decision point after snapshot t_1
    const int s = P + idx * n + 1;
    const int k_tok = n;

    AugmentedSequence out = augment_copy(full, d, s, k_tok);
    out.prefix_len = P;
    out.loss_mask = make_loss_mask(out.ids, spec.loss_scope, P);
    out.origin = {pids, cids};
    return out;
}

std::vector<AugmentedSequence> build_mixture(
    std::size_t count, double p, std::uint64_t seed,
    const std::function<AugmentedSequence(std::size_t)>& make_original,
    const std::function<AugmentedSequence(std::size_t, Rng&)>& make_augmented) {
    if (p < 0.0 || p > 1.0) {
        throw ConfigError("build_mixture: p must be in [0,1]");
    }
    std::vector<AugmentedSequence> rows;
    rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng stream(derive_seed(seed, static_cast<std::uint64_t>(i)));
        if (stream.uniform_real() < p) {
            rows.push_back(make_original(i));
            rows.back().is_augmented = false;
        } else {
            rows.push_back(make_augmented(i, stream));
            rows.back().is_augmented = true;
        }
    }
    return rows;
}

void write_augmented(const std::string& path, const std::vector<AugmentedSequence>& rows,
                     const Vocab& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("write_augmented: cannot open " + path);
    }
    for (const auto& row : rows) {
        if (row.ids.size() != row.loss_mask.size()) {
            throw ConfigError("write_augmented: ids/mask length mismatch");
        }
        out << (row.is_augmented ? '1' : '0') << '\t' << join_tokens(vocab.decode(row.ids)) << '\t';
        for (auto m : row.loss_mask) {
            out << (m ? '1' : '0');
        }
        out << '\n';
    }
    if (!out) {
        throw ConfigError("write_augmented: write failed for " + path);
    }
}

std::vector<AugmentedSequence> read_augmented(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("read_augmented: cannot open " + path);
    }
    std::vector<AugmentedSequence> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto where = [&] { return path + ":" + std::to_string(lineno); };
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw ConfigError("read_augmented: expected 3 tab-separated fields at " + where());
        }
        const std::string flag = line.substr(0, tab1);
        if (flag != "0" && flag != "1") {
            throw ConfigError("read_augmented: bad is_augmented flag at " + where());
        }
        AugmentedSequence row;
        row.is_augmented = flag == "1";
        row.ids = vocab.encode(split_tokens(line.substr(tab1 + 1, tab2 - tab1 - 1)));
        const std::string maskstr = line.substr(tab2 + 1);
        if (maskstr.size() != row.ids.size()) {
            throw ConfigError("read_augmented: mask length mismatch at " + where());
        }
        row.loss_mask.reserve(maskstr.size());
        for (char c : maskstr) {
            if (c != '0' && c != '1') {
                throw ConfigError("read_augmented: mask must be 0/1 digits at " + where());
            }
            row.loss_mask.push_back(c == '1' ? 1 : 0);
        }
        for (std::size_t j = 0; j < row.ids.size(); ++j) {
            if (row.ids[j] == kTOpenId && row.span.open < 0) {
                row.span.open = static_cast<int>(j);
            } else if (row.ids[j] == kTCloseId && row.span.close < 0) {
                row.span.close = static_cast<int>(j);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace lookahead
