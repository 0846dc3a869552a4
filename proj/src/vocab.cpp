#include "lookahead/vocab.hpp"

#include <fstream>
#include <sstream>

#include "lookahead/errors.hpp"

namespace lookahead {

const char* const kReservedTokens[kNumReserved] = {
    "<T>", "</T>", "<BOS>", "<EOS>", "<PAD>", "<SEP>",
};

Vocab::Vocab() {
    for (const char* tok : kReservedTokens) {
        const TokenId id = static_cast<TokenId>(entries_.size());
        entries_.emplace_back(tok);
        index_.emplace(tok, id);
    }
}

TokenId Vocab::add(const std::string& token) {
    if (token.empty()) {
        throw ConfigError("vocab: empty token string");
    }
    auto it = index_.find(token);
    if (it != index_.end()) {
        return it->second;
    }
    const TokenId id = static_cast<TokenId>(entries_.size());
    entries_.push_back(token);
    index_.emplace(token, id);
    return id;
}

TokenId Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
        throw ConfigError("vocab: unknown token \"" + token + "\"");
    }
    return it->second;
}

bool Vocab::contains(const std::string& token) const {
    return index_.find(token) != index_.end();
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
        throw ConfigError("vocab: id " + std::to_string(id) + " out of range (size " +
                          std::to_string(entries_.size()) + ")");
    }
    return entries_[static_cast<std::size_t>(id)];
}

Sequence Vocab::encode(const std::vector<std::string>& tokens) const {
    Sequence out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(id(t));
    }
    return out;
}

std::vector<std::string> Vocab::decode(const Sequence& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId t : ids) {
        out.push_back(token(t));
    }
    return out;
}

std::string Vocab::serialize() const {
    std::string out;
    for (const auto& e : entries_) {
        out += e;
        out += '\n';
    }
    return out;
}

void Vocab::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("vocab: cannot write " + path);
    }
    f << serialize();
}

Vocab Vocab::deserialize(const std::string& text) {
    Vocab v;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (line_no < kNumReserved) {
            if (line != kReservedTokens[line_no]) {
                throw ConfigError("vocab: line " + std::to_string(line_no) +
                                  " must be reserved token " +
                                  std::string(kReservedTokens[line_no]) + ", got \"" + line + "\"");
            }
        } else {
            if (v.contains(line)) {
                throw ConfigError("vocab: duplicate token \"" + line + "\"");
            }
            v.add(line);
        }
        ++line_no;
    }
    if (line_no < kNumReserved) {
        throw ConfigError("vocab: file truncated, missing reserved tokens");
    }
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("vocab: cannot read " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize(ss.str());
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora) {
    Vocab v;
    for (const auto& stream : corpora) {
        for (const auto& tok : stream) {
            for (const char* reserved : kReservedTokens) {
                if (tok == reserved) {
                    throw ConfigError("vocab: reserved token \"" + tok + "\" appears as data");
                }
            }
            v.add(tok);
        }
    }
    return v;
}

bool is_reserved(TokenId id) {
    return id >= 0 && id < kNumReserved;
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\n' && text[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.push_back(text.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

void write_dataset(const std::string& path, const std::vector<TextExample>& examples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("dataset: cannot write " + path);
    }
    for (const auto& ex : examples) {
        f << join_tokens(ex.prefix) << '\t' << join_tokens(ex.completion) << '\n';
    }
}

std::vector<TextExample> read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("dataset: cannot read " + path);
    }
    std::vector<TextExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ConfigError("dataset: " + path + ":" + std::to_string(line_no) + ": missing tab");
        }
        TextExample ex;
        ex.prefix = split_tokens(line.substr(0, tab));
        ex.completion = split_tokens(line.substr(tab + 1));
        if (ex.prefix.empty() || ex.completion.empty()) {
            throw ConfigError("dataset: " + path + ":" + std::to_string(line_no) +
                              ": empty prefix or completion");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

} // namespace lookahead
