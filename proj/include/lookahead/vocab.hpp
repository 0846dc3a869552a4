#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace lookahead {

using TokenId = std::int32_t;
using Sequence = std::vector<TokenId>;

// Reserved ids occupy lines 0-5 of every vocabulary, in this order, so they
// are stable across save/load and across vocabularies.
inline constexpr TokenId kTOpenId = 0;  // <T>
inline constexpr TokenId kTCloseId = 1; // </T>
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr TokenId kPadId = 4;
inline constexpr TokenId kSepId = 5;
inline constexpr int kNumReserved = 6;

extern const char* const kReservedTokens[kNumReserved];

// Token <-> id bijection over whitespace-delimited token strings. Immutable
// after construction; safe to share across threads.
class Vocab {
public:
    Vocab();

    // Adds a non-reserved token; returns its id (existing id if present).
    TokenId add(const std::string& token);

    TokenId id(const std::string& token) const;         // throws ConfigError if unknown
    bool contains(const std::string& token) const;
    const std::string& token(TokenId id) const;          // throws ConfigError if out of range
    std::size_t size() const { return entries_.size(); }

    Sequence encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const Sequence& ids) const;

    std::string serialize() const;                       // one token per line
    void save(const std::string& path) const;
    static Vocab deserialize(const std::string& text);
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, TokenId> index_;
};

// Builds a vocabulary from token streams: reserved tokens first, then data
// tokens in first-seen order. A reserved token appearing as data is rejected.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora);

bool is_reserved(TokenId id);

// Whitespace tokenizer for dataset text.
std::vector<std::string> split_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

struct Example {
    Sequence prefix;
    Sequence completion;
};

// Generator output prior to vocabulary encoding.
struct TextExample {
    std::vector<std::string> prefix;
    std::vector<std::string> completion;
};

// Dataset file format: one `prefix<TAB>completion` per line, tokens space-
// joined within each field.
void write_dataset(const std::string& path, const std::vector<TextExample>& examples);
std::vector<TextExample> read_dataset(const std::string& path);

} // namespace lookahead
