#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lookahead/rng.hpp"
#include "lookahead/vocab.hpp"

namespace lookahead {

// Next-token logits for a context; the trained model provides one, tests
// substitute scripted functions.
using LogitsFn = std::function<std::vector<double>(const Sequence&)>;

enum class DecodeMode { autoregressive, t_generated, t_specified };
enum class Strategy { greedy, sample };

inline constexpr int kZCap = 64;

struct DecodeRequest {
    DecodeMode mode = DecodeMode::autoregressive;
    Sequence prompt;
    Sequence specified_z;    // required iff mode == t_specified
    int decision_rule = 0;   // completion tokens to emit before injecting <T>
    int max_new_tokens = 256;  // bounds the whole continuation, spliced tokens included
    Strategy strategy = Strategy::greedy;
    double temperature = 1.0;
    std::uint64_t sample_seed = 0;
    int z_cap = kZCap;       // force-close the span after this many z tokens
};

struct DecodeResult {
    Sequence raw;       // continuation only; the prompt is not repeated
    Sequence stripped;  // raw with lookahead spans removed
    Sequence z;         // generated or spliced span content
    bool force_closed = false;
};

DecodeResult decode(const LogitsFn& logits_fn, const DecodeRequest& req);

// Greedy argmax with lowest-id tie break; sampling softmaxes at the given
// temperature. Exposed for direct testing.
TokenId pick_token(const std::vector<double>& logits, Strategy strategy, double temperature,
                   Rng& rng);

std::string mode_name(DecodeMode mode);              // AutoReg | Generated | Specified
DecodeMode mode_from_string(const std::string& s);   // ar | tgen | tspec (and the names)

} // namespace lookahead
