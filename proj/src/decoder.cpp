#include "lookahead/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "lookahead/augment.hpp"
#include "lookahead/errors.hpp"

namespace lookahead {

TokenId pick_token(const std::vector<double>& logits, Strategy strategy, double temperature,
                   Rng& rng) {
    if (logits.empty()) {
        throw ConfigError("pick_token: empty logits");
    }
    if (strategy == Strategy::greedy) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < logits.size(); ++v) {
            if (logits[v] > logits[best]) {
                best = v;
            }
        }
        return static_cast<TokenId>(best);
    }
    if (temperature <= 0) {
        throw ConfigError("pick_token: sampling temperature must be > 0");
    }
    double maxv = logits[0];
    for (double l : logits) {
        maxv = std::max(maxv, l);
    }
    std::vector<double> probs(logits.size());
    double sum = 0;
    for (std::size_t v = 0; v < logits.size(); ++v) {
        probs[v] = std::exp((logits[v] - maxv) / temperature);
        sum += probs[v];
    }
    const double u = rng.uniform_real() * sum;
    double acc = 0;
    for (std::size_t v = 0; v < logits.size(); ++v) {
        acc += probs[v];
        if (u < acc) {
            return static_cast<TokenId>(v);
        }
    }
    return static_cast<TokenId>(logits.size() - 1);
}

namespace {

void validate(const DecodeRequest& req) {
    if (req.prompt.empty()) {
        throw ConfigError("decode: empty prompt");
    }
    if (req.mode == DecodeMode::t_specified) {
        if (req.specified_z.empty()) {
            throw ConfigError("decode: t_specified requires a non-empty z");
        }
        for (TokenId id : req.specified_z) {
            if (is_reserved(id)) {
                throw ConfigError("decode: specified z must not contain reserved tokens");
            }
        }
    }
    if (req.mode != DecodeMode::autoregressive && req.decision_rule < 0) {
        throw ConfigError("decode: decision_rule must be >= 0");
    }
    if (req.max_new_tokens < 0) {
        throw ConfigError("decode: max_new_tokens must be >= 0");
    }
    if (req.z_cap < 1) {
        throw ConfigError("decode: z_cap must be >= 1");
    }
}

} // namespace

DecodeResult decode(const LogitsFn& logits_fn, const DecodeRequest& req) {
    validate(req);
    DecodeResult res;
    if (req.prompt.back() == kEosId) {
        return res;
    }
    Rng rng(derive_seed(req.sample_seed, "decode"));
    Sequence ctx = req.prompt;
    const auto room = [&] { return static_cast<int>(res.raw.size()) < req.max_new_tokens; };
    const auto emit = [&](TokenId tok) {
        res.raw.push_back(tok);
        ctx.push_back(tok);
    };
    const auto next = [&] { return pick_token(logits_fn(ctx), req.strategy, req.temperature, rng); };

    bool ended = false;
    if (req.mode != DecodeMode::autoregressive) {
        // Walk the model to the decision point.
        int emitted = 0;
        while (emitted < req.decision_rule && room()) {
            const TokenId tok = next();
            emit(tok);
            if (tok == kEosId) {
                ended = true;
                break;
            }
            ++emitted;
        }
        if (!ended && emitted == req.decision_rule && room()) {
            emit(kTOpenId);
            if (req.mode == DecodeMode::t_specified) {
                for (TokenId tok : req.specified_z) {
                    emit(tok);
                }
                emit(kTCloseId);
                res.z = req.specified_z;
            } else {
                while (true) {
                    if (static_cast<int>(res.z.size()) >= req.z_cap || !room()) {
                        emit(kTCloseId);
                        res.force_closed = true;
                        break;
                    }
                    const TokenId tok = next();
                    if (tok == kTCloseId) {
                        emit(tok);
                        break;
                    }
                    if (tok == kEosId) {
                        // Premature stop inside the span: close it and end.
                        emit(kTCloseId);
                        res.force_closed = true;
                        emit(kEosId);
                        ended = true;
                        break;
                    }
                    emit(tok);
                    res.z.push_back(tok);
                }
            }
        }
    }
    while (!ended && room()) {
        const TokenId tok = next();
        emit(tok);
        if (tok == kEosId) {
            break;
        }
    }
    res.stripped = strip_augmentation(res.raw);
    return res;
}

std::string mode_name(DecodeMode mode) {
    switch (mode) {
    case DecodeMode::autoregressive: return "AutoReg";
    case DecodeMode::t_generated: return "Generated";
    default: return "Specified";
    }
}

DecodeMode mode_from_string(const std::string& s) {
    if (s == "ar" || s == "AutoReg" || s == "autoregressive") {
        return DecodeMode::autoregressive;
    }
    if (s == "tgen" || s == "Generated" || s == "t_generated") {
        return DecodeMode::t_generated;
    }
    if (s == "tspec" || s == "Specified" || s == "t_specified") {
        return DecodeMode::t_specified;
    }
    throw ConfigError("unknown decode mode \"" + s + "\"");
}

} // namespace lookahead
