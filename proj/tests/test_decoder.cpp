#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <vector>

#include <algorithm>

#include "lookahead/decoder.hpp"
#include "lookahead/errors.hpp"
#include "lookahead/rng.hpp"
#include "lookahead/vocab.hpp"

using namespace lookahead;

namespace {

constexpr int kV = 16;

// Emits plan[ctx.size()] with high confidence; anything unplanned is EOS.
LogitsFn scripted(std::map<std::size_t, TokenId> plan) {
    return [plan](const Sequence& ctx) {
        std::vector<double> l(kV, 0.0);
        const auto it = plan.find(ctx.size());
        l[static_cast<std::size_t>(it == plan.end() ? kEosId : it->second)] = 5.0;
        return l;
    };
}

} // namespace

TEST_CASE("autoregressive playback runs to EOS") {
    const auto fn = scripted({{1, 6}, {2, 7}, {3, 8}});
    DecodeRequest req;
    req.prompt = {10};
    req.max_new_tokens = 32;
    const auto res = decode(fn, req);
    CHECK(res.raw == Sequence{6, 7, 8, kEosId});
    CHECK(res.stripped == res.raw);
    CHECK(res.z.empty());
    CHECK(!res.force_closed);
}

TEST_CASE("greedy breaks ties toward the lowest id") {
    Rng rng(0);
    CHECK(pick_token({1.0, 5.0, 5.0, 2.0}, Strategy::greedy, 1.0, rng) == 1);
    CHECK(pick_token({3.0, 3.0, 3.0}, Strategy::greedy, 1.0, rng) == 0);
    CHECK_THROWS_AS(pick_token({}, Strategy::greedy, 1.0, rng), ConfigError);
}

TEST_CASE("sampling is seed deterministic") {
    // flat logits: pure chance, pinned by the seed
    const LogitsFn flat = [](const Sequence&) { return std::vector<double>(8, 0.0); };
    DecodeRequest req;
    req.prompt = {1};
    req.strategy = Strategy::sample;
    req.max_new_tokens = 12;
    req.sample_seed = 5;
    const auto a = decode(flat, req);
    const auto b = decode(flat, req);
    CHECK(a.raw == b.raw);
    req.sample_seed = 6;
    const auto c = decode(flat, req);
    CHECK(a.raw != c.raw);
}

TEST_CASE("near-zero temperature sampling approaches argmax") {
    Rng rng(3);
    const std::vector<double> logits = {0.1, 2.0, -1.0, 1.9};
    for (int i = 0; i < 50; ++i) {
        CHECK(pick_token(logits, Strategy::sample, 1e-9, rng) == 1);
    }
    CHECK_THROWS_AS(pick_token(logits, Strategy::sample, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(pick_token(logits, Strategy::sample, -1.0, rng), ConfigError);
}

TEST_CASE("lookahead generation injects the span at the decision point") {
    // prompt(2) -> two decision tokens -> <T> z z </T> -> tail -> EOS
    const auto fn = scripted({{2, 6}, {3, 7}, {5, 8}, {6, 9}, {7, kTCloseId}, {8, 12}});
    DecodeRequest req;
    req.mode = DecodeMode::t_generated;
    req.prompt = {10, 11};
    req.decision_rule = 2;
    req.max_new_tokens = 32;
    const auto res = decode(fn, req);
    CHECK(res.raw == Sequence{6, 7, kTOpenId, 8, 9, kTCloseId, 12, kEosId});
    CHECK(res.z == Sequence{8, 9});
    CHECK(res.stripped == Sequence{6, 7, 12, kEosId});
    CHECK(!res.force_closed);
}

TEST_CASE("specified z is spliced verbatim and never queried") {
    int calls = 0;
    const auto inner = scripted({{1, 6}, {6, 12}});
    const LogitsFn counting = [&](const Sequence& ctx) {
        ++calls;
        return inner(ctx);
    };
    DecodeRequest req;
    req.mode = DecodeMode::t_specified;
    req.prompt = {10};
    req.decision_rule = 1;
    req.specified_z = {8, 9};
    req.max_new_tokens = 32;
    const auto res = decode(counting, req);
    CHECK(res.raw == Sequence{6, kTOpenId, 8, 9, kTCloseId, 12, kEosId});
    CHECK(res.z == Sequence{8, 9});
    CHECK(res.stripped == Sequence{6, 12, kEosId});
    // one decision query + two tail queries; the three span positions cost nothing
    CHECK(calls == 3);
}

TEST_CASE("span is force closed at the z cap") {
    const LogitsFn always8 = [](const Sequence&) {
        std::vector<double> l(kV, 0.0);
        l[8] = 5.0;
        return l;
    };
    DecodeRequest req;
    req.mode = DecodeMode::t_generated;
    req.prompt = {10};
    req.decision_rule = 0;
    req.z_cap = 3;
    req.max_new_tokens = 8;
    const auto res = decode(always8, req);
    CHECK(res.raw == Sequence{kTOpenId, 8, 8, 8, kTCloseId, 8, 8, 8});
    CHECK(res.z == Sequence{8, 8, 8});
    CHECK(res.force_closed);
    CHECK(res.stripped == Sequence{8, 8, 8});
}

TEST_CASE("EOS inside the span closes it and ends decoding") {
    const auto fn = scripted({{2, 8}}); // unplanned position 3 emits EOS mid-span
    DecodeRequest req;
    req.mode = DecodeMode::t_generated;
    req.prompt = {10};
    req.decision_rule = 0;
    req.max_new_tokens = 32;
    const auto res = decode(fn, req);
    CHECK(res.raw == Sequence{kTOpenId, 8, kTCloseId, kEosId});
    CHECK(res.z == Sequence{8});
    CHECK(res.force_closed);
    CHECK(res.stripped == Sequence{kEosId});
}

TEST_CASE("EOS during the decision walk preempts the span") {
    const auto fn = scripted({{1, 6}}); // EOS arrives before the decision point
    DecodeRequest req;
    req.mode = DecodeMode::t_generated;
    req.prompt = {10};
    req.decision_rule = 3;
    req.max_new_tokens = 32;
    const auto res = decode(fn, req);
    CHECK(res.raw == Sequence{6, kEosId});
    CHECK(res.z.empty());
    CHECK(!res.force_closed);
}

TEST_CASE("token budget halts the decision walk without injecting") {
    const auto fn = scripted({{1, 6}, {2, 7}, {3, 8}});
    DecodeRequest req;
    req.mode = DecodeMode::t_generated;
    req.prompt = {10};
    req.decision_rule = 5;
    req.max_new_tokens = 2;
    const auto res = decode(fn, req);
    CHECK(res.raw == Sequence{6, 7});
    CHECK(res.z.empty());
    CHECK(std::count(res.raw.begin(), res.raw.end(), kTOpenId) == 0);
}

TEST_CASE("request validation") {
    const auto fn = scripted({});
    DecodeRequest req;
    CHECK_THROWS_AS(decode(fn, req), ConfigError); // empty prompt

    req.prompt = {10};
    req.mode = DecodeMode::t_specified;
    CHECK_THROWS_AS(decode(fn, req), ConfigError); // z missing
    req.specified_z = {kTOpenId};
    CHECK_THROWS_AS(decode(fn, req), ConfigError); // reserved id in z
    req.specified_z = {8};
    req.decision_rule = -1;
    CHECK_THROWS_AS(decode(fn, req), ConfigError);
    req.decision_rule = 0;
    req.z_cap = 0;
    CHECK_THROWS_AS(decode(fn, req), ConfigError);
    req.z_cap = kZCap;
    req.max_new_tokens = -1;
    CHECK_THROWS_AS(decode(fn, req), ConfigError);

    // a prompt that already ended produces nothing
    DecodeRequest done;
    done.prompt = {10, kEosId};
    const auto res = decode(fn, done);
    CHECK(res.raw.empty());
    CHECK(res.stripped.empty());
    CHECK(res.z.empty());

    DecodeRequest zero;
    zero.prompt = {10};
    zero.max_new_tokens = 0;
    CHECK(decode(fn, zero).raw.empty());
}

TEST_CASE("mode names round trip") {
    CHECK(mode_name(DecodeMode::autoregressive) == "AutoReg");
    CHECK(mode_name(DecodeMode::t_generated) == "Generated");
    CHECK(mode_name(DecodeMode::t_specified) == "Specified");
    CHECK(mode_from_string("ar") == DecodeMode::autoregressive);
    CHECK(mode_from_string("tgen") == DecodeMode::t_generated);
    CHECK(mode_from_string("tspec") == DecodeMode::t_specified);
    CHECK(mode_from_string("AutoReg") == DecodeMode::autoregressive);
    CHECK(mode_from_string("Generated") == DecodeMode::t_generated);
    CHECK(mode_from_string("Specified") == DecodeMode::t_specified);
    CHECK(mode_from_string("t_generated") == DecodeMode::t_generated);
    CHECK_THROWS_AS(mode_from_string("beam"), ConfigError);
}
