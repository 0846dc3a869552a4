#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "lookahead/adamw.hpp"
#include "lookahead/checkpoint.hpp"
#include "lookahead/errors.hpp"
#include "lookahead/kernels.hpp"
#include "lookahead/model.hpp"
#include "lookahead/rng.hpp"
#include "lookahead/vocab.hpp"

using namespace lookahead;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.normal() * scale;
    }
    return v;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

ModelConfig tiny_config(int vocab) {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.vocab_size = vocab;
    cfg.max_seq_len = 8;
    return cfg;
}

} // namespace

TEST_CASE("layernorm matches a naive reference") {
    const int N = 3, C = 5;
    const auto x = randn(N * C, 1);
    const auto g = randn(C, 2, 0.5);
    const auto b = randn(C, 3, 0.1);
    std::vector<double> out(N * C), mean(N), rstd(N);
    nn::layernorm_forward(out.data(), mean.data(), rstd.data(), x.data(), g.data(), b.data(), N, C);
    for (int n = 0; n < N; ++n) {
        double m = 0;
        for (int c = 0; c < C; ++c) {
            m += x[n * C + c];
        }
        m /= C;
        double var = 0;
        for (int c = 0; c < C; ++c) {
            var += (x[n * C + c] - m) * (x[n * C + c] - m);
        }
        var /= C;
        const double rs = 1.0 / std::sqrt(var + 1e-5);
        CHECK(mean[n] == doctest::Approx(m).epsilon(1e-12));
        CHECK(rstd[n] == doctest::Approx(rs).epsilon(1e-12));
        for (int c = 0; c < C; ++c) {
            const double want = (x[n * C + c] - m) * rs * g[c] + b[c];
            CHECK(out[n * C + c] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul matches a naive reference") {
    const int N = 4, IC = 3, OC = 5;
    const auto inp = randn(N * IC, 4);
    const auto w = randn(OC * IC, 5);
    std::vector<double> out(N * OC);
    nn::matmul_forward(out.data(), inp.data(), w.data(), N, IC, OC);
    for (int n = 0; n < N; ++n) {
        for (int o = 0; o < OC; ++o) {
            double acc = 0;
            for (int i = 0; i < IC; ++i) {
                acc += inp[n * IC + i] * w[o * IC + i];
            }
            CHECK(out[n * OC + o] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("gelu known values") {
    const std::vector<double> x = {0.0, 1.0, -1.0, 2.5};
    std::vector<double> y(x.size());
    nn::gelu_forward(y.data(), x.data(), x.size());
    CHECK(y[0] == doctest::Approx(0.0));
    // 0.5 * x * (1 + erf(x / sqrt(2)))
    CHECK(y[1] == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(y[2] == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
    CHECK(y[3] == doctest::Approx(2.4844758366855597).epsilon(1e-9));
}

TEST_CASE("attention matches a naive causal reference") {
    const int B = 2, Tn = 4, C = 4, NH = 2, hs = C / NH;
    const auto qkv = randn(B * Tn * 3 * C, 6);
    std::vector<double> out(B * Tn * C), preatt(B * NH * Tn * Tn), att(B * NH * Tn * Tn);
    nn::attention_forward(out.data(), preatt.data(), att.data(), qkv.data(), B, Tn, C, NH);

    const double scale = 1.0 / std::sqrt(static_cast<double>(hs));
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < Tn; ++t) {
            for (int h = 0; h < NH; ++h) {
                const double* q = qkv.data() + (b * Tn + t) * 3 * C + h * hs;
                std::vector<double> scores(t + 1);
                for (int t2 = 0; t2 <= t; ++t2) {
                    const double* k = qkv.data() + (b * Tn + t2) * 3 * C + C + h * hs;
                    double dot = 0;
                    for (int c = 0; c < hs; ++c) {
                        dot += q[c] * k[c];
                    }
                    scores[t2] = dot * scale;
                }
                double mx = scores[0];
                for (double s : scores) {
                    mx = std::max(mx, s);
                }
                double Z = 0;
                for (double s : scores) {
                    Z += std::exp(s - mx);
                }
                for (int c = 0; c < hs; ++c) {
                    double acc = 0;
                    for (int t2 = 0; t2 <= t; ++t2) {
                        const double* v = qkv.data() + (b * Tn + t2) * 3 * C + 2 * C + h * hs;
                        acc += std::exp(scores[t2] - mx) / Z * v[c];
                    }
                    CHECK(out[(b * Tn + t) * C + h * hs + c] == doctest::Approx(acc).epsilon(1e-10));
                }
                // strictly causal: zero attention to the future
                for (int t2 = t + 1; t2 < Tn; ++t2) {
                    CHECK(att[((b * NH + h) * Tn + t) * Tn + t2] == 0.0);
                }
            }
        }
    }
}

TEST_CASE("masked cross entropy ignores masked rows exactly") {
    const int N = 8, V = 7;
    auto logits = randn(N * V, 7);
    std::vector<std::int32_t> targets(N);
    std::vector<std::uint8_t> mask(N);
    Rng rng(8);
    for (int n = 0; n < N; ++n) {
        targets[n] = static_cast<std::int32_t>(rng.uniform_int(0, V - 1));
        mask[n] = static_cast<std::uint8_t>(n % 3 != 0);
    }
    std::vector<double> probs(N * V, 0.0);
    const double loss1 = nn::masked_ce_forward(probs.data(), logits.data(), targets.data(),
                                               mask.data(), N, V);

    // hand reference over unmasked rows only
    double want = 0;
    int count = 0;
    for (int n = 0; n < N; ++n) {
        if (!mask[n]) {
            continue;
        }
        double mx = logits[n * V];
        for (int v = 1; v < V; ++v) {
            mx = std::max(mx, logits[n * V + v]);
        }
        double Z = 0;
        for (int v = 0; v < V; ++v) {
            Z += std::exp(logits[n * V + v] - mx);
        }
        want += std::log(Z) + mx - logits[n * V + targets[n]];
        ++count;
    }
    want /= count;
    CHECK(loss1 == doctest::Approx(want).epsilon(1e-12));

    // blast the masked rows: loss must not move at all
    for (int n = 0; n < N; ++n) {
        if (!mask[n]) {
            for (int v = 0; v < V; ++v) {
                logits[n * V + v] += 37.5 * (v + 1);
            }
        }
    }
    const double loss2 = nn::masked_ce_forward(probs.data(), logits.data(), targets.data(),
                                               mask.data(), N, V);
    CHECK(std::abs(loss2 - loss1) < 1e-12);

    std::vector<std::uint8_t> none(N, 0);
    CHECK_THROWS_AS(nn::masked_ce_forward(probs.data(), logits.data(), targets.data(),
                                          none.data(), N, V),
                    ConfigError);
}

TEST_CASE("kernel gradients agree with finite differences") {
    const double h = 1e-6;

    SUBCASE("matmul") {
        const int N = 3, IC = 4, OC = 2;
        auto inp = randn(N * IC, 10);
        auto w = randn(OC * IC, 11);
        const auto coef = randn(N * OC, 12);
        auto loss = [&]() {
            std::vector<double> out(N * OC);
            nn::matmul_forward(out.data(), inp.data(), w.data(), N, IC, OC);
            double s = 0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                s += out[i] * coef[i];
            }
            return s;
        };
        std::vector<double> dinp(N * IC, 0), dw(OC * IC, 0);
        nn::matmul_backward(dinp.data(), dw.data(), coef.data(), inp.data(), w.data(), N, IC, OC);
        for (std::size_t j = 0; j < inp.size(); ++j) {
            const double keep = inp[j];
            inp[j] = keep + h;
            const double lp = loss();
            inp[j] = keep - h;
            const double lm = loss();
            inp[j] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dinp[j]) < 1e-5);
        }
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double keep = w[j];
            w[j] = keep + h;
            const double lp = loss();
            w[j] = keep - h;
            const double lm = loss();
            w[j] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dw[j]) < 1e-5);
        }
    }

    SUBCASE("layernorm") {
        const int N = 2, C = 6;
        auto x = randn(N * C, 13);
        auto g = randn(C, 14, 0.5);
        auto b = randn(C, 15, 0.1);
        const auto coef = randn(N * C, 16);
        auto loss = [&]() {
            std::vector<double> out(N * C), mean(N), rstd(N);
            nn::layernorm_forward(out.data(), mean.data(), rstd.data(), x.data(), g.data(),
                                  b.data(), N, C);
            double s = 0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                s += out[i] * coef[i];
            }
            return s;
        };
        std::vector<double> out(N * C), mean(N), rstd(N);
        nn::layernorm_forward(out.data(), mean.data(), rstd.data(), x.data(), g.data(), b.data(),
                              N, C);
        std::vector<double> dx(N * C, 0), dg(C, 0), db(C, 0);
        nn::layernorm_backward(dx.data(), dg.data(), db.data(), coef.data(), x.data(),
                               mean.data(), rstd.data(), g.data(), N, C);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double keep = x[j];
            x[j] = keep + h;
            const double lp = loss();
            x[j] = keep - h;
            const double lm = loss();
            x[j] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dx[j]) < 1e-4);
        }
        for (int c = 0; c < C; ++c) {
            const double keep = g[c];
            g[c] = keep + h;
            const double lp = loss();
            g[c] = keep - h;
            const double lm = loss();
            g[c] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dg[c]) < 1e-5);
        }
    }

    SUBCASE("gelu") {
        auto x = randn(10, 17);
        const auto coef = randn(10, 18);
        std::vector<double> dx(10, 0);
        nn::gelu_backward(dx.data(), coef.data(), x.data(), x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            auto loss = [&]() {
                std::vector<double> y(x.size());
                nn::gelu_forward(y.data(), x.data(), x.size());
                double s = 0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    s += y[i] * coef[i];
                }
                return s;
            };
            const double keep = x[j];
            x[j] = keep + h;
            const double lp = loss();
            x[j] = keep - h;
            const double lm = loss();
            x[j] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dx[j]) < 1e-5);
        }
    }

    SUBCASE("attention") {
        const int B = 1, Tn = 3, C = 4, NH = 2;
        auto qkv = randn(B * Tn * 3 * C, 19, 0.7);
        const auto coef = randn(B * Tn * C, 20);
        auto loss = [&]() {
            std::vector<double> out(B * Tn * C), pre(B * NH * Tn * Tn), att(B * NH * Tn * Tn);
            nn::attention_forward(out.data(), pre.data(), att.data(), qkv.data(), B, Tn, C, NH);
            double s = 0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                s += out[i] * coef[i];
            }
            return s;
        };
        std::vector<double> out(B * Tn * C), pre(B * NH * Tn * Tn), att(B * NH * Tn * Tn);
        nn::attention_forward(out.data(), pre.data(), att.data(), qkv.data(), B, Tn, C, NH);
        std::vector<double> dqkv(qkv.size(), 0), dpre(pre.size(), 0), datt(att.size(), 0);
        nn::attention_backward(dqkv.data(), dpre.data(), datt.data(), coef.data(), qkv.data(),
                               att.data(), B, Tn, C, NH);
        for (std::size_t j = 0; j < qkv.size(); ++j) {
            const double keep = qkv[j];
            qkv[j] = keep + h;
            const double lp = loss();
            qkv[j] = keep - h;
            const double lm = loss();
            qkv[j] = keep;
            CHECK(rel_err((lp - lm) / (2 * h), dqkv[j]) < 1e-4);
        }
    }
}

TEST_CASE("full model gradients agree with finite differences") {
    const int V = 11, B = 2, Tn = 6;
    Model<double> model(tiny_config(V), 42);

    std::vector<std::int32_t> ids(B * Tn), targets(B * Tn);
    std::vector<std::uint8_t> mask(B * Tn);
    Rng rng(43);
    for (int i = 0; i < B * Tn; ++i) {
        ids[i] = static_cast<std::int32_t>(rng.uniform_int(0, V - 1));
        targets[i] = static_cast<std::int32_t>(rng.uniform_int(0, V - 1));
        mask[i] = static_cast<std::uint8_t>(rng.uniform_real() < 0.7);
    }
    mask[0] = 1; // never let the batch degenerate

    model.forward(ids.data(), targets.data(), mask.data(), B, Tn);
    model.zero_grad();
    model.backward();

    auto& ps = model.params();
    std::vector<double> analytic(ps.grad);

    const double h = 1e-5;
    double worst = 0;
    for (std::size_t si = 0; si < ps.specs.size(); ++si) {
        const auto& spec = ps.specs[si];
        const std::size_t samples = std::min<std::size_t>(spec.size, 4);
        for (std::size_t k = 0; k < samples; ++k) {
            const std::size_t j = spec.offset + (k * spec.size) / samples;
            const double keep = ps.data[j];
            ps.data[j] = keep + h;
            const double lp = model.forward(ids.data(), targets.data(), mask.data(), B, Tn);
            ps.data[j] = keep - h;
            const double lm = model.forward(ids.data(), targets.data(), mask.data(), B, Tn);
            ps.data[j] = keep;
            const double fd = (lp - lm) / (2 * h);
            const double an = analytic[j];
            if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) {
                continue; // untouched entries (padding rows of wpe, unused vocab rows)
            }
            worst = std::max(worst, rel_err(fd, an));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("changing future tokens leaves earlier logits untouched") {
    const int V = 11, Tn = 6;
    Model<double> model(tiny_config(V), 5);
    std::vector<std::int32_t> ids = {1, 4, 7, 2, 9, 3};
    model.forward_logits(ids.data(), 1, Tn);
    std::vector<double> before(model.logits(), model.logits() + Tn * V);

    ids[4] = 10;
    ids[5] = 0;
    model.forward_logits(ids.data(), 1, Tn);
    for (int t = 0; t < 4; ++t) {
        for (int v = 0; v < V; ++v) {
            CHECK(model.logits()[t * V + v] == before[t * V + v]);
        }
    }
    // and position 4 onward must actually move
    double delta = 0;
    for (int v = 0; v < V; ++v) {
        delta += std::abs(model.logits()[4 * V + v] - before[4 * V + v]);
    }
    CHECK(delta > 0);
}

TEST_CASE("initialization and forward are deterministic per seed") {
    const auto cfg = tiny_config(11);
    Model<double> a(cfg, 9), b(cfg, 9), c(cfg, 10);
    CHECK(a.params().data == b.params().data);
    CHECK(a.params().data != c.params().data);

    std::vector<std::int32_t> ids = {1, 2, 3}, tgt = {2, 3, 4};
    std::vector<std::uint8_t> mask = {1, 1, 1};
    const double l1 = a.forward(ids.data(), tgt.data(), mask.data(), 1, 3);
    const double l2 = b.forward(ids.data(), tgt.data(), mask.data(), 1, 3);
    CHECK(l1 == l2);
}

TEST_CASE("forward input validation") {
    Model<double> model(tiny_config(11), 1);
    std::vector<std::int32_t> bad = {1, 11, 2};
    CHECK_THROWS_AS(model.forward_logits(bad.data(), 1, 3), ConfigError);
    std::vector<std::int32_t> neg = {1, -1, 2};
    CHECK_THROWS_AS(model.forward_logits(neg.data(), 1, 3), ConfigError);
    std::vector<std::int32_t> long_ids(9, 1);
    CHECK_THROWS_AS(model.forward_logits(long_ids.data(), 1, 9), ConfigError);
    CHECK_THROWS_AS(model.logits_at_last({}), ConfigError);
    CHECK_THROWS_AS(model.backward(), ConfigError); // no loss-bearing forward yet

    ModelConfig bad_cfg = tiny_config(11);
    bad_cfg.d_model = 9; // not divisible by n_heads
    CHECK_THROWS_AS(Model<double>{bad_cfg}, ConfigError);
}

TEST_CASE("adamw matches a scalar reference and decays only flagged tensors") {
    ParamStore<double> ps;
    ps.add("w", {3}, true);
    ps.add("e", {3}, false);
    ps.allocate();
    const std::vector<double> p0 = {1.0, -2.0, 0.5, 3.0, -0.25, 1.5};
    const std::vector<double> g0 = {0.1, -0.2, 0.3, -0.4, 0.05, -0.6};
    ps.data = p0;

    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.1, lr = 0.01;
    AdamW<double> opt(b1, b2, eps, wd);

    // scalar reference tracked side by side
    std::vector<double> ref = p0, m(6, 0), v(6, 0);
    for (int t = 1; t <= 3; ++t) {
        ps.grad = g0;
        opt.step(ps, lr);
        for (int j = 0; j < 6; ++j) {
            m[j] = b1 * m[j] + (1 - b1) * g0[j];
            v[j] = b2 * v[j] + (1 - b2) * g0[j] * g0[j];
            const double mhat = m[j] / (1 - std::pow(b1, t));
            const double vhat = v[j] / (1 - std::pow(b2, t));
            const double decay = j < 3 ? wd * ref[j] : 0.0;
            ref[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + decay);
        }
        for (int j = 0; j < 6; ++j) {
            CHECK(ps.data[j] == doctest::Approx(ref[j]).epsilon(1e-12));
        }
    }

    // zero gradients: only the decay-flagged tensor moves
    ParamStore<double> ps2;
    ps2.add("w", {2}, true);
    ps2.add("e", {2}, false);
    ps2.allocate();
    ps2.data = {2.0, -4.0, 2.0, -4.0};
    AdamW<double> opt2(b1, b2, eps, wd);
    ps2.zero_grad();
    opt2.step(ps2, lr);
    CHECK(ps2.data[0] == doctest::Approx(2.0 * (1 - lr * wd)).epsilon(1e-12));
    CHECK(ps2.data[1] == doctest::Approx(-4.0 * (1 - lr * wd)).epsilon(1e-12));
    CHECK(ps2.data[2] == 2.0);
    CHECK(ps2.data[3] == -4.0);
}

TEST_CASE("decay flags sit on the projection matrices only") {
    Model<double> model(tiny_config(11), 0);
    for (const auto& spec : model.params().specs) {
        const bool want = spec.name.ends_with("qkv.w") || spec.name.ends_with("attn_out.w") ||
                          spec.name.ends_with("mlp_fc.w") || spec.name.ends_with("mlp_proj.w");
        CHECK(spec.decay == want);
    }
}

TEST_CASE("global norm clip") {
    ParamStore<double> ps;
    ps.add("w", {2}, false);
    ps.allocate();
    ps.grad = {3.0, 4.0};
    CHECK(clip_global_norm(ps, 2.0) == doctest::Approx(5.0));
    CHECK(ps.grad[0] == doctest::Approx(1.2));
    CHECK(ps.grad[1] == doctest::Approx(1.6));

    ps.grad = {3.0, 4.0};
    CHECK(clip_global_norm(ps, 10.0) == doctest::Approx(5.0));
    CHECK(ps.grad[0] == 3.0);
    CHECK(ps.grad[1] == 4.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto dir = std::filesystem::temp_directory_path() / "ckpt_tests";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.bin").string();

    Vocab vocab = build_vocab({{"0", "1", "2"}});
    auto cfg = tiny_config(static_cast<int>(vocab.size()));
    Model<double> model(cfg, 7);
    AugSpec spec;
    spec.p = 0.25;
    spec.policy = Policy::fixed;
    save_checkpoint(path, model, vocab, spec, "star");

    CheckpointMeta meta;
    Model<double> back = load_checkpoint<double>(path, &meta);
    REQUIRE(back.params().data.size() == model.params().data.size());
    CHECK(std::memcmp(back.params().data.data(), model.params().data.data(),
                      model.params().data.size() * sizeof(double)) == 0);
    CHECK(meta.task == "star");
    CHECK(meta.dtype == "fp64");
    CHECK(meta.model.d_model == cfg.d_model);
    CHECK(meta.model.vocab_size == cfg.vocab_size);
    CHECK(meta.vocab.size() == vocab.size());
    CHECK(meta.augspec.p == doctest::Approx(0.25));
    CHECK(meta.augspec.policy == Policy::fixed);

    const auto peeked = peek_checkpoint(path);
    CHECK(peeked.dtype == "fp64");
    CHECK(peeked.task == "star");

    CHECK_THROWS_AS(load_checkpoint<float>(path), ConfigError);

    SUBCASE("corrupted magic rejected") {
        auto bytes = [&] {
            std::ifstream in(path, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        }();
        bytes[0] = static_cast<char>(~bytes[0]);
        const std::string bad = (dir / "bad_magic.bin").string();
        std::ofstream(bad, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(peek_checkpoint(bad), ConfigError);
        CHECK_THROWS_AS(load_checkpoint<double>(bad), ConfigError);
    }

    SUBCASE("truncated tensor data rejected") {
        auto bytes = [&] {
            std::ifstream in(path, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        }();
        bytes.resize(bytes.size() - 16);
        const std::string cut = (dir / "cut.bin").string();
        std::ofstream(cut, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(load_checkpoint<double>(cut), ConfigError);
    }

    std::filesystem::remove_all(dir);
}
