#pragma once

// Decoder-only transformer assembled from the kernels: pre-norm blocks,
// learned positional embeddings, tied output head, no biases on the
// projections. Templated on the scalar so the same code trains in fp32 and
// gradient-checks in fp64.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "lookahead/errors.hpp"
#include "lookahead/kernels.hpp"
#include "lookahead/rng.hpp"
#include "lookahead/vocab.hpp"

namespace lookahead {

struct ModelConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int vocab_size = 0;
    int max_seq_len = 256;
    double init_std = 0.02;

    void validate() const {
        if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1) {
            throw ConfigError("model config: dimensions must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("model config: d_model must be divisible by n_heads");
        }
        if (vocab_size < 1 || max_seq_len < 1) {
            throw ConfigError("model config: vocab_size and max_seq_len must be positive");
        }
    }
};

struct TensorSpec {
    std::string name;
    std::vector<int> dims;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool decay = false;
};

template <class T>
struct ParamStore {
    std::vector<TensorSpec> specs;
    std::vector<T> data;
    std::vector<T> grad;

    int add(const std::string& name, std::vector<int> dims, bool decay) {
        TensorSpec s;
        s.name = name;
        s.dims = std::move(dims);
        s.size = 1;
        for (int d : s.dims) {
            s.size *= static_cast<std::size_t>(d);
        }
        s.decay = decay;
        specs.push_back(std::move(s));
        return static_cast<int>(specs.size()) - 1;
    }
    void allocate() {
        std::size_t off = 0;
        for (auto& s : specs) {
            s.offset = off;
            off += s.size;
        }
        data.assign(off, T(0));
        grad.assign(off, T(0));
    }
    int find(const std::string& name) const {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (specs[i].name == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    }
    T* ptr(int i) { return data.data() + specs[static_cast<std::size_t>(i)].offset; }
    const T* ptr(int i) const { return data.data() + specs[static_cast<std::size_t>(i)].offset; }
    T* gptr(int i) { return grad.data() + specs[static_cast<std::size_t>(i)].offset; }
    const T* gptr(int i) const { return grad.data() + specs[static_cast<std::size_t>(i)].offset; }
    std::size_t total() const { return data.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <class T>
class Model {
public:
    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        build_specs();
    }

    Model(const ModelConfig& cfg, std::uint64_t init_seed) : Model(cfg) {
        init_params(init_seed);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return ps_; }
    const ParamStore<T>& params() const { return ps_; }

    void init_params(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "init"));
        // 1/sqrt(2*n_layers) on the residual-feeding projections keeps the
        // stream variance flat at depth.
        const double resid_std = cfg_.init_std / std::sqrt(2.0 * cfg_.n_layers);
        for (std::size_t i = 0; i < ps_.specs.size(); ++i) {
            const auto& s = ps_.specs[i];
            T* p = ps_.ptr(static_cast<int>(i));
            if (s.name.ends_with("ln1.g") || s.name.ends_with("ln2.g") || s.name == "lnf.g") {
                std::fill(p, p + s.size, T(1));
            } else if (s.name.ends_with(".b")) {
                std::fill(p, p + s.size, T(0));
            } else {
                const double std = (s.name.ends_with("attn_out.w") || s.name.ends_with("mlp_proj.w"))
                                       ? resid_std
                                       : cfg_.init_std;
                for (std::size_t j = 0; j < s.size; ++j) {
                    p[j] = static_cast<T>(rng.normal() * std);
                }
            }
        }
    }

    // Teacher-forced pass over row-major [B,Tn] ids. targets/mask are
    // position-aligned with logits rows; returns mean masked cross entropy.
    double forward(const std::int32_t* ids, const std::int32_t* targets,
                   const std::uint8_t* mask, int B, int Tn) {
        forward_logits(ids, B, Tn);
        const int N = B * Tn;
        targets_.assign(targets, targets + N);
        mask_.assign(mask, mask + N);
        ce_count_ = 0;
        for (int n = 0; n < N; ++n) {
            ce_count_ += mask[n] ? 1 : 0;
        }
        loss_ = nn::masked_ce_forward(probs_.data(), logits_.data(), targets, mask, N,
                                      cfg_.vocab_size);
        have_loss_ = true;
        return loss_;
    }

    // Stops after the logits matrix; used by decoding and causality tests.
    void forward_logits(const std::int32_t* ids, int B, int Tn) {
        if (Tn > cfg_.max_seq_len) {
            throw ConfigError("forward: sequence length " + std::to_string(Tn) +
                              " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
        }
        for (int i = 0; i < B * Tn; ++i) {
            if (ids[i] < 0 || ids[i] >= cfg_.vocab_size) {
                throw ConfigError("forward: token id out of range");
            }
        }
        ensure_buffers(B, Tn);
        ids_.assign(ids, ids + static_cast<std::size_t>(B) * Tn);
        have_loss_ = false;

        const int C = cfg_.d_model;
        const int F = cfg_.d_ff;
        const int NH = cfg_.n_heads;
        const int BT = B * Tn;

        nn::encoder_forward(enc_.data(), ids, ps_.ptr(i_wte_), ps_.ptr(i_wpe_), B, Tn, C);
        const T* x = enc_.data();
        for (int l = 0; l < cfg_.n_layers; ++l) {
            auto& a = acts_[static_cast<std::size_t>(l)];
            const auto& ix = layer_[static_cast<std::size_t>(l)];
            nn::layernorm_forward(a.ln1.data(), a.ln1_mean.data(), a.ln1_rstd.data(), x,
                                  ps_.ptr(ix.ln1g), ps_.ptr(ix.ln1b), BT, C);
            nn::matmul_forward(a.qkv.data(), a.ln1.data(), ps_.ptr(ix.qkvw), BT, C, 3 * C);
            nn::attention_forward(a.atty.data(), a.preatt.data(), a.att.data(), a.qkv.data(),
                                  B, Tn, C, NH);
            nn::matmul_forward(a.attproj.data(), a.atty.data(), ps_.ptr(ix.attw), BT, C, C);
            nn::residual_forward(a.res_att.data(), x, a.attproj.data(),
                                 static_cast<std::size_t>(BT) * C);
            nn::layernorm_forward(a.ln2.data(), a.ln2_mean.data(), a.ln2_rstd.data(),
                                  a.res_att.data(), ps_.ptr(ix.ln2g), ps_.ptr(ix.ln2b), BT, C);
            nn::matmul_forward(a.fch.data(), a.ln2.data(), ps_.ptr(ix.fcw), BT, C, F);
            nn::gelu_forward(a.fch_gelu.data(), a.fch.data(), static_cast<std::size_t>(BT) * F);
            nn::matmul_forward(a.fcproj.data(), a.fch_gelu.data(), ps_.ptr(ix.projw), BT, F, C);
            nn::residual_forward(a.res_mlp.data(), a.res_att.data(), a.fcproj.data(),
                                 static_cast<std::size_t>(BT) * C);
            x = a.res_mlp.data();
        }
        nn::layernorm_forward(lnf_.data(), lnf_mean_.data(), lnf_rstd_.data(), x,
                              ps_.ptr(i_lnfg_), ps_.ptr(i_lnfb_), BT, C);
        nn::matmul_forward(logits_.data(), lnf_.data(), ps_.ptr(i_wte_), BT, C, cfg_.vocab_size);
    }

    // Accumulates parameter gradients for the last forward() call.
    void backward() {
        if (!have_loss_) {
            throw ConfigError("backward: no forward pass with targets to differentiate");
        }
        const int B = cur_B_;
        const int Tn = cur_T_;
        const int C = cfg_.d_model;
        const int F = cfg_.d_ff;
        const int NH = cfg_.n_heads;
        const int BT = B * Tn;
        const int V = cfg_.vocab_size;

        zero_gacts();
        nn::masked_ce_backward(dlogits_.data(), probs_.data(), targets_.data(), mask_.data(),
                               BT, V, ce_count_);
        nn::matmul_backward(dlnf_.data(), ps_.gptr(i_wte_), dlogits_.data(), lnf_.data(),
                            ps_.ptr(i_wte_), BT, C, V);
        const T* x_final = cfg_.n_layers > 0
                               ? acts_[static_cast<std::size_t>(cfg_.n_layers - 1)].res_mlp.data()
                               : enc_.data();
        T* dx_final = cfg_.n_layers > 0
                          ? gacts_[static_cast<std::size_t>(cfg_.n_layers - 1)].res_mlp.data()
                          : denc_.data();
        nn::layernorm_backward(dx_final, ps_.gptr(i_lnfg_), ps_.gptr(i_lnfb_), dlnf_.data(),
                               x_final, lnf_mean_.data(), lnf_rstd_.data(), ps_.ptr(i_lnfg_),
                               BT, C);
        for (int l = cfg_.n_layers - 1; l >= 0; --l) {
            auto& a = acts_[static_cast<std::size_t>(l)];
            auto& g = gacts_[static_cast<std::size_t>(l)];
            const auto& ix = layer_[static_cast<std::size_t>(l)];
            const T* x_in = l > 0 ? acts_[static_cast<std::size_t>(l - 1)].res_mlp.data() : enc_.data();
            T* dx_in = l > 0 ? gacts_[static_cast<std::size_t>(l - 1)].res_mlp.data() : denc_.data();

            nn::residual_backward(g.res_att.data(), g.fcproj.data(), g.res_mlp.data(),
                                  static_cast<std::size_t>(BT) * C);
            nn::matmul_backward(g.fch_gelu.data(), ps_.gptr(ix.projw), g.fcproj.data(),
                                a.fch_gelu.data(), ps_.ptr(ix.projw), BT, F, C);
            nn::gelu_backward(g.fch.data(), g.fch_gelu.data(), a.fch.data(),
                              static_cast<std::size_t>(BT) * F);
            nn::matmul_backward(g.ln2.data(), ps_.gptr(ix.fcw), g.fch.data(), a.ln2.data(),
                                ps_.ptr(ix.fcw), BT, C, F);
            nn::layernorm_backward(g.res_att.data(), ps_.gptr(ix.ln2g), ps_.gptr(ix.ln2b),
                                   g.ln2.data(), a.res_att.data(), a.ln2_mean.data(),
                                   a.ln2_rstd.data(), ps_.ptr(ix.ln2g), BT, C);
            nn::residual_backward(dx_in, g.attproj.data(), g.res_att.data(),
                                  static_cast<std::size_t>(BT) * C);
            nn::matmul_backward(g.atty.data(), ps_.gptr(ix.attw), g.attproj.data(),
                                a.atty.data(), ps_.ptr(ix.attw), BT, C, C);
            nn::attention_backward(g.qkv.data(), g.preatt.data(), g.att.data(), g.atty.data(),
                                   a.qkv.data(), a.att.data(), B, Tn, C, NH);
            nn::matmul_backward(g.ln1.data(), ps_.gptr(ix.qkvw), g.qkv.data(), a.ln1.data(),
                                ps_.ptr(ix.qkvw), BT, C, 3 * C);
            nn::layernorm_backward(dx_in, ps_.gptr(ix.ln1g), ps_.gptr(ix.ln1b), g.ln1.data(),
                                   x_in, a.ln1_mean.data(), a.ln1_rstd.data(), ps_.ptr(ix.ln1g),
                                   BT, C);
        }
        nn::encoder_backward(ps_.gptr(i_wte_), ps_.gptr(i_wpe_), denc_.data(), ids_.data(),
                             B, Tn, C);
    }

    void zero_grad() { ps_.zero_grad(); }

    double loss() const { return loss_; }
    const T* logits() const { return logits_.data(); }
    int cur_batch() const { return cur_B_; }
    int cur_len() const { return cur_T_; }

    // Next-token logits for a single context, as doubles for the decoder.
    // Contexts longer than the window are cropped to their last max_seq_len
    // tokens so decoding can run to any budget.
    std::vector<double> logits_at_last(const Sequence& ctx) {
        if (ctx.empty()) {
            throw ConfigError("logits_at_last: empty context");
        }
        const std::size_t window = static_cast<std::size_t>(cfg_.max_seq_len);
        const std::size_t from = ctx.size() > window ? ctx.size() - window : 0;
        std::vector<std::int32_t> ids(ctx.begin() + static_cast<std::ptrdiff_t>(from), ctx.end());
        forward_logits(ids.data(), 1, static_cast<int>(ids.size()));
        const T* row = logits_.data() + (ids.size() - 1) * static_cast<std::size_t>(cfg_.vocab_size);
        return std::vector<double>(row, row + cfg_.vocab_size);
    }

private:
    struct LayerIdx {
        int ln1g, ln1b, qkvw, attw, ln2g, ln2b, fcw, projw;
    };
    struct LayerActs {
        std::vector<T> ln1, ln1_mean, ln1_rstd, qkv, atty, preatt, att, attproj, res_att;
        std::vector<T> ln2, ln2_mean, ln2_rstd, fch, fch_gelu, fcproj, res_mlp;
    };

    void build_specs() {
        const int C = cfg_.d_model;
        // Weight decay applies to the projection matrices only; embeddings
        // and norm parameters stay undecayed.
        i_wte_ = ps_.add("wte", {cfg_.vocab_size, C}, false);
        i_wpe_ = ps_.add("wpe", {cfg_.max_seq_len, C}, false);
        layer_.clear();
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string p = "l" + std::to_string(l) + ".";
            LayerIdx ix{};
            ix.ln1g = ps_.add(p + "ln1.g", {C}, false);
            ix.ln1b = ps_.add(p + "ln1.b", {C}, false);
            ix.qkvw = ps_.add(p + "qkv.w", {3 * C, C}, true);
            ix.attw = ps_.add(p + "attn_out.w", {C, C}, true);
            ix.ln2g = ps_.add(p + "ln2.g", {C}, false);
            ix.ln2b = ps_.add(p + "ln2.b", {C}, false);
            ix.fcw = ps_.add(p + "mlp_fc.w", {cfg_.d_ff, C}, true);
            ix.projw = ps_.add(p + "mlp_proj.w", {C, cfg_.d_ff}, true);
            layer_.push_back(ix);
        }
        i_lnfg_ = ps_.add("lnf.g", {C}, false);
        i_lnfb_ = ps_.add("lnf.b", {C}, false);
        ps_.allocate();
    }

    void ensure_buffers(int B, int Tn) {
        if (B == cur_B_ && Tn == cur_T_) {
            return;
        }
        cur_B_ = B;
        cur_T_ = Tn;
        const std::size_t BT = static_cast<std::size_t>(B) * Tn;
        const int C = cfg_.d_model;
        const int F = cfg_.d_ff;
        const std::size_t att_sz = static_cast<std::size_t>(B) * cfg_.n_heads * Tn * Tn;
        auto size_layer = [&](LayerActs& a) {
            a.ln1.resize(BT * C);
            a.ln1_mean.resize(BT);
            a.ln1_rstd.resize(BT);
            a.qkv.resize(BT * 3 * C);
            a.atty.resize(BT * C);
            a.preatt.resize(att_sz);
            a.att.resize(att_sz);
            a.attproj.resize(BT * C);
            a.res_att.resize(BT * C);
            a.ln2.resize(BT * C);
            a.ln2_mean.resize(BT);
            a.ln2_rstd.resize(BT);
            a.fch.resize(BT * F);
            a.fch_gelu.resize(BT * F);
            a.fcproj.resize(BT * C);
            a.res_mlp.resize(BT * C);
        };
        acts_.resize(static_cast<std::size_t>(cfg_.n_layers));
        gacts_.resize(static_cast<std::size_t>(cfg_.n_layers));
        for (int l = 0; l < cfg_.n_layers; ++l) {
            size_layer(acts_[static_cast<std::size_t>(l)]);
            size_layer(gacts_[static_cast<std::size_t>(l)]);
        }
        enc_.resize(BT * C);
        denc_.resize(BT * C);
        lnf_.resize(BT * C);
        dlnf_.resize(BT * C);
        lnf_mean_.resize(BT);
        lnf_rstd_.resize(BT);
        logits_.resize(BT * cfg_.vocab_size);
        dlogits_.resize(BT * cfg_.vocab_size);
        probs_.resize(BT * cfg_.vocab_size);
    }

    void zero_gacts() {
        auto z = [](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); };
        for (auto& g : gacts_) {
            z(g.ln1);
            z(g.qkv);
            z(g.atty);
            z(g.preatt);
            z(g.att);
            z(g.attproj);
            z(g.res_att);
            z(g.ln2);
            z(g.fch);
            z(g.fch_gelu);
            z(g.fcproj);
            z(g.res_mlp);
        }
        z(denc_);
        z(dlnf_);
        z(dlogits_);
    }

    ModelConfig cfg_;
    ParamStore<T> ps_;
    int i_wte_ = -1, i_wpe_ = -1, i_lnfg_ = -1, i_lnfb_ = -1;
    std::vector<LayerIdx> layer_;

    std::vector<LayerActs> acts_, gacts_;
    std::vector<T> enc_, denc_, lnf_, dlnf_, lnf_mean_, lnf_rstd_, logits_, dlogits_, probs_;
    std::vector<std::int32_t> ids_, targets_;
    std::vector<std::uint8_t> mask_;
    std::int64_t ce_count_ = 0;
    double loss_ = 0;
    bool have_loss_ = false;
    int cur_B_ = 0, cur_T_ = 0;
};

} // namespace lookahead
