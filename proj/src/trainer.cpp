#include "lookahead/trainer.hpp"

#include <numeric>

#include "lookahead/kv.hpp"

namespace lookahead {

std::pair<TrainConfig, ModelConfig> parse_train_config(const std::map<std::string, std::string>& kv) {
    TrainConfig tc;
    tc.lr = kv_double_or(kv, "lr", tc.lr);
    tc.epochs = static_cast<int>(kv_long_or(kv, "epochs", tc.epochs));
    tc.batch_size = static_cast<int>(kv_long_or(kv, "batch_size", tc.batch_size));
    tc.seed = kv_u64_or(kv, "seed", tc.seed);
    tc.warmup_steps = static_cast<int>(kv_long_or(kv, "warmup_steps", tc.warmup_steps));
    tc.grad_clip = kv_double_or(kv, "grad_clip", tc.grad_clip);
    tc.eval_every = static_cast<int>(kv_long_or(kv, "eval_every", tc.eval_every));
    tc.loss_scope = loss_scope_from_string(kv_or(kv, "loss_scope", to_string(tc.loss_scope)));
    tc.weight_decay = kv_double_or(kv, "weight_decay", tc.weight_decay);
    tc.beta1 = kv_double_or(kv, "beta1", tc.beta1);
    tc.beta2 = kv_double_or(kv, "beta2", tc.beta2);
    tc.eps = kv_double_or(kv, "eps", tc.eps);
    tc.dtype = kv_or(kv, "dtype", tc.dtype);
    tc.validate();

    ModelConfig mc;
    mc.n_layers = static_cast<int>(kv_long_or(kv, "n_layers", mc.n_layers));
    mc.n_heads = static_cast<int>(kv_long_or(kv, "n_heads", mc.n_heads));
    mc.d_model = static_cast<int>(kv_long_or(kv, "d_model", mc.d_model));
    mc.d_ff = static_cast<int>(kv_long_or(kv, "d_ff", mc.d_ff));
    mc.max_seq_len = static_cast<int>(kv_long_or(kv, "max_seq_len", mc.max_seq_len));
    mc.init_std = kv_double_or(kv, "init_std", mc.init_std);
    return {tc, mc};
}

std::map<std::string, std::string> train_config_kv(const TrainConfig& tc, const ModelConfig& mc) {
    char buf[32];
    auto fmt = [&buf](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    std::map<std::string, std::string> kv;
    kv["lr"] = fmt(tc.lr);
    kv["epochs"] = std::to_string(tc.epochs);
    kv["batch_size"] = std::to_string(tc.batch_size);
    kv["seed"] = std::to_string(tc.seed);
    kv["warmup_steps"] = std::to_string(tc.warmup_steps);
    kv["grad_clip"] = fmt(tc.grad_clip);
    kv["eval_every"] = std::to_string(tc.eval_every);
    kv["loss_scope"] = to_string(tc.loss_scope);
    kv["weight_decay"] = fmt(tc.weight_decay);
    kv["beta1"] = fmt(tc.beta1);
    kv["beta2"] = fmt(tc.beta2);
    kv["eps"] = fmt(tc.eps);
    kv["dtype"] = tc.dtype;
    kv["n_layers"] = std::to_string(mc.n_layers);
    kv["n_heads"] = std::to_string(mc.n_heads);
    kv["d_model"] = std::to_string(mc.d_model);
    kv["d_ff"] = std::to_string(mc.d_ff);
    kv["max_seq_len"] = std::to_string(mc.max_seq_len);
    kv["init_std"] = fmt(mc.init_std);
    return kv;
}

std::vector<Batch> batchify(const std::vector<AugmentedSequence>& rows, int batch_size,
                            TokenId pad_id, std::uint64_t seed) {
    if (batch_size < 1) {
        throw ConfigError("batchify: batch_size must be >= 1");
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
        Batch b;
        b.B = static_cast<int>(end - begin);
        std::size_t maxlen = 0;
        for (std::size_t i = begin; i < end; ++i) {
            maxlen = std::max(maxlen, rows[order[i]].ids.size());
        }
        b.Tn = static_cast<int>(maxlen);
        b.ids.assign(static_cast<std::size_t>(b.B) * maxlen, pad_id);
        b.mask.assign(static_cast<std::size_t>(b.B) * maxlen, 0);
        for (std::size_t i = begin; i < end; ++i) {
            const auto& row = rows[order[i]];
            if (row.ids.size() != row.loss_mask.size()) {
                throw ConfigError("batchify: ids/mask length mismatch in dataset row");
            }
            const std::size_t r = i - begin;
            std::copy(row.ids.begin(), row.ids.end(), b.ids.begin() + r * maxlen);
            std::copy(row.loss_mask.begin(), row.loss_mask.end(), b.mask.begin() + r * maxlen);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

void shift_targets(const Batch& b, TokenId pad_id, std::vector<std::int32_t>& targets,
                   std::vector<std::uint8_t>& tmask) {
    const std::size_t n = static_cast<std::size_t>(b.B) * b.Tn;
    targets.assign(n, pad_id);
    tmask.assign(n, 0);
    for (int r = 0; r < b.B; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * b.Tn;
        for (int t = 0; t + 1 < b.Tn; ++t) {
            targets[base + t] = b.ids[base + t + 1];
            tmask[base + t] = b.mask[base + t + 1];
        }
    }
}

double lr_at(double base, long step, long warmup, long total) {
    if (total <= 0) {
        return base;
    }
    if (warmup > 0 && step < warmup) {
        return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (total <= warmup) {
        return base;
    }
    const double left = static_cast<double>(total - step);
    return base * std::max(0.0, left) / static_cast<double>(total - warmup);
}

} // namespace lookahead
