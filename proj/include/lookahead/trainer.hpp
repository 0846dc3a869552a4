#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lookahead/adamw.hpp"
#include "lookahead/augment.hpp"
#include "lookahead/checkpoint.hpp"
#include "lookahead/model.hpp"

namespace lookahead {

struct TrainConfig {
    double lr = 3e-4;
    int epochs = 1;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int warmup_steps = 100;
    double grad_clip = 1.0;
    int eval_every = 0;  // checkpoint every N steps; 0 = final only
    // Recorded for the manifest; training consumes the masks already stored
    // in the augmented data file.
    LossScope loss_scope = LossScope::completion_only;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::string dtype = "fp32";

    void validate() const {
        if (lr <= 0) {
            throw ConfigError("train config: lr must be > 0");
        }
        if (epochs < 1) {
            throw ConfigError("train config: epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ConfigError("train config: batch_size must be >= 1");
        }
        if (dtype != "fp32" && dtype != "fp64") {
            throw ConfigError("train config: dtype must be fp32 or fp64");
        }
    }
};

// One training-config file carries both the optimizer and the model keys;
// vocab_size is filled in from the vocabulary at train time.
std::pair<TrainConfig, ModelConfig> parse_train_config(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> train_config_kv(const TrainConfig& tc, const ModelConfig& mc);

// Padded batch with the mask still position-aligned to ids (unshifted), so
// total mask mass is preserved by batching.
struct Batch {
    int B = 0;
    int Tn = 0;
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;
};

std::vector<Batch> batchify(const std::vector<AugmentedSequence>& rows, int batch_size,
                            TokenId pad_id, std::uint64_t seed);

// Next-token view: targets[b,t] = ids[b,t+1], tmask[b,t] = mask[b,t+1]; the
// last column is padding with mask 0.
void shift_targets(const Batch& b, TokenId pad_id, std::vector<std::int32_t>& targets,
                   std::vector<std::uint8_t>& tmask);

// Linear warmup to `base`, then linear decay to zero at `total`.
double lr_at(double base, long step, long warmup, long total);

struct TrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    long steps = 0;
    double final_loss = 0;
};

template <class T>
TrainResult train(const TrainConfig& tc, ModelConfig mc,
                  const std::vector<AugmentedSequence>& data, const Vocab& vocab,
                  const AugSpec& augspec, const std::string& task, const std::string& out_dir) {
    tc.validate();
    if (data.empty()) {
        throw ConfigError("train: empty dataset");
    }
    mc.vocab_size = static_cast<int>(vocab.size());
    std::size_t max_len = 0;
    for (const auto& row : data) {
        max_len = std::max(max_len, row.ids.size());
    }
    if (static_cast<int>(max_len) > mc.max_seq_len) {
        throw ConfigError("train: dataset row of length " + std::to_string(max_len) +
                          " exceeds max_seq_len " + std::to_string(mc.max_seq_len));
    }
    mc.validate();
    std::filesystem::create_directories(out_dir);

    Model<T> model(mc, tc.seed);
    AdamW<T> opt(tc.beta1, tc.beta2, tc.eps, tc.weight_decay);

    const long steps_per_epoch =
        static_cast<long>((data.size() + tc.batch_size - 1) / static_cast<std::size_t>(tc.batch_size));
    const long total_steps = steps_per_epoch * tc.epochs;

    const std::string metrics_path = out_dir + "/metrics.csv";
    std::ofstream metrics(metrics_path, std::ios::binary);
    if (!metrics) {
        throw ConfigError("train: cannot write " + metrics_path);
    }
    metrics << "step,lr,loss,masked_count\n";

    const std::string ckpt_path = out_dir + "/ckpt.bin";
    const std::uint64_t shuffle_seed = derive_seed(tc.seed, "shuffle");
    std::vector<std::int32_t> targets;
    std::vector<std::uint8_t> tmask;
    long step = 0;
    double last_loss = 0;
    bool saved_any = false;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto batches =
            batchify(data, tc.batch_size, kPadId, derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
        for (const auto& batch : batches) {
            shift_targets(batch, kPadId, targets, tmask);
            const double lr_t = lr_at(tc.lr, step, tc.warmup_steps, total_steps);
            const double loss =
                model.forward(batch.ids.data(), targets.data(), tmask.data(), batch.B, batch.Tn);
            if (!std::isfinite(loss)) {
                // Leave whatever checkpoint was last written as the
                // resume point.
                throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                                   " (batch of " + std::to_string(batch.B) + "x" +
                                   std::to_string(batch.Tn) + ")" +
                                   (saved_any ? ", last-good checkpoint retained at " + ckpt_path
                                              : ""));
            }
            model.zero_grad();
            model.backward();
            clip_global_norm(model.params(), tc.grad_clip);
            opt.step(model.params(), lr_t);

            std::int64_t masked = 0;
            for (auto m : tmask) {
                masked += m ? 1 : 0;
            }
            char lrbuf[32], lossbuf[32];
            std::snprintf(lrbuf, sizeof lrbuf, "%.17g", lr_t);
            std::snprintf(lossbuf, sizeof lossbuf, "%.17g", loss);
            metrics << step << ',' << lrbuf << ',' << lossbuf << ',' << masked << '\n';
            last_loss = loss;
            ++step;
            if (tc.eval_every > 0 && step % tc.eval_every == 0) {
                save_checkpoint(ckpt_path, model, vocab, augspec, task);
                saved_any = true;
            }
        }
    }
    metrics.flush();
    if (!metrics) {
        throw ConfigError("train: write failed for " + metrics_path);
    }
    save_checkpoint(ckpt_path, model, vocab, augspec, task);
    return {ckpt_path, metrics_path, step, last_loss};
}

} // namespace lookahead
