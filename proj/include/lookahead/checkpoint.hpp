#pragma once

// Single-file checkpoint: magic line, 8-byte little-endian header length,
// JSON header (config, vocab, augmentation recipe, tensor manifest), then
// the raw parameter buffer in spec order. Byte-identical across save/load.

#include <cstdint>
#include <fstream>
#include <string>

#include "lookahead/augment.hpp"
#include "lookahead/model.hpp"
#include "lookahead/vocab.hpp"

namespace lookahead {

inline constexpr const char* kCkptMagic = "LOOKAHEAD_CKPT v1";

struct CheckpointMeta {
    int version = 1;
    std::string dtype;  // "fp32" | "fp64"
    std::string task;   // "star" | "scc" | ""
    ModelConfig model;
    Vocab vocab;
    AugSpec augspec;
};

template <class T>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
    return "fp32";
}
template <>
inline const char* dtype_name<double>() {
    return "fp64";
}

namespace detail {
std::string header_json(const CheckpointMeta& meta, const std::vector<TensorSpec>& specs);
// Reads magic + header; returns meta and leaves `in` positioned at the raw
// tensor bytes. expected_sizes receives the per-tensor element counts.
CheckpointMeta read_header(std::istream& in, const std::string& path,
                           std::vector<std::size_t>* expected_sizes);
void write_blob(std::ostream& out, const std::string& header, const void* data,
                std::size_t bytes, const std::string& path);
} // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, const Vocab& vocab,
                     const AugSpec& augspec, const std::string& task) {
    CheckpointMeta meta;
    meta.dtype = dtype_name<T>();
    meta.task = task;
    meta.model = model.config();
    meta.vocab = vocab;
    meta.augspec = augspec;
    const auto& ps = model.params();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("save_checkpoint: cannot open " + path);
    }
    detail::write_blob(out, detail::header_json(meta, ps.specs), ps.data.data(),
                       ps.data.size() * sizeof(T), path);
}

CheckpointMeta peek_checkpoint(const std::string& path);

template <class T>
Model<T> load_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("load_checkpoint: cannot open " + path);
    }
    std::vector<std::size_t> sizes;
    CheckpointMeta meta = detail::read_header(in, path, &sizes);
    if (meta.dtype != dtype_name<T>()) {
        throw ConfigError("load_checkpoint: checkpoint dtype " + meta.dtype +
                          " does not match requested scalar type");
    }
    Model<T> model(meta.model);
    auto& ps = model.params();
    if (sizes.size() != ps.specs.size()) {
        throw ConfigError("load_checkpoint: tensor manifest mismatch in " + path);
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] != ps.specs[i].size) {
            throw ConfigError("load_checkpoint: tensor shape mismatch for " + ps.specs[i].name);
        }
    }
    in.read(reinterpret_cast<char*>(ps.data.data()),
            static_cast<std::streamsize>(ps.data.size() * sizeof(T)));
    if (in.gcount() != static_cast<std::streamsize>(ps.data.size() * sizeof(T))) {
        throw ConfigError("load_checkpoint: truncated tensor data in " + path);
    }
    if (meta_out) {
        *meta_out = meta;
    }
    return model;
}

} // namespace lookahead
