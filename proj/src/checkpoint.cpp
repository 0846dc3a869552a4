#include "lookahead/checkpoint.hpp"

#include <json.hpp>

namespace lookahead::detail {

using nlohmann::json;

std::string header_json(const CheckpointMeta& meta, const std::vector<TensorSpec>& specs) {
    json h;
    h["version"] = meta.version;
    h["dtype"] = meta.dtype;
    h["task"] = meta.task;
    h["model"] = {
        {"n_layers", meta.model.n_layers},   {"n_heads", meta.model.n_heads},
        {"d_model", meta.model.d_model},     {"d_ff", meta.model.d_ff},
        {"vocab_size", meta.model.vocab_size}, {"max_seq_len", meta.model.max_seq_len},
        {"init_std", meta.model.init_std},
    };
    h["vocab"] = meta.vocab.serialize();
    h["augspec"] = meta.augspec.serialize();
    json tensors = json::array();
    for (const auto& s : specs) {
        tensors.push_back({{"name", s.name}, {"dims", s.dims}});
    }
    h["tensors"] = std::move(tensors);
    return h.dump();
}

void write_blob(std::ostream& out, const std::string& header, const void* data,
                std::size_t bytes, const std::string& path) {
    out << kCkptMagic << '\n';
    const std::uint64_t hlen = header.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) {
        lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
    }
    out.write(lenbuf, 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) {
        throw ConfigError("checkpoint: write failed for " + path);
    }
}

CheckpointMeta read_header(std::istream& in, const std::string& path,
                           std::vector<std::size_t>* expected_sizes) {
    std::string magic;
    if (!std::getline(in, magic) || magic != kCkptMagic) {
        throw ConfigError("checkpoint: bad magic in " + path);
    }
    char lenbuf[8];
    in.read(lenbuf, 8);
    if (in.gcount() != 8) {
        throw ConfigError("checkpoint: truncated header in " + path);
    }
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) {
        hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    }
    if (hlen > (1u << 26)) {
        throw ConfigError("checkpoint: implausible header size in " + path);
    }
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (in.gcount() != static_cast<std::streamsize>(hlen)) {
        throw ConfigError("checkpoint: truncated header in " + path);
    }
    json h;
    try {
        h = json::parse(htext);
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint: malformed header in " + path + ": " + e.what());
    }
    CheckpointMeta meta;
    try {
        meta.version = h.at("version").get<int>();
        if (meta.version != 1) {
            throw ConfigError("checkpoint: unsupported version in " + path);
        }
        meta.dtype = h.at("dtype").get<std::string>();
        meta.task = h.at("task").get<std::string>();
        const auto& m = h.at("model");
        meta.model.n_layers = m.at("n_layers").get<int>();
        meta.model.n_heads = m.at("n_heads").get<int>();
        meta.model.d_model = m.at("d_model").get<int>();
        meta.model.d_ff = m.at("d_ff").get<int>();
        meta.model.vocab_size = m.at("vocab_size").get<int>();
        meta.model.max_seq_len = m.at("max_seq_len").get<int>();
        meta.model.init_std = m.at("init_std").get<double>();
        meta.vocab = Vocab::deserialize(h.at("vocab").get<std::string>());
        meta.augspec = AugSpec::parse(h.at("augspec").get<std::string>());
        if (expected_sizes) {
            expected_sizes->clear();
            for (const auto& t : h.at("tensors")) {
                std::size_t n = 1;
                for (const auto& d : t.at("dims")) {
                    n *= static_cast<std::size_t>(d.get<int>());
                }
                expected_sizes->push_back(n);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint: incomplete header in " + path + ": " + e.what());
    }
    return meta;
}

} // namespace lookahead::detail

namespace lookahead {

CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("peek_checkpoint: cannot open " + path);
    }
    return detail::read_header(in, path, nullptr);
}

} // namespace lookahead
