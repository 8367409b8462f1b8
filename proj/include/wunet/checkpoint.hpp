// Checkpoint persistence. Layout: 8-byte magic, u32 format version, u64
// JSON header length, UTF-8 JSON header (configs, tensor table, RNG state,
// counters), float32 little-endian payload (parameters, then Adam m, then
// Adam v, all in registration order), u32 CRC32 of everything preceding.
// Round-trips bitwise; writes go through a temp file + rename so a crash
// never leaves a half-written checkpoint behind.
#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "wunet/model.hpp"
#include "wunet/optim.hpp"
#include "wunet/rng.hpp"

namespace wunet {

inline constexpr char kCheckpointMagic[8] = {'W', 'U', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    std::vector<std::string> param_names;
    std::vector<std::vector<int>> param_shapes;
    std::vector<std::vector<float>> param_values;
    AdamState adam;
    std::string rng_state;
    int epoch = 0;
    int64_t global_step = 0;
};

namespace detail {

inline const char* basis_policy_name(BasisPolicyKind k) {
    switch (k) {
        case BasisPolicyKind::PerInput: return "per_input";
        case BasisPolicyKind::Identity: return "identity";
        case BasisPolicyKind::FixedRandom: return "fixed_random";
        case BasisPolicyKind::Provided: return "provided";
    }
    return "per_input";
}

inline BasisPolicyKind basis_policy_from_name(const std::string& s) {
    if (s == "per_input") return BasisPolicyKind::PerInput;
    if (s == "identity") return BasisPolicyKind::Identity;
    if (s == "fixed_random") return BasisPolicyKind::FixedRandom;
    fail(ErrorCode::CorruptData, "unknown basis policy in checkpoint: " + s);
}

inline nlohmann::json model_config_json(const ModelConfig& m) {
    if (m.basis_policy.kind == BasisPolicyKind::Provided)
        fail(ErrorCode::ConfigInvalid, "a provided basis cannot be serialized");
    return {{"in_channels", m.in_channels},
            {"base_channels", m.base_channels},
            {"depth", m.depth},
            {"seed", m.seed},
            {"fusion", {{"alpha", m.fusion.alpha}, {"beta", m.fusion.beta}}},
            {"basis_policy",
             {{"kind", basis_policy_name(m.basis_policy.kind)}, {"seed", m.basis_policy.seed}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.in_channels = j.at("in_channels").get<int>();
    m.base_channels = j.at("base_channels").get<int>();
    m.depth = j.at("depth").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.fusion.alpha = j.at("fusion").at("alpha").get<float>();
    m.fusion.beta = j.at("fusion").at("beta").get<float>();
    m.basis_policy.kind = basis_policy_from_name(j.at("basis_policy").at("kind").get<std::string>());
    m.basis_policy.seed = j.at("basis_policy").at("seed").get<uint64_t>();
    return m;
}

inline nlohmann::json train_config_json(const TrainConfig& t) {
    return {{"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"lr_init", t.lr_init},
            {"lr_min", t.lr_min},
            {"warmup_fraction", t.warmup_fraction},
            {"sigma", t.sigma},
            {"seed", t.seed},
            {"patch_size", t.patch_size},
            {"patches_per_image", t.patches_per_image},
            {"checkpoint_every", t.checkpoint_every}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig t;
    t.batch_size = j.at("batch_size").get<int>();
    t.epochs = j.at("epochs").get<int>();
    t.lr_init = j.at("lr_init").get<double>();
    t.lr_min = j.at("lr_min").get<double>();
    t.warmup_fraction = j.at("warmup_fraction").get<double>();
    t.sigma = j.at("sigma").get<float>();
    t.seed = j.at("seed").get<uint64_t>();
    t.patch_size = j.at("patch_size").get<int>();
    t.patches_per_image = j.at("patches_per_image").get<int>();
    t.checkpoint_every = j.at("checkpoint_every").get<int>();
    return t;
}

inline void append_u32(std::vector<unsigned char>& buf, uint32_t v) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    buf.insert(buf.end(), b, b + 4);
}

inline void append_u64(std::vector<unsigned char>& buf, uint64_t v) {
    unsigned char b[8];
    std::memcpy(b, &v, 8);
    buf.insert(buf.end(), b, b + 8);
}

inline void append_floats(std::vector<unsigned char>& buf, const std::vector<float>& v) {
    size_t off = buf.size();
    buf.resize(off + v.size() * 4);
    std::memcpy(buf.data() + off, v.data(), v.size() * 4);
}

}  // namespace detail

inline Checkpoint make_checkpoint(const Model& model, const TrainConfig& train,
                                  const AdamState& adam, const Rng& rng, int epoch,
                                  int64_t global_step) {
    Checkpoint c;
    c.model = model.config();
    c.train = train;
    for (const auto& it : model.params().items) {
        c.param_names.push_back(it.name);
        c.param_shapes.push_back(it.tensor->shape);
        c.param_values.push_back(it.tensor->value);
    }
    c.adam = adam;
    c.rng_state = rng.serialize();
    c.epoch = epoch;
    c.global_step = global_step;
    return c;
}

/// Copies checkpoint parameter values into a model whose architecture
/// matches (same names and shapes in the same order).
inline void apply_checkpoint(const Checkpoint& c, Model& model) {
    auto& items = model.params().items;
    if (items.size() != c.param_names.size())
        fail(ErrorCode::ShapeMismatch, "checkpoint parameter count does not match model");
    for (size_t i = 0; i < items.size(); ++i) {
        if (items[i].name != c.param_names[i] || items[i].tensor->shape != c.param_shapes[i])
            fail(ErrorCode::ShapeMismatch,
                 "checkpoint parameter " + c.param_names[i] + " does not match model");
        items[i].tensor->value = c.param_values[i];
    }
}

inline Model build_model_from_checkpoint(const Checkpoint& c) {
    Model model(c.model);
    apply_checkpoint(c, model);
    return model;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    size_t total = 0;
    for (const auto& v : c.param_values) total += v.size();

    nlohmann::json tensors = nlohmann::json::array();
    size_t off = 0;
    for (size_t i = 0; i < c.param_names.size(); ++i) {
        tensors.push_back({{"name", c.param_names[i]},
                           {"shape", c.param_shapes[i]},
                           {"offset", off}});
        off += c.param_values[i].size();
    }
    nlohmann::json header = {{"model", detail::model_config_json(c.model)},
                             {"train", detail::train_config_json(c.train)},
                             {"tensors", tensors},
                             {"adam_t", c.adam.t},
                             {"m_offset", total},
                             {"v_offset", 2 * total},
                             {"rng", c.rng_state},
                             {"epoch", c.epoch},
                             {"global_step", c.global_step}};
    std::string json_text = header.dump();

    std::vector<unsigned char> buf;
    buf.reserve(8 + 4 + 8 + json_text.size() + 3 * total * 4 + 4);
    buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
    detail::append_u32(buf, kCheckpointVersion);
    detail::append_u64(buf, json_text.size());
    buf.insert(buf.end(), json_text.begin(), json_text.end());
    for (const auto& v : c.param_values) detail::append_floats(buf, v);
    for (const auto& v : c.adam.m) detail::append_floats(buf, v);
    for (const auto& v : c.adam.v) detail::append_floats(buf, v);

    uint32_t crc = static_cast<uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    detail::append_u32(buf, crc);

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) fail(ErrorCode::IoFailure, "cannot open for write: " + tmp.string());
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!os) fail(ErrorCode::IoFailure, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::IoFailure, "rename failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::MissingFile, "cannot open checkpoint: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < 8 + 4 + 8 + 4)
        fail(ErrorCode::ChecksumMismatch, "checkpoint checksum verification failed (truncated file)");
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc)
        fail(ErrorCode::ChecksumMismatch, "checkpoint checksum verification failed");

    if (std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
        fail(ErrorCode::CorruptData, "not a checkpoint file");
    uint32_t version;
    std::memcpy(&version, buf.data() + 8, 4);
    if (version != kCheckpointVersion)
        fail(ErrorCode::VersionMismatch,
             "checkpoint format version " + std::to_string(version) + " is not supported");
    uint64_t json_len;
    std::memcpy(&json_len, buf.data() + 12, 8);
    size_t payload_start = 20 + json_len;
    if (payload_start + 4 > buf.size())
        fail(ErrorCode::CorruptData, "checkpoint header length out of range");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin() + 20, buf.begin() + static_cast<long>(payload_start));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptData, std::string("bad checkpoint header: ") + e.what());
    }

    Checkpoint c;
    try {
        c.model = detail::model_config_from_json(header.at("model"));
        c.train = detail::train_config_from_json(header.at("train"));
        c.adam.t = header.at("adam_t").get<int64_t>();
        c.rng_state = header.at("rng").get<std::string>();
        c.epoch = header.at("epoch").get<int>();
        c.global_step = header.at("global_step").get<int64_t>();

        size_t total = 0;
        for (const auto& t : header.at("tensors")) {
            c.param_names.push_back(t.at("name").get<std::string>());
            c.param_shapes.push_back(t.at("shape").get<std::vector<int>>());
            if (t.at("offset").get<size_t>() != total)
                fail(ErrorCode::CorruptData, "checkpoint tensor offsets are inconsistent");
            total += shape_numel(c.param_shapes.back());
        }
        if (header.at("m_offset").get<size_t>() != total ||
            header.at("v_offset").get<size_t>() != 2 * total)
            fail(ErrorCode::CorruptData, "checkpoint moment offsets are inconsistent");

        size_t payload_floats = (buf.size() - payload_start - 4) / 4;
        if ((buf.size() - payload_start - 4) % 4 != 0 || payload_floats != 3 * total)
            fail(ErrorCode::CorruptData, "checkpoint payload size does not match tensor table");

        const unsigned char* p = buf.data() + payload_start;
        auto read_block = [&](std::vector<float>& dst, size_t n) {
            dst.resize(n);
            std::memcpy(dst.data(), p, n * 4);
            p += n * 4;
        };
        for (const auto& shape : c.param_shapes) {
            c.param_values.emplace_back();
            read_block(c.param_values.back(), shape_numel(shape));
        }
        for (const auto& shape : c.param_shapes) {
            c.adam.m.emplace_back();
            read_block(c.adam.m.back(), shape_numel(shape));
        }
        for (const auto& shape : c.param_shapes) {
            c.adam.v.emplace_back();
            read_block(c.adam.v.back(), shape_numel(shape));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptData, std::string("bad checkpoint header: ") + e.what());
    }
    return c;
}

}  // namespace wunet
