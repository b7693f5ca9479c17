#pragma once

// Checkpoint container:
//   "CNX1" | u16 version | u32 header length | UTF-8 JSON header
//   | float32 little-endian payload | u32 CRC-32 of the payload bytes
// The JSON header carries the model config, the ordered class labels, the
// tensor manifest (name, shape, byte offset, element count) and optionally
// the spectral window the training grid was built on.

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramangeo/errors.hpp"
#include "ramangeo/io.hpp"
#include "ramangeo/model.hpp"

namespace ramangeo {

inline constexpr char kCheckpointMagic[4] = {'C', 'N', 'X', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointExtras {
    std::optional<std::pair<double, double>> window; // (w_min, w_max) of the processing grid
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace detail

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path,
                     const CheckpointExtras& extras = {}) {
    const auto named = model.named_parameters();

    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, node] : named) {
        manifest.push_back({{"name", name},
                            {"shape", node->value.shape()},
                            {"offset", offset},
                            {"count", node->value.size()}});
        offset += node->value.size() * sizeof(float);
    }
    nlohmann::json header = {{"config", model.config.to_json()},
                             {"class_labels", model.class_labels},
                             {"tensors", manifest}};
    if (extras.window) {
        header["window"] = {{"w_min", extras.window->first}, {"w_max", extras.window->second}};
    }
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> payload;
    payload.reserve(offset);
    for (const auto& [name, node] : named) {
        for (std::size_t i = 0; i < node->value.size(); ++i) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(node->value[i]));
            detail::put_u32(payload, bits);
        }
    }

    std::vector<std::uint8_t> bytes;
    bytes.reserve(4 + 2 + 4 + header_text.size() + payload.size() + 4);
    bytes.insert(bytes.end(), kCheckpointMagic, kCheckpointMagic + 4);
    detail::put_u16(bytes, kCheckpointVersion);
    detail::put_u32(bytes, static_cast<std::uint32_t>(header_text.size()));
    bytes.insert(bytes.end(), header_text.begin(), header_text.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    detail::put_u32(bytes, crc32(payload.data(), payload.size()));

    write_binary_file(path, bytes.data(), bytes.size());
}

template <typename T>
struct LoadedCheckpoint {
    Model<T> model;
    CheckpointExtras extras;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_binary_file(path);
    if (bytes.size() < 10) throw IoError("truncated checkpoint (no header): " + path);
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("not a checkpoint file (bad magic): " + path);
    }
    const std::uint16_t version = detail::get_u16(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + "): " + path);
    }
    const std::uint32_t header_len = detail::get_u32(bytes.data() + 6);
    if (bytes.size() < 10 + static_cast<std::size_t>(header_len) + 4) {
        throw IoError("truncated checkpoint (header cut short): " + path);
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("unreadable checkpoint header: " + std::string(e.what()));
    }

    LoadedCheckpoint<T> out{build_model<T>(ModelConfig::from_json(header.at("config"))), {}};
    out.model.class_labels = header.at("class_labels").get<std::vector<std::string>>();
    if (header.contains("window")) {
        out.extras.window = {header["window"].at("w_min").get<double>(),
                             header["window"].at("w_max").get<double>()};
    }

    const auto& manifest = header.at("tensors");
    std::size_t expected_payload = 0;
    for (const auto& entry : manifest) {
        expected_payload = std::max(expected_payload, entry.at("offset").get<std::size_t>() +
                                                          entry.at("count").get<std::size_t>() *
                                                              sizeof(float));
    }
    const std::size_t payload_start = 10 + header_len;
    if (bytes.size() != payload_start + expected_payload + 4) {
        throw IoError("truncated checkpoint (expected " +
                      std::to_string(payload_start + expected_payload + 4) + " bytes, have " +
                      std::to_string(bytes.size()) + "): " + path);
    }
    const std::size_t payload_len = expected_payload;
    const std::uint8_t* payload = bytes.data() + payload_start;

    const std::uint32_t stored_crc = detail::get_u32(bytes.data() + bytes.size() - 4);
    const std::uint32_t actual_crc = crc32(payload, payload_len);
    if (stored_crc != actual_crc) {
        throw ChecksumError("checkpoint payload checksum mismatch in " + path);
    }

    auto named = out.model.named_parameters();
    if (manifest.size() != named.size()) {
        throw FormatError("checkpoint manifest lists " + std::to_string(manifest.size()) +
                          " tensors, model expects " + std::to_string(named.size()));
    }
    for (std::size_t t = 0; t < named.size(); ++t) {
        const auto& entry = manifest[t];
        auto& [name, node] = named[t];
        if (entry.at("name").get<std::string>() != name) {
            throw FormatError("checkpoint tensor " + std::to_string(t) + " is '" +
                              entry.at("name").get<std::string>() + "', expected '" + name + "'");
        }
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != node->value.shape()) {
            throw FormatError("checkpoint tensor '" + name + "' has unexpected shape");
        }
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t count = entry.at("count").get<std::size_t>();
        if (count != node->value.size() || offset + count * sizeof(float) > payload_len) {
            throw IoError("truncated checkpoint (payload cut short at '" + name + "')");
        }
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint32_t bits = detail::get_u32(payload + offset + i * sizeof(float));
            node->value[i] = static_cast<T>(std::bit_cast<float>(bits));
        }
    }
    return out;
}

} // namespace ramangeo
