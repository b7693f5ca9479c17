#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ramangeo {

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320) of a byte range.
std::uint32_t crc32(const void* data, std::size_t length, std::uint32_t seed = 0);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const void* data, std::size_t length);

/// FNV-1a 64-bit hash of a string, hex-encoded. Used for config provenance.
std::string fnv1a_hex(const std::string& text);

} // namespace ramangeo
