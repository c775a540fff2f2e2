#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hydemic {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320), same convention as zlib.
uint32_t crc32(std::span<const unsigned char> data, uint32_t seed = 0);

// Shortest round-trip decimal for a double, locale independent.
std::string format_double(double v);

// Locale-independent strtod via from_chars; returns false on trailing junk.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

// Splits one CSV line on commas. No quoting support; library and report
// files never contain embedded commas.
std::vector<std::string> split_csv_line(const std::string& line);

std::string strip_eol(std::string line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace hydemic
