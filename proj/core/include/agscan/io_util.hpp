#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace agscan {

// IEEE 802.3 CRC32 (reflected, poly 0xEDB88320), as used by zip/png.
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::filesystem::path& path);

// Shortest-clean decimal rendering that round-trips a double exactly:
// %.17g, with a fixed "nan"/"inf" spelling. Used for every float written to
// CSV/JSONL so outputs are byte-identical across runs.
std::string fmt_f64(double value);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_binary_file(const std::filesystem::path& path, const void* data, std::size_t size);

// Splits on '\n', dropping a trailing empty segment and stripping '\r'.
std::vector<std::string> split_lines(const std::string& text);
std::vector<std::string> split_on(const std::string& line, char sep);
std::string trim(const std::string& s);

}  // namespace agscan
