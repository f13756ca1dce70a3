#ifndef MOCOLL_IO_HPP
#define MOCOLL_IO_HPP

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mocoll {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Calls fn(line_number, record) for every non-blank line; 1-based line
/// numbers. Throws Error naming the line on JSON parse failure.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const nlohmann::json&)>& fn);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

/// RFC-4180-ish CSV: quoted fields, embedded commas/quotes/newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);
std::string csv_escape(std::string_view field);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);

}  // namespace mocoll

#endif  // MOCOLL_IO_HPP
