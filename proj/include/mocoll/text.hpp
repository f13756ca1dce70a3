#ifndef MOCOLL_TEXT_HPP
#define MOCOLL_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace mocoll {

// Report/caption normalization used everywhere tokens are compared:
// lowercase, split on whitespace, strip leading/trailing punctuation from
// each token, drop tokens that end up empty.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenize and re-join with single spaces.
std::string normalize_text(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& tokens, std::string_view sep);

bool contains_ci(std::string_view haystack, std::string_view needle);

/// Porter (1980) suffix-stripping stemmer. Expects a lowercase word;
/// words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace mocoll

#endif  // MOCOLL_TEXT_HPP
