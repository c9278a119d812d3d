#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace medsynth::text {

std::string lowercase(std::string_view s);

// Whitespace-and-punctuation tokenizer: maximal runs of alphanumeric
// characters, lowercased. "Erdheim-Chester disease" -> {"erdheim",
// "chester", "disease"}. Applied to both corpus text and lexicon entries so
// multi-word and hyphenated names match as contiguous token sequences.
std::vector<std::string> tokenize(std::string_view s);

// Occurrences of `phrase` as a contiguous subsequence of `tokens`
// (overlapping occurrences all count).
std::size_t count_phrase(const std::vector<std::string>& tokens,
                         const std::vector<std::string>& phrase);

bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase);

}  // namespace medsynth::text
