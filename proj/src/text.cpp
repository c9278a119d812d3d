#include "medsynth/text.hpp"

#include <cctype>

namespace medsynth::text {

std::string lowercase(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::size_t count_phrase(const std::vector<std::string>& tokens,
                         const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) {
        return 0;
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < phrase.size(); ++j) {
            if (tokens[i + j] != phrase[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            ++count;
        }
    }
    return count;
}

bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase) {
    return count_phrase(tokens, phrase) > 0;
}

}  // namespace medsynth::text
