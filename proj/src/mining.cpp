#include "medsynth/mining.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "medsynth/text.hpp"

namespace medsynth::mining {

using nlohmann::json;
using nlohmann::ordered_json;

void RarityConfig::validate() const {
    if (!(tau_rare > 0.0) || !(tau_rare < 1.0)) {
        throw ConfigError("tau_rare must be in (0,1)");
    }
}

// ---------------------------------------------------------------------------
// Corpus sources

DirectoryCorpus::DirectoryCorpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("corpus directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files_.push_back(entry.path());
        }
    }
    std::sort(files_.begin(), files_.end());
}

bool DirectoryCorpus::next(std::string& id, std::string& text) {
    if (index_ >= files_.size()) {
        return false;
    }
    const std::filesystem::path path = files_[index_++];
    id = path.filename().string();
    std::ifstream in(path);
    if (!in) {
        throw Error("unreadable corpus file: " + path.string());
    }
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return true;
}

JsonlCorpus::JsonlCorpus(const std::filesystem::path& file)
    : in_(std::make_unique<std::ifstream>(file)) {
    if (!*in_) {
        throw ConfigError("corpus file not found: " + file.string());
    }
}

bool JsonlCorpus::next(std::string& id, std::string& text) {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_no_;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("text")) {
            throw Error("malformed corpus record at line " + std::to_string(line_no_));
        }
        id = j.at("id").get<std::string>();
        text = j.at("text").get<std::string>();
        return true;
    }
    return false;
}

bool MemoryCorpus::next(std::string& id, std::string& text) {
    if (index_ >= docs_.size()) {
        return false;
    }
    id = docs_[index_].first;
    text = docs_[index_].second;
    ++index_;
    return true;
}

std::unique_ptr<CorpusSource> open_corpus(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        return std::make_unique<DirectoryCorpus>(path);
    }
    if (std::filesystem::is_regular_file(path)) {
        return std::make_unique<JsonlCorpus>(path);
    }
    throw ConfigError("corpus path not found: " + path.string());
}

// ---------------------------------------------------------------------------
// Counting

CorpusStats count_entity_frequencies(CorpusSource& corpus,
                                     const std::vector<std::string>& lexicon) {
    if (lexicon.empty()) {
        throw ArgumentError("lexicon must be nonempty");
    }
    struct Phrase {
        std::vector<std::string> tokens;
        const std::string* name;
    };
    // Index phrases by first token for the per-position scan.
    std::map<std::string, std::vector<Phrase>> by_first;
    CorpusStats stats;
    for (const std::string& name : lexicon) {
        auto [slot, inserted] = stats.entity_counts.emplace(name, 0);
        if (!inserted) {
            continue;  // duplicate lexicon entry
        }
        auto tokens = text::tokenize(name);
        if (tokens.empty()) {
            continue;  // unmatched; stays at count 0
        }
        std::string first = tokens.front();
        by_first[std::move(first)].push_back(Phrase{std::move(tokens), &slot->first});
    }

    std::string id;
    std::string doc;
    for (;;) {
        try {
            if (!corpus.next(id, doc)) {
                break;
            }
        } catch (const std::exception&) {
            ++stats.skipped_documents;
            continue;
        }
        const std::vector<std::string> tokens = text::tokenize(doc);
        stats.total_tokens += tokens.size();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            auto it = by_first.find(tokens[i]);
            if (it == by_first.end()) {
                continue;
            }
            for (const Phrase& phrase : it->second) {
                if (i + phrase.tokens.size() > tokens.size()) {
                    continue;
                }
                bool match = true;
                for (std::size_t j = 1; j < phrase.tokens.size(); ++j) {
                    if (tokens[i + j] != phrase.tokens[j]) {
                        match = false;
                        break;
                    }
                }
                if (match) {
                    ++stats.entity_counts[*phrase.name];
                }
            }
        }
    }
    return stats;
}

std::vector<std::pair<std::string, double>> select_rare_entities(
    const CorpusStats& stats, const RarityConfig& config) {
    config.validate();
    if (stats.total_tokens < 1) {
        throw ArgumentError("select_rare_entities: corpus has no tokens");
    }
    std::vector<std::pair<std::string, double>> rare;
    for (const auto& [name, count] : stats.entity_counts) {
        const double freq = static_cast<double>(count) /
                            static_cast<double>(stats.total_tokens);
        if (freq < config.tau_rare) {
            rare.emplace_back(name, freq);
        }
    }
    std::sort(rare.begin(), rare.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    return rare;
}

// ---------------------------------------------------------------------------
// Filtering

ScriptedJudge::ScriptedJudge(std::vector<std::string> drop) : drop_(std::move(drop)) {}

Verdict ScriptedJudge::judge(const std::string& candidate) {
    for (const auto& d : drop_) {
        if (d == candidate) {
            return Verdict::DROP;
        }
    }
    return Verdict::KEEP;
}

GeneratorJudge::GeneratorJudge(clients::TextGenerator& generator)
    : generator_(generator) {}

Verdict GeneratorJudge::judge(const std::string& candidate) {
    const std::string prompt =
        "Is \"" + candidate +
        "\" a genuinely rare yet clinically significant entity (not a typo or a "
        "common condition)? Reply KEEP or DROP.";
    const std::string reply = generator_.generate(prompt);
    if (reply.find("KEEP") != std::string::npos) return Verdict::KEEP;
    if (reply.find("DROP") != std::string::npos) return Verdict::DROP;
    return Verdict::UNDECIDED;
}

FilterResult filter_candidates(const std::vector<std::string>& candidates,
                               RarityJudge& evaluator) {
    FilterResult result;
    for (const std::string& name : candidates) {
        VerdictRecord record{name, Verdict::UNDECIDED, ""};
        try {
            record.verdict = evaluator.judge(name);
        } catch (const std::exception& e) {
            record.verdict = Verdict::UNDECIDED;
            record.note = e.what();
        }
        if (record.verdict == Verdict::KEEP) {
            result.kept.push_back(name);
        }
        result.audit.push_back(std::move(record));
    }
    return result;
}

std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("lexicon file not found: " + path.string());
    }
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (!line.empty()) {
            names.push_back(line);
        }
    }
    return names;
}

void save_stats_jsonl(const CorpusStats& stats, std::ostream& out) {
    ordered_json header;
    header["total_tokens"] = stats.total_tokens;
    header["skipped_documents"] = stats.skipped_documents;
    out << header.dump() << '\n';
    for (const auto& [name, count] : stats.entity_counts) {
        ordered_json j;
        j["name"] = name;
        j["count"] = count;
        j["frequency"] = stats.total_tokens == 0
                             ? 0.0
                             : static_cast<double>(count) /
                                   static_cast<double>(stats.total_tokens);
        out << j.dump() << '\n';
    }
}

CorpusStats load_stats_jsonl(std::istream& in) {
    CorpusStats stats;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw FormatError("stats line " + std::to_string(line_no) + " is not JSON");
        }
        if (!have_header) {
            stats.total_tokens = j.at("total_tokens").get<std::uint64_t>();
            if (j.contains("skipped_documents")) {
                stats.skipped_documents = j.at("skipped_documents").get<std::uint64_t>();
            }
            have_header = true;
            continue;
        }
        stats.entity_counts[j.at("name").get<std::string>()] =
            j.at("count").get<std::uint64_t>();
    }
    if (!have_header) {
        throw FormatError("stats file has no header record");
    }
    return stats;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::KEEP: return "KEEP";
        case Verdict::DROP: return "DROP";
        case Verdict::UNDECIDED: return "UNDECIDED";
    }
    return "UNDECIDED";
}

}  // namespace medsynth::mining
