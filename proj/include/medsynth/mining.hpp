#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "medsynth/clients.hpp"
#include "medsynth/errors.hpp"

namespace medsynth::mining {

struct CorpusStats {
    std::uint64_t total_tokens = 0;
    std::map<std::string, std::uint64_t> entity_counts;  // keyed by lexicon name
    std::uint64_t skipped_documents = 0;
};

struct RarityConfig {
    double tau_rare = 1e-6;
    void validate() const;  // 0 < tau_rare < 1
};

// Streaming document source. Implementations must advance past a bad
// document before throwing so the caller can skip it and continue.
class CorpusSource {
public:
    virtual ~CorpusSource() = default;
    virtual bool next(std::string& id, std::string& text) = 0;
};

// Directory of plain-text files, one document per file, in sorted file order.
class DirectoryCorpus : public CorpusSource {
public:
    explicit DirectoryCorpus(const std::filesystem::path& dir);
    bool next(std::string& id, std::string& text) override;

private:
    std::vector<std::filesystem::path> files_;
    std::size_t index_ = 0;
};

// Single line-delimited JSON file of {"id","text"} records.
class JsonlCorpus : public CorpusSource {
public:
    explicit JsonlCorpus(const std::filesystem::path& file);
    bool next(std::string& id, std::string& text) override;

private:
    std::unique_ptr<std::ifstream> in_;
    std::size_t line_no_ = 0;
};

class MemoryCorpus : public CorpusSource {
public:
    explicit MemoryCorpus(std::vector<std::pair<std::string, std::string>> docs)
        : docs_(std::move(docs)) {}
    bool next(std::string& id, std::string& text) override;

private:
    std::vector<std::pair<std::string, std::string>> docs_;
    std::size_t index_ = 0;
};

// Opens a directory or a .jsonl file depending on what the path points at.
std::unique_ptr<CorpusSource> open_corpus(const std::filesystem::path& path);

// Exact occurrence counts (case-insensitive whole-phrase token matching) and
// the total token count, streamed document by document. Unreadable documents
// are counted in skipped_documents and never abort the stream.
CorpusStats count_entity_frequencies(CorpusSource& corpus,
                                     const std::vector<std::string>& lexicon);

// Entities with count/total_tokens strictly below tau_rare, sorted ascending
// by frequency, ties broken lexicographically by name.
std::vector<std::pair<std::string, double>> select_rare_entities(
    const CorpusStats& stats, const RarityConfig& config);

enum class Verdict { KEEP, DROP, UNDECIDED };

class RarityJudge {
public:
    virtual ~RarityJudge() = default;
    virtual Verdict judge(const std::string& candidate) = 0;
};

// Scripted verdicts for tests and fixtures: candidates listed in `drop` are
// dropped, everything else kept.
class ScriptedJudge : public RarityJudge {
public:
    explicit ScriptedJudge(std::vector<std::string> drop = {});
    Verdict judge(const std::string& candidate) override;

private:
    std::vector<std::string> drop_;
};

// Judges via a text-generation client; any completion containing "KEEP"
// keeps the candidate, "DROP" drops it, anything else is UNDECIDED.
class GeneratorJudge : public RarityJudge {
public:
    explicit GeneratorJudge(clients::TextGenerator& generator);
    Verdict judge(const std::string& candidate) override;

private:
    clients::TextGenerator& generator_;
};

struct VerdictRecord {
    std::string name;
    Verdict verdict;
    std::string note;  // failure detail for UNDECIDED
};

struct FilterResult {
    std::vector<std::string> kept;       // KEEP subset, input order preserved
    std::vector<VerdictRecord> audit;    // one record per candidate
};

// Keeps candidates the judge labels KEEP. Judge failures mark the candidate
// UNDECIDED (excluded) and are noted in the audit trail.
FilterResult filter_candidates(const std::vector<std::string>& candidates,
                               RarityJudge& evaluator);

// Newline-separated entity names; blank lines ignored.
std::vector<std::string> load_lexicon(const std::filesystem::path& path);

// Header record {"total_tokens","skipped_documents"}, then one
// {"name","count","frequency"} record per lexicon entry, ascending by name.
void save_stats_jsonl(const CorpusStats& stats, std::ostream& out);
CorpusStats load_stats_jsonl(std::istream& in);

const char* to_string(Verdict v);

}  // namespace medsynth::mining
