#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medsynth/errors.hpp"

namespace medsynth::clients {

enum class ClientMode { MOCK, LIVE };

// One config section per external dependency. LIVE clients speak a single
// generic wire protocol (HTTP, JSON bodies); MOCK clients are either scripted
// or one of the deterministic builtin kinds. Secrets are referenced by
// environment-variable name, never stored.
struct ClientConfig {
    ClientMode mode = ClientMode::MOCK;
    std::string endpoint;      // required in LIVE mode
    std::string auth_env;      // name of the env var holding the token
    int timeout_ms = 10000;
    int retries = 2;

    // MOCK settings
    std::string mock_kind = "script";  // script | question_template | hash | canned
    std::string script_json = "[]";    // JSON array of script entries
    bool strict = true;
    std::uint64_t seed = 0;
    std::size_t dimension = 64;        // embedder arity

    static ClientConfig from_json(const nlohmann::json& j);
    void validate() const;  // ConfigError on LIVE without endpoint etc.
};

struct GenParams {
    double temperature = 0.0;
    int max_tokens = 512;
};

// ---------------------------------------------------------------------------
// Interfaces

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string generate(const std::string& prompt,
                                 const GenParams& params = {}) = 0;
    // Retry accounting: attempts made by the most recent call / in total.
    virtual int last_call_attempts() const { return 1; }
    virtual long total_attempts() const { return 0; }
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

class AccuracyEvaluator {
public:
    virtual ~AccuracyEvaluator() = default;
    // Estimated accuracy in [0,1] for (question, answer). The complexity of
    // the item is included in the rendered request so scripts can key on a
    // complexity marker as well as on the question text.
    virtual double evaluate(const std::string& question,
                            const std::string& answer,
                            int complexity = 0) = 0;
};

struct DiscoveredEntity {
    std::string name;
    std::optional<std::string> predicate;
};

class EntityDiscoverer {
public:
    virtual ~EntityDiscoverer() = default;
    virtual std::vector<DiscoveredEntity> discover(
        const std::string& context_entity) = 0;
};

class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::string search(const std::string& query) = 0;
};

class DocumentReadClient {
public:
    virtual ~DocumentReadClient() = default;
    virtual std::string read(const std::string& reference) = 0;
};

// ---------------------------------------------------------------------------
// Scripting

// One canned exchange. `pattern` is "*" or a substring of the rendered
// request; `response` may contain "{request}" which is replaced with the
// request text. `fail` entries raise a (retriable) transport error instead.
struct ScriptEntry {
    std::string pattern = "*";
    std::string response;
    bool fail = false;
    bool repeat = false;
};

class MockScript {
public:
    MockScript() = default;
    MockScript(std::vector<ScriptEntry> entries, bool strict = true);
    MockScript(MockScript&& other) noexcept
        : slots_(std::move(other.slots_)),
          strict_(other.strict_),
          consumed_(other.consumed_) {}
    MockScript& operator=(MockScript&& other) noexcept {
        slots_ = std::move(other.slots_);
        strict_ = other.strict_;
        consumed_ = other.consumed_;
        return *this;
    }
    static MockScript from_json(const nlohmann::json& entries, bool strict = true);

    // Returns the canned response for `request`, consuming the first live
    // matching entry. Consumption is serialized internally so concurrent
    // callers keep the ordering guarantee. Throws TransportError for `fail`
    // entries, ScriptViolationError when strict and nothing matches;
    // non-strict unmatched calls return "".
    std::string next(const std::string& request);

    std::size_t consumed() const;

private:
    struct Slot {
        ScriptEntry entry;
        bool used = false;
    };
    std::vector<Slot> slots_;
    bool strict_ = true;
    std::size_t consumed_ = 0;
    mutable std::mutex mu_;
};

// Shared retry loop: transport errors are retried up to `retries` extra
// attempts, so total attempts <= retries + 1.
template <typename F>
auto with_retries(int retries, int& attempts_out, F&& fn) {
    int attempt = 0;
    for (;;) {
        ++attempt;
        try {
            auto result = fn();
            attempts_out = attempt;
            return result;
        } catch (const TransportError&) {
            if (attempt > retries) {
                attempts_out = attempt;
                throw;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Deterministic mock implementations

class ScriptedGenerator : public TextGenerator {
public:
    explicit ScriptedGenerator(MockScript script, int retries = 0);
    std::string generate(const std::string& prompt, const GenParams&) override;
    int last_call_attempts() const override { return last_attempts_; }
    long total_attempts() const override { return total_attempts_; }

private:
    MockScript script_;
    int retries_;
    int last_attempts_ = 0;
    long total_attempts_ = 0;
};

// Builtin deterministic question writer. Understands the structured prompts
// produced by the synthesis module (FACT / ANSWER ENTITY / COMPLEXITY lines)
// and renders a chained question that names only the start entity and the
// predicates, so the answer entity can never leak into the question text.
class TemplateQuestionGenerator : public TextGenerator {
public:
    std::string generate(const std::string& prompt, const GenParams&) override;
};

// Mock embedder: seeded hash of the text drives a pseudo-random unit vector.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0);
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> embed(const std::string& text) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

class ScriptedEvaluator : public AccuracyEvaluator {
public:
    explicit ScriptedEvaluator(MockScript script, int retries = 0);
    double evaluate(const std::string& question, const std::string& answer,
                    int complexity) override;
    long calls() const { return calls_; }

private:
    MockScript script_;
    int retries_;
    long calls_ = 0;
};

// Averages k pass/fail attempts from an attempt-level judge; the sample size
// behind a single accuracy estimate.
class AttemptSamplingEvaluator : public AccuracyEvaluator {
public:
    using AttemptFn = std::function<bool(const std::string& question,
                                         const std::string& answer,
                                         int attempt)>;
    AttemptSamplingEvaluator(AttemptFn attempt, int attempts_per_estimate = 4);
    double evaluate(const std::string& question, const std::string& answer,
                    int complexity) override;

private:
    AttemptFn attempt_;
    int attempts_;
};

class ScriptedDiscoverer : public EntityDiscoverer {
public:
    explicit ScriptedDiscoverer(MockScript script, int retries = 0);
    // Scripted payloads are JSON arrays: [{"name":"x","predicate":"inhibits"}].
    // "{request}" inside the payload is replaced with the context entity.
    std::vector<DiscoveredEntity> discover(const std::string& context_entity) override;

private:
    MockScript script_;
    int retries_;
};

// Canned deterministic search/read mocks: the payload echoes the request so
// downstream token-overlap analytics behave predictably.
class CannedSearch : public SearchClient {
public:
    std::string search(const std::string& query) override;
};

class CannedDocumentRead : public DocumentReadClient {
public:
    std::string read(const std::string& reference) override;
};

class ScriptedSearch : public SearchClient {
public:
    explicit ScriptedSearch(MockScript script) : script_(std::move(script)) {}
    std::string search(const std::string& query) override { return script_.next(query); }

private:
    MockScript script_;
};

// ---------------------------------------------------------------------------
// Factories: MOCK configs never construct a live transport, so mock clients
// are structurally incapable of network activity (asserted in tests via the
// live-transport instrumentation counter in clients_http.hpp).

std::unique_ptr<TextGenerator> make_generator(const ClientConfig& cfg);
std::unique_ptr<Embedder> make_embedder(const ClientConfig& cfg);
std::unique_ptr<AccuracyEvaluator> make_evaluator(const ClientConfig& cfg);
std::unique_ptr<EntityDiscoverer> make_discoverer(const ClientConfig& cfg);
std::unique_ptr<SearchClient> make_search(const ClientConfig& cfg);
std::unique_ptr<DocumentReadClient> make_document_reader(const ClientConfig& cfg);

}  // namespace medsynth::clients
