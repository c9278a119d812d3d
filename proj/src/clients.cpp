#include "medsynth/clients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "medsynth/clients_http.hpp"
#include "medsynth/rng.hpp"

namespace medsynth::clients {

using nlohmann::json;

namespace {

std::string render_response(const std::string& templ, const std::string& request) {
    std::string out = templ;
    const std::string key = "{request}";
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
        out.replace(pos, key.size(), request);
        pos += request.size();
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// ClientConfig

ClientConfig ClientConfig::from_json(const json& j) {
    ClientConfig cfg;
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "mock") {
            cfg.mode = ClientMode::MOCK;
        } else if (m == "live") {
            cfg.mode = ClientMode::LIVE;
        } else {
            throw ConfigError("client mode must be \"mock\" or \"live\", got: " + m);
        }
    }
    if (j.contains("endpoint")) cfg.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("auth_env")) cfg.auth_env = j.at("auth_env").get<std::string>();
    if (j.contains("timeout_ms")) cfg.timeout_ms = j.at("timeout_ms").get<int>();
    if (j.contains("retries")) cfg.retries = j.at("retries").get<int>();
    if (j.contains("mock_kind")) cfg.mock_kind = j.at("mock_kind").get<std::string>();
    if (j.contains("script")) cfg.script_json = j.at("script").dump();
    if (j.contains("strict")) cfg.strict = j.at("strict").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dimension")) cfg.dimension = j.at("dimension").get<std::size_t>();
    cfg.validate();
    return cfg;
}

void ClientConfig::validate() const {
    if (retries < 0) throw ConfigError("client retries must be >= 0");
    if (timeout_ms <= 0) throw ConfigError("client timeout_ms must be > 0");
    if (mode == ClientMode::LIVE && endpoint.empty()) {
        throw ConfigError("LIVE client mode requires an endpoint");
    }
    if (mode == ClientMode::MOCK && mock_kind == "script") {
        json parsed = json::parse(script_json, nullptr, false);
        if (!parsed.is_array()) {
            throw ConfigError("MOCK script clients require a script array");
        }
    }
    if (dimension == 0) throw ConfigError("embedder dimension must be >= 1");
}

// ---------------------------------------------------------------------------
// MockScript

MockScript::MockScript(std::vector<ScriptEntry> entries, bool strict)
    : strict_(strict) {
    slots_.reserve(entries.size());
    for (auto& e : entries) {
        slots_.push_back(Slot{std::move(e), false});
    }
}

MockScript MockScript::from_json(const json& entries, bool strict) {
    if (!entries.is_array()) {
        throw ConfigError("mock script must be a JSON array");
    }
    std::vector<ScriptEntry> parsed;
    for (const auto& e : entries) {
        ScriptEntry entry;
        if (e.contains("pattern")) entry.pattern = e.at("pattern").get<std::string>();
        if (e.contains("response")) entry.response = e.at("response").get<std::string>();
        if (e.contains("fail")) entry.fail = e.at("fail").get<bool>();
        if (e.contains("repeat")) entry.repeat = e.at("repeat").get<bool>();
        parsed.push_back(std::move(entry));
    }
    return MockScript(std::move(parsed), strict);
}

std::string MockScript::next(const std::string& request) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& slot : slots_) {
        if (slot.used && !slot.entry.repeat) {
            continue;
        }
        const bool matches = slot.entry.pattern == "*" ||
                             request.find(slot.entry.pattern) != std::string::npos;
        if (!matches) {
            continue;
        }
        slot.used = true;
        ++consumed_;
        if (slot.entry.fail) {
            throw TransportError("scripted transport failure for request: " +
                                 request.substr(0, 80));
        }
        return render_response(slot.entry.response, request);
    }
    if (strict_) {
        throw ScriptViolationError("no script entry matches request: " +
                                   request.substr(0, 200));
    }
    return {};
}

std::size_t MockScript::consumed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return consumed_;
}

// ---------------------------------------------------------------------------
// ScriptedGenerator

ScriptedGenerator::ScriptedGenerator(MockScript script, int retries)
    : script_(std::move(script)), retries_(retries) {}

std::string ScriptedGenerator::generate(const std::string& prompt, const GenParams&) {
    auto text = with_retries(retries_, last_attempts_,
                             [&] { return script_.next(prompt); });
    total_attempts_ += last_attempts_;
    return text;
}

// ---------------------------------------------------------------------------
// TemplateQuestionGenerator

std::string TemplateQuestionGenerator::generate(const std::string& prompt,
                                                const GenParams&) {
    // Parse FACT lines of the form
    //   FACT k: subject | predicate | object [| temporal=..][| spatial=..][| clinical=..]
    std::istringstream in(prompt);
    std::string line;
    std::string start_entity;
    std::vector<std::string> clauses;
    int complexity = 0;
    while (std::getline(in, line)) {
        if (line.rfind("FACT ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) continue;
            std::string body = line.substr(colon + 2);
            std::vector<std::string> fields;
            std::size_t pos = 0;
            while (true) {
                auto bar = body.find(" | ", pos);
                if (bar == std::string::npos) {
                    fields.push_back(body.substr(pos));
                    break;
                }
                fields.push_back(body.substr(pos, bar - pos));
                pos = bar + 3;
            }
            if (fields.size() < 3) continue;
            if (clauses.empty()) {
                start_entity = fields[0];
            }
            std::string clause = fields[1];
            for (std::size_t i = 3; i < fields.size(); ++i) {
                const auto eq = fields[i].find('=');
                if (eq == std::string::npos) continue;
                const std::string tag = fields[i].substr(0, eq);
                const std::string value = fields[i].substr(eq + 1);
                if (tag == "temporal") clause += " during " + value;
                else if (tag == "spatial") clause += " at " + value;
                else if (tag == "clinical") clause += " given " + value;
            }
            clauses.push_back(clause);
        } else if (line.rfind("COMPLEXITY: ", 0) == 0) {
            complexity = std::atoi(line.c_str() + 12);
        }
    }
    if (clauses.empty()) {
        // Not a structured question prompt; echo a generic completion.
        return "ok";
    }
    std::string q = "Starting from " + start_entity + ", follow ";
    for (std::size_t i = 0; i < clauses.size(); ++i) {
        if (i > 0) {
            q += (i + 1 == clauses.size()) ? ", and finally " : ", then ";
        }
        q += "\"" + clauses[i] + "\"";
    }
    q += ". Which entity is reached at the end of this chain?";
    if (complexity > 0) {
        q += " (Resolve each intermediate entity independently before naming the final one; indirection level " +
             std::to_string(complexity) + ".)";
    }
    return q;
}

// ---------------------------------------------------------------------------
// HashEmbedder

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw ArgumentError("HashEmbedder: dimension must be >= 1");
}

std::vector<double> HashEmbedder::embed(const std::string& text) {
    Rng rng(fnv1a(text) ^ (seed_ * 0x9e3779b97f4a7c15ull));
    std::vector<double> v(dimension_);
    double norm_sq = 0.0;
    for (auto& x : v) {
        x = rng.next_double() * 2.0 - 1.0;
        norm_sq += x * x;
    }
    if (norm_sq == 0.0) {
        v[0] = 1.0;
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) {
        x *= inv;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Evaluators

ScriptedEvaluator::ScriptedEvaluator(MockScript script, int retries)
    : script_(std::move(script)), retries_(retries) {}

double ScriptedEvaluator::evaluate(const std::string& question,
                                   const std::string& answer, int complexity) {
    ++calls_;
    const std::string request = "complexity=" + std::to_string(complexity) +
                                "\n" + question + "\n" + answer;
    std::string text;
    int attempts = 0;
    try {
        text = with_retries(retries_, attempts, [&] { return script_.next(request); });
    } catch (const TransportError& e) {
        throw UnknownAccuracyError(std::string("accuracy unavailable: ") + e.what());
    }
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str()) {
        throw ContractError("scripted accuracy is not a number: " + text);
    }
    if (value < 0.0 || value > 1.0 || !std::isfinite(value)) {
        throw ContractError("accuracy out of range [0,1]: " + text);
    }
    return value;
}

AttemptSamplingEvaluator::AttemptSamplingEvaluator(AttemptFn attempt,
                                                   int attempts_per_estimate)
    : attempt_(std::move(attempt)), attempts_(attempts_per_estimate) {
    if (attempts_ < 1) throw ArgumentError("attempts_per_estimate must be >= 1");
}

double AttemptSamplingEvaluator::evaluate(const std::string& question,
                                          const std::string& answer,
                                          int /*complexity*/) {
    int correct = 0;
    for (int i = 0; i < attempts_; ++i) {
        if (attempt_(question, answer, i)) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(attempts_);
}

// ---------------------------------------------------------------------------
// ScriptedDiscoverer

ScriptedDiscoverer::ScriptedDiscoverer(MockScript script, int retries)
    : script_(std::move(script)), retries_(retries) {}

std::vector<DiscoveredEntity> ScriptedDiscoverer::discover(
    const std::string& context_entity) {
    std::string payload;
    int attempts = 0;
    try {
        payload = with_retries(retries_, attempts,
                               [&] { return script_.next(context_entity); });
    } catch (const TransportError& e) {
        throw DiscoveryError(std::string("discovery failed: ") + e.what());
    }
    if (payload.empty()) {
        return {};
    }
    json parsed = json::parse(payload, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
        throw DiscoveryError("discovery payload is not a JSON array: " + payload);
    }
    std::vector<DiscoveredEntity> out;
    for (const auto& item : parsed) {
        DiscoveredEntity e;
        if (item.is_string()) {
            e.name = item.get<std::string>();
        } else if (item.is_object()) {
            e.name = item.at("name").get<std::string>();
            if (item.contains("predicate")) {
                e.predicate = item.at("predicate").get<std::string>();
            }
        } else {
            throw DiscoveryError("discovery entry must be a string or object");
        }
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canned search / read

std::string CannedSearch::search(const std::string& query) {
    return "web results for: " + query;
}

std::string CannedDocumentRead::read(const std::string& reference) {
    return "document " + reference + " summary: no salient findings beyond the cited source.";
}

// ---------------------------------------------------------------------------
// Factories

namespace {

MockScript script_from_config(const ClientConfig& cfg) {
    json parsed = json::parse(cfg.script_json);
    return MockScript::from_json(parsed, cfg.strict);
}

}  // namespace

std::unique_ptr<TextGenerator> make_generator(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_generator(cfg);
    }
    if (cfg.mock_kind == "question_template") {
        return std::make_unique<TemplateQuestionGenerator>();
    }
    if (cfg.mock_kind == "script") {
        return std::make_unique<ScriptedGenerator>(script_from_config(cfg), cfg.retries);
    }
    throw ConfigError("unknown generator mock_kind: " + cfg.mock_kind);
}

std::unique_ptr<Embedder> make_embedder(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_embedder(cfg);
    }
    if (cfg.mock_kind == "hash" || cfg.mock_kind == "script") {
        return std::make_unique<HashEmbedder>(cfg.dimension, cfg.seed);
    }
    throw ConfigError("unknown embedder mock_kind: " + cfg.mock_kind);
}

std::unique_ptr<AccuracyEvaluator> make_evaluator(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_evaluator(cfg);
    }
    if (cfg.mock_kind == "script") {
        return std::make_unique<ScriptedEvaluator>(script_from_config(cfg), cfg.retries);
    }
    throw ConfigError("unknown evaluator mock_kind: " + cfg.mock_kind);
}

std::unique_ptr<EntityDiscoverer> make_discoverer(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_discoverer(cfg);
    }
    if (cfg.mock_kind == "script") {
        return std::make_unique<ScriptedDiscoverer>(script_from_config(cfg), cfg.retries);
    }
    throw ConfigError("unknown discoverer mock_kind: " + cfg.mock_kind);
}

std::unique_ptr<SearchClient> make_search(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_search(cfg);
    }
    if (cfg.mock_kind == "canned") {
        return std::make_unique<CannedSearch>();
    }
    if (cfg.mock_kind == "script") {
        return std::make_unique<ScriptedSearch>(script_from_config(cfg));
    }
    throw ConfigError("unknown search mock_kind: " + cfg.mock_kind);
}

std::unique_ptr<DocumentReadClient> make_document_reader(const ClientConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ClientMode::LIVE) {
        return make_live_document_reader(cfg);
    }
    return std::make_unique<CannedDocumentRead>();
}

}  // namespace medsynth::clients
