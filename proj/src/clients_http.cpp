#include "medsynth/clients_http.hpp"

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

namespace medsynth::clients {

using nlohmann::json;

namespace {

std::atomic<long> g_live_requests{0};

// One wire protocol for every live client: POST <endpoint><path> with a JSON
// body, JSON response. Vendor specifics stay out of core; only the paths and
// field names below are pinned.
class HttpWire {
public:
    explicit HttpWire(ClientConfig cfg) : cfg_(std::move(cfg)) {
        if (!cfg_.auth_env.empty()) {
            if (const char* token = std::getenv(cfg_.auth_env.c_str())) {
                token_ = token;
            }
        }
    }

    json call(const std::string& path, const json& body) const {
        int attempts = 0;
        return with_retries(cfg_.retries, attempts, [&] { return post(path, body); });
    }

private:
    json post(const std::string& path, const json& body) const {
        ++g_live_requests;
        httplib::Client client(cfg_.endpoint);
        client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
        client.set_read_timeout(0, cfg_.timeout_ms * 1000);
        httplib::Headers headers;
        if (!token_.empty()) {
            headers.emplace("Authorization", "Bearer " + token_);
        }
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            throw TransportError("transport failure calling " + path + ": " +
                                 httplib::to_string(res.error()));
        }
        if (res->status >= 500) {
            throw TransportError("server error " + std::to_string(res->status) +
                                 " calling " + path);
        }
        if (res->status != 200) {
            throw Error("request to " + path + " failed with status " +
                        std::to_string(res->status));
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            throw FormatError("non-JSON response from " + path);
        }
        return parsed;
    }

    ClientConfig cfg_;
    std::string token_;
};

class LiveGenerator : public TextGenerator {
public:
    explicit LiveGenerator(const ClientConfig& cfg) : wire_(cfg) {}

    std::string generate(const std::string& prompt, const GenParams& params) override {
        json body = {{"prompt", prompt},
                     {"temperature", params.temperature},
                     {"max_tokens", params.max_tokens}};
        json res = wire_.call("/generate", body);
        ++calls_;
        return res.at("text").get<std::string>();
    }

    long total_attempts() const override { return calls_; }

private:
    HttpWire wire_;
    long calls_ = 0;
};

class LiveEmbedder : public Embedder {
public:
    explicit LiveEmbedder(const ClientConfig& cfg) : wire_(cfg), dimension_(cfg.dimension) {}

    std::size_t dimension() const override { return dimension_; }

    std::vector<double> embed(const std::string& text) override {
        json res = wire_.call("/embed", json{{"text", text}});
        auto v = res.at("embedding").get<std::vector<double>>();
        if (v.size() != dimension_) {
            throw ContractError("embedding arity mismatch: expected " +
                                std::to_string(dimension_) + ", got " +
                                std::to_string(v.size()));
        }
        return v;
    }

private:
    HttpWire wire_;
    std::size_t dimension_;
};

class LiveEvaluator : public AccuracyEvaluator {
public:
    explicit LiveEvaluator(const ClientConfig& cfg) : wire_(cfg) {}

    double evaluate(const std::string& question, const std::string& answer,
                    int complexity) override {
        json body = {{"question", question}, {"answer", answer}, {"complexity", complexity}};
        json res;
        try {
            res = wire_.call("/evaluate", body);
        } catch (const TransportError& e) {
            throw UnknownAccuracyError(std::string("accuracy unavailable: ") + e.what());
        }
        const double value = res.at("accuracy").get<double>();
        if (value < 0.0 || value > 1.0) {
            throw ContractError("accuracy out of range [0,1]: " + std::to_string(value));
        }
        return value;
    }

private:
    HttpWire wire_;
};

class LiveDiscoverer : public EntityDiscoverer {
public:
    explicit LiveDiscoverer(const ClientConfig& cfg) : wire_(cfg) {}

    std::vector<DiscoveredEntity> discover(const std::string& context_entity) override {
        json res;
        try {
            res = wire_.call("/discover", json{{"entity", context_entity}});
        } catch (const TransportError& e) {
            throw DiscoveryError(std::string("discovery failed: ") + e.what());
        }
        std::vector<DiscoveredEntity> out;
        for (const auto& item : res.at("entities")) {
            DiscoveredEntity e;
            e.name = item.at("name").get<std::string>();
            if (item.contains("predicate")) {
                e.predicate = item.at("predicate").get<std::string>();
            }
            out.push_back(std::move(e));
        }
        return out;
    }

private:
    HttpWire wire_;
};

class LiveSearch : public SearchClient {
public:
    explicit LiveSearch(const ClientConfig& cfg) : wire_(cfg) {}

    std::string search(const std::string& query) override {
        json res = wire_.call("/search", json{{"query", query}});
        return res.at("results").get<std::string>();
    }

private:
    HttpWire wire_;
};

class LiveDocumentRead : public DocumentReadClient {
public:
    explicit LiveDocumentRead(const ClientConfig& cfg) : wire_(cfg) {}

    std::string read(const std::string& reference) override {
        json res = wire_.call("/read", json{{"reference", reference}});
        return res.at("text").get<std::string>();
    }

private:
    HttpWire wire_;
};

}  // namespace

long live_request_count() { return g_live_requests.load(); }

std::unique_ptr<TextGenerator> make_live_generator(const ClientConfig& cfg) {
    return std::make_unique<LiveGenerator>(cfg);
}
std::unique_ptr<Embedder> make_live_embedder(const ClientConfig& cfg) {
    return std::make_unique<LiveEmbedder>(cfg);
}
std::unique_ptr<AccuracyEvaluator> make_live_evaluator(const ClientConfig& cfg) {
    return std::make_unique<LiveEvaluator>(cfg);
}
std::unique_ptr<EntityDiscoverer> make_live_discoverer(const ClientConfig& cfg) {
    return std::make_unique<LiveDiscoverer>(cfg);
}
std::unique_ptr<SearchClient> make_live_search(const ClientConfig& cfg) {
    return std::make_unique<LiveSearch>(cfg);
}
std::unique_ptr<DocumentReadClient> make_live_document_reader(const ClientConfig& cfg) {
    return std::make_unique<LiveDocumentRead>(cfg);
}

}  // namespace medsynth::clients
