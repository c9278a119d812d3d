#include "medsynth/medtools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace medsynth::medtools {

using nlohmann::json;
using nlohmann::ordered_json;

void RankerConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) {
        throw ConfigError("ranker lambda must be in [0,1]");
    }
    if (!(impact_cap > 0.0)) {
        throw ConfigError("ranker impact_cap must be > 0");
    }
    if (impact_weight < 0.0 || guideline_weight < 0.0 ||
        std::abs(impact_weight + guideline_weight - 1.0) > 1e-9) {
        throw ConfigError("authority weights must be nonnegative and sum to 1");
    }
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ContractError("cosine: arity mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double authority_score(const Document& doc, const RankerConfig& config) {
    config.validate();
    if (doc.impact_factor < 0.0) {
        throw ContractError("impact_factor must be >= 0: " + doc.id);
    }
    const double impact = std::min(doc.impact_factor / config.impact_cap, 1.0);
    double grade = 0.0;
    switch (doc.guideline_status) {
        case GuidelineStatus::NONE: grade = 0.0; break;
        case GuidelineStatus::CITED: grade = 0.5; break;
        case GuidelineStatus::GUIDELINE: grade = 1.0; break;
    }
    return config.impact_weight * impact + config.guideline_weight * grade;
}

double relevance_score(const Document& doc, std::span<const double> query_embedding) {
    if (!doc.embedding) {
        throw ScoringError("document has no embedding: " + doc.id);
    }
    if (doc.embedding->size() != query_embedding.size()) {
        throw ScoringError("embedding arity mismatch for document: " + doc.id);
    }
    // Map cosine from [-1,1] into [0,1] so the lambda blend stays bounded.
    return (cosine(*doc.embedding, query_embedding) + 1.0) / 2.0;
}

double score_document(const Document& doc, std::span<const double> query_embedding,
                      const RankerConfig& config) {
    const double rel = relevance_score(doc, query_embedding);
    const double auth = authority_score(doc, config);
    return config.lambda * rel + (1.0 - config.lambda) * auth;
}

std::vector<std::pair<std::string, double>> rank_documents(
    const std::vector<Document>& docs, std::span<const double> query_embedding,
    const RankerConfig& config, std::size_t k) {
    if (k == 0) {
        throw ArgumentError("rank_documents: k must be >= 1");
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(docs.size());
    for (const Document& d : docs) {
        scored.emplace_back(d.id, score_document(d, query_embedding, config));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) {
        scored.resize(k);
    }
    return scored;
}

// ---------------------------------------------------------------------------
// Bayesian diagnosis

void EvidenceTable::validate() const {
    if (priors.empty()) {
        throw EvidenceError("evidence table has no priors");
    }
    double sum = 0.0;
    for (const auto& [d, p] : priors) {
        if (p < 0.0 || p > 1.0 || !std::isfinite(p)) {
            throw EvidenceError("prior out of range for diagnosis: " + d);
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw EvidenceError("priors sum to " + std::to_string(sum) + ", expected 1");
    }
    for (const auto& [key, p] : likelihoods) {
        if (p < 0.0 || p > 1.0 || !std::isfinite(p)) {
            throw EvidenceError("likelihood out of range for (" + key.first + ", " +
                                key.second + ")");
        }
    }
}

double EvidenceTable::likelihood(const std::string& symptom,
                                 const std::string& diagnosis) const {
    auto it = likelihoods.find({symptom, diagnosis});
    if (it == likelihoods.end()) {
        throw EvidenceError("no likelihood for (" + symptom + ", " + diagnosis + ")");
    }
    return it->second;
}

namespace {

std::map<std::string, double> posterior_from_priors(
    const std::map<std::string, double>& priors,
    const std::vector<std::string>& symptoms, const EvidenceTable& table,
    const InferenceOptions& options) {
    // Log-space accumulation; exact zeros tracked separately so the product
    // form annihilates exactly unless the floor is enabled.
    struct Mass {
        double log_weight = 0.0;
        bool zero = false;
    };
    std::map<std::string, Mass> masses;
    for (const auto& [diagnosis, prior] : priors) {
        Mass m;
        if (prior <= 0.0) {
            m.zero = true;
        } else {
            m.log_weight = std::log(prior);
        }
        for (const std::string& symptom : symptoms) {
            double lik = table.likelihood(symptom, diagnosis);
            if (options.floor_enabled) {
                lik = std::max(lik, options.likelihood_floor);
            }
            if (lik <= 0.0) {
                m.zero = true;
            } else if (!m.zero) {
                m.log_weight += std::log(lik);
            }
        }
        masses.emplace(diagnosis, m);
    }

    double max_log = -std::numeric_limits<double>::infinity();
    for (const auto& [_, m] : masses) {
        if (!m.zero) {
            max_log = std::max(max_log, m.log_weight);
        }
    }
    if (!std::isfinite(max_log)) {
        throw EvidenceError("degenerate evidence: joint mass is zero for every diagnosis");
    }
    double total = 0.0;
    std::map<std::string, double> posterior;
    for (const auto& [diagnosis, m] : masses) {
        const double w = m.zero ? 0.0 : std::exp(m.log_weight - max_log);
        posterior.emplace(diagnosis, w);
        total += w;
    }
    for (auto& [_, p] : posterior) {
        p /= total;
    }
    return posterior;
}

}  // namespace

std::map<std::string, double> diagnosis_posterior(
    const std::vector<std::string>& symptoms, const EvidenceTable& table,
    const InferenceOptions& options) {
    table.validate();
    return posterior_from_priors(table.priors, symptoms, table, options);
}

std::map<std::string, double> update_posterior(
    const std::map<std::string, double>& current,
    const std::vector<std::string>& new_symptoms, const EvidenceTable& table,
    const InferenceOptions& options) {
    if (current.empty()) {
        throw ArgumentError("update_posterior: current distribution is empty");
    }
    double sum = 0.0;
    for (const auto& [_, p] : current) {
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ArgumentError("update_posterior: current distribution is not normalized");
    }
    if (new_symptoms.empty()) {
        return current;
    }
    return posterior_from_priors(current, new_symptoms, table, options);
}

// ---------------------------------------------------------------------------
// I/O

EvidenceTable load_evidence_json(std::istream& in) {
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw FormatError("evidence file is not a JSON object");
    }
    EvidenceTable table;
    try {
        table.context = j.value("context", "");
        for (const auto& [diagnosis, p] : j.at("priors").items()) {
            table.priors[diagnosis] = p.get<double>();
        }
        for (const auto& [key, p] : j.at("likelihoods").items()) {
            const auto bar = key.find('|');
            if (bar == std::string::npos) {
                throw FormatError("likelihood key must be \"symptom|diagnosis\": " + key);
            }
            table.likelihoods[{key.substr(0, bar), key.substr(bar + 1)}] = p.get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed evidence table: ") + e.what());
    }
    table.validate();
    return table;
}

EvidenceTable load_evidence_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open evidence file: " + path.string());
    }
    return load_evidence_json(in);
}

void save_evidence_json(const EvidenceTable& table, std::ostream& out) {
    ordered_json j;
    j["context"] = table.context;
    ordered_json priors = ordered_json::object();
    for (const auto& [d, p] : table.priors) {
        priors[d] = p;
    }
    j["priors"] = priors;
    ordered_json liks = ordered_json::object();
    for (const auto& [key, p] : table.likelihoods) {
        liks[key.first + "|" + key.second] = p;
    }
    j["likelihoods"] = liks;
    out << j.dump(2) << '\n';
}

std::vector<Document> load_documents_jsonl(std::istream& in,
                                           clients::Embedder* embedder) {
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw FormatError("document line " + std::to_string(line_no) + " is not JSON");
        }
        Document d;
        try {
            d.id = j.at("id").get<std::string>();
            d.text = j.at("text").get<std::string>();
            d.impact_factor = j.value("impact_factor", 0.0);
            d.guideline_status =
                guideline_status_from_string(j.value("guideline_status", "NONE"));
            if (j.contains("embedding")) {
                d.embedding = j.at("embedding").get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw FormatError("document line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!d.embedding && embedder != nullptr) {
            d.embedding = embedder->embed(d.text);
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<Document> load_documents_file(const std::filesystem::path& path,
                                          clients::Embedder* embedder) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open document corpus: " + path.string());
    }
    return load_documents_jsonl(in, embedder);
}

GuidelineStatus guideline_status_from_string(const std::string& s) {
    if (s == "NONE") return GuidelineStatus::NONE;
    if (s == "CITED") return GuidelineStatus::CITED;
    if (s == "GUIDELINE") return GuidelineStatus::GUIDELINE;
    throw FormatError("unknown guideline status: " + s);
}

const char* to_string(GuidelineStatus s) {
    switch (s) {
        case GuidelineStatus::NONE: return "NONE";
        case GuidelineStatus::CITED: return "CITED";
        case GuidelineStatus::GUIDELINE: return "GUIDELINE";
    }
    return "NONE";
}

}  // namespace medsynth::medtools
