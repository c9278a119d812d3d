#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medsynth/clients.hpp"
#include "medsynth/errors.hpp"

namespace medsynth::medtools {

enum class GuidelineStatus { NONE, CITED, GUIDELINE };

struct Document {
    std::string id;
    std::string text;
    double impact_factor = 0.0;
    GuidelineStatus guideline_status = GuidelineStatus::NONE;
    std::optional<std::vector<double>> embedding;
};

struct RankerConfig {
    double lambda = 0.4;        // relevance weight; authority gets 1 - lambda
    double impact_cap = 50.0;   // normalization knee for impact factor
    double impact_weight = 0.5;
    double guideline_weight = 0.5;
    void validate() const;
};

double cosine(std::span<const double> a, std::span<const double> b);

// Authority in [0,1]: weighted average of the capped, normalized impact
// factor and a 3-level guideline grade (NONE 0, CITED 0.5, GUIDELINE 1).
double authority_score(const Document& doc, const RankerConfig& config);

// Relevance in [0,1]: cosine similarity mapped from [-1,1].
double relevance_score(const Document& doc, std::span<const double> query_embedding);

// lambda * Rel + (1 - lambda) * Auth. ScoringError when the document has no
// embedding or the arity does not match the query.
double score_document(const Document& doc, std::span<const double> query_embedding,
                      const RankerConfig& config);

// Top-k by score descending, ties broken by document id ascending.
std::vector<std::pair<std::string, double>> rank_documents(
    const std::vector<Document>& docs, std::span<const double> query_embedding,
    const RankerConfig& config, std::size_t k);

// Priors and per-(symptom, diagnosis) likelihoods for one clinical context.
struct EvidenceTable {
    std::string context;
    std::map<std::string, double> priors;  // diagnosis -> P(D|c)
    std::map<std::pair<std::string, std::string>, double> likelihoods;  // (s, D) -> P(s|D,c)

    void validate() const;  // priors sum to 1 +/- 1e-9; likelihoods in [0,1]
    double likelihood(const std::string& symptom, const std::string& diagnosis) const;
};

struct InferenceOptions {
    // The product form annihilates on exact zeros. The optional floor is for
    // noisy tables only; default keeps zeros exact.
    bool floor_enabled = false;
    double likelihood_floor = 1e-12;
};

// Posterior over diagnoses given observed symptoms: prior times the product
// of per-symptom likelihoods, normalized. Log-space accumulation internally;
// every (symptom, diagnosis) pair must be present in the table. All-zero
// joint mass raises EvidenceError rather than falling back to uniform.
std::map<std::string, double> diagnosis_posterior(
    const std::vector<std::string>& symptoms, const EvidenceTable& table,
    const InferenceOptions& options = {});

// Treats `current` as the prior and applies the same rule for the new
// symptoms only. Chains to the same result as one batch posterior over the
// union of symptoms.
std::map<std::string, double> update_posterior(
    const std::map<std::string, double>& current,
    const std::vector<std::string>& new_symptoms, const EvidenceTable& table,
    const InferenceOptions& options = {});

// {"context","priors":{...},"likelihoods":{"symptom|diagnosis":p,...}}
EvidenceTable load_evidence_json(std::istream& in);
EvidenceTable load_evidence_file(const std::filesystem::path& path);
void save_evidence_json(const EvidenceTable& table, std::ostream& out);

// Line-delimited JSON documents. Missing embeddings are produced with the
// embedder when one is supplied.
std::vector<Document> load_documents_jsonl(std::istream& in,
                                           clients::Embedder* embedder = nullptr);
std::vector<Document> load_documents_file(const std::filesystem::path& path,
                                          clients::Embedder* embedder = nullptr);

GuidelineStatus guideline_status_from_string(const std::string& s);
const char* to_string(GuidelineStatus s);

}  // namespace medsynth::medtools
