#pragma once

#include <atomic>
#include <memory>

#include "medsynth/clients.hpp"

namespace medsynth::clients {

// Count of HTTP requests issued by live clients since process start. Mock
// clients never touch this path; tests assert it stays flat in MOCK mode.
long live_request_count();

std::unique_ptr<TextGenerator> make_live_generator(const ClientConfig& cfg);
std::unique_ptr<Embedder> make_live_embedder(const ClientConfig& cfg);
std::unique_ptr<AccuracyEvaluator> make_live_evaluator(const ClientConfig& cfg);
std::unique_ptr<EntityDiscoverer> make_live_discoverer(const ClientConfig& cfg);
std::unique_ptr<SearchClient> make_live_search(const ClientConfig& cfg);
std::unique_ptr<DocumentReadClient> make_live_document_reader(const ClientConfig& cfg);

}  // namespace medsynth::clients
