#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "medsynth/cli.hpp"
#include "medsynth/rng.hpp"
#include "medsynth/text.hpp"

namespace medsynth::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write: " + path.string());
    }
    out << body;
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write: " + path.string());
    }
    out << j.dump(2) << '\n';
}

void require_input(const std::string& path, const std::string& what) {
    if (path.empty()) {
        throw ConfigError("config is missing the " + what + " path");
    }
    if (!std::filesystem::exists(path)) {
        throw ConfigError(what + " path does not exist: " + path);
    }
}

std::filesystem::path ensure_output_dir(const PipelineConfig& config) {
    if (config.paths.output.empty()) {
        throw ConfigError("config is missing the output path");
    }
    std::filesystem::path dir(config.paths.output);
    std::filesystem::create_directories(dir);
    return dir;
}

agent::RarityLexicon load_rarity_lexicon(const PipelineConfig& config) {
    agent::RarityLexicon lexicon;
    if (config.paths.rarity_stats.empty()) {
        return lexicon;
    }
    std::ifstream in(config.paths.rarity_stats);
    if (!in) {
        throw ConfigError("rarity_stats path does not exist: " +
                          config.paths.rarity_stats);
    }
    mining::CorpusStats stats = mining::load_stats_jsonl(in);
    for (const auto& [name, count] : stats.entity_counts) {
        const double freq = stats.total_tokens == 0
                                ? 0.0
                                : static_cast<double>(count) /
                                      static_cast<double>(stats.total_tokens);
        lexicon.frequency_by_name[text::lowercase(name)] = freq;
    }
    return lexicon;
}

}  // namespace

// ---------------------------------------------------------------------------
// synthesize

namespace {

struct SynthesisOutcome {
    std::size_t qa_items = 0;
    std::size_t calibrated = 0;
    std::size_t exhausted = 0;
    std::size_t skipped_seeds = 0;
    double mean_hops = 0.0;
};

}  // namespace

int cmd_synthesize(const PipelineConfig& config, const std::string& stage) {
    // Validate everything needed before creating any output file.
    try {
        if (!stage.empty() && stage != "mine" && stage != "expand" && stage != "qa" &&
            stage != "dataset") {
            throw ConfigError("unknown stage: " + stage +
                              " (expected mine|expand|qa|dataset)");
        }
        require_input(config.paths.corpus, "corpus");
        require_input(config.paths.lexicon, "lexicon");
        require_input(config.paths.graph, "graph");
        config.client("generator");
        config.client("evaluator");
        config.client("discoverer");
        config.client("rarity_judge");
        if (config.paths.output.empty()) {
            throw ConfigError("config is missing the output path");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfigError;
    }

    std::string current_stage = "setup";
    try {
        const std::filesystem::path out_dir = ensure_output_dir(config);

        // ---- mine ----
        current_stage = "mine";
        const std::vector<std::string> lexicon =
            mining::load_lexicon(config.paths.lexicon);
        auto corpus = mining::open_corpus(config.paths.corpus);
        const mining::CorpusStats stats =
            mining::count_entity_frequencies(*corpus, lexicon);
        const auto rare = mining::select_rare_entities(stats, config.rarity);

        auto judge_generator = clients::make_generator(config.client("rarity_judge"));
        mining::GeneratorJudge judge(*judge_generator);
        std::vector<std::string> candidates;
        candidates.reserve(rare.size());
        for (const auto& [name, _] : rare) {
            candidates.push_back(name);
        }
        const mining::FilterResult filtered =
            mining::filter_candidates(candidates, judge);

        {
            std::ofstream stats_out(out_dir / "corpus_stats.jsonl");
            mining::save_stats_jsonl(stats, stats_out);
            std::ofstream rare_out(out_dir / "rare_entities.jsonl");
            for (const auto& [name, freq] : rare) {
                ordered_json j;
                j["name"] = name;
                j["frequency"] = freq;
                bool kept = std::find(filtered.kept.begin(), filtered.kept.end(),
                                      name) != filtered.kept.end();
                j["kept"] = kept;
                rare_out << j.dump() << '\n';
            }
        }
        if (stage == "mine") {
            return kExitOk;
        }

        // ---- expand ----
        current_stage = "expand";
        kg::KnowledgeGraph graph = kg::load_jsonl_file(config.paths.graph);
        auto discoverer = clients::make_discoverer(config.client("discoverer"));
        const std::uint64_t expand_seed = derive_seed(config.global_seed, "expand");

        std::vector<std::string> seed_ids;
        std::size_t skipped_seeds = 0;
        for (const std::string& name : filtered.kept) {
            const kg::Entity* entity = graph.find_by_name(name);
            if (entity == nullptr) {
                ++skipped_seeds;
                continue;
            }
            seed_ids.push_back(entity->id);
            if (config.budgets.max_seeds > 0 &&
                seed_ids.size() >= config.budgets.max_seeds) {
                break;
            }
        }
        for (const std::string& seed : seed_ids) {
            Rng walk_rng(derive_seed(expand_seed, seed));
            kg::expand_walk(graph, seed, config.budgets.walk_steps, walk_rng,
                            *discoverer);
        }
        graph.freeze();
        kg::save_jsonl_file(graph, out_dir / "expanded_graph.jsonl");
        if (stage == "expand") {
            return kExitOk;
        }

        // ---- qa ----
        current_stage = "qa";
        auto generator = clients::make_generator(config.client("generator"));
        auto evaluator = clients::make_evaluator(config.client("evaluator"));
        std::vector<clients::AccuracyEvaluator*> evaluators{evaluator.get()};
        const synthesis::QuestionConfig question_config{config.budgets.leakage_retries};
        const synthesis::ExtractionConfig extraction{config.budgets.node_cap};

        SynthesisOutcome outcome;
        outcome.skipped_seeds = skipped_seeds;
        std::vector<synthesis::QAItem> items;
        std::vector<synthesis::MaskedScaffold> scaffolds;
        std::size_t total_hops = 0;
        for (const std::string& seed : seed_ids) {
            const kg::KnowledgeGraph sub =
                kg::subgraph_around(graph, seed, config.budgets.subgraph_radius);
            if (sub.entity_count() > config.budgets.node_cap) {
                ++outcome.skipped_seeds;
                continue;
            }
            synthesis::ReasoningPath path;
            try {
                path = synthesis::longest_valid_path(sub, synthesis::default_validity(),
                                                     extraction);
            } catch (const NoValidPathError&) {
                ++outcome.skipped_seeds;
                continue;
            }
            synthesis::QAItem item =
                synthesis::path_to_question(sub, path, *generator, question_config);
            const synthesis::Regenerator regenerator =
                synthesis::make_hop_extending_regenerator(sub, *generator,
                                                          question_config);
            item = synthesis::calibrate_difficulty(std::move(item), evaluators,
                                                   config.budgets.max_rounds,
                                                   regenerator);
            scaffolds.push_back(synthesis::mask_path(item.source_path));
            total_hops += item.source_path.hop_count();
            if (item.status == synthesis::QAStatus::CALIBRATED) {
                ++outcome.calibrated;
            } else if (item.status == synthesis::QAStatus::EXHAUSTED) {
                ++outcome.exhausted;
            }
            items.push_back(std::move(item));
        }
        outcome.qa_items = items.size();
        outcome.mean_hops =
            items.empty() ? 0.0
                          : static_cast<double>(total_hops) /
                                static_cast<double>(items.size());

        {
            std::ofstream qa_out(out_dir / "qa_items.jsonl");
            for (std::size_t i = 0; i < items.size(); ++i) {
                qa_out << synthesis::qa_record(items[i], &scaffolds[i]).dump() << '\n';
            }
        }
        if (stage == "qa") {
            return kExitOk;
        }

        // ---- dataset ----
        current_stage = "dataset";
        std::vector<ordered_json> guided;
        std::vector<ordered_json> exploration;
        guided.reserve(items.size());
        exploration.reserve(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            guided.push_back(synthesis::qa_record(items[i], &scaffolds[i]));
            exploration.push_back(synthesis::qa_record(items[i], nullptr));
        }
        const std::size_t n = config.budgets.dataset_size > 0
                                  ? config.budgets.dataset_size
                                  : items.size();
        Rng mix_rng(derive_seed(config.global_seed, "dataset"));
        const std::vector<ordered_json> mixed =
            synthesis::mix_dataset(guided, exploration, config.mix, n, mix_rng);
        {
            std::ofstream dataset_out(out_dir / "dataset.jsonl");
            for (const ordered_json& record : mixed) {
                dataset_out << record.dump() << '\n';
            }
        }

        ordered_json summary;
        summary["qa_items"] = outcome.qa_items;
        summary["mean_hops"] = outcome.mean_hops;
        summary["calibrated"] = outcome.calibrated;
        summary["exhausted"] = outcome.exhausted;
        summary["skipped_seeds"] = outcome.skipped_seeds;
        summary["dataset_records"] = mixed.size();
        summary["guided_records"] = synthesis::guided_share(config.mix.alpha, n);
        summary["corpus_total_tokens"] = stats.total_tokens;
        summary["rare_candidates"] = rare.size();
        summary["kept_candidates"] = filtered.kept.size();
        write_json_file(out_dir / "summary.json", summary);

        std::ostringstream report;
        report << "synthesis summary\n"
               << "  qa items:        " << outcome.qa_items << "\n"
               << "  mean hops:       " << format_double(outcome.mean_hops) << "\n"
               << "  calibrated:      " << outcome.calibrated << "\n"
               << "  exhausted:       " << outcome.exhausted << "\n"
               << "  skipped seeds:   " << outcome.skipped_seeds << "\n"
               << "  dataset records: " << mixed.size() << "\n";
        write_text_file(out_dir / "summary.txt", report.str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "stage " << current_stage << " failed: " << e.what() << std::endl;
        return kExitStageFailure;
    }
}

// ---------------------------------------------------------------------------
// episodes

namespace {

struct QuestionRecord {
    std::string id;
    std::string question;
};

std::vector<QuestionRecord> load_questions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("questions file does not exist: " + path);
    }
    std::vector<QuestionRecord> questions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("question")) {
            throw ConfigError("malformed question record at line " +
                              std::to_string(line_no));
        }
        QuestionRecord q;
        q.question = j.at("question").get<std::string>();
        q.id = j.value("id", "q" + std::to_string(line_no));
        questions.push_back(std::move(q));
    }
    if (questions.empty()) {
        throw ConfigError("questions file is empty: " + path);
    }
    return questions;
}

agent::ToolRegistry build_registry(const PipelineConfig& config,
                                   clients::SearchClient& search,
                                   clients::DocumentReadClient& reader,
                                   const std::vector<medtools::Document>& documents,
                                   clients::Embedder& embedder,
                                   const medtools::EvidenceTable* evidence) {
    agent::ToolRegistry registry;

    registry.add({"web_search", agent::ToolCategory::GENERAL,
                  [&search](const agent::ToolParams& params) {
                      auto it = params.find("query");
                      if (it == params.end()) {
                          throw ArgumentError("web_search requires a query parameter");
                      }
                      return agent::ToolResult{search.search(it->second), false};
                  }});

    registry.add({"doc_read", agent::ToolCategory::GENERAL,
                  [&reader](const agent::ToolParams& params) {
                      auto it = params.find("reference");
                      if (it == params.end()) {
                          throw ArgumentError("doc_read requires a reference parameter");
                      }
                      return agent::ToolResult{reader.read(it->second), false};
                  }});

    const medtools::RankerConfig ranker = config.ranker;
    const std::size_t k = config.budgets.retrieval_k;
    registry.add({"med_retrieve", agent::ToolCategory::MEDICAL,
                  [&documents, &embedder, ranker, k](const agent::ToolParams& params) {
                      auto it = params.find("query");
                      if (it == params.end()) {
                          throw ArgumentError("med_retrieve requires a query parameter");
                      }
                      const std::vector<double> query_embedding =
                          embedder.embed(it->second);
                      const auto ranked = medtools::rank_documents(
                          documents, query_embedding, ranker, k);
                      std::string payload;
                      for (const auto& [id, score] : ranked) {
                          const medtools::Document* doc = nullptr;
                          for (const auto& d : documents) {
                              if (d.id == id) {
                                  doc = &d;
                                  break;
                              }
                          }
                          payload += "doc " + id + " score " + format_double(score) +
                                     ": " + (doc ? doc->text : "") + "\n";
                      }
                      if (payload.empty()) {
                          payload = "no documents indexed\n";
                      }
                      return agent::ToolResult{payload, false};
                  }});

    if (evidence != nullptr) {
        const medtools::EvidenceTable table = *evidence;
        registry.add(
            {"diagnose", agent::ToolCategory::MEDICAL,
             [table](const agent::ToolParams& params) {
                 auto it = params.find("symptoms");
                 if (it == params.end()) {
                     throw ArgumentError("diagnose requires a symptoms parameter");
                 }
                 std::vector<std::string> symptoms;
                 std::istringstream ss(it->second);
                 std::string symptom;
                 while (std::getline(ss, symptom, ',')) {
                     if (!symptom.empty()) {
                         symptoms.push_back(symptom);
                     }
                 }
                 const auto posterior = medtools::diagnosis_posterior(symptoms, table);
                 std::string payload = "diagnosis posteriors:";
                 for (const auto& [diagnosis, p] : posterior) {
                     payload += " " + diagnosis + "=" + format_double(p);
                 }
                 return agent::ToolResult{payload, false};
             }});
    }
    return registry;
}

}  // namespace

int cmd_episodes(const PipelineConfig& config, const std::string& questions_path) {
    std::vector<QuestionRecord> questions;
    try {
        questions = load_questions(questions_path);
        require_input(config.paths.documents, "documents");
        config.client("reasoner");
        config.client("embedder");
        config.client("search");
        config.client("doc_read");
        config.client("task_evaluator");
        config.client("expert_evaluator");
        if (config.paths.output.empty()) {
            throw ConfigError("config is missing the output path");
        }
        if (config.budgets.group_size < 1) {
            throw ConfigError("group_size must be >= 1");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfigError;
    }

    std::string current_stage = "episodes";
    try {
        const std::filesystem::path out_dir = ensure_output_dir(config);

        auto embedder = clients::make_embedder(config.client("embedder"));
        auto search = clients::make_search(config.client("search"));
        auto reader = clients::make_document_reader(config.client("doc_read"));
        auto task_evaluator = clients::make_evaluator(config.client("task_evaluator"));
        auto expert_evaluator =
            clients::make_evaluator(config.client("expert_evaluator"));

        const std::vector<medtools::Document> documents =
            medtools::load_documents_file(config.paths.documents, embedder.get());
        std::optional<medtools::EvidenceTable> evidence;
        if (!config.paths.evidence.empty()) {
            evidence = medtools::load_evidence_file(config.paths.evidence);
        }
        const agent::ToolRegistry registry =
            build_registry(config, *search, *reader, documents, *embedder,
                           evidence ? &*evidence : nullptr);

        agent::EpisodeConfig episode_config;
        episode_config.max_steps = config.budgets.max_steps;
        episode_config.corruption_rate = config.corruption_rate;
        episode_config.selection = config.selection;
        episode_config.rarity = load_rarity_lexicon(config);

        reward::EfficiencyRules rules;
        rules.irrelevant_tools = config.irrelevant_tools;

        const std::uint64_t episodes_seed = derive_seed(config.global_seed, "episodes");
        std::vector<agent::Trajectory> trajectories;
        std::vector<reward::RewardBreakdown> breakdowns;
        std::size_t corrupted_steps = 0;
        std::size_t total_steps = 0;
        for (const QuestionRecord& q : questions) {
            // Fresh reasoner per episode so scripted mocks replay per episode.
            auto reasoner = clients::make_generator(config.client("reasoner"));
            Rng rng(derive_seed(episodes_seed, q.id));
            agent::Trajectory trajectory = agent::run_episode(
                q.question, registry, config.policy, *reasoner, episode_config, rng);

            double task = 0.0;
            if (trajectory.final_answer) {
                task = task_evaluator->evaluate(q.question, *trajectory.final_answer, 0);
            }
            const double expert = expert_evaluator->evaluate(
                q.question, trajectory.final_answer.value_or(""), 0);
            const double efficiency = reward::efficiency_penalty(trajectory, rules);
            breakdowns.push_back(reward::make_breakdown(task, expert, efficiency,
                                                        config.reward_weights));
            for (const agent::TrajectoryStep& s : trajectory.steps) {
                if (!s.tool.empty()) {
                    ++total_steps;
                    if (s.corrupted) {
                        ++corrupted_steps;
                    }
                }
            }
            trajectories.push_back(std::move(trajectory));
        }

        // Group advantages over consecutive batches.
        std::vector<double> advantages(breakdowns.size(), 0.0);
        for (std::size_t start = 0; start < breakdowns.size();
             start += config.budgets.group_size) {
            const std::size_t end =
                std::min(start + config.budgets.group_size, breakdowns.size());
            std::vector<double> rewards;
            rewards.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                rewards.push_back(breakdowns[i].composite);
            }
            const std::vector<double> group = reward::group_advantages(rewards);
            for (std::size_t i = start; i < end; ++i) {
                advantages[i] = group[i - start];
            }
        }

        {
            std::ofstream traj_out(out_dir / "trajectories.jsonl");
            agent::save_trajectories_jsonl(trajectories, traj_out);
            std::ofstream reward_out(out_dir / "rewards.jsonl");
            for (std::size_t i = 0; i < breakdowns.size(); ++i) {
                ordered_json j;
                j["episode_id"] = questions[i].id;
                j["task"] = breakdowns[i].task;
                j["expert"] = breakdowns[i].expert;
                j["efficiency"] = breakdowns[i].efficiency;
                j["composite"] = breakdowns[i].composite;
                j["advantage"] = advantages[i];
                reward_out << j.dump() << '\n';
            }
        }

        ordered_json summary;
        summary["episodes"] = trajectories.size();
        summary["tool_steps"] = total_steps;
        summary["corrupted_steps"] = corrupted_steps;
        summary["corrupted_fraction"] =
            total_steps == 0 ? 0.0
                             : static_cast<double>(corrupted_steps) /
                                   static_cast<double>(total_steps);
        std::size_t answered = 0;
        for (const agent::Trajectory& t : trajectories) {
            if (t.termination == agent::Termination::ANSWERED) {
                ++answered;
            }
        }
        summary["answered"] = answered;
        write_json_file(out_dir / "episodes_summary.json", summary);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "stage " << current_stage << " failed: " << e.what() << std::endl;
        return kExitStageFailure;
    }
}

// ---------------------------------------------------------------------------
// analyze

int cmd_analyze(const std::string& trajectory_path, const std::string& out_dir_str) {
    std::ifstream in(trajectory_path);
    if (!in) {
        std::cerr << "config error: trajectory file does not exist: "
                  << trajectory_path << std::endl;
        return kExitConfigError;
    }
    if (out_dir_str.empty()) {
        std::cerr << "config error: missing output directory" << std::endl;
        return kExitConfigError;
    }
    try {
        std::size_t malformed = 0;
        const std::vector<agent::Trajectory> trajectories =
            agent::load_trajectories_jsonl(in, &malformed);
        if (trajectories.empty()) {
            std::cerr << "stage analyze failed: no parseable trajectories in "
                      << trajectory_path << std::endl;
            return kExitStageFailure;
        }

        std::map<std::size_t, std::size_t> histogram;
        std::size_t synthesized = 0;
        for (const agent::Trajectory& t : trajectories) {
            const agent::PatternRecord record = agent::classify_pattern(t);
            histogram[record.verify_count] += 1;
            if (record.synthesized) {
                ++synthesized;
            }
        }
        const agent::BehaviorStats stats = agent::trajectory_stats(trajectories);

        std::filesystem::path out_dir(out_dir_str);
        std::filesystem::create_directories(out_dir);
        ordered_json report;
        report["trajectories"] = trajectories.size();
        report["skipped"] = malformed;
        ordered_json hist = ordered_json::object();
        for (const auto& [n, count] : histogram) {
            hist[std::to_string(n)] = count;
        }
        report["pattern_histogram"] = hist;
        report["synthesized_rate"] =
            static_cast<double>(synthesized) / static_cast<double>(trajectories.size());
        report["first_medical_rate"] = stats.first_medical_rate;
        report["tool_switch_rate"] = stats.tool_switch_rate;
        report["error_recovery_rate"] = stats.error_recovery_rate;
        write_json_file(out_dir / "behavior_report.json", report);

        std::ostringstream text;
        text << "behavior report\n"
             << "  trajectories:        " << trajectories.size() << "\n"
             << "  skipped lines:       " << malformed << "\n"
             << "  synthesized rate:    "
             << format_double(report["synthesized_rate"].get<double>()) << "\n"
             << "  first medical rate:  " << format_double(stats.first_medical_rate) << "\n"
             << "  tool switch rate:    " << format_double(stats.tool_switch_rate) << "\n"
             << "  error recovery rate: " << format_double(stats.error_recovery_rate)
             << "\n  verify-count histogram:\n";
        for (const auto& [n, count] : histogram) {
            text << "    n=" << n << ": " << count << "\n";
        }
        write_text_file(out_dir / "behavior_report.txt", text.str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "stage analyze failed: " << e.what() << std::endl;
        return kExitStageFailure;
    }
}

}  // namespace medsynth::cli
