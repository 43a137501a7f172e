#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scalewise/metrics.hpp"
#include "scalewise/orchestrator.hpp"
#include "scalewise/persistence.hpp"
#include "scalewise/respondent.hpp"

namespace scalewise {

using RespondentFactory =
    std::function<std::unique_ptr<Respondent>(const Persona&, std::shared_ptr<ChatBackend> backend)>;

struct BenchmarkOptions {
  int item_threshold = 1;
  int parallel = 1;
  std::optional<std::filesystem::path> outcomes_path;  // JSON-lines artifact
};

struct BenchmarkCase {
  Persona persona;
  SessionState state;
  std::optional<LabeledOutcome> outcome;  // absent when the session aborted
};

struct BenchmarkResult {
  MetricsReport metrics;
  std::vector<LabeledOutcome> outcomes;
  std::vector<BenchmarkCase> cases;  // persona order
};

inline std::string outcomes_jsonl(const std::vector<LabeledOutcome>& outcomes) {
  std::string out;
  for (const auto& o : outcomes) out += outcome_to_json(o).dump() + "\n";
  return out;
}

inline BenchmarkResult run_benchmark(const std::vector<Persona>& personas, std::shared_ptr<const Scale> scale,
                                     const EngineConfig& config, const BackendFactory& backend_factory,
                                     const RespondentFactory& respondent_factory, const AgentSettings& settings,
                                     const BenchmarkOptions& options = {}) {
  config.validate();
  const auto labels = scale->labels();
  for (const auto& p : personas) {
    validate_persona(p, scale->topic_count());
    if (!p.gold_total) throw ValidationError("persona '" + p.uid + "' has no gold_total");
    if (!p.gold_label) throw ValidationError("persona '" + p.uid + "' has no gold_label");
    if (std::find(labels.begin(), labels.end(), *p.gold_label) == labels.end())
      throw ValidationError("persona '" + p.uid + "' gold_label '" + *p.gold_label + "' is not a band of " + scale->id);
  }

  BenchmarkResult out;
  out.cases.resize(personas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < personas.size(); k = next++) {
      const auto& persona = personas[k];
      auto& c = out.cases[k];
      c.persona = persona;
      try {
        auto backend = backend_factory();
        auto respondent = respondent_factory(persona, backend);
        c.state = run_session(scale, *respondent, {persona.uid, persona.attributes}, config, *backend, settings,
                              config.tag + "-" + persona.uid);
      } catch (const std::exception& e) {
        c.state.session_id = config.tag + "-" + persona.uid;
        c.state.scale = scale;
        c.state.config = config;
        c.state.memory = new_memory(persona.uid, persona.attributes, scale->item_min, scale->item_max);
        detail::abort_session(c.state, e);
      }
      if (c.state.phase != Phase::Done) continue;
      const auto& r = *c.state.result;
      c.outcome = LabeledOutcome{persona.uid,         r.total,           r.category, r.final_scores,
                                 *persona.gold_total, *persona.gold_label, persona.gold_item_scores};
    }
  };
  const int threads = std::clamp(options.parallel, 1, static_cast<int>(std::max<std::size_t>(1, personas.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int excluded = 0;
  for (const auto& c : out.cases) {
    if (c.outcome) out.outcomes.push_back(*c.outcome);
    else ++excluded;
  }
  out.metrics = compute_metrics(out.outcomes, labels, scale->topic_count(), options.item_threshold);
  out.metrics.excluded = excluded;
  if (options.outcomes_path) write_file_atomic(*options.outcomes_path, outcomes_jsonl(out.outcomes));
  return out;
}

}  // namespace scalewise
