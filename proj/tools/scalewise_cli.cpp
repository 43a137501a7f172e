// scalewise: run, evaluate and serve adaptive scale interviews.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scalewise.hpp"

namespace fs = std::filesystem;
using namespace scalewise;

namespace {

enum ExitCode { exit_ok = 0, exit_invalid = 1, exit_validation = 2, exit_backend = 3, exit_io = 4 };

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return exit_validation;
    case ErrorCategory::backend: return exit_backend;
    case ErrorCategory::io: return exit_io;
    case ErrorCategory::state: return exit_validation;
  }
  return exit_validation;
}

void report_error(ErrorCategory c, const std::string& message) {
  std::cerr << "error[" << to_string(c) << "] " << message << "\n";
}

struct BackendChoice {
  BackendFactory factory;
  bool scripted = false;
};

struct CommonOptions {
  std::string backend;
  std::string model = "Qwen2.5-72B-Instruct";
  std::string api_key;
  std::string templates;
  int theta = 1;
  int depth = 3;
  std::string tag = "default";
  int timeout_s = 120;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--backend", o.backend, "Chat backend: an OpenAI-compatible base URL or scripted:<fixture.json>")
      ->envname("SCALEWISE_BACKEND")
      ->required();
  cmd->add_option("--model", o.model, "Model name sent to the backend")->envname("SCALEWISE_MODEL");
  cmd->add_option("--api-key", o.api_key, "Bearer token for the backend")->envname("SCALEWISE_API_KEY");
  cmd->add_option("--templates", o.templates, "Directory of prompt template overrides")->envname("SCALEWISE_TEMPLATES");
  cmd->add_option("--theta", o.theta, "Necessity threshold (follow up when necessity > theta)")
      ->envname("SCALEWISE_THETA")
      ->check(CLI::Range(0, 2));
  cmd->add_option("--depth", o.depth, "Maximum questions per topic, opening question included")
      ->envname("SCALEWISE_DEPTH")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tag", o.tag, "Run tag used in session ids")->envname("SCALEWISE_TAG");
  cmd->add_option("--timeout", o.timeout_s, "Backend read timeout in seconds")->envname("SCALEWISE_TIMEOUT");
}

BackendChoice make_backend(const CommonOptions& o) {
  const std::string prefix = "scripted:";
  if (o.backend.rfind(prefix, 0) == 0) {
    auto proto = load_scripted_backend(o.backend.substr(prefix.size()));
    return {[proto]() -> std::shared_ptr<ChatBackend> { return proto->fresh(); }, true};
  }
  RemoteBackendOptions ro;
  ro.base_url = o.backend;
  ro.api_key = o.api_key.empty() && std::getenv("OPENAI_API_KEY") ? std::getenv("OPENAI_API_KEY") : o.api_key;
  ro.read_timeout = std::chrono::seconds(o.timeout_s);
  auto shared = std::make_shared<RemoteBackend>(ro);
  return {[shared]() -> std::shared_ptr<ChatBackend> { return shared; }, false};
}

AgentSettings make_settings(const CommonOptions& o) {
  AgentSettings s;
  s.model = o.model;
  if (!o.templates.empty())
    s.templates = std::make_shared<const std::map<std::string, PromptTemplate>>(load_templates(o.templates));
  s.warn = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return s;
}

EngineConfig make_config(const CommonOptions& o, const Scale& scale) {
  EngineConfig c;
  c.theta = o.theta;
  c.depth = o.depth;
  c.model = o.model;
  c.scale_id = scale.id;
  c.tag = o.tag;
  c.validate();
  return c;
}

// Scripted runs use a fixed clock so their records are reproducible;
// SOURCE_DATE_EPOCH overrides the clock for any backend.
Clock make_clock(bool scripted) {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) return fixed_clock(std::stoll(epoch));
  return scripted ? fixed_clock(0) : system_clock();
}

AttributeMap parse_attributes(const std::vector<std::string>& pairs) {
  AttributeMap out;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("attribute '" + p + "' must look like key=value");
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

struct RunOptions {
  std::string scale;
  std::string persona;
  std::string persona_uid;
  std::string script;
  std::string uid = "respondent";
  std::vector<std::string> attributes;
  std::string out;
};

int cmd_run(const RunOptions& r, const CommonOptions& o) {
  auto scale = std::make_shared<const Scale>(load_scale_file(r.scale));
  const auto config = make_config(o, *scale);
  const auto backend_choice = make_backend(o);
  const auto settings = make_settings(o);
  auto backend = backend_choice.factory();

  Participant participant{r.uid, parse_attributes(r.attributes)};
  std::unique_ptr<Respondent> respondent;
  if (!r.script.empty()) {
    respondent = scripted_respondent(load_answer_script(r.script));
  } else {
    auto personas = load_personas_file(r.persona, scale->topic_count());
    if (personas.empty()) throw ValidationError("persona file '" + r.persona + "' is empty");
    auto it = personas.begin();
    if (!r.persona_uid.empty()) {
      it = std::find_if(personas.begin(), personas.end(), [&](const auto& p) { return p.uid == r.persona_uid; });
      if (it == personas.end()) throw ValidationError("no persona with uid '" + r.persona_uid + "'");
    }
    participant = {it->uid, it->attributes};
    for (const auto& [k, v] : parse_attributes(r.attributes)) participant.attributes[k] = v;
    respondent = llm_respondent(backend, settings, *it);
  }

  const auto clock = make_clock(backend_choice.scripted);
  const auto started = iso8601_utc(clock());
  auto state = run_session(scale, *respondent, participant, config, *backend, settings,
                           config.tag + "-" + participant.uid);
  const auto record = make_record(state, started, iso8601_utc(clock()));

  const fs::path out = r.out;
  const auto record_path = save_session(record, out);
  write_text(out / (state.session_id + ".memory.json"), serialize_memory(state.memory));
  if (state.result) write_text(out / (state.session_id + ".report.md"), state.result->report);

  std::cout << "session: " << state.session_id << "\n";
  std::cout << "record: " << record_path.string() << "\n";
  std::cout << "theta: " << config.theta << ", depth: " << config.depth << "\n";
  if (state.phase != Phase::Done) {
    report_error(state.abort_category, "session aborted: " + state.abort_reason);
    return exit_code_for(state.abort_category);
  }
  std::cout << "total: " << state.result->total << "\n";
  std::cout << "category: " << state.result->category << "\n";
  return exit_ok;
}

struct EvalOptions {
  std::string scale;
  std::string personas;
  int item_threshold = 1;
  int parallel = 1;
  std::string out;
};

int cmd_eval(const EvalOptions& e, const CommonOptions& o) {
  auto scale = std::make_shared<const Scale>(load_scale_file(e.scale));
  const auto config = make_config(o, *scale);
  const auto backend_choice = make_backend(o);
  const auto settings = make_settings(o);
  const auto personas = load_personas_file(e.personas, scale->topic_count());

  BenchmarkOptions bo;
  bo.item_threshold = e.item_threshold;
  bo.parallel = e.parallel;
  const fs::path out = e.out;
  bo.outcomes_path = out / "outcomes.jsonl";

  RespondentFactory respondents = [&settings](const Persona& p, std::shared_ptr<ChatBackend> backend) {
    return llm_respondent(std::move(backend), settings, p);
  };
  auto result = run_benchmark(personas, scale, config, backend_choice.factory, respondents, settings, bo);

  const auto clock = make_clock(backend_choice.scripted);
  const auto stamp = iso8601_utc(clock());
  for (const auto& c : result.cases) save_session(make_record(c.state, stamp, stamp), out / "sessions");
  auto metrics = metrics_to_json(result.metrics);
  metrics["item_threshold"] = e.item_threshold;
  metrics["config"] = config_to_json(config);
  write_text(out / "metrics.json", canonical_json(metrics));
  const auto table = render_metrics_table(result.metrics);
  write_text(out / "metrics.txt", table);
  std::cout << table;
  return exit_ok;
}

struct ServeOptions {
  std::string scale_dir;
  std::string addr = "127.0.0.1:8080";
  std::string store = "store";
  std::string ui_dir;
  int workers = 8;
  int idle_minutes = 30;
};

int cmd_serve(const ServeOptions& s, const CommonOptions& o) {
  ServiceOptions so;
  if (!fs::is_directory(s.scale_dir)) throw IOError("scale directory '" + s.scale_dir + "' not found");
  for (const auto& entry : fs::directory_iterator(s.scale_dir)) {
    if (entry.path().extension() != ".json") continue;
    auto scale = std::make_shared<const Scale>(load_scale_file(entry.path().string()));
    so.scales[scale->id] = scale;
  }
  if (so.scales.empty()) throw ValidationError("no scale definitions in '" + s.scale_dir + "'");
  const auto backend_choice = make_backend(o);
  so.backend_factory = backend_choice.factory;
  so.settings = make_settings(o);
  so.defaults.theta = o.theta;
  so.defaults.depth = o.depth;
  so.defaults.model = o.model;
  so.defaults.tag = o.tag;
  so.defaults.validate();
  so.store_root = s.store;
  so.workers = s.workers;
  so.idle_expiry = std::chrono::minutes(s.idle_minutes);
  if (const char* token = std::getenv("SCALEWISE_API_TOKEN")) so.bearer_token = token;

  const auto colon = s.addr.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--addr must be host:port");
  const auto host = s.addr.substr(0, colon);
  const int port = std::stoi(s.addr.substr(colon + 1));

  ApiServer server(std::move(so));
  if (!s.ui_dir.empty() && !server.mount_ui(s.ui_dir)) throw IOError("cannot serve UI from '" + s.ui_dir + "'");
  std::cout << "listening on http://" << host << ":" << port << "\n" << std::flush;
  if (!server.listen(host, port)) throw IOError("cannot listen on " + s.addr);
  return exit_ok;
}

int cmd_validate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    report_error(ErrorCategory::io, "cannot open '" + path + "'");
    return exit_io;
  }
  try {
    const auto scale = load_scale(in);
    std::cout << "ok: " << scale.id << " (" << scale.topic_count() << " topics, items " << scale.item_min << "-"
              << scale.item_max << ", bands";
    for (const auto& b : scale.category_bands)
      std::cout << " " << b.label << "[" << b.min_total << "," << b.max_total << "]";
    std::cout << ")\n";
    return exit_ok;
  } catch (const Error& e) {
    report_error(e.category(), e.what());
    return exit_invalid;
  }
}

struct PersonaOptions {
  std::string tsv;
  std::string uid;
  std::vector<int> gold_scores;
  std::string gold_label;
  std::vector<std::string> attributes;
};

int cmd_persona(const PersonaOptions& p) {
  std::ifstream in(p.tsv, std::ios::binary);
  if (!in) throw IOError("cannot open transcript '" + p.tsv + "'");
  auto persona = persona_from_transcript_tsv(in, p.uid);
  persona.attributes = parse_attributes(p.attributes);
  if (!p.gold_scores.empty()) {
    persona.gold_item_scores = p.gold_scores;
    persona.gold_total = std::accumulate(p.gold_scores.begin(), p.gold_scores.end(), 0);
  }
  if (!p.gold_label.empty()) persona.gold_label = p.gold_label;
  validate_persona(persona);
  std::cout << persona_to_json(persona).dump() << "\n";
  return exit_ok;
}

int cmd_templates(const std::string& dir) {
  for (const auto& [tag, t] : default_templates()) write_text(fs::path(dir) / (tag + ".txt"), template_text(t));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scalewise: adaptive multi-agent administration of assessment scales"};
  app.require_subcommand(1);

  CommonOptions run_common, eval_common, serve_common;

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one session and write its record, memory and report");
  run->add_option("--scale", run_opts.scale, "Scale definition file")->required();
  auto* persona_opt = run->add_option("--persona", run_opts.persona, "Persona JSON-lines file (role-played by the backend)");
  run->add_option("--persona-uid", run_opts.persona_uid, "Persona to pick from --persona (default: first)");
  auto* script_opt = run->add_option("--script", run_opts.script, "Answer script (JSON array of strings)");
  persona_opt->excludes(script_opt);
  run->add_option("--uid", run_opts.uid, "Respondent uid when using --script");
  run->add_option("--attr", run_opts.attributes, "Respondent attribute key=value (repeatable)");
  run->add_option("--out", run_opts.out, "Output directory")->required();
  add_common(run, run_common);

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Run one session per persona and compute agreement metrics");
  eval->add_option("--scale", eval_opts.scale, "Scale definition file")->required();
  eval->add_option("--personas", eval_opts.personas, "Persona JSON-lines file with gold labels")->required();
  eval->add_option("--item-threshold", eval_opts.item_threshold, "Positive threshold for item-level F1")
      ->envname("SCALEWISE_ITEM_THRESHOLD");
  eval->add_option("--parallel", eval_opts.parallel, "Concurrent sessions")
      ->envname("SCALEWISE_PARALLEL")
      ->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_opts.out, "Output directory")->required();
  add_common(eval, eval_common);

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Serve live interview sessions over HTTP");
  serve->add_option("--scale-dir", serve_opts.scale_dir, "Directory of scale definitions")->required();
  serve->add_option("--addr", serve_opts.addr, "host:port to listen on")->envname("SCALEWISE_ADDR");
  serve->add_option("--store", serve_opts.store, "Session store directory")->envname("SCALEWISE_STORE");
  serve->add_option("--ui-dir", serve_opts.ui_dir, "Static UI bundle served under /ui");
  serve->add_option("--workers", serve_opts.workers, "HTTP worker threads")->check(CLI::PositiveNumber);
  serve->add_option("--idle-expiry", serve_opts.idle_minutes, "Idle session expiry in minutes")
      ->envname("SCALEWISE_IDLE_EXPIRY")
      ->check(CLI::PositiveNumber);
  add_common(serve, serve_common);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Load and validate a scale definition (exit 0 valid, 1 invalid)");
  validate->add_option("--scale", validate_path, "Scale definition file")->required();

  PersonaOptions persona_opts;
  auto* persona = app.add_subcommand("persona", "Convert a tab-separated interview transcript into a persona line");
  persona->add_option("--tsv", persona_opts.tsv, "Transcript (start_time, stop_time, speaker, value)")->required();
  persona->add_option("--uid", persona_opts.uid, "Persona uid")->required();
  persona->add_option("--gold-scores", persona_opts.gold_scores, "Gold item scores")->delimiter(',');
  persona->add_option("--gold-label", persona_opts.gold_label, "Gold category label");
  persona->add_option("--attr", persona_opts.attributes, "Attribute key=value (repeatable)");

  std::string templates_dir;
  auto* templates = app.add_subcommand("templates", "Write the default prompt templates to a directory");
  templates->add_option("--out", templates_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  try {
    if (*run) {
      if (run_opts.script.empty() && run_opts.persona.empty())
        throw ValidationError("run needs --script or --persona");
      return cmd_run(run_opts, run_common);
    }
    if (*eval) return cmd_eval(eval_opts, eval_common);
    if (*serve) return cmd_serve(serve_opts, serve_common);
    if (*validate) return cmd_validate(validate_path);
    if (*persona) return cmd_persona(persona_opts);
    if (*templates) return cmd_templates(templates_dir);
  } catch (const Error& e) {
    report_error(e.category(), e.what());
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    report_error(ErrorCategory::io, e.what());
    return exit_io;
  }
  return exit_ok;
}
