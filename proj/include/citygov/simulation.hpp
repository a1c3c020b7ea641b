#pragma once

#include <memory>

#include <json.hpp>

#include "citygov/city.hpp"

namespace citygov {

enum class RunMode { WithFramework, Baseline };

struct ScenarioConfig {
  Minutes correlation_window = 30;
  double fairness_threshold = 2.0;
  Minutes fairness_window = 30;
  Minutes review_delay = 15;
  std::vector<std::string> languages = {"en"};
  std::string review_path =
      "joint-oversight review by the contributing authorities within 14 days";
  std::string remedy = "fine suspension pending review and exposure correction";
  std::vector<std::vector<std::string>> risk_register; // pre-registered coupling risks
  std::string pseudonym_key = "citygov-sim";
};

struct ScenarioAgent {
  SystemProfile profile;
  OperatingEnvelope envelope;
  std::vector<std::string> provides;
  std::vector<DependencyDecl> dependencies;
};

struct ScenarioEvent {
  Minutes time = 0;
  std::string kind;
  std::string label;
  std::string agent; // empty for events without a primary agent
  nlohmann::json params;
};

struct Scenario {
  std::string name;
  ScenarioConfig config;
  std::vector<ScenarioAgent> agents;
  std::vector<Zone> zones;
  std::vector<RegimeWindow> regimes;
  std::vector<ScenarioEvent> events;

  static Scenario load(const std::string& text);      // SchemaError, DanglingReference
  static Scenario load_file(const std::string& path);
};

/// One row of the activation trace: a scenario event together with the
/// measures, layer and rules its governance processing activated.
struct GovernanceEvent {
  Minutes time = 0;
  std::string label;
  std::vector<std::string> agents; // first-involvement order
  std::set<std::string> measures;  // sorted ids, all activatable per catalog
  std::string layer = "-";         // A | O | C | A->O | -
  std::set<std::string> rules;     // sorted T ids
};

struct ScheduledTask {
  std::string kind; // human_review | reassessment
  std::string agent_id;
  Minutes scheduled_at = 0;
  std::string detail;
};

struct ActivationTrace {
  std::string scenario;
  RunMode mode = RunMode::WithFramework;
  std::vector<GovernanceEvent> rows;

  // Engine-level outcomes the summary is computed from.
  std::optional<Minutes> cascade_opened_at;
  Minutes cascade_window_used = 0;
  std::optional<Minutes> first_detection_at;
  std::vector<std::string> coordination; // executed coordination mechanisms, in order
  int directives_applied = 0;
  struct CaseCheck {
    RecordId decision = 0;
    std::set<std::string> case_agents;
    std::set<std::string> attribution_agents;
  };
  std::vector<CaseCheck> cases;
  std::vector<RecordId> resident_decisions;
  std::vector<ScheduledTask> tasks;
  std::vector<IncidentRecord> incidents;
  std::string trail_export;
};

struct ActivationSummary {
  int catalog_total = 25;
  std::vector<std::string> measure_ids; // sorted unique activated ids
  int measures_activated = 0;
  std::optional<Minutes> detection_time;
  int coordination_points = 0;
  std::vector<std::string> coordination_ids;
  std::set<std::string> rules_invoked;
  std::set<std::string> layers_activated; // subset of {A, O, C}
  bool chain_complete = false;
  bool systemic_learning = false;
};

/// One executed scenario run with its final state kept alive, so the trail,
/// topology and contestation desk can be queried afterwards.
class RunSession {
public:
  RunSession(const Catalog& catalog, const Scenario& scenario, RunMode mode);
  ~RunSession();
  RunSession(RunSession&&) noexcept;
  RunSession& operator=(RunSession&&) noexcept;

  const ActivationTrace& trace() const;
  AuditTrail& trail();
  const Topology& topology() const;
  ContestationDesk& desk();
  const AgentRegistry& agents() const;
  const std::vector<IncidentRecord>& incidents() const;
  std::optional<RecordId> lookup_alias(const std::string& alias) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deterministic scenario engine. Each run starts from a fresh state, so
/// identical inputs produce byte-identical traces.
class Engine {
public:
  Engine(const Catalog& catalog, Scenario scenario);

  ActivationTrace run(RunMode mode) const;

  const Scenario& scenario() const { return scenario_; }

private:
  const Catalog* catalog_;
  Scenario scenario_;
};

ActivationTrace run_scenario(const Catalog& catalog, const Scenario& scenario,
                             RunMode mode);

/// Summary metrics computed purely from the trace.
ActivationSummary summarize(const ActivationTrace& trace);

/// Renders the trace. Formats: "tsv" (bit-exact, golden-file format) or
/// "text". Throws UnknownFormat.
std::string emit_trace(const ActivationTrace& trace, const std::string& format);

/// Parses the tsv format back into rows; re-emitting is byte-identical.
ActivationTrace parse_trace_tsv(const std::string& text);

std::string render_summary_text(const ActivationSummary& summary);

} // namespace citygov
