#include "citygov/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace citygov {

namespace {

using nlohmann::json;

constexpr const char* kTraceNote =
    "externally triggered rows are retained with zero activations";
constexpr const char* kTimingCaveat =
    "detection and timing figures are structural estimates from the scenario "
    "timeline, not measured latencies";

const std::set<std::string>& known_event_kinds() {
  static const std::set<std::string> kinds = {
      "external_trigger", "propose_action",  "telemetry",
      "impact_signal",    "enforcement_wave", "joint_review",
      "contestation",     "post_event_review", "reassessment"};
  return kinds;
}

bool kind_requires_agent(const std::string& kind) {
  return kind == "propose_action" || kind == "telemetry" ||
         kind == "impact_signal" || kind == "enforcement_wave" ||
         kind == "reassessment";
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (const std::string& part : parts) {
    if (!out.empty()) out += sep;
    out += part;
  }
  return out;
}

template <typename Set>
std::string join_set(const Set& values) {
  std::string out;
  for (const auto& value : values) {
    if (!out.empty()) out += ",";
    out += value;
  }
  return out;
}

std::string format_number(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

std::string signal_key(const DriftSignal& signal) {
  return signal.agent_id + "|" + signal.metric + "|" +
         std::to_string(signal.timestamp);
}

MetricBounds parse_bounds(const json& node) {
  MetricBounds bounds;
  bounds.min = node.at("min").get<double>();
  bounds.max = node.at("max").get<double>();
  if (node.contains("degraded_min")) bounds.degraded_min = node.at("degraded_min").get<double>();
  if (node.contains("degraded_max")) bounds.degraded_max = node.at("degraded_max").get<double>();
  return bounds;
}

/// Per-run mutable state. A fresh one per run keeps traces reproducible.
struct RunState {
  const Catalog& catalog;
  const Scenario& scenario;
  const bool governed;

  AgentRegistry registry;
  AuditTrail trail;
  EnvelopeMonitor monitor{registry};
  Topology topology;
  CascadeCorrelator correlator;
  ContestationDesk desk;
  ReassessmentBook book{registry};

  std::map<std::string, OperatingMode> modes;
  std::map<std::string, RecordId> aliases;
  std::map<std::string, RecordId> signal_records;
  std::optional<CascadeEvent> cascade;
  std::optional<IncidentRecord> incident;
  RecordId session_record = 0;
  RecordId last_decision_record = 0;

  struct PendingReview {
    std::string agent_id;
    Minutes scheduled_at = 0;
    std::string detail;
    RecordId cause = 0;
  };
  std::vector<PendingReview> reviews;
  std::set<std::string> review_pending_agents;

  ActivationTrace trace;

  RunState(const Catalog& cat, const Scenario& scn, RunMode mode)
      : catalog(cat),
        scenario(scn),
        governed(mode == RunMode::WithFramework),
        trail(scn.config.pseudonym_key),
        correlator(scn.config.correlation_window),
        desk(scn.config.review_path, scn.config.remedy, scn.config.languages) {
    trace.scenario = scn.name;
    trace.mode = mode;
  }
};

struct Row {
  GovernanceEvent event;

  void add_agent(const std::string& agent_id) {
    if (std::find(event.agents.begin(), event.agents.end(), agent_id) ==
        event.agents.end()) {
      event.agents.push_back(agent_id);
    }
  }
  void set_layer(const std::string& layer) {
    if (event.layer == "-") event.layer = layer;
  }
};

void add_measure(RunState& state, Row& row, const std::string& id) {
  if (!state.catalog.measure(id).activatable) {
    throw Error(Errc::IntegrityError,
                "measure " + id + " is not activatable and cannot appear in a trace");
  }
  row.event.measures.insert(id);
}

std::vector<RecordId> resolve_causes(RunState& state, const json& params) {
  std::vector<RecordId> causes;
  if (!params.contains("caused_by")) return causes;
  for (const json& alias : params.at("caused_by")) {
    auto it = state.aliases.find(alias.get<std::string>());
    if (it == state.aliases.end()) {
      throw Error(Errc::UnknownRecord,
                  "unknown record alias '" + alias.get<std::string>() + "'");
    }
    causes.push_back(it->second);
  }
  return causes;
}

void register_alias(RunState& state, const json& params, const char* field,
                    RecordId record) {
  if (params.contains(field)) {
    state.aliases[params.at(field).get<std::string>()] = record;
  }
}

RecordId resolve_alias(RunState& state, const std::string& alias) {
  auto it = state.aliases.find(alias);
  if (it == state.aliases.end()) {
    throw Error(Errc::UnknownRecord, "unknown record alias '" + alias + "'");
  }
  return it->second;
}

void set_mode(RunState& state, Row* row, const std::string& agent_id,
              OperatingMode mode, RecordId cause, Minutes now) {
  OperatingMode& current = state.modes[agent_id];
  if (current == mode) return;
  current = mode;
  if (state.governed) {
    std::vector<RecordId> causes;
    if (cause != 0) causes.push_back(cause);
    const AuditRecord& rec =
        state.trail.record_audit(agent_id, "mode_change", "mode=" + to_string(mode),
                                 false, causes, now);
    state.aliases["decl:" + agent_id] = rec.record_id;
    if (row != nullptr) row->add_agent(agent_id);
  }
}

void apply_degradation(RunState& state, Row* row, const std::string& agent_id,
                       const std::string& resource, RecordId cause, Minutes now) {
  set_mode(state, row, agent_id, OperatingMode::Degraded, cause, now);
  if (resource.empty()) return;
  if (state.governed && state.topology.safety_coupled(resource) && row != nullptr) {
    // Degraded state on a safety-coupled resource updates the topology
    // constraint picture the clearance gate evaluates against.
    add_measure(state, *row, "R-01");
  }
  for (const Coupling& coupling : state.topology.dependents(resource)) {
    if (coupling.coupling_class == CouplingClass::SafetyCoupled) {
      set_mode(state, row, coupling.from_system, OperatingMode::Degraded, cause, now);
    }
  }
}

void schedule_review(RunState& state, const std::string& agent_id, Minutes detected_at,
                     const std::string& detail, RecordId cause) {
  if (state.review_pending_agents.count(agent_id)) return;
  state.review_pending_agents.insert(agent_id);
  RunState::PendingReview review;
  review.agent_id = agent_id;
  review.scheduled_at = detected_at + state.scenario.config.review_delay;
  review.detail = detail;
  review.cause = cause;
  state.reviews.push_back(review);
  state.trace.tasks.push_back(
      {"human_review", agent_id, review.scheduled_at, detail});
}

void handle_cascade_identified(RunState& state, Row& row, const CascadeEvent& cascade) {
  state.cascade = cascade;
  state.trace.cascade_opened_at = cascade.opened_at;
  state.trace.cascade_window_used = cascade.window_used;

  add_measure(state, row, "R-03");
  for (const std::string& agent : cascade.agents) row.add_agent(agent);
  row.set_layer("O");

  std::vector<RecordId> contributing_records;
  for (const DriftSignal& signal : cascade.contributing) {
    auto it = state.signal_records.find(signal_key(signal));
    if (it != state.signal_records.end()) contributing_records.push_back(it->second);
  }
  const AuditRecord& cascade_record = state.trail.record_audit(
      "orchestrator", "cascade_identified",
      cascade.cascade_id + " domains=" + join(cascade.domains, ","), false,
      contributing_records, cascade.opened_at);

  std::vector<std::string> authorities;
  for (const std::string& agent : cascade.agents) {
    const std::string& authority = state.registry.entry(agent).profile.authority;
    if (std::find(authorities.begin(), authorities.end(), authority) ==
        authorities.end()) {
      authorities.push_back(authority);
    }
  }
  if (authorities.size() >= 2) {
    OversightSession session =
        escalate_joint_oversight("session-1", cascade, authorities,
                                 contributing_records, state.trail, cascade.opened_at);
    state.session_record = session.session_record;
    add_measure(state, row, "R-06");
    state.trace.coordination.push_back("R-06");
  }

  if (!state.scenario.regimes.empty()) {
    state.incident =
        open_incident("incident-1", cascade, state.scenario.regimes,
                      cascade.opened_at, state.trail, {cascade_record.record_id});
    add_measure(state, row, "R-05");
    row.event.rules.insert("T4");
  }
}

void feed_correlator(RunState& state, Row& row, const DriftSignal& signal) {
  CorrelationUpdate update = state.correlator.add_signal(signal, state.topology);
  if (update.assessment_advanced) add_measure(state, row, "R-03");
  if (update.confirmed) handle_cascade_identified(state, row, *update.confirmed);
}

void process_impact_payload(RunState& state, Row& row, const ScenarioEvent& event,
                            const json& payload) {
  const std::string agent_id =
      payload.contains("agent") ? payload.at("agent").get<std::string>() : event.agent;
  if (!state.governed) return;
  const AgentRegistry::Entry& agent = state.registry.entry(agent_id);

  DriftSignal signal;
  signal.agent_id = agent_id;
  signal.metric = payload.at("metric").get<std::string>();
  signal.observed = payload.at("value").get<double>();
  signal.domain = payload.contains("domain") ? payload.at("domain").get<std::string>()
                                             : agent.profile.domain;
  signal.timestamp = event.time;
  signal.severity = DriftSeverity::Warning;

  const AuditRecord& rec = state.trail.record_audit(
      agent_id, "impact_signal",
      signal.metric + "=" + format_number(signal.observed) + " domain=" + signal.domain,
      false, resolve_causes(state, payload), event.time);
  register_alias(state, payload, "alias", rec.record_id);
  state.signal_records[signal_key(signal)] = rec.record_id;
  row.add_agent(agent_id);

  if (agent.activation.orchestration >= Activation::Basic) {
    row.set_layer("O");
    feed_correlator(state, row, signal);
  }
}

void handle_external(RunState&, Row&, const ScenarioEvent&) {
  // External trigger: observed, not governed. The row stays empty.
}

void handle_propose_action(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  const json& params = event.params;

  ProposedAction action;
  action.action = params.value("action", event.label);
  if (params.contains("resources")) {
    for (const json& resource : params.at("resources")) {
      action.resources.push_back(resource.get<std::string>());
    }
  }
  action.validate_bounds = params.value("validate_bounds", false);
  if (params.contains("bound_targets")) {
    for (const auto& [metric, value] : params.at("bound_targets").items()) {
      action.bound_targets[metric] = value.get<double>();
    }
  }

  std::optional<ClearanceToken> clearance;
  if (params.value("request_clearance", false)) {
    ClearanceOutcome outcome = issue_clearance(
        state.registry, state.topology, event.agent, action, state.modes,
        params.value("human_override", false), event.time);
    if (const ClearanceToken* token = std::get_if<ClearanceToken>(&outcome)) {
      clearance = *token;
    }
  }

  PolicyDecision decision = enforce_policy(state.registry, event.agent, action,
                                           state.topology, clearance, state.trail,
                                           event.time);
  register_alias(state, params, "alias", decision.audit_record);
  row.add_agent(event.agent);
  if (!decision.measures.empty()) {
    for (const std::string& id : decision.measures) add_measure(state, row, id);
    row.set_layer(decision.consulted_orchestration ? "A->O" : "A");
  }
  if (params.contains("impact")) {
    process_impact_payload(state, row, event, params.at("impact"));
  }
}

void handle_telemetry(RunState& state, Row& row, const ScenarioEvent& event) {
  const json& params = event.params;
  const std::string metric = params.at("metric").get<std::string>();
  const double value = params.at("value").get<double>();
  const std::string resource = params.value("resource", "");

  if (!state.governed) {
    // The physical consequence of a degraded-band breach happens with or
    // without governance attached.
    const AgentRegistry::Entry& agent = state.registry.entry(event.agent);
    auto it = agent.envelope.metrics.find(metric);
    if (it != agent.envelope.metrics.end()) {
      const MetricBounds& bounds = it->second;
      const bool degraded =
          (bounds.degraded_min && value < *bounds.degraded_min) ||
          (bounds.degraded_max && value > *bounds.degraded_max);
      if (degraded) {
        apply_degradation(state, nullptr, event.agent, resource, 0, event.time);
      }
    }
    return;
  }

  std::optional<DriftSignal> signal =
      state.monitor.observe(event.agent, metric, value, event.time, resource);
  if (!signal) return;

  row.add_agent(event.agent);
  add_measure(state, row, "R-10");
  if (!state.trace.first_detection_at) state.trace.first_detection_at = event.time;

  std::ostringstream payload;
  payload << metric << "=" << format_number(value) << " outside " << signal->bound_violated
          << " severity=" << to_string(signal->severity);
  const AuditRecord& rec =
      state.trail.record_audit(event.agent, "drift_signal", payload.str(), false,
                               resolve_causes(state, params), event.time);
  register_alias(state, params, "alias", rec.record_id);
  state.signal_records[signal_key(*signal)] = rec.record_id;

  if (signal->severity == DriftSeverity::Degraded) {
    apply_degradation(state, &row, event.agent, resource, rec.record_id, event.time);
  }

  const AgentRegistry::Entry& agent = state.registry.entry(event.agent);
  if (agent.activation.orchestration >= Activation::Basic) {
    row.set_layer("O"); // alert consumed upward
    feed_correlator(state, row, *signal);
  } else {
    row.set_layer("A");
    schedule_review(state, event.agent, event.time, "drift review for " + metric,
                    rec.record_id);
  }
}

void handle_impact_signal(RunState& state, Row& row, const ScenarioEvent& event) {
  process_impact_payload(state, row, event, event.params);
}

void handle_enforcement_wave(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  const json& params = event.params;
  row.add_agent(event.agent);

  const int count = params.value("count", 0);
  const AuditRecord& wave_record = state.trail.record_audit(
      event.agent, "enforcement_wave", std::to_string(count) + " detections queued",
      false, resolve_causes(state, params), event.time);
  register_alias(state, params, "alias", wave_record.record_id);

  if (params.contains("subject")) {
    const AuditRecord& fine = state.trail.record_audit(
        event.agent, "enforcement_decision", params.at("subject").get<std::string>(),
        true, {wave_record.record_id}, event.time);
    register_alias(state, params, "decision_alias", fine.record_id);
    state.last_decision_record = fine.record_id;
    state.trace.resident_decisions.push_back(fine.record_id);
  }

  std::vector<EnforcementEvent> events;
  if (params.contains("zone_counts")) {
    for (const auto& [zone, n] : params.at("zone_counts").items()) {
      for (int i = 0; i < n.get<int>(); ++i) events.push_back({zone, event.time});
    }
  }
  std::vector<FairnessFlag> flags = monitor_fairness(
      events, state.scenario.zones, state.correlator.assessment_active(),
      state.scenario.config.fairness_threshold, state.scenario.config.fairness_window,
      event.time);
  if (flags.empty()) return;

  add_measure(state, row, "R-08");
  row.set_layer("C");
  RecordId first_flag_record = 0;
  double max_ratio = 0.0;
  for (const FairnessFlag& flag : flags) {
    std::ostringstream payload;
    payload << "zone=" << flag.zone_id << " ratio=" << format_number(flag.concentration_ratio)
            << " human_review=" << (flag.human_review ? 1 : 0);
    const AuditRecord& rec = state.trail.record_audit(
        event.agent, "fairness_flag", payload.str(), false,
        {wave_record.record_id}, event.time);
    if (first_flag_record == 0) first_flag_record = rec.record_id;
    max_ratio = std::max(max_ratio, flag.concentration_ratio);
  }

  const AgentRegistry::Entry& agent = state.registry.entry(event.agent);
  if (agent.activation.orchestration >= Activation::Basic) {
    DriftSignal signal;
    signal.agent_id = event.agent;
    signal.metric = "enforcement_concentration";
    signal.observed = max_ratio;
    signal.bound_violated =
        "max " + format_number(state.scenario.config.fairness_threshold);
    signal.domain = agent.profile.domain;
    signal.timestamp = event.time;
    signal.severity = DriftSeverity::Warning;
    state.signal_records[signal_key(signal)] = first_flag_record;
    feed_correlator(state, row, signal);
  }
}

void handle_joint_review(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  if (!state.incident) {
    throw Error(Errc::MissingContext, "joint review requires an open incident");
  }
  const json& params = event.params;

  ResolutionContext t1_context;
  t1_context.logging_agent = params.value("logging_agent", "");
  if (state.session_record != 0) t1_context.evidence_causes = {state.session_record};
  resolve_conflict(state.catalog.resolve_rule("T1"), t1_context, state.trail,
                   event.time);
  row.event.rules.insert("T1");

  ResolutionContext t4_context;
  t4_context.incident = &*state.incident;
  if (state.session_record != 0) t4_context.evidence_causes = {state.session_record};
  resolve_conflict(state.catalog.resolve_rule("T4"), t4_context, state.trail,
                   event.time);
  row.event.rules.insert("T4");

  add_measure(state, row, "R-02");

  std::vector<RecordId> causes;
  if (state.session_record != 0) causes.push_back(state.session_record);
  state.trail.record_audit("orchestrator", "oversight_deliberation",
                           "joint deliberation on " + state.incident->incident_id,
                           false, causes, event.time);
  add_measure(state, row, "R-06");
  row.set_layer("O");
}

void handle_contestation(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  const json& params = event.params;
  RecordId decision = params.contains("decision")
                          ? resolve_alias(state, params.at("decision").get<std::string>())
                          : state.last_decision_record;
  if (decision == 0) {
    throw Error(Errc::UnknownRecord, "contestation has no decision record to cite");
  }

  ContestationCase& contestation =
      state.desk.open_contestation(state.trail, decision, state.topology);
  add_measure(state, row, "R-04");
  const AuditRecord& case_record = state.trail.record_audit(
      "city", "contestation_case",
      contestation.case_id + " decision=" + std::to_string(decision), false,
      {decision}, event.time);

  std::vector<std::string> chain_agents;
  for (const auto& [agent, ids] : contestation.causal_chain.contributing) {
    chain_agents.push_back(agent);
  }
  add_measure(state, row, "R-24");
  state.trace.coordination.push_back("R-24");
  state.trail.record_audit(
      "orchestrator", "attribution_report",
      "outcome=" + std::to_string(decision) + " agents=" + join(chain_agents, ",") +
          " topology_v" + std::to_string(contestation.causal_chain.topology_version),
      false, {decision}, event.time);

  for (const std::string& language : state.scenario.config.languages) {
    contestation.explanations[language] = state.desk.render_explanation(
        contestation, language, state.trail, state.registry);
  }
  add_measure(state, row, "R-16");
  state.trail.record_audit(
      "city", "explanation",
      contestation.case_id + " languages=" + join(state.scenario.config.languages, ","),
      false, {case_record.record_id}, event.time);

  row.set_layer("C");
  row.add_agent(state.trail.record(decision).agent_id);

  ActivationTrace::CaseCheck check;
  check.decision = decision;
  for (const std::string& agent : chain_agents) check.case_agents.insert(agent);
  AttributionReport independent = attribute(state.trail, decision, state.topology);
  for (const auto& [agent, ids] : independent.contributing) {
    check.attribution_agents.insert(agent);
  }
  state.trace.cases.push_back(std::move(check));
}

void handle_post_event_review(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  if (!state.incident) {
    throw Error(Errc::MissingContext, "post-event review requires an incident");
  }
  const json& params = event.params;
  state.incident->status = "closing";

  RecordId outcome = params.contains("attribution_of")
                         ? resolve_alias(state, params.at("attribution_of").get<std::string>())
                         : state.last_decision_record;
  if (outcome == 0) outcome = state.incident->shared_record_id;

  std::vector<std::string> domains =
      state.cascade ? state.cascade->domains : std::vector<std::string>{};
  ConsolidatedAssessment assessment = consolidate_assessment(
      *state.incident, state.trail, state.topology, state.catalog.resolve_rule("T3"),
      outcome, domains, event.time);
  row.event.rules.insert("T3");
  add_measure(state, row, "R-12");
  state.trace.coordination.push_back("R-12");
  add_measure(state, row, "R-24"); // attribution report bundled into the assessment

  state.topology = state.topology.with_directive(assessment.directive);
  state.trace.directives_applied += 1;
  state.trail.record_audit(
      "orchestrator", "topology_update",
      "v" + std::to_string(state.topology.version()) + " " + assessment.directive.description,
      false, {assessment.assessment_record}, event.time);
  add_measure(state, row, "R-01");

  state.incident->status = "closed";
  row.set_layer("O");
}

void handle_reassessment(RunState& state, Row& row, const ScenarioEvent& event) {
  if (!state.governed) return;
  const json& params = event.params;
  ChangeKind change = change_kind_from_string(params.at("change").get<std::string>());
  auto [task, fresh] =
      state.book.trigger(event.agent, change, event.time, state.topology.version());
  if (!fresh) return;

  row.add_agent(event.agent);
  add_measure(state, row, "R-20");
  if (change == ChangeKind::IntegrationChange) {
    // Integration changes alter conformity assumptions; the conformity
    // re-check runs alongside the risk reassessment.
    add_measure(state, row, "R-23");
  }
  state.trail.record_audit(event.agent, "reassessment_task",
                           to_string(change) + " tags=" + join(task.measure_tags, ","),
                           false, resolve_causes(state, params), event.time);
  state.trace.tasks.push_back(
      {"reassessment", event.agent, event.time, to_string(change)});
  row.set_layer("A");
}

void dispatch(RunState& state, Row& row, const ScenarioEvent& event) {
  if (event.kind == "external_trigger") return handle_external(state, row, event);
  if (event.kind == "propose_action") return handle_propose_action(state, row, event);
  if (event.kind == "telemetry") return handle_telemetry(state, row, event);
  if (event.kind == "impact_signal") return handle_impact_signal(state, row, event);
  if (event.kind == "enforcement_wave") return handle_enforcement_wave(state, row, event);
  if (event.kind == "joint_review") return handle_joint_review(state, row, event);
  if (event.kind == "contestation") return handle_contestation(state, row, event);
  if (event.kind == "post_event_review") return handle_post_event_review(state, row, event);
  if (event.kind == "reassessment") return handle_reassessment(state, row, event);
  throw Error(Errc::SchemaError, "unknown event kind '" + event.kind + "'");
}

/// Emits standalone rows for scheduled work due strictly before `limit`.
void flush_due(RunState& state, Minutes limit) {
  if (!state.governed) return;
  while (true) {
    std::optional<Minutes> next;
    bool is_review = false;
    std::size_t review_index = 0;
    for (std::size_t i = 0; i < state.reviews.size(); ++i) {
      Minutes at = state.reviews[i].scheduled_at;
      if (at < limit && (!next || at < *next)) {
        next = at;
        is_review = true;
        review_index = i;
      }
    }
    std::optional<Minutes> confirm = state.correlator.pending_confirm();
    if (confirm && *confirm < limit && (!next || *confirm < *next)) {
      next = confirm;
      is_review = false;
    }
    if (!next) return;

    Row row;
    row.event.time = *next;
    if (is_review) {
      RunState::PendingReview review = state.reviews[review_index];
      state.reviews.erase(state.reviews.begin() + static_cast<long>(review_index));
      state.review_pending_agents.erase(review.agent_id);
      row.event.label = "human_review";
      row.add_agent(review.agent_id);
      row.set_layer("A");
      std::vector<RecordId> causes;
      if (review.cause != 0) causes.push_back(review.cause);
      state.trail.record_audit(review.agent_id, "human_review", review.detail, false,
                               causes, review.scheduled_at);
    } else {
      row.event.label = "cascade_identified";
      std::optional<CascadeEvent> cascade = state.correlator.poll(*next, state.topology);
      if (cascade) handle_cascade_identified(state, row, *cascade);
    }
    state.trace.rows.push_back(row.event);
  }
}

} // namespace

Scenario Scenario::load(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(Errc::SchemaError, std::string("scenario is not valid JSON: ") + err.what());
  }
  if (!root.is_object() || !root.contains("name")) {
    throw Error(Errc::SchemaError, "scenario needs a 'name'");
  }

  Scenario scenario;
  scenario.name = root.at("name").get<std::string>();

  if (root.contains("config")) {
    const json& config = root.at("config");
    scenario.config.correlation_window =
        config.value("correlation_window_min", scenario.config.correlation_window);
    scenario.config.fairness_threshold =
        config.value("fairness_threshold", scenario.config.fairness_threshold);
    scenario.config.fairness_window =
        config.value("fairness_window_min", scenario.config.fairness_window);
    scenario.config.review_delay =
        config.value("review_delay_min", scenario.config.review_delay);
    if (config.contains("languages")) {
      scenario.config.languages.clear();
      for (const json& language : config.at("languages")) {
        scenario.config.languages.push_back(language.get<std::string>());
      }
    }
    scenario.config.review_path = config.value("review_path", scenario.config.review_path);
    scenario.config.remedy = config.value("remedy", scenario.config.remedy);
    if (config.contains("risk_register")) {
      for (const json& pattern : config.at("risk_register")) {
        std::vector<std::string> domains;
        for (const json& domain : pattern) domains.push_back(domain.get<std::string>());
        scenario.config.risk_register.push_back(std::move(domains));
      }
    }
    scenario.config.pseudonym_key =
        config.value("pseudonym_key", scenario.config.pseudonym_key);
  }
  if (scenario.config.correlation_window <= 0) {
    throw Error(Errc::SchemaError, "correlation window must be positive");
  }

  std::set<std::string> agent_ids;
  if (!root.contains("agents") || !root.at("agents").is_array()) {
    throw Error(Errc::SchemaError, "scenario needs an 'agents' array");
  }
  for (const json& node : root.at("agents")) {
    ScenarioAgent agent;
    agent.profile.id = node.at("id").get<std::string>();
    agent.profile.name = node.value("name", agent.profile.id);
    agent.profile.authority = node.at("authority").get<std::string>();
    agent.profile.domain = node.at("domain").get<std::string>();
    const json& evidence = node.at("evidence");
    agent.profile.evidence.decision_scope =
        decision_scope_from_string(evidence.at("decision_scope").get<std::string>());
    agent.profile.evidence.human_involvement = human_involvement_from_string(
        evidence.at("human_involvement").get<std::string>());
    agent.profile.evidence.domain_criticality = domain_criticality_from_string(
        evidence.at("domain_criticality").get<std::string>());
    agent.profile.endangers_essential_services =
        node.value("endangers_essential_services", false);
    agent.profile.cross_org_dependencies = node.value("cross_org_dependencies", false);
    agent.profile.multi_agent_ecosystem = node.value("multi_agent_ecosystem", false);

    if (node.contains("envelope")) {
      const json& envelope = node.at("envelope");
      agent.envelope.consecutive_breach_k = envelope.value("consecutive_breach_k", 1);
      if (agent.envelope.consecutive_breach_k < 1) {
        throw Error(Errc::SchemaError, "consecutive_breach_k must be >= 1");
      }
      if (envelope.contains("metrics")) {
        for (const auto& [metric, bounds] : envelope.at("metrics").items()) {
          MetricBounds parsed = parse_bounds(bounds);
          if (parsed.min > parsed.max) {
            throw Error(Errc::SchemaError,
                        "metric '" + metric + "' has min > max");
          }
          agent.envelope.metrics[metric] = parsed;
        }
      }
    }
    if (node.contains("provides")) {
      for (const json& resource : node.at("provides")) {
        agent.provides.push_back(resource.get<std::string>());
      }
    }
    if (node.contains("dependencies")) {
      for (const json& dep : node.at("dependencies")) {
        DependencyDecl decl;
        decl.resource = dep.at("resource").get<std::string>();
        decl.coupling_class =
            coupling_class_from_string(dep.at("coupling_class").get<std::string>());
        agent.dependencies.push_back(decl);
      }
    }
    if (!agent_ids.insert(agent.profile.id).second) {
      throw Error(Errc::SchemaError, "duplicate agent id '" + agent.profile.id + "'");
    }
    scenario.agents.push_back(std::move(agent));
  }

  if (root.contains("zones")) {
    double total = 0.0;
    for (const json& node : root.at("zones")) {
      Zone zone;
      zone.zone_id = node.at("zone_id").get<std::string>();
      zone.baseline_share = node.at("baseline_share").get<double>();
      zone.vulnerable = node.value("vulnerable", false);
      total += zone.baseline_share;
      scenario.zones.push_back(zone);
    }
    if (!scenario.zones.empty() && std::abs(total - 1.0) > 1e-9) {
      throw Error(Errc::SchemaError, "zone baseline shares must sum to 1");
    }
  }

  if (root.contains("regimes")) {
    for (const json& node : root.at("regimes")) {
      RegimeWindow regime;
      regime.regime = node.at("regime").get<std::string>();
      regime.window = node.at("window_min").get<Minutes>();
      if (regime.window <= 0) {
        throw Error(Errc::SchemaError, "regime window must be positive");
      }
      scenario.regimes.push_back(regime);
    }
  }

  if (!root.contains("events") || !root.at("events").is_array()) {
    throw Error(Errc::SchemaError, "scenario needs an 'events' array");
  }
  Minutes previous = -1;
  for (const json& node : root.at("events")) {
    ScenarioEvent event;
    event.time = node.at("time").get<Minutes>();
    if (event.time < 0) {
      throw Error(Errc::SchemaError, "event times must be non-negative");
    }
    if (event.time < previous) {
      throw Error(Errc::SchemaError, "events must be sorted by time");
    }
    previous = event.time;
    event.kind = node.at("kind").get<std::string>();
    if (!known_event_kinds().count(event.kind)) {
      throw Error(Errc::SchemaError, "unknown event kind '" + event.kind + "'");
    }
    event.label = node.value("label", event.kind);
    event.agent = node.value("agent", "");
    event.params = node.value("params", json::object());
    if (kind_requires_agent(event.kind) && event.agent.empty()) {
      throw Error(Errc::SchemaError,
                  "event '" + event.label + "' needs an 'agent' field");
    }
    if (!event.agent.empty() && !agent_ids.count(event.agent)) {
      throw Error(Errc::DanglingReference,
                  "event '" + event.label + "' references unknown agent '" +
                      event.agent + "'");
    }
    scenario.events.push_back(std::move(event));
  }
  return scenario;
}

Scenario Scenario::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::SchemaError, "cannot open scenario file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

namespace {

void execute_run(RunState& state) {
  const Scenario& scenario = state.scenario;

  std::vector<Declaration> declarations;
  for (const ScenarioAgent& agent : scenario.agents) {
    state.registry.register_agent(agent.profile, agent.envelope, agent.provides,
                                  agent.dependencies);
    Declaration declaration;
    declaration.agent_id = agent.profile.id;
    declaration.dependencies = agent.dependencies;
    declaration.provides = agent.provides;
    declaration.operating_mode = OperatingMode::Normal;
    declaration.timestamp = 0;
    declarations.push_back(std::move(declaration));
    state.modes[agent.profile.id] = OperatingMode::Normal;
  }
  state.topology = Topology::build(declarations, state.registry);
  for (const std::vector<std::string>& pattern : scenario.config.risk_register) {
    TopologyUpdateDirective directive;
    directive.pattern_domains = pattern;
    directive.description = "pre-registered coupling risk";
    state.topology = state.topology.with_directive(directive);
  }
  if (state.governed) {
    for (const ScenarioAgent& agent : scenario.agents) {
      std::ostringstream payload;
      payload << "mode=Normal provides=" << join(agent.provides, ",")
              << " dependencies=" << agent.dependencies.size();
      const AuditRecord& rec = state.trail.record_audit(
          agent.profile.id, "declaration", payload.str(), false, {}, 0);
      state.aliases["decl:" + agent.profile.id] = rec.record_id;
    }
  }

  for (const ScenarioEvent& event : scenario.events) {
    flush_due(state, event.time);
    Row row;
    row.event.time = event.time;
    row.event.label = event.label;
    if (state.governed) {
      if (auto cascade = state.correlator.poll(event.time, state.topology)) {
        handle_cascade_identified(state, row, *cascade);
      }
    }
    dispatch(state, row, event);
    if (state.governed) {
      state.trace.rows.push_back(row.event);
    }
  }
  flush_due(state, std::numeric_limits<Minutes>::max());

  if (state.incident) {
    state.trace.incidents.push_back(*state.incident);
  }
  state.trace.trail_export = state.trail.export_lines();
}

} // namespace

struct RunSession::Impl {
  Scenario scenario;
  RunState state;

  Impl(const Catalog& catalog, Scenario scn, RunMode mode)
      : scenario(std::move(scn)), state(catalog, scenario, mode) {
    execute_run(state);
  }
};

RunSession::RunSession(const Catalog& catalog, const Scenario& scenario, RunMode mode)
    : impl_(std::make_unique<Impl>(catalog, scenario, mode)) {}

RunSession::~RunSession() = default;
RunSession::RunSession(RunSession&&) noexcept = default;
RunSession& RunSession::operator=(RunSession&&) noexcept = default;

const ActivationTrace& RunSession::trace() const { return impl_->state.trace; }
AuditTrail& RunSession::trail() { return impl_->state.trail; }
const Topology& RunSession::topology() const { return impl_->state.topology; }
ContestationDesk& RunSession::desk() { return impl_->state.desk; }
const AgentRegistry& RunSession::agents() const { return impl_->state.registry; }
const std::vector<IncidentRecord>& RunSession::incidents() const {
  return impl_->state.trace.incidents;
}

std::optional<RecordId> RunSession::lookup_alias(const std::string& alias) const {
  auto it = impl_->state.aliases.find(alias);
  if (it == impl_->state.aliases.end()) return std::nullopt;
  return it->second;
}

Engine::Engine(const Catalog& catalog, Scenario scenario)
    : catalog_(&catalog), scenario_(std::move(scenario)) {}

ActivationTrace Engine::run(RunMode mode) const {
  RunSession session(*catalog_, scenario_, mode);
  return session.trace();
}

ActivationTrace run_scenario(const Catalog& catalog, const Scenario& scenario,
                             RunMode mode) {
  return Engine(catalog, scenario).run(mode);
}

ActivationSummary summarize(const ActivationTrace& trace) {
  ActivationSummary summary;
  std::set<std::string> ids;
  for (const GovernanceEvent& row : trace.rows) {
    for (const std::string& id : row.measures) ids.insert(id);
    for (const std::string& rule : row.rules) summary.rules_invoked.insert(rule);
    if (row.measures.empty()) continue;
    if (row.layer == "A->O") {
      summary.layers_activated.insert("A");
      summary.layers_activated.insert("O");
    } else if (row.layer != "-") {
      summary.layers_activated.insert(row.layer);
    }
  }
  summary.measure_ids.assign(ids.begin(), ids.end());
  summary.measures_activated = static_cast<int>(ids.size());

  if (trace.cascade_opened_at) {
    summary.detection_time = *trace.cascade_opened_at;
  } else if (trace.first_detection_at) {
    summary.detection_time = *trace.first_detection_at;
  }

  summary.coordination_ids = trace.coordination;
  summary.coordination_points = static_cast<int>(trace.coordination.size());

  bool chain = !trace.resident_decisions.empty();
  for (RecordId decision : trace.resident_decisions) {
    bool matched = false;
    for (const ActivationTrace::CaseCheck& check : trace.cases) {
      if (check.decision == decision &&
          check.case_agents == check.attribution_agents) {
        matched = true;
        break;
      }
    }
    chain = chain && matched;
  }
  summary.chain_complete = chain;
  summary.systemic_learning = trace.directives_applied > 0;
  return summary;
}

namespace {

std::string mode_name(RunMode mode) {
  return mode == RunMode::WithFramework ? "governed" : "baseline";
}

std::string emit_tsv(const ActivationTrace& trace) {
  std::ostringstream out;
  out << "# trace: " << trace.scenario << "\n";
  out << "# mode: " << mode_name(trace.mode) << "\n";
  out << "# note: " << kTraceNote << "\n";
  out << "time_min\tevent\tagents\tmeasures\tlayer\trules\n";
  for (const GovernanceEvent& row : trace.rows) {
    std::string agents = join(row.agents, ",");
    std::string measures = join_set(row.measures);
    std::string rules = join_set(row.rules);
    out << row.time << '\t' << row.label << '\t' << (agents.empty() ? "-" : agents)
        << '\t' << (measures.empty() ? "-" : measures) << '\t' << row.layer << '\t'
        << (rules.empty() ? "-" : rules) << '\n';
  }
  return out.str();
}

std::string emit_text(const ActivationTrace& trace) {
  std::ostringstream out;
  out << "activation trace: " << trace.scenario << " (" << mode_name(trace.mode)
      << ")\n";
  for (const GovernanceEvent& row : trace.rows) {
    std::string agents = join(row.agents, ",");
    std::string measures = join_set(row.measures);
    std::string rules = join_set(row.rules);
    out << "  t=" << row.time << "min " << row.label
        << "  agents=" << (agents.empty() ? "-" : agents)
        << "  measures=" << (measures.empty() ? "-" : measures)
        << "  layer=" << row.layer << "  rules=" << (rules.empty() ? "-" : rules)
        << "\n";
  }
  out << "note: " << kTimingCaveat << "\n";
  return out.str();
}

} // namespace

std::string emit_trace(const ActivationTrace& trace, const std::string& format) {
  if (format == "tsv") return emit_tsv(trace);
  if (format == "text") return emit_text(trace);
  throw Error(Errc::UnknownFormat, "unknown trace format '" + format + "'");
}

ActivationTrace parse_trace_tsv(const std::string& text) {
  ActivationTrace trace;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("# trace: ", 0) == 0) {
      trace.scenario = line.substr(9);
      continue;
    }
    if (line.rfind("# mode: ", 0) == 0) {
      trace.mode = line.substr(8) == "baseline" ? RunMode::Baseline
                                                : RunMode::WithFramework;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "time_min\tevent\tagents\tmeasures\tlayer\trules") {
        throw Error(Errc::SchemaError, "unexpected trace header: " + line);
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row_in(line);
    while (std::getline(row_in, field, '\t')) fields.push_back(field);
    if (fields.size() != 6) {
      throw Error(Errc::SchemaError, "trace row needs 6 fields: " + line);
    }
    GovernanceEvent row;
    row.time = std::stoll(fields[0]);
    row.label = fields[1];
    if (fields[2] != "-") {
      std::istringstream agents_in(fields[2]);
      std::string agent;
      while (std::getline(agents_in, agent, ',')) row.agents.push_back(agent);
    }
    if (fields[3] != "-") {
      std::istringstream measures_in(fields[3]);
      std::string measure;
      while (std::getline(measures_in, measure, ',')) row.measures.insert(measure);
    }
    row.layer = fields[4];
    if (fields[5] != "-") {
      std::istringstream rules_in(fields[5]);
      std::string rule;
      while (std::getline(rules_in, rule, ',')) row.rules.insert(rule);
    }
    trace.rows.push_back(std::move(row));
  }
  if (!header_seen) {
    throw Error(Errc::SchemaError, "trace text has no header line");
  }
  return trace;
}

std::string render_summary_text(const ActivationSummary& summary) {
  std::ostringstream out;
  const int percent = summary.catalog_total > 0
                          ? static_cast<int>(100.0 * summary.measures_activated /
                                                 summary.catalog_total +
                                             0.5)
                          : 0;
  out << "measures activated: " << summary.measures_activated << " of "
      << summary.catalog_total << " (" << percent << "%)\n";
  if (!summary.measure_ids.empty()) {
    out << "  " << join(summary.measure_ids, ", ") << "\n";
  }
  out << "rules invoked: "
      << (summary.rules_invoked.empty() ? "-" : join_set(summary.rules_invoked))
      << " (" << summary.rules_invoked.size() << " of 5)\n";
  if (summary.detection_time) {
    out << "detection time: " << *summary.detection_time << " min\n";
  } else {
    out << "detection time: none\n";
  }
  out << "coordination points: " << summary.coordination_points;
  if (!summary.coordination_ids.empty()) {
    out << " (" << join(summary.coordination_ids, ", ") << ")";
  }
  out << "\n";
  out << "layers activated: "
      << (summary.layers_activated.empty() ? "-" : join_set(summary.layers_activated))
      << "\n";
  out << "accountability chain complete: " << (summary.chain_complete ? "yes" : "no")
      << "\n";
  out << "systemic learning: " << (summary.systemic_learning ? "yes" : "no") << "\n";
  out << "note: " << kTimingCaveat << "\n";
  return out.str();
}

} // namespace citygov
