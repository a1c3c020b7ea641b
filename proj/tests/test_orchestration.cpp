#include <doctest.h>

#include <random>

#include "citygov/orchestration.hpp"

using namespace citygov;

namespace {

SystemProfile profile(const std::string& id, const std::string& authority,
                      const std::string& domain, DecisionScope scope) {
  SystemProfile p;
  p.id = id;
  p.name = id;
  p.authority = authority;
  p.domain = domain;
  p.evidence = {scope, HumanInvolvement::ExceptionHandling,
                DomainCriticality::CriticalInfrastructure};
  p.endangers_essential_services = true;
  p.cross_org_dependencies = true;
  return p;
}

AgentRegistry corridor_registry() {
  AgentRegistry registry;
  registry.register_agent(
      profile("E", "DEWA", "Energy", DecisionScope::RealTimeControl), {},
      {"signal_power_feeder"}, {});
  registry.register_agent(
      profile("T", "RTA", "Traffic", DecisionScope::Operational), {},
      {"corridor_signal_timing"},
      {{"signal_power_feeder", CouplingClass::SafetyCoupled}});
  registry.register_agent(
      profile("S", "Dubai Police", "Surveillance", DecisionScope::Operational), {},
      {}, {{"corridor_signal_timing", CouplingClass::DataCoupled}});
  return registry;
}

std::vector<Declaration> corridor_declarations(const AgentRegistry& registry) {
  std::vector<Declaration> declarations;
  for (const std::string& id : {"E", "T", "S"}) {
    const AgentRegistry::Entry& entry = registry.entry(id);
    Declaration decl;
    decl.agent_id = id;
    decl.provides = entry.provides;
    decl.dependencies = entry.dependencies;
    declarations.push_back(decl);
  }
  return declarations;
}

DriftSignal drift(const std::string& agent, const std::string& domain, Minutes t,
                  const std::string& metric = "m") {
  DriftSignal s;
  s.agent_id = agent;
  s.metric = metric;
  s.observed = 1.0;
  s.domain = domain;
  s.timestamp = t;
  s.severity = DriftSeverity::Warning;
  return s;
}

/// Independent ancestor oracle: Warshall transitive closure over the
/// cause-link adjacency matrix, nothing shared with attribute().
std::map<std::string, std::set<RecordId>> closure_oracle(const AuditTrail& trail,
                                                         RecordId outcome) {
  const auto& records = trail.records();
  const std::size_t n = records.size();
  std::map<RecordId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[records[i].record_id] = i;

  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (RecordId cause : records[i].cause_links) {
      reach[i][index.at(cause)] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (reach[k][j]) reach[i][j] = true;
      }
    }
  }
  std::map<std::string, std::set<RecordId>> result;
  std::size_t out = index.at(outcome);
  for (std::size_t j = 0; j < n; ++j) {
    if (reach[out][j]) result[records[j].agent_id].insert(records[j].record_id);
  }
  return result;
}

} // namespace

TEST_CASE("register_topology builds the corridor coupling graph") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);

  CHECK(topology.version() == 1);
  CHECK(topology.safety_coupled("signal_power_feeder"));
  CHECK_FALSE(topology.safety_coupled("corridor_signal_timing"));
  CHECK(topology.provider("signal_power_feeder") == std::optional<std::string>("E"));

  auto dependents = topology.dependents("signal_power_feeder");
  REQUIRE(dependents.size() == 1);
  CHECK(dependents[0].from_system == "T");
  CHECK(dependents[0].coupling_class == CouplingClass::SafetyCoupled);
  CHECK(dependents[0].declared_by == "RTA");

  CHECK(topology.coupling_path("E", "T"));
  CHECK(topology.coupling_path("E", "S")); // via T's timing feed
  CHECK(topology.coupling_path("S", "E"));
}

TEST_CASE("empty declaration set yields an empty topology at version 1") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build({}, registry);
  CHECK(topology.version() == 1);
  CHECK(topology.couplings().empty());
}

TEST_CASE("topology update adds an edge at version 2 and retains the prior value") {
  AgentRegistry registry = corridor_registry();
  Topology v1 = Topology::build(corridor_declarations(registry), registry);

  Declaration extra;
  extra.agent_id = "S";
  extra.dependencies = {{"signal_power_feeder", CouplingClass::DataCoupled}};
  Topology v2 = v1.updated({extra}, registry);

  CHECK(v2.version() == 2);
  CHECK(v2.dependents("signal_power_feeder").size() == 2);
  CHECK(v1.version() == 1);
  CHECK(v1.dependents("signal_power_feeder").size() == 1);
}

TEST_CASE("topology rejects unknown agents and dangling resources") {
  AgentRegistry registry = corridor_registry();
  Declaration ghost;
  ghost.agent_id = "ghost";
  CHECK_THROWS_AS(Topology::build({ghost}, registry), Error);

  Declaration dangling;
  dangling.agent_id = "S";
  dangling.dependencies = {{"no_such_resource", CouplingClass::DataCoupled}};
  try {
    Topology::build({dangling}, registry);
    FAIL("expected DanglingResource");
  } catch (const Error& error) {
    CHECK(error.code() == Errc::DanglingResource);
  }
}

TEST_CASE("issue_clearance steps the severance rule") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  ProposedAction action;
  action.action = "curtail_power";
  action.resources = {"signal_power_feeder"};

  std::map<std::string, OperatingMode> modes{{"E", OperatingMode::Normal},
                                             {"T", OperatingMode::Normal},
                                             {"S", OperatingMode::Normal}};

  // dependent in Normal mode, operator approval recorded -> token
  ClearanceOutcome granted =
      issue_clearance(registry, topology, "E", action, modes, true, 5);
  CHECK(std::holds_alternative<ClearanceToken>(granted));
  CHECK(std::get<ClearanceToken>(granted).topology_version == 1);

  // dependent Degraded, no override -> denial citing the coupling
  modes["T"] = OperatingMode::Degraded;
  ClearanceOutcome denied =
      issue_clearance(registry, topology, "E", action, modes, false, 6);
  REQUIRE(std::holds_alternative<Denial>(denied));
  const Denial& denial = std::get<Denial>(denied);
  REQUIRE(denial.violated.has_value());
  CHECK(denial.violated->to_resource == "signal_power_feeder");
  CHECK(denial.violated->from_system == "T");

  // same state with a recorded override -> token
  CHECK(std::holds_alternative<ClearanceToken>(
      issue_clearance(registry, topology, "E", action, modes, true, 7)));

  // action on an uncoupled resource -> token regardless
  ProposedAction uncoupled;
  uncoupled.action = "retune";
  uncoupled.resources = {"corridor_signal_timing"};
  CHECK(std::holds_alternative<ClearanceToken>(
      issue_clearance(registry, topology, "E", uncoupled, modes, false, 8)));
}

TEST_CASE("correlate opens a cascade at the sweep boundary") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);

  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           topology, 30);
  REQUIRE(cascade.has_value());
  CHECK(cascade->opened_at == 30);
  CHECK(cascade->opened_at <= 30); // within one window of the trigger
  CHECK(cascade->window_used == 30);
  CHECK(cascade->domains == std::vector<std::string>{"Energy", "Traffic"});
  CHECK(cascade->agents == std::vector<std::string>{"E", "T"});
}

TEST_CASE("correlate never fires on single-domain or uncoupled signals") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);

  CHECK_FALSE(correlate({drift("E", "Energy", 10), drift("E", "Energy", 15)},
                        topology, 30)
                  .has_value());

  // remove the coupling path: an empty topology shares no resources
  Topology uncoupled = Topology::build({}, registry);
  CHECK_FALSE(correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                        uncoupled, 30)
                  .has_value());
}

TEST_CASE("correlate catches pairs spanning a sweep boundary") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  auto cascade = correlate({drift("E", "Energy", 25), drift("T", "Traffic", 35)},
                           topology, 30);
  REQUIRE(cascade.has_value());
  CHECK(cascade->opened_at == 60);
}

TEST_CASE("signals outside the window never pair") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  CHECK_FALSE(correlate({drift("E", "Energy", 10), drift("T", "Traffic", 45)},
                        topology, 30)
                  .has_value());
}

TEST_CASE("a registered coupling risk confirms at the first matching drift pair") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  TopologyUpdateDirective directive;
  directive.pattern_domains = {"Energy", "Traffic", "Surveillance"};
  Topology learned = topology.with_directive(directive);
  CHECK(learned.version() == 2);
  CHECK(learned.risk_pattern_covers({"Energy", "Traffic"}));

  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           learned, 30);
  REQUIRE(cascade.has_value());
  CHECK(cascade->opened_at == 15); // no wait for the sweep
}

TEST_CASE("correlator dedupes into one open cascade until closed") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  CascadeCorrelator correlator(30);
  correlator.add_signal(drift("E", "Energy", 10), topology);
  correlator.add_signal(drift("T", "Traffic", 15), topology);
  REQUIRE(correlator.poll(30, topology).has_value());

  // a later signal joins the open cascade instead of opening a second one
  CorrelationUpdate update = correlator.add_signal(drift("S", "Surveillance", 40), topology);
  CHECK(update.assessment_advanced);
  CHECK_FALSE(update.confirmed.has_value());
  CHECK(correlator.open_cascade()->agents ==
        std::vector<std::string>{"E", "T", "S"});
  CHECK_FALSE(correlator.poll(60, topology).has_value());

  correlator.close();
  CHECK_FALSE(correlator.cascade_open());
}

TEST_CASE("open_incident aligns to the strictest clock") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           topology, 30);
  REQUIRE(cascade.has_value());
  AuditTrail trail;

  SUBCASE("NIS2 and GDPR") {
    IncidentRecord incident = open_incident(
        "incident-1", *cascade, {{"NIS2", 1440}, {"GDPR", 4320}}, 30, trail);
    CHECK(incident.baseline_deadline == 1440);
    CHECK(incident.notifications.size() == 2);
    CHECK(trail.contains(incident.shared_record_id));
  }
  SUBCASE("single regime") {
    IncidentRecord incident =
        open_incident("incident-1", *cascade, {{"GDPR", 4320}}, 30, trail);
    CHECK(incident.baseline_deadline == 4320);
  }
  SUBCASE("three regimes, parallel notifications, one shared record") {
    IncidentRecord incident = open_incident(
        "incident-1", *cascade,
        {{"NIS2", 1440}, {"GDPR", 4320}, {"AIACT", 21600}}, 30, trail);
    CHECK(incident.baseline_deadline == 1440);
    CHECK(incident.notifications.size() == 3);
    for (const auto& [regime, sent_at] : incident.notifications) {
      CHECK(sent_at == 30);
    }
    int shared = 0;
    for (const AuditRecord& rec : trail.records()) {
      if (rec.event_kind == "incident_record") shared += 1;
    }
    CHECK(shared == 1);
  }
  SUBCASE("empty regime set") {
    CHECK_THROWS_AS(open_incident("incident-1", *cascade, {}, 30, trail), Error);
  }
}

TEST_CASE("export_incident lists the regime table and baseline") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           topology, 30);
  AuditTrail trail;
  IncidentRecord incident = open_incident(
      "incident-1", *cascade, {{"NIS2", 1440}, {"GDPR", 4320}}, 30, trail);
  std::string text = export_incident(incident);
  CHECK(text.find("incident: incident-1") != std::string::npos);
  CHECK(text.find("NIS2\t1440\t1470\t30") != std::string::npos);
  CHECK(text.find("baseline_min: 1440") != std::string::npos);
}

TEST_CASE("joint oversight requires two authorities and trail-backed briefings") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           topology, 30);
  REQUIRE(cascade.has_value());
  AuditTrail trail;
  const AuditRecord& briefing = trail.record_audit("E", "drift_signal", "x", false, {}, 10);

  OversightSession session = escalate_joint_oversight(
      "session-1", *cascade, {"RTA", "DEWA", "Dubai Police"},
      {briefing.record_id}, trail, 30);
  CHECK(session.authorities.size() == 3);
  CHECK(trail.contains(session.session_record));
  for (RecordId id : session.briefing_records) {
    CHECK(trail.contains(id));
  }

  CHECK_THROWS_AS(escalate_joint_oversight("session-2", *cascade, {"RTA"}, {},
                                           trail, 31),
                  Error);
  CHECK_THROWS_AS(escalate_joint_oversight("session-3", *cascade,
                                           {"RTA", "DEWA"}, {999}, trail, 32),
                  Error);
}

TEST_CASE("attribute matches the closure oracle on a 12-node DAG") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  AuditTrail trail;

  // Hand-built 12-node DAG across three owners.
  std::vector<RecordId> ids;
  auto add = [&](const std::string& agent, std::vector<std::size_t> causes, Minutes t) {
    std::vector<RecordId> links;
    for (std::size_t index : causes) links.push_back(ids[index]);
    ids.push_back(trail.record_audit(agent, "k", "p", false, links, t).record_id);
  };
  add("E", {}, 1);        // 0
  add("E", {0}, 2);       // 1
  add("T", {1}, 3);       // 2
  add("T", {2}, 4);       // 3
  add("S", {3}, 5);       // 4
  add("S", {2, 4}, 6);    // 5
  add("E", {}, 7);        // 6  (disconnected branch)
  add("T", {6}, 8);       // 7
  add("S", {5}, 9);       // 8
  add("E", {1, 5}, 10);   // 9
  add("S", {8, 9}, 11);   // 10
  add("T", {10}, 12);     // 11

  for (RecordId outcome : ids) {
    AttributionReport report = attribute(trail, outcome, topology);
    auto oracle = closure_oracle(trail, outcome);
    REQUIRE(report.contributing.size() == oracle.size());
    for (const auto& [agent, expected] : oracle) {
      std::set<RecordId> actual(report.contributing.at(agent).begin(),
                                report.contributing.at(agent).end());
      CHECK(actual == expected);
    }
  }

  AttributionReport lone = attribute(trail, ids[6], topology);
  CHECK(lone.contributing.size() == 1);
  CHECK(lone.contributing.at("E") == std::vector<RecordId>{ids[6]});
  CHECK(lone.topology_version == topology.version());

  CHECK_THROWS_AS(attribute(trail, 9999, topology), Error);
}

TEST_CASE("attribute matches the oracle on random DAGs") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  std::mt19937 rng(20424);
  const std::vector<std::string> owners = {"E", "T", "S", "orchestrator"};

  for (int trial = 0; trial < 25; ++trial) {
    AuditTrail trail;
    std::vector<RecordId> ids;
    std::uniform_int_distribution<int> node_count(1, 30);
    const int n = node_count(rng);
    for (int i = 0; i < n; ++i) {
      std::vector<RecordId> causes;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
          causes.push_back(ids[j]);
        }
      }
      const std::string& owner =
          owners[std::uniform_int_distribution<std::size_t>(0, owners.size() - 1)(rng)];
      ids.push_back(
          trail.record_audit(owner, "k", "p", false, causes, i).record_id);
    }
    RecordId outcome = ids[std::uniform_int_distribution<std::size_t>(
        0, ids.size() - 1)(rng)];
    AttributionReport report = attribute(trail, outcome, topology);
    auto oracle = closure_oracle(trail, outcome);
    REQUIRE(report.contributing.size() == oracle.size());
    for (const auto& [agent, expected] : oracle) {
      std::set<RecordId> actual(report.contributing.at(agent).begin(),
                                report.contributing.at(agent).end());
      CHECK(actual == expected);
    }
  }
}

TEST_CASE("resolve_conflict dispatches each resolution") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  AuditTrail trail;
  trail.record_audit("S", "enforcement_decision", "plate:X", true, {}, 1);

  ConflictRule t1{"T1", "Logging vs. minimisation", {"R-19"},
                  Resolution::TieredLogging, Layer::Agent};
  ConflictRule t2{"T2", "Erasure vs. retention", {"R-19", "R-07"},
                  Resolution::GraduatedRetention, Layer::Orchestration};
  ConflictRule t3{"T3", "Assessment proliferation", {"R-12"},
                  Resolution::ConsolidatedAssessment, Layer::Orchestration};
  ConflictRule t4{"T4", "Incident timelines", {"R-05"},
                  Resolution::StrictestClockTriage, Layer::Orchestration};
  ConflictRule t5{"T5", "Transparency vs. trade secrets", {"R-14"},
                  Resolution::TieredDisclosure, Layer::City};

  SUBCASE("T1 checks logging scope without activating a measure") {
    ResolutionContext context;
    context.logging_agent = "S";
    ResolutionAction action = resolve_conflict(t1, context, trail, 10);
    CHECK(action.activated_measures.empty());
    CHECK(action.action.find("1 pseudonymized") != std::string::npos);
    CHECK(trail.contains(action.evidence_record));
  }
  SUBCASE("T1 without context is MissingContext") {
    try {
      resolve_conflict(t1, {}, trail, 10);
      FAIL("expected MissingContext");
    } catch (const Error& error) {
      CHECK(error.code() == Errc::MissingContext);
    }
  }
  SUBCASE("T2 applies graduated retention") {
    ResolutionContext context;
    context.retention_now = 1;
    ResolutionAction action = resolve_conflict(t2, context, trail, 10);
    CHECK(action.activated_measures == std::vector<std::string>{"R-19", "R-07"});
  }
  SUBCASE("T3 consolidates the artefact set") {
    ResolutionContext context;
    context.assessment_artefacts = {"FRIA", "DPIA", "AIMS impact"};
    ResolutionAction action = resolve_conflict(t3, context, trail, 10);
    CHECK(action.activated_measures == std::vector<std::string>{"R-12"});
    CHECK(action.action.find("consolidated 3") != std::string::npos);
  }
  SUBCASE("T4 verifies the running triage") {
    auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                             topology, 30);
    IncidentRecord incident =
        open_incident("incident-1", *cascade, {{"NIS2", 1440}}, 30, trail);
    ResolutionContext context;
    context.incident = &incident;
    ResolutionAction action = resolve_conflict(t4, context, trail, 45);
    CHECK(action.resolution == Resolution::StrictestClockTriage);
    CHECK(action.action.find("baseline 1440") != std::string::npos);
  }
  SUBCASE("T5 partitions disclosure") {
    ResolutionContext context;
    context.disclosure_system = "gtic";
    ResolutionAction action = resolve_conflict(t5, context, trail, 10);
    CHECK(action.activated_measures == std::vector<std::string>{"R-14"});
  }
}

TEST_CASE("consolidate_assessment bundles sections and registers the risk") {
  AgentRegistry registry = corridor_registry();
  Topology topology = Topology::build(corridor_declarations(registry), registry);
  AuditTrail trail;
  const AuditRecord& outcome =
      trail.record_audit("S", "enforcement_decision", "plate:X", true, {}, 25);
  auto cascade = correlate({drift("E", "Energy", 10), drift("T", "Traffic", 15)},
                           topology, 30);
  IncidentRecord incident = open_incident(
      "incident-1", *cascade, {{"NIS2", 1440}, {"GDPR", 4320}}, 30, trail);
  ConflictRule t3{"T3", "Assessment proliferation", {"R-12"},
                  Resolution::ConsolidatedAssessment, Layer::Orchestration};

  // an active incident refuses consolidation without override
  try {
    consolidate_assessment(incident, trail, topology, t3, outcome.record_id,
                           cascade->domains, 120);
    FAIL("expected OpenIncident");
  } catch (const Error& error) {
    CHECK(error.code() == Errc::OpenIncident);
  }

  incident.status = "closing";
  ConsolidatedAssessment assessment = consolidate_assessment(
      incident, trail, topology, t3, outcome.record_id, cascade->domains, 120);
  CHECK(assessment.regime_sections.size() == 2);
  CHECK(assessment.attribution.contributing.count("S") == 1);
  CHECK(assessment.directive.pattern_domains ==
        std::vector<std::string>{"Energy", "Traffic"});
  CHECK(assessment.consolidation.rule_id == "T3");

  Topology learned = topology.with_directive(assessment.directive);
  CHECK(learned.version() == topology.version() + 1);
  CHECK(learned.risk_pattern_covers({"Energy", "Traffic"}));

  // single-regime incidents produce a single section
  IncidentRecord single = open_incident("incident-2", *cascade, {{"GDPR", 4320}},
                                        30, trail);
  single.status = "closing";
  CHECK(consolidate_assessment(single, trail, topology, t3, outcome.record_id,
                               cascade->domains, 130)
            .regime_sections.size() == 1);
}
