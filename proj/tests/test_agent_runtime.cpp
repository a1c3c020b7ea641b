#include <doctest.h>

#include <set>

#include "citygov/agent_runtime.hpp"

using namespace citygov;

namespace {

struct StubTopology : TopologyView {
  std::set<std::string> coupled;
  int topology_version = 1;

  bool safety_coupled(const std::string& resource) const override {
    return coupled.count(resource) > 0;
  }
  int version() const override { return topology_version; }
};

SystemProfile profile(const std::string& id, DecisionScope scope,
                      HumanInvolvement human, DomainCriticality criticality,
                      bool endangers = false, bool crossorg = false) {
  SystemProfile p;
  p.id = id;
  p.name = id;
  p.authority = "authority-" + id;
  p.domain = "domain-" + id;
  p.evidence = {scope, human, criticality};
  p.endangers_essential_services = endangers;
  p.cross_org_dependencies = crossorg;
  return p;
}

AgentRegistry registry_with(GovernanceLevel target) {
  AgentRegistry registry;
  OperatingEnvelope envelope;
  envelope.metrics["health"] = {0.5, 1.0, 0.2, {}};
  switch (target) {
    case GovernanceLevel::G4:
      registry.register_agent(profile("a", DecisionScope::RealTimeControl,
                                      HumanInvolvement::SupervisoryOverride,
                                      DomainCriticality::CriticalInfrastructure,
                                      true, true),
                              envelope, {}, {});
      break;
    case GovernanceLevel::G3:
      registry.register_agent(profile("a", DecisionScope::Operational,
                                      HumanInvolvement::ExceptionHandling,
                                      DomainCriticality::PublicSpace),
                              envelope, {}, {});
      break;
    default:
      registry.register_agent(profile("a", DecisionScope::BoundedTask,
                                      HumanInvolvement::PreApproval,
                                      DomainCriticality::CustomerFacing),
                              envelope, {}, {});
      break;
  }
  return registry;
}

ProposedAction curtailment() {
  ProposedAction action;
  action.action = "curtail_power";
  action.resources = {"signal_power_feeder"};
  return action;
}

} // namespace

TEST_CASE("enforce_policy blocks unclearanced safety-coupled actions at O=Full") {
  AgentRegistry registry = registry_with(GovernanceLevel::G4);
  StubTopology topology;
  topology.coupled.insert("signal_power_feeder");
  AuditTrail trail;

  PolicyDecision decision =
      enforce_policy(registry, "a", curtailment(), topology, std::nullopt, trail, 5);
  CHECK(decision.outcome == PolicyOutcome::Block);
  CHECK(decision.violated_coupling == "signal_power_feeder");
  CHECK(decision.measures == std::vector<std::string>{"R-01", "R-09"});
  CHECK(trail.records().size() == 1);
  CHECK(trail.records()[0].event_kind == "policy_decision");
}

TEST_CASE("enforce_policy escalates in advisory mode at O=Basic and allows at O=Off") {
  StubTopology topology;
  topology.coupled.insert("signal_power_feeder");
  AuditTrail trail;

  AgentRegistry basic = registry_with(GovernanceLevel::G3);
  CHECK(enforce_policy(basic, "a", curtailment(), topology, std::nullopt, trail, 1)
            .outcome == PolicyOutcome::Escalate);

  AgentRegistry off = registry_with(GovernanceLevel::G2);
  CHECK(enforce_policy(off, "a", curtailment(), topology, std::nullopt, trail, 1)
            .outcome == PolicyOutcome::Allow);
  // every decision appended a record
  CHECK(trail.records().size() == 2);
}

TEST_CASE("enforce_policy honours a valid clearance and rejects a stale one") {
  AgentRegistry registry = registry_with(GovernanceLevel::G4);
  StubTopology topology;
  topology.coupled.insert("signal_power_feeder");
  AuditTrail trail;

  ClearanceToken token;
  token.token_id = 7;
  token.agent_id = "a";
  token.action = "curtail_power";
  token.topology_version = 1;
  CHECK(enforce_policy(registry, "a", curtailment(), topology, token, trail, 2)
            .outcome == PolicyOutcome::Allow);

  token.topology_version = 0; // issued against an older topology
  CHECK(enforce_policy(registry, "a", curtailment(), topology, token, trail, 3)
            .outcome == PolicyOutcome::Block);
}

TEST_CASE("enforce_policy allows actions touching no coupled resource") {
  AgentRegistry registry = registry_with(GovernanceLevel::G4);
  StubTopology topology;
  AuditTrail trail;
  PolicyDecision decision =
      enforce_policy(registry, "a", curtailment(), topology, std::nullopt, trail, 1);
  CHECK(decision.outcome == PolicyOutcome::Allow);
  CHECK(decision.measures.empty());
}

TEST_CASE("enforce_policy validates declared bound targets") {
  AgentRegistry registry = registry_with(GovernanceLevel::G2);
  StubTopology topology;
  AuditTrail trail;

  ProposedAction action;
  action.action = "redistribute";
  action.validate_bounds = true;
  action.bound_targets["health"] = 0.8;
  PolicyDecision ok = enforce_policy(registry, "a", action, topology, std::nullopt,
                                     trail, 1);
  CHECK(ok.outcome == PolicyOutcome::Allow);
  CHECK(ok.measures == std::vector<std::string>{"R-09"});

  action.bound_targets["health"] = 1.4;
  CHECK(enforce_policy(registry, "a", action, topology, std::nullopt, trail, 2)
            .outcome == PolicyOutcome::Block);
}

TEST_CASE("enforce_policy rejects unregistered agents") {
  AgentRegistry registry;
  StubTopology topology;
  AuditTrail trail;
  CHECK_THROWS_AS(
      enforce_policy(registry, "ghost", curtailment(), topology, std::nullopt, trail, 0),
      Error);
}

TEST_CASE("observe emits a drift signal on an out-of-bounds metric") {
  AgentRegistry registry;
  OperatingEnvelope envelope;
  envelope.metrics["signal_controller_health"] = {0.9, 1.0, 0.7, {}};
  registry.register_agent(profile("e", DecisionScope::RealTimeControl,
                                  HumanInvolvement::SupervisoryOverride,
                                  DomainCriticality::CriticalInfrastructure),
                          envelope, {}, {});
  EnvelopeMonitor monitor(registry);

  auto signal = monitor.observe("e", "signal_controller_health", 0.55, 10);
  REQUIRE(signal.has_value());
  CHECK(signal->severity == DriftSeverity::Degraded);
  CHECK(signal->domain == "domain-e");
  CHECK(signal->observed == doctest::Approx(0.55));

  CHECK_FALSE(monitor.observe("e", "signal_controller_health", 0.95, 11).has_value());
  CHECK_THROWS_AS(monitor.observe("e", "unknown_metric", 1.0, 12), Error);
}

TEST_CASE("observe debounces with k consecutive breaches") {
  AgentRegistry registry;
  OperatingEnvelope envelope;
  envelope.consecutive_breach_k = 2;
  envelope.metrics["m"] = {0.0, 1.0, {}, {}};
  registry.register_agent(profile("a", DecisionScope::BoundedTask,
                                  HumanInvolvement::PreApproval,
                                  DomainCriticality::CustomerFacing),
                          envelope, {}, {});
  EnvelopeMonitor monitor(registry);

  // hand-stepped with k=2: breach, recovery, breach -> never two in a row
  CHECK_FALSE(monitor.observe("a", "m", 2.0, 1).has_value());
  CHECK_FALSE(monitor.observe("a", "m", 0.5, 2).has_value());
  CHECK_FALSE(monitor.observe("a", "m", 2.0, 3).has_value());
  // second consecutive breach fires
  auto signal = monitor.observe("a", "m", 2.0, 4);
  REQUIRE(signal.has_value());
  CHECK(signal->severity == DriftSeverity::Warning);
  CHECK(signal->timestamp == 4);
}

TEST_CASE("observe is deterministic over a replayed series") {
  auto run_series = [] {
    AgentRegistry registry;
    OperatingEnvelope envelope;
    envelope.consecutive_breach_k = 2;
    envelope.metrics["m"] = {0.0, 1.0, {}, -1.0};
    registry.register_agent(profile("a", DecisionScope::BoundedTask,
                                    HumanInvolvement::PreApproval,
                                    DomainCriticality::CustomerFacing),
                            envelope, {}, {});
    EnvelopeMonitor monitor(registry);
    std::vector<std::string> out;
    const double series[] = {2.0, 2.5, 0.5, 3.0, 3.0, 3.0};
    for (int i = 0; i < 6; ++i) {
      auto s = monitor.observe("a", "m", series[i], i);
      out.push_back(s ? to_string(s->severity) + "@" + std::to_string(s->timestamp)
                      : "-");
    }
    return out;
  };
  CHECK(run_series() == run_series());
}

TEST_CASE("record_audit pseudonymizes subject-identifying payloads") {
  AuditTrail trail("test-key");
  const AuditRecord& rec =
      trail.record_audit("s", "enforcement_decision", "plate:A12345", true, {}, 10);
  CHECK(rec.pseudonymized);
  CHECK(rec.payload.rfind("psn:", 0) == 0);
  CHECK(rec.payload.find("A12345") == std::string::npos);
  CHECK(rec.access_tier == AccessTier::Oversight);
  CHECK(rec.retention_deadline > rec.timestamp);

  const AuditRecord& heartbeat =
      trail.record_audit("s", "heartbeat", "ok", false, {}, 11);
  CHECK_FALSE(heartbeat.pseudonymized);
  CHECK(heartbeat.payload == "ok");
}

TEST_CASE("pseudonymization is stable within a run and keyed") {
  Pseudonymizer a("key-1");
  Pseudonymizer b("key-2");
  CHECK(a.token("subject") == a.token("subject"));
  CHECK(a.token("subject") != a.token("other"));
  CHECK(a.token("subject") != b.token("subject"));
}

TEST_CASE("record_audit rejects dangling cause links") {
  AuditTrail trail;
  CHECK_THROWS_AS(trail.record_audit("a", "k", "p", false, {42}, 1), Error);
  try {
    trail.record_audit("a", "k", "p", false, {42}, 1);
  } catch (const Error& error) {
    CHECK(error.code() == Errc::DanglingCauseLink);
  }
}

TEST_CASE("cause links form a DAG ordered by time") {
  AuditTrail trail;
  const AuditRecord& r1 = trail.record_audit("a", "k", "1", false, {}, 1);
  const AuditRecord& r2 = trail.record_audit("a", "k", "2", false, {r1.record_id}, 2);
  const AuditRecord& r3 =
      trail.record_audit("b", "k", "3", false, {r1.record_id, r2.record_id}, 3);
  for (const AuditRecord& rec : trail.records()) {
    for (RecordId cause : rec.cause_links) {
      CHECK(trail.record(cause).timestamp <= rec.timestamp);
      CHECK(cause < rec.record_id);
    }
  }
  CHECK(r3.cause_links.size() == 2);
}

TEST_CASE("apply_retention tombstones expired records and keeps the skeleton") {
  RetentionPolicy retention;
  retention.telemetry = 10;
  retention.enforcement = 100;
  AuditTrail trail("k", retention);

  // 5 records, 2 of which expire at now=50
  const AuditRecord& t1 = trail.record_audit("a", "telemetry", "v1", false, {}, 5);
  const AuditRecord& t2 =
      trail.record_audit("a", "telemetry", "v2", false, {t1.record_id}, 20);
  trail.record_audit("a", "enforcement_decision", "plate:X", true, {t2.record_id}, 25);
  trail.record_audit("a", "telemetry", "v3", false, {}, 45);
  trail.record_audit("a", "heartbeat", "ok", false, {}, 48);

  PurgeReport report = trail.apply_retention(50);
  CHECK(report.total == 2);
  CHECK(report.purged_by_tier.at(AccessTier::Oversight) == 2);

  int tombstones = 0;
  for (const AuditRecord& rec : trail.records()) {
    if (rec.tombstone) {
      tombstones += 1;
      CHECK(rec.payload.empty());
    } else {
      CHECK(rec.retention_deadline >= 50);
    }
  }
  CHECK(tombstones == 2);
  // cause-link graph survives the purge
  CHECK(trail.record(t2.record_id).cause_links ==
        std::vector<RecordId>{t1.record_id});

  CHECK(AuditTrail().apply_retention(1000).total == 0);
}

TEST_CASE("trail export is ordered by timestamp then id with fixed fields") {
  AuditTrail trail;
  trail.record_audit("b", "k2", "later", false, {}, 9);
  trail.record_audit("a", "k1", "earlier", false, {}, 3);
  std::string lines = trail.export_lines();
  std::size_t first = lines.find("earlier");
  std::size_t second = lines.find("later");
  REQUIRE(first != std::string::npos);
  REQUIRE(second != std::string::npos);
  CHECK(first < second);
  CHECK(lines.find("2\t9\tb\tk2\tOversight\t0\t-\tlater") != std::string::npos);
}

TEST_CASE("reassessment tasks are tagged and deduplicated per tick") {
  AgentRegistry registry = registry_with(GovernanceLevel::G2);
  ReassessmentBook book(registry);

  auto [task, fresh] = book.trigger("a", ChangeKind::OperationalChange, 7, 1);
  CHECK(fresh);
  CHECK(task.measure_tags == std::vector<std::string>{"R-20", "R-23"});

  auto [dup, fresh2] = book.trigger("a", ChangeKind::OperationalChange, 7, 1);
  CHECK_FALSE(fresh2);
  CHECK(book.tasks().size() == 1);

  auto [task2, fresh3] = book.trigger("a", ChangeKind::IntegrationChange, 7, 3);
  CHECK(fresh3);
  CHECK(task2.topology_version == 3);
  CHECK(book.tasks().size() == 2);

  CHECK_THROWS_AS(book.trigger("ghost", ChangeKind::OperationalChange, 1, 1), Error);
}
