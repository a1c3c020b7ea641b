#pragma once

#include <optional>
#include <variant>

#include "citygov/agent_runtime.hpp"
#include "citygov/catalog.hpp"

namespace citygov {

struct Coupling {
  std::string from_system; // the depending system
  std::string to_resource;
  CouplingClass coupling_class = CouplingClass::DataCoupled;
  std::string declared_by; // authority of the depending system
  int topology_version = 1;
};

struct TopologyUpdateDirective {
  std::vector<std::string> pattern_domains;
  std::string description;
};

/// Declared interaction topology: which systems provide and depend on which
/// resources, with coupling classes. Immutable; updates produce a new value
/// with a bumped version, so prior versions stay available.
class Topology : public TopologyView {
public:
  /// Builds version 1 from registration declarations. Throws UnknownAgent
  /// for declarations of unregistered agents and DanglingResource for
  /// dependencies on resources no agent provides.
  static Topology build(const std::vector<Declaration>& declarations,
                        const AgentRegistry& registry);

  /// Returns a copy extended with additional declarations, version + 1.
  Topology updated(const std::vector<Declaration>& additional,
                   const AgentRegistry& registry) const;

  /// Registers a compound-event coupling pattern as a known risk, version + 1.
  Topology with_directive(const TopologyUpdateDirective& directive) const;

  bool safety_coupled(const std::string& resource) const override;
  int version() const override { return version_; }

  const std::vector<Coupling>& couplings() const { return couplings_; }
  std::optional<std::string> provider(const std::string& resource) const;
  std::vector<Coupling> dependents(const std::string& resource) const;

  /// True when a chain of provide/depend relations connects the two agents.
  bool coupling_path(const std::string& agent_a, const std::string& agent_b) const;

  const std::vector<std::vector<std::string>>& risk_register() const {
    return risk_register_;
  }
  /// True when the given drift domains fall inside a registered risk pattern.
  bool risk_pattern_covers(const std::vector<std::string>& domains) const;

private:
  void add_declarations(const std::vector<Declaration>& declarations,
                        const AgentRegistry& registry);

  int version_ = 1;
  std::vector<Coupling> couplings_;
  std::map<std::string, std::string> providers_; // resource -> providing agent
  std::vector<std::vector<std::string>> risk_register_;
};

struct Denial {
  std::optional<Coupling> violated;
  std::string reason;
};

using ClearanceOutcome = std::variant<ClearanceToken, Denial>;

/// Grants clearance unless the action would sever a safety-coupled resource
/// currently serving a Degraded-or-worse dependent and no human override is
/// recorded. Denial is a value, not an error.
ClearanceOutcome issue_clearance(const AgentRegistry& registry,
                                 const Topology& topology,
                                 const std::string& agent_id,
                                 const ProposedAction& action,
                                 const std::map<std::string, OperatingMode>& modes,
                                 bool human_override, Minutes now);

struct CascadeEvent {
  std::string cascade_id;
  std::vector<DriftSignal> contributing;
  std::vector<std::string> domains; // first-contribution order
  std::vector<std::string> agents;  // first-contribution order
  Minutes opened_at = 0;
  Minutes window_used = 0;
};

struct CorrelationUpdate {
  bool assessment_advanced = false;      // the correlator did work on this signal
  std::optional<CascadeEvent> confirmed; // set on a risk-register match
};

/// Correlates drift signals across domains. An assessment opens when two
/// coupled signals from distinct domains fall within the window of each
/// other; the joint event is confirmed at the next sweep boundary (multiples
/// of the window), or immediately when the domains match a registered
/// coupling risk. One cascade stays open until closed; later signals join it.
class CascadeCorrelator {
public:
  explicit CascadeCorrelator(Minutes window);

  CorrelationUpdate add_signal(const DriftSignal& signal, const Topology& topology);
  std::optional<CascadeEvent> poll(Minutes now, const Topology& topology);

  bool assessment_active() const { return confirm_at_.has_value() || open_.has_value(); }
  bool cascade_open() const { return open_.has_value(); }
  std::optional<Minutes> pending_confirm() const { return confirm_at_; }
  const std::optional<CascadeEvent>& open_cascade() const { return open_; }
  void close();
  Minutes window() const { return window_; }

private:
  CascadeEvent build_cascade(Minutes opened_at, const Topology& topology);
  bool pair_matches(const DriftSignal& a, const DriftSignal& b,
                    const Topology& topology) const;

  Minutes window_;
  std::vector<DriftSignal> signals_;
  std::optional<Minutes> confirm_at_;
  std::optional<CascadeEvent> open_;
  int cascade_seq_ = 0;
};

/// Convenience over a full signal stream: feeds the correlator in time order
/// and returns the cascade it confirms, if any.
std::optional<CascadeEvent> correlate(std::vector<DriftSignal> signals,
                                      const Topology& topology, Minutes window);

struct RegimeWindow {
  std::string regime;
  Minutes window = 0; // notification deadline, minutes after t0
};

struct IncidentRecord {
  std::string incident_id;
  std::string cascade_id;
  Minutes t0 = 0;
  std::vector<std::pair<std::string, Minutes>> regime_clocks; // regime -> minutes after t0
  Minutes baseline_deadline = 0; // min over regime clocks
  std::vector<std::pair<std::string, Minutes>> notifications; // regime -> sent_at
  RecordId shared_record_id = 0;
  std::string status = "open"; // open | closing | closed
};

/// Opens the shared incident record and executes the strictest-clock triage:
/// baseline = min regime window, one parallel notification per regime,
/// exactly one shared record, T4 evidence appended. Throws EmptyRegimeSet.
IncidentRecord open_incident(const std::string& incident_id,
                             const CascadeEvent& cascade,
                             const std::vector<RegimeWindow>& regimes, Minutes t0,
                             AuditTrail& trail,
                             const std::vector<RecordId>& cause_links = {});

/// Structured text export: incident id, t0, regime table, baseline, shared
/// record id.
std::string export_incident(const IncidentRecord& incident);

struct OversightSession {
  std::string session_id;
  std::string cascade_id;
  std::vector<std::string> authorities;
  std::vector<RecordId> briefing_records;
  RecordId session_record = 0;
};

/// Convenes joint oversight over a cascade. Requires at least two
/// authorities (SingleAuthority otherwise); briefing records must exist in
/// the shared trail.
OversightSession escalate_joint_oversight(const std::string& session_id,
                                          const CascadeEvent& cascade,
                                          const std::vector<std::string>& authorities,
                                          const std::vector<RecordId>& briefing_records,
                                          AuditTrail& trail, Minutes now);

struct AttributionReport {
  RecordId outcome = 0;
  std::map<std::string, std::vector<RecordId>> contributing; // agent -> sorted record ids
  int topology_version = 0;
};

/// Contributing agents = owners of the transitive cause-link closure of the
/// outcome record, including the outcome's owner. Throws UnknownRecord.
AttributionReport attribute(const AuditTrail& trail, RecordId outcome,
                            const Topology& topology);

struct ResolutionContext {
  std::string logging_agent;                     // T1: whose logging scope to check
  std::optional<Minutes> retention_now;          // T2: apply retention as of this time
  std::vector<std::string> assessment_artefacts; // T3: artefacts being consolidated
  const IncidentRecord* incident = nullptr;      // T4: running triage to verify
  std::string disclosure_system;                 // T5: system under tiered disclosure
  std::vector<RecordId> evidence_causes;
};

struct ResolutionAction {
  std::string rule_id;
  Resolution resolution = Resolution::TieredLogging;
  std::string action;
  RecordId evidence_record = 0;
  // Implementing measures count as activated only when the mechanism
  // executed an action, not when the invocation was a policy check.
  std::vector<std::string> activated_measures;
};

/// Dispatches a conflict rule to its implementing mechanism and appends an
/// evidence record naming rule id and action. Throws MissingContext when the
/// context lacks what the resolution needs.
ResolutionAction resolve_conflict(const ConflictRule& rule,
                                  const ResolutionContext& context,
                                  AuditTrail& trail, Minutes now);

struct ConsolidatedAssessment {
  std::string incident_id;
  AttributionReport attribution;
  std::vector<std::pair<std::string, std::string>> regime_sections;
  TopologyUpdateDirective directive;
  RecordId assessment_record = 0;
  ResolutionAction consolidation; // the T3 invocation
};

/// Bundles attribution, per-regime traceability sections, and a directive
/// registering the compound-event coupling pattern. Throws OpenIncident when
/// forced on an active incident without override.
ConsolidatedAssessment consolidate_assessment(const IncidentRecord& incident,
                                              AuditTrail& trail,
                                              const Topology& topology,
                                              const ConflictRule& t3_rule,
                                              RecordId attribution_outcome,
                                              const std::vector<std::string>& cascade_domains,
                                              Minutes now, bool force = false);

} // namespace citygov
