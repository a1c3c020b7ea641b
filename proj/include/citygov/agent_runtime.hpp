#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "citygov/calibration.hpp"
#include "citygov/errors.hpp"

namespace citygov {

using Minutes = std::int64_t;
using RecordId = std::uint64_t;

enum class OperatingMode { Normal = 0, Degraded = 1, Halted = 2 };
enum class AccessTier { Public, Oversight, Regulator };
enum class DriftSeverity { Warning, Degraded };
enum class PolicyOutcome { Allow, Block, Escalate };
enum class ChangeKind { OperationalChange, IntegrationChange, EnvironmentChange };
enum class CouplingClass { SafetyCoupled, DataCoupled, Advisory };

std::string to_string(OperatingMode mode);
std::string to_string(AccessTier tier);
std::string to_string(DriftSeverity severity);
std::string to_string(PolicyOutcome outcome);
std::string to_string(ChangeKind change);
std::string to_string(CouplingClass coupling);
OperatingMode operating_mode_from_string(const std::string& text);
AccessTier access_tier_from_string(const std::string& text);
ChangeKind change_kind_from_string(const std::string& text);
CouplingClass coupling_class_from_string(const std::string& text);

/// Per-metric bounds. Values outside [min, max] breach the envelope; values
/// also outside the wider degraded band (when set) escalate the drift
/// severity from Warning to Degraded.
struct MetricBounds {
  double min = 0.0;
  double max = 0.0;
  std::optional<double> degraded_min;
  std::optional<double> degraded_max;
};

struct OperatingEnvelope {
  std::map<std::string, MetricBounds> metrics;
  int consecutive_breach_k = 1;
};

struct DependencyDecl {
  std::string resource;
  CouplingClass coupling_class = CouplingClass::DataCoupled;
};

/// Emitted on registration and on every operating-mode change.
struct Declaration {
  std::string agent_id;
  std::vector<DependencyDecl> dependencies;
  std::vector<std::string> provides;
  OperatingMode operating_mode = OperatingMode::Normal;
  Minutes timestamp = 0;
};

struct DriftSignal {
  std::string agent_id;
  std::string metric;
  double observed = 0.0;
  std::string bound_violated;
  std::string domain;
  Minutes timestamp = 0;
  DriftSeverity severity = DriftSeverity::Warning;
  std::string resource; // coupled resource the metric reports on, if any
};

struct AuditRecord {
  RecordId record_id = 0;
  std::string agent_id;
  Minutes timestamp = 0;
  std::string event_kind;
  std::string payload;
  bool pseudonymized = false;
  AccessTier access_tier = AccessTier::Oversight;
  Minutes retention_deadline = 0;
  std::vector<RecordId> cause_links;
  bool tombstone = false;
};

/// Retention windows per event-kind class, in simulated minutes. Values are
/// configuration, not compliance claims.
struct RetentionPolicy {
  Minutes enforcement = 90 * 24 * 60; // 90 days
  Minutes telemetry = 7 * 24 * 60;    // 7 days
  Minutes declarations = 365 * 24 * 60;
  Minutes fallback = 90 * 24 * 60;

  Minutes window_for(const std::string& event_kind) const;
};

struct PurgeReport {
  std::map<AccessTier, int> purged_by_tier;
  int total = 0;
};

struct ProposedAction {
  std::string action;
  std::vector<std::string> resources;
  bool validate_bounds = false;
  std::map<std::string, double> bound_targets; // metric -> intended value
};

struct ClearanceToken {
  std::uint64_t token_id = 0;
  std::string agent_id;
  std::string action;
  int topology_version = 0;
  Minutes issued_at = 0;
};

struct ReassessmentTask {
  std::string agent_id;
  ChangeKind change = ChangeKind::OperationalChange;
  Minutes created_at = 0;
  std::vector<std::string> measure_tags; // {"R-20", "R-23"}
  int topology_version = 0;
};

/// Keyed deterministic token substitution. The key lives outside the trail;
/// the stored token cannot be reversed from the record alone.
class Pseudonymizer {
public:
  explicit Pseudonymizer(std::string key) : key_(std::move(key)) {}
  std::string token(const std::string& subject) const;

private:
  std::string key_;
};

/// Shared append-only audit trail. Single writer; appends are totally
/// ordered by the simulation clock.
class AuditTrail {
public:
  explicit AuditTrail(std::string pseudonym_key = "citygov",
                      RetentionPolicy retention = {});

  /// Appends a record. Payload is pseudonymized iff subject_identifying;
  /// cause links must resolve to existing records (DanglingCauseLink).
  const AuditRecord& record_audit(const std::string& agent_id,
                                  const std::string& event_kind,
                                  const std::string& payload,
                                  bool subject_identifying,
                                  const std::vector<RecordId>& cause_links,
                                  Minutes now,
                                  AccessTier tier = AccessTier::Oversight);

  /// Erases payloads past their retention deadline, leaving tombstones that
  /// keep id, timestamp, event kind and cause links.
  PurgeReport apply_retention(Minutes now);

  bool contains(RecordId id) const;
  const AuditRecord& record(RecordId id) const; // UnknownRecord
  const std::vector<AuditRecord>& records() const { return records_; }

  /// Line-delimited export, ascending (timestamp, record_id). Fields:
  /// record_id, timestamp, agent_id, event_kind, tier, tombstone flag,
  /// cause_links comma-joined, payload.
  std::string export_lines() const;

private:
  std::vector<AuditRecord> records_;
  std::map<RecordId, std::size_t> index_;
  Pseudonymizer pseudonymizer_;
  RetentionPolicy retention_;
  RecordId next_id_ = 1;
};

/// Registered agents with their envelopes and derived governance posture.
class AgentRegistry {
public:
  struct Entry {
    SystemProfile profile;
    OperatingEnvelope envelope;
    std::vector<std::string> provides;
    std::vector<DependencyDecl> dependencies;
    GovernanceLevel level = GovernanceLevel::G1;
    LayerActivationMap activation;
  };

  void register_agent(const SystemProfile& profile, OperatingEnvelope envelope,
                      std::vector<std::string> provides,
                      std::vector<DependencyDecl> dependencies);
  bool is_registered(const std::string& agent_id) const;
  const Entry& entry(const std::string& agent_id) const; // UnregisteredAgent
  std::vector<std::string> agent_ids() const;

private:
  std::map<std::string, Entry> entries_;
};

/// Envelope monitoring with k-consecutive-breach debounce. Deterministic:
/// the same telemetry series always yields the same signal sequence.
class EnvelopeMonitor {
public:
  explicit EnvelopeMonitor(const AgentRegistry& registry) : registry_(&registry) {}

  /// One metric sample at a tick. Emits a signal once the metric has been
  /// out of bounds for >= k consecutive ticks. Throws UnknownMetric when no
  /// envelope bound is declared for the metric.
  std::optional<DriftSignal> observe(const std::string& agent_id,
                                     const std::string& metric, double value,
                                     Minutes tick,
                                     const std::string& resource = "");

private:
  const AgentRegistry* registry_;
  std::map<std::string, std::map<std::string, int>> streaks_;
};

/// Read-only view of the declared interaction topology, as the agent-layer
/// policy engine consumes it.
class TopologyView {
public:
  virtual ~TopologyView() = default;
  virtual bool safety_coupled(const std::string& resource) const = 0;
  virtual int version() const = 0;
};

struct PolicyDecision {
  PolicyOutcome outcome = PolicyOutcome::Allow;
  RecordId audit_record = 0;
  std::string violated_coupling;          // set on Block/Escalate
  std::vector<std::string> measures;      // measure ids this decision activated
  bool consulted_orchestration = false;   // safety-coupling gate engaged
};

/// Runtime policy check for a proposed action. Safety-coupled resources
/// require clearance: without one the action is blocked when the agent's
/// orchestration activation is Full, escalated in advisory mode when Basic,
/// and allowed with a record when Off. Every decision appends exactly one
/// audit record.
PolicyDecision enforce_policy(const AgentRegistry& registry,
                              const std::string& agent_id,
                              const ProposedAction& action,
                              const TopologyView& topology,
                              const std::optional<ClearanceToken>& clearance,
                              AuditTrail& trail, Minutes now);

/// Creates reassessment tasks for change triggers, deduplicated per
/// (agent, change, tick). Tasks are tagged R-20 (risk); integration changes
/// additionally execute the conformity re-check (R-23).
class ReassessmentBook {
public:
  explicit ReassessmentBook(const AgentRegistry& registry) : registry_(&registry) {}

  /// Returns the task, plus whether it was newly created this tick.
  std::pair<ReassessmentTask, bool> trigger(const std::string& agent_id,
                                            ChangeKind change, Minutes now,
                                            int topology_version);

  const std::vector<ReassessmentTask>& tasks() const { return tasks_; }

private:
  const AgentRegistry* registry_;
  std::vector<ReassessmentTask> tasks_;
};

} // namespace citygov
