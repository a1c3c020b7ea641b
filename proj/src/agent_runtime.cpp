#include "citygov/agent_runtime.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace citygov {

namespace {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

} // namespace

std::string to_string(OperatingMode mode) {
  switch (mode) {
    case OperatingMode::Normal: return "Normal";
    case OperatingMode::Degraded: return "Degraded";
    case OperatingMode::Halted: return "Halted";
  }
  return "Normal";
}

std::string to_string(AccessTier tier) {
  switch (tier) {
    case AccessTier::Public: return "Public";
    case AccessTier::Oversight: return "Oversight";
    case AccessTier::Regulator: return "Regulator";
  }
  return "Oversight";
}

std::string to_string(DriftSeverity severity) {
  return severity == DriftSeverity::Degraded ? "Degraded" : "Warning";
}

std::string to_string(PolicyOutcome outcome) {
  switch (outcome) {
    case PolicyOutcome::Allow: return "Allow";
    case PolicyOutcome::Block: return "Block";
    case PolicyOutcome::Escalate: return "Escalate";
  }
  return "Allow";
}

std::string to_string(ChangeKind change) {
  switch (change) {
    case ChangeKind::OperationalChange: return "OperationalChange";
    case ChangeKind::IntegrationChange: return "IntegrationChange";
    case ChangeKind::EnvironmentChange: return "EnvironmentChange";
  }
  return "OperationalChange";
}

std::string to_string(CouplingClass coupling) {
  switch (coupling) {
    case CouplingClass::SafetyCoupled: return "SafetyCoupled";
    case CouplingClass::DataCoupled: return "DataCoupled";
    case CouplingClass::Advisory: return "Advisory";
  }
  return "DataCoupled";
}

OperatingMode operating_mode_from_string(const std::string& text) {
  if (text == "Normal") return OperatingMode::Normal;
  if (text == "Degraded") return OperatingMode::Degraded;
  if (text == "Halted") return OperatingMode::Halted;
  throw Error(Errc::SchemaError, "unknown operating mode '" + text + "'");
}

AccessTier access_tier_from_string(const std::string& text) {
  if (text == "Public") return AccessTier::Public;
  if (text == "Oversight") return AccessTier::Oversight;
  if (text == "Regulator") return AccessTier::Regulator;
  throw Error(Errc::SchemaError, "unknown access tier '" + text + "'");
}

ChangeKind change_kind_from_string(const std::string& text) {
  if (text == "OperationalChange") return ChangeKind::OperationalChange;
  if (text == "IntegrationChange") return ChangeKind::IntegrationChange;
  if (text == "EnvironmentChange") return ChangeKind::EnvironmentChange;
  throw Error(Errc::SchemaError, "unknown change kind '" + text + "'");
}

CouplingClass coupling_class_from_string(const std::string& text) {
  if (text == "SafetyCoupled") return CouplingClass::SafetyCoupled;
  if (text == "DataCoupled") return CouplingClass::DataCoupled;
  if (text == "Advisory") return CouplingClass::Advisory;
  throw Error(Errc::SchemaError, "unknown coupling class '" + text + "'");
}

Minutes RetentionPolicy::window_for(const std::string& event_kind) const {
  if (event_kind == "enforcement_decision" || event_kind == "policy_decision") {
    return enforcement;
  }
  if (event_kind == "drift_signal" || event_kind == "telemetry") {
    return telemetry;
  }
  if (event_kind == "declaration" || event_kind == "mode_change") {
    return declarations;
  }
  return fallback;
}

std::string Pseudonymizer::token(const std::string& subject) const {
  std::uint64_t hash = fnv1a64(key_ + ":" + subject);
  std::ostringstream out;
  out << "psn:" << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

AuditTrail::AuditTrail(std::string pseudonym_key, RetentionPolicy retention)
    : pseudonymizer_(std::move(pseudonym_key)), retention_(retention) {}

const AuditRecord& AuditTrail::record_audit(const std::string& agent_id,
                                            const std::string& event_kind,
                                            const std::string& payload,
                                            bool subject_identifying,
                                            const std::vector<RecordId>& cause_links,
                                            Minutes now, AccessTier tier) {
  for (RecordId cause : cause_links) {
    if (!contains(cause)) {
      throw Error(Errc::DanglingCauseLink,
                  "record cites nonexistent cause id " + std::to_string(cause));
    }
  }
  AuditRecord rec;
  rec.record_id = next_id_++;
  rec.agent_id = agent_id;
  rec.timestamp = now;
  rec.event_kind = event_kind;
  rec.pseudonymized = subject_identifying;
  rec.payload = subject_identifying ? pseudonymizer_.token(payload) : payload;
  rec.access_tier = tier;
  rec.retention_deadline = now + retention_.window_for(event_kind);
  rec.cause_links = cause_links;
  index_[rec.record_id] = records_.size();
  records_.push_back(std::move(rec));
  return records_.back();
}

PurgeReport AuditTrail::apply_retention(Minutes now) {
  PurgeReport report;
  for (AuditRecord& rec : records_) {
    if (!rec.tombstone && rec.retention_deadline < now) {
      rec.payload.clear();
      rec.pseudonymized = false;
      rec.tombstone = true;
      report.purged_by_tier[rec.access_tier] += 1;
      report.total += 1;
    }
  }
  return report;
}

bool AuditTrail::contains(RecordId id) const { return index_.count(id) > 0; }

const AuditRecord& AuditTrail::record(RecordId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(Errc::UnknownRecord, "no audit record with id " + std::to_string(id));
  }
  return records_[it->second];
}

std::string AuditTrail::export_lines() const {
  std::vector<const AuditRecord*> ordered;
  ordered.reserve(records_.size());
  for (const AuditRecord& rec : records_) ordered.push_back(&rec);
  std::sort(ordered.begin(), ordered.end(),
            [](const AuditRecord* a, const AuditRecord* b) {
              if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
              return a->record_id < b->record_id;
            });
  std::ostringstream out;
  for (const AuditRecord* rec : ordered) {
    std::string causes;
    for (RecordId cause : rec->cause_links) {
      if (!causes.empty()) causes += ",";
      causes += std::to_string(cause);
    }
    out << rec->record_id << '\t' << rec->timestamp << '\t' << rec->agent_id
        << '\t' << rec->event_kind << '\t' << to_string(rec->access_tier)
        << '\t' << (rec->tombstone ? 1 : 0) << '\t'
        << (causes.empty() ? "-" : causes) << '\t'
        << (rec->payload.empty() ? "-" : rec->payload) << '\n';
  }
  return out.str();
}

void AgentRegistry::register_agent(const SystemProfile& profile,
                                   OperatingEnvelope envelope,
                                   std::vector<std::string> provides,
                                   std::vector<DependencyDecl> dependencies) {
  Entry entry;
  entry.profile = profile;
  entry.envelope = std::move(envelope);
  entry.provides = std::move(provides);
  entry.dependencies = std::move(dependencies);
  entry.level = assign_governance_level(profile);
  entry.activation = layer_activation(entry.level);
  entries_[profile.id] = std::move(entry);
}

bool AgentRegistry::is_registered(const std::string& agent_id) const {
  return entries_.count(agent_id) > 0;
}

const AgentRegistry::Entry& AgentRegistry::entry(const std::string& agent_id) const {
  auto it = entries_.find(agent_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnregisteredAgent, "agent '" + agent_id + "' is not registered");
  }
  return it->second;
}

std::vector<std::string> AgentRegistry::agent_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) ids.push_back(id);
  return ids;
}

std::optional<DriftSignal> EnvelopeMonitor::observe(const std::string& agent_id,
                                                    const std::string& metric,
                                                    double value, Minutes tick,
                                                    const std::string& resource) {
  const AgentRegistry::Entry& agent = registry_->entry(agent_id);
  auto bounds_it = agent.envelope.metrics.find(metric);
  if (bounds_it == agent.envelope.metrics.end()) {
    throw Error(Errc::UnknownMetric,
                "no envelope bound declared for metric '" + metric + "' of agent '" +
                    agent_id + "'");
  }
  const MetricBounds& bounds = bounds_it->second;
  int& streak = streaks_[agent_id][metric];

  const bool below = value < bounds.min;
  const bool above = value > bounds.max;
  if (!below && !above) {
    streak = 0;
    return std::nullopt;
  }
  streak += 1;
  if (streak < agent.envelope.consecutive_breach_k) {
    return std::nullopt;
  }

  DriftSignal signal;
  signal.agent_id = agent_id;
  signal.metric = metric;
  signal.observed = value;
  signal.domain = agent.profile.domain;
  signal.timestamp = tick;
  signal.resource = resource;
  {
    std::ostringstream bound;
    if (below) {
      bound << "min " << bounds.min;
    } else {
      bound << "max " << bounds.max;
    }
    signal.bound_violated = bound.str();
  }
  const bool degraded =
      (below && bounds.degraded_min && value < *bounds.degraded_min) ||
      (above && bounds.degraded_max && value > *bounds.degraded_max);
  signal.severity = degraded ? DriftSeverity::Degraded : DriftSeverity::Warning;
  return signal;
}

PolicyDecision enforce_policy(const AgentRegistry& registry,
                              const std::string& agent_id,
                              const ProposedAction& action,
                              const TopologyView& topology,
                              const std::optional<ClearanceToken>& clearance,
                              AuditTrail& trail, Minutes now) {
  const AgentRegistry::Entry& agent = registry.entry(agent_id);

  std::string coupled_resource;
  for (const std::string& resource : action.resources) {
    if (topology.safety_coupled(resource)) {
      coupled_resource = resource;
      break;
    }
  }

  const bool clearance_valid = clearance && clearance->agent_id == agent_id &&
                               clearance->action == action.action &&
                               clearance->topology_version == topology.version();

  PolicyDecision decision;
  if (!coupled_resource.empty() && !clearance_valid) {
    decision.consulted_orchestration = true;
    decision.violated_coupling = coupled_resource;
    switch (agent.activation.orchestration) {
      case Activation::Full:
        decision.outcome = PolicyOutcome::Block;
        break;
      case Activation::Basic:
        decision.outcome = PolicyOutcome::Escalate; // advisory: action proceeds
        break;
      case Activation::Off:
        decision.outcome = PolicyOutcome::Allow;
        break;
    }
    decision.measures = {"R-01", "R-09"};
  } else {
    decision.outcome = PolicyOutcome::Allow;
    if (!coupled_resource.empty()) {
      decision.consulted_orchestration = true; // cleared safety-coupled action
      decision.measures = {"R-01", "R-09"};
    } else if (action.validate_bounds) {
      // Envelope validation of the proposed targets counts as an executed
      // policy check; a pass-through allow does not.
      decision.measures = {"R-09"};
      for (const auto& [metric, target] : action.bound_targets) {
        auto it = agent.envelope.metrics.find(metric);
        if (it == agent.envelope.metrics.end()) {
          throw Error(Errc::UnknownMetric,
                      "no envelope bound declared for metric '" + metric + "'");
        }
        if (target < it->second.min || target > it->second.max) {
          decision.outcome = PolicyOutcome::Block;
          decision.violated_coupling.clear();
          break;
        }
      }
    }
  }

  std::ostringstream payload;
  payload << to_string(decision.outcome) << " " << action.action;
  if (!action.resources.empty()) {
    payload << " [";
    for (std::size_t i = 0; i < action.resources.size(); ++i) {
      if (i) payload << ",";
      payload << action.resources[i];
    }
    payload << "]";
  }
  if (!decision.violated_coupling.empty()) {
    payload << " coupling=" << decision.violated_coupling;
  }
  if (clearance_valid) {
    payload << " clearance=" << clearance->token_id;
  }
  const AuditRecord& rec = trail.record_audit(agent_id, "policy_decision",
                                              payload.str(), false, {}, now);
  decision.audit_record = rec.record_id;
  return decision;
}

std::pair<ReassessmentTask, bool> ReassessmentBook::trigger(
    const std::string& agent_id, ChangeKind change, Minutes now,
    int topology_version) {
  registry_->entry(agent_id); // UnregisteredAgent

  for (const ReassessmentTask& task : tasks_) {
    if (task.agent_id == agent_id && task.change == change && task.created_at == now) {
      return {task, false};
    }
  }
  ReassessmentTask task;
  task.agent_id = agent_id;
  task.change = change;
  task.created_at = now;
  task.measure_tags = {"R-20", "R-23"};
  task.topology_version = topology_version;
  tasks_.push_back(task);
  return {tasks_.back(), true};
}

} // namespace citygov
