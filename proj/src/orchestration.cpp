#include "citygov/orchestration.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace citygov {

namespace {

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (const std::string& part : parts) {
    if (!out.empty()) out += sep;
    out += part;
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

} // namespace

void Topology::add_declarations(const std::vector<Declaration>& declarations,
                                const AgentRegistry& registry) {
  for (const Declaration& decl : declarations) {
    if (!registry.is_registered(decl.agent_id)) {
      throw Error(Errc::UnknownAgent,
                  "declaration references unknown agent '" + decl.agent_id + "'");
    }
    for (const std::string& resource : decl.provides) {
      providers_[resource] = decl.agent_id;
    }
  }
  for (const Declaration& decl : declarations) {
    for (const DependencyDecl& dep : decl.dependencies) {
      if (!providers_.count(dep.resource)) {
        throw Error(Errc::DanglingResource,
                    "dependency on resource '" + dep.resource +
                        "' which no agent provides");
      }
      Coupling coupling;
      coupling.from_system = decl.agent_id;
      coupling.to_resource = dep.resource;
      coupling.coupling_class = dep.coupling_class;
      coupling.declared_by = registry.entry(decl.agent_id).profile.authority;
      coupling.topology_version = version_;
      couplings_.push_back(std::move(coupling));
    }
  }
}

Topology Topology::build(const std::vector<Declaration>& declarations,
                         const AgentRegistry& registry) {
  Topology topology;
  topology.add_declarations(declarations, registry);
  return topology;
}

Topology Topology::updated(const std::vector<Declaration>& additional,
                           const AgentRegistry& registry) const {
  Topology next = *this;
  next.version_ += 1;
  next.add_declarations(additional, registry);
  return next;
}

Topology Topology::with_directive(const TopologyUpdateDirective& directive) const {
  Topology next = *this;
  next.version_ += 1;
  next.risk_register_.push_back(directive.pattern_domains);
  return next;
}

bool Topology::safety_coupled(const std::string& resource) const {
  return std::any_of(couplings_.begin(), couplings_.end(), [&](const Coupling& c) {
    return c.to_resource == resource && c.coupling_class == CouplingClass::SafetyCoupled;
  });
}

std::optional<std::string> Topology::provider(const std::string& resource) const {
  auto it = providers_.find(resource);
  if (it == providers_.end()) return std::nullopt;
  return it->second;
}

std::vector<Coupling> Topology::dependents(const std::string& resource) const {
  std::vector<Coupling> result;
  for (const Coupling& c : couplings_) {
    if (c.to_resource == resource) result.push_back(c);
  }
  return result;
}

bool Topology::coupling_path(const std::string& agent_a,
                             const std::string& agent_b) const {
  if (agent_a == agent_b) return true;
  // BFS over the bipartite agent/resource graph.
  std::set<std::string> visited_agents{agent_a};
  std::set<std::string> visited_resources;
  std::deque<std::string> frontier{agent_a};
  auto touches = [](const std::string& agent, const Coupling& c) {
    return c.from_system == agent;
  };
  while (!frontier.empty()) {
    std::string agent = frontier.front();
    frontier.pop_front();
    std::vector<std::string> resources;
    for (const Coupling& c : couplings_) {
      if (touches(agent, c)) resources.push_back(c.to_resource);
    }
    for (const auto& [resource, provider] : providers_) {
      if (provider == agent) resources.push_back(resource);
    }
    for (const std::string& resource : resources) {
      if (!visited_resources.insert(resource).second) continue;
      std::vector<std::string> neighbors;
      if (auto p = provider(resource)) neighbors.push_back(*p);
      for (const Coupling& c : couplings_) {
        if (c.to_resource == resource) neighbors.push_back(c.from_system);
      }
      for (const std::string& neighbor : neighbors) {
        if (neighbor == agent_b) return true;
        if (visited_agents.insert(neighbor).second) frontier.push_back(neighbor);
      }
    }
  }
  return false;
}

bool Topology::risk_pattern_covers(const std::vector<std::string>& domains) const {
  for (const std::vector<std::string>& pattern : risk_register_) {
    bool all = true;
    for (const std::string& domain : domains) {
      if (std::find(pattern.begin(), pattern.end(), domain) == pattern.end()) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

ClearanceOutcome issue_clearance(const AgentRegistry& registry,
                                 const Topology& topology,
                                 const std::string& agent_id,
                                 const ProposedAction& action,
                                 const std::map<std::string, OperatingMode>& modes,
                                 bool human_override, Minutes now) {
  const AgentRegistry::Entry& agent = registry.entry(agent_id);
  if (agent.activation.orchestration == Activation::Off) {
    return Denial{std::nullopt,
                  "orchestration layer is not active for governance level " +
                      to_string(agent.level)};
  }
  for (const std::string& resource : action.resources) {
    if (!topology.safety_coupled(resource)) continue;
    for (const Coupling& coupling : topology.dependents(resource)) {
      if (coupling.coupling_class != CouplingClass::SafetyCoupled) continue;
      auto mode_it = modes.find(coupling.from_system);
      OperatingMode mode =
          mode_it == modes.end() ? OperatingMode::Normal : mode_it->second;
      if (mode >= OperatingMode::Degraded && !human_override) {
        return Denial{coupling, "safety-coupled dependent '" + coupling.from_system +
                                    "' is " + to_string(mode)};
      }
    }
  }
  ClearanceToken token;
  token.token_id = fnv1a64(agent_id + "|" + action.action + "|" +
                           std::to_string(topology.version()) + "|" +
                           std::to_string(now));
  token.agent_id = agent_id;
  token.action = action.action;
  token.topology_version = topology.version();
  token.issued_at = now;
  return token;
}

CascadeCorrelator::CascadeCorrelator(Minutes window) : window_(window) {}

bool CascadeCorrelator::pair_matches(const DriftSignal& a, const DriftSignal& b,
                                     const Topology& topology) const {
  if (a.domain == b.domain) return false;
  Minutes gap = a.timestamp > b.timestamp ? a.timestamp - b.timestamp
                                          : b.timestamp - a.timestamp;
  if (gap > window_) return false;
  return topology.coupling_path(a.agent_id, b.agent_id);
}

CorrelationUpdate CascadeCorrelator::add_signal(const DriftSignal& signal,
                                                const Topology& topology) {
  CorrelationUpdate update;
  if (open_) {
    bool connected = false;
    for (const std::string& agent : open_->agents) {
      if (topology.coupling_path(agent, signal.agent_id)) {
        connected = true;
        break;
      }
    }
    if (connected) {
      open_->contributing.push_back(signal);
      if (std::find(open_->agents.begin(), open_->agents.end(), signal.agent_id) ==
          open_->agents.end()) {
        open_->agents.push_back(signal.agent_id);
      }
      if (std::find(open_->domains.begin(), open_->domains.end(), signal.domain) ==
          open_->domains.end()) {
        open_->domains.push_back(signal.domain);
        update.assessment_advanced = true;
      }
    }
    signals_.push_back(signal);
    return update;
  }

  for (const DriftSignal& earlier : signals_) {
    if (!pair_matches(earlier, signal, topology)) continue;
    update.assessment_advanced = true;
    Minutes completed = std::max(earlier.timestamp, signal.timestamp);
    if (topology.risk_pattern_covers({earlier.domain, signal.domain})) {
      // Known coupling risk: confirm at the matching drift pair itself.
      signals_.push_back(signal);
      open_ = build_cascade(completed, topology);
      update.confirmed = open_;
      confirm_at_.reset();
      return update;
    }
    Minutes boundary = ((completed + window_ - 1) / window_) * window_;
    if (!confirm_at_ || boundary < *confirm_at_) {
      confirm_at_ = boundary;
    }
  }
  signals_.push_back(signal);
  return update;
}

std::optional<CascadeEvent> CascadeCorrelator::poll(Minutes now,
                                                    const Topology& topology) {
  if (open_ || !confirm_at_ || *confirm_at_ > now) {
    return std::nullopt;
  }
  open_ = build_cascade(*confirm_at_, topology);
  confirm_at_.reset();
  return open_;
}

CascadeEvent CascadeCorrelator::build_cascade(Minutes opened_at,
                                              const Topology& topology) {
  CascadeEvent cascade;
  cascade.cascade_id = "cascade-" + std::to_string(++cascade_seq_);
  cascade.opened_at = opened_at;
  cascade.window_used = window_;

  std::vector<const DriftSignal*> in_window;
  for (const DriftSignal& s : signals_) {
    if (s.timestamp >= opened_at - window_ && s.timestamp <= opened_at) {
      in_window.push_back(&s);
    }
  }
  for (const DriftSignal* s : in_window) {
    bool connected = in_window.size() == 1;
    for (const DriftSignal* other : in_window) {
      if (other == s) continue;
      if (topology.coupling_path(s->agent_id, other->agent_id)) {
        connected = true;
        break;
      }
    }
    if (!connected) continue;
    cascade.contributing.push_back(*s);
    if (std::find(cascade.agents.begin(), cascade.agents.end(), s->agent_id) ==
        cascade.agents.end()) {
      cascade.agents.push_back(s->agent_id);
    }
    if (std::find(cascade.domains.begin(), cascade.domains.end(), s->domain) ==
        cascade.domains.end()) {
      cascade.domains.push_back(s->domain);
    }
  }
  return cascade;
}

void CascadeCorrelator::close() {
  open_.reset();
  confirm_at_.reset();
  signals_.clear();
}

std::optional<CascadeEvent> correlate(std::vector<DriftSignal> signals,
                                      const Topology& topology, Minutes window) {
  std::stable_sort(signals.begin(), signals.end(),
                   [](const DriftSignal& a, const DriftSignal& b) {
                     return a.timestamp < b.timestamp;
                   });
  CascadeCorrelator correlator(window);
  for (const DriftSignal& signal : signals) {
    if (auto cascade = correlator.poll(signal.timestamp, topology)) {
      return cascade;
    }
    CorrelationUpdate update = correlator.add_signal(signal, topology);
    if (update.confirmed) return update.confirmed;
  }
  Minutes horizon = signals.empty() ? 0 : signals.back().timestamp + 2 * window;
  return correlator.poll(horizon, topology);
}

IncidentRecord open_incident(const std::string& incident_id,
                             const CascadeEvent& cascade,
                             const std::vector<RegimeWindow>& regimes, Minutes t0,
                             AuditTrail& trail,
                             const std::vector<RecordId>& cause_links) {
  if (regimes.empty()) {
    throw Error(Errc::EmptyRegimeSet, "incident requires at least one regime");
  }
  IncidentRecord incident;
  incident.incident_id = incident_id;
  incident.cascade_id = cascade.cascade_id;
  incident.t0 = t0;
  Minutes baseline = regimes.front().window;
  for (const RegimeWindow& regime : regimes) {
    incident.regime_clocks.emplace_back(regime.regime, regime.window);
    incident.notifications.emplace_back(regime.regime, t0); // parallel dispatch
    baseline = std::min(baseline, regime.window);
  }
  incident.baseline_deadline = baseline;

  std::ostringstream payload;
  payload << incident_id << " " << cascade.cascade_id << " baseline="
          << baseline << "min regimes=" << incident.regime_clocks.size();
  const AuditRecord& shared = trail.record_audit("orchestrator", "incident_record",
                                                 payload.str(), false, cause_links, t0);
  incident.shared_record_id = shared.record_id;

  std::ostringstream evidence;
  evidence << "T4 StrictestClockTriage baseline=" << baseline
           << "min notifications=" << incident.notifications.size();
  trail.record_audit("orchestrator", "rule_invocation", evidence.str(), false,
                     {shared.record_id}, t0);
  return incident;
}

std::string export_incident(const IncidentRecord& incident) {
  std::ostringstream out;
  out << "incident: " << incident.incident_id << "\n";
  out << "cascade: " << incident.cascade_id << "\n";
  out << "t0: " << incident.t0 << "\n";
  out << "regime\twindow_min\tdeadline_min\tnotified_at\n";
  for (std::size_t i = 0; i < incident.regime_clocks.size(); ++i) {
    const auto& [regime, window] = incident.regime_clocks[i];
    out << regime << '\t' << window << '\t' << incident.t0 + window << '\t'
        << incident.notifications[i].second << "\n";
  }
  out << "baseline_min: " << incident.baseline_deadline << "\n";
  out << "shared_record: " << incident.shared_record_id << "\n";
  return out.str();
}

OversightSession escalate_joint_oversight(const std::string& session_id,
                                          const CascadeEvent& cascade,
                                          const std::vector<std::string>& authorities,
                                          const std::vector<RecordId>& briefing_records,
                                          AuditTrail& trail, Minutes now) {
  if (authorities.size() < 2) {
    throw Error(Errc::SingleAuthority, "joint oversight requires at least 2 authorities");
  }
  for (RecordId id : briefing_records) {
    if (!trail.contains(id)) {
      throw Error(Errc::UnknownRecord,
                  "briefing record " + std::to_string(id) + " is not in the trail");
    }
  }
  OversightSession session;
  session.session_id = session_id;
  session.cascade_id = cascade.cascade_id;
  session.authorities = authorities;
  session.briefing_records = briefing_records;

  std::ostringstream payload;
  payload << session_id << " " << cascade.cascade_id << " authorities="
          << join(authorities) << " acknowledged briefing=" << briefing_records.size();
  const AuditRecord& rec = trail.record_audit("orchestrator", "oversight_session",
                                              payload.str(), false, briefing_records, now);
  session.session_record = rec.record_id;
  return session;
}

AttributionReport attribute(const AuditTrail& trail, RecordId outcome,
                            const Topology& topology) {
  const AuditRecord& root = trail.record(outcome); // UnknownRecord

  AttributionReport report;
  report.outcome = outcome;
  report.topology_version = topology.version();

  std::set<RecordId> visited;
  std::deque<RecordId> frontier{root.record_id};
  std::map<std::string, std::set<RecordId>> per_agent;
  while (!frontier.empty()) {
    RecordId id = frontier.front();
    frontier.pop_front();
    if (!visited.insert(id).second) continue;
    const AuditRecord& rec = trail.record(id);
    per_agent[rec.agent_id].insert(id);
    for (RecordId cause : rec.cause_links) {
      frontier.push_back(cause);
    }
  }
  for (const auto& [agent, ids] : per_agent) {
    report.contributing[agent] = std::vector<RecordId>(ids.begin(), ids.end());
  }
  return report;
}

ResolutionAction resolve_conflict(const ConflictRule& rule,
                                  const ResolutionContext& context,
                                  AuditTrail& trail, Minutes now) {
  ResolutionAction result;
  result.rule_id = rule.id;
  result.resolution = rule.resolution;

  switch (rule.resolution) {
    case Resolution::TieredLogging: {
      if (context.logging_agent.empty()) {
        throw Error(Errc::MissingContext, "tiered logging check needs an agent scope");
      }
      int total = 0;
      int pseudonymized = 0;
      for (const AuditRecord& rec : trail.records()) {
        if (rec.agent_id != context.logging_agent) continue;
        total += 1;
        if (rec.pseudonymized) pseudonymized += 1;
      }
      std::ostringstream action;
      action << "logging scope check for " << context.logging_agent << ": " << total
             << " records, " << pseudonymized << " pseudonymized, access tiered";
      result.action = action.str();
      // Policy check only; no measure executes an action here.
      break;
    }
    case Resolution::GraduatedRetention: {
      if (!context.retention_now) {
        throw Error(Errc::MissingContext, "retention application needs a reference time");
      }
      PurgeReport purge = trail.apply_retention(*context.retention_now);
      result.action = "graduated retention applied: " + std::to_string(purge.total) +
                      " records tombstoned";
      result.activated_measures = rule.implementing_measures;
      break;
    }
    case Resolution::ConsolidatedAssessment: {
      if (context.assessment_artefacts.empty()) {
        throw Error(Errc::MissingContext, "consolidation needs the artefact set");
      }
      result.action = "consolidated " + std::to_string(context.assessment_artefacts.size()) +
                      " assessment artefacts into one: " + join(context.assessment_artefacts);
      result.activated_measures = rule.implementing_measures;
      break;
    }
    case Resolution::StrictestClockTriage: {
      if (context.incident == nullptr) {
        throw Error(Errc::MissingContext, "triage verification needs the incident");
      }
      std::ostringstream action;
      action << "strictest-clock triage verified for " << context.incident->incident_id
             << ": baseline " << context.incident->baseline_deadline << "min, "
             << context.incident->notifications.size() << " parallel notifications";
      result.action = action.str();
      // The triage itself executes when the incident opens.
      break;
    }
    case Resolution::TieredDisclosure: {
      if (context.disclosure_system.empty()) {
        throw Error(Errc::MissingContext, "tiered disclosure needs a system id");
      }
      result.action = "tiered disclosure applied for " + context.disclosure_system +
                      ": public view redacted, regulator view complete";
      result.activated_measures = rule.implementing_measures;
      break;
    }
  }

  const AuditRecord& rec =
      trail.record_audit("orchestrator", "rule_invocation",
                         rule.id + " " + to_string(rule.resolution) + " " + result.action,
                         false, context.evidence_causes, now);
  result.evidence_record = rec.record_id;
  return result;
}

ConsolidatedAssessment consolidate_assessment(const IncidentRecord& incident,
                                              AuditTrail& trail,
                                              const Topology& topology,
                                              const ConflictRule& t3_rule,
                                              RecordId attribution_outcome,
                                              const std::vector<std::string>& cascade_domains,
                                              Minutes now, bool force) {
  if (incident.status == "open" && !force) {
    throw Error(Errc::OpenIncident,
                "incident " + incident.incident_id + " is still active");
  }
  ConsolidatedAssessment assessment;
  assessment.incident_id = incident.incident_id;
  assessment.attribution = attribute(trail, attribution_outcome, topology);

  std::vector<std::string> artefacts;
  for (const auto& [regime, window] : incident.regime_clocks) {
    std::ostringstream section;
    section << "traceability output for " << regime << ": deadline t0+" << window
            << "min, notified at " << incident.t0;
    assessment.regime_sections.emplace_back(regime, section.str());
    artefacts.push_back(regime + " assessment");
  }

  assessment.directive.pattern_domains = cascade_domains;
  assessment.directive.description =
      "register compound-event coupling risk over domains [" + join(cascade_domains) + "]";

  ResolutionContext t3_context;
  t3_context.assessment_artefacts = artefacts;
  t3_context.evidence_causes = {incident.shared_record_id};
  assessment.consolidation = resolve_conflict(t3_rule, t3_context, trail, now);

  std::ostringstream payload;
  payload << "consolidated assessment for " << incident.incident_id << ": "
          << assessment.regime_sections.size() << " regime sections, directive="
          << assessment.directive.description;
  const AuditRecord& rec = trail.record_audit(
      "orchestrator", "consolidated_assessment", payload.str(), false,
      {incident.shared_record_id, assessment.consolidation.evidence_record}, now);
  assessment.assessment_record = rec.record_id;
  return assessment;
}

} // namespace citygov
