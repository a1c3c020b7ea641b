#include "citygov/city.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace citygov {

namespace {

using nlohmann::json;

std::string format_bounds(const std::map<std::string, MetricBounds>& bounds) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [metric, b] : bounds) {
    if (!first) out << "; ";
    first = false;
    out << metric << " in [" << b.min << ", " << b.max << "]";
  }
  return out.str();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (const std::string& part : parts) {
    if (!out.empty()) out += sep;
    out += part;
  }
  return out;
}

} // namespace

std::string to_string(GovernanceBasis basis) {
  return basis == GovernanceBasis::Binding ? "Binding" : "Voluntary";
}

std::string to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::Open: return "Open";
    case CaseStatus::UnderReview: return "UnderReview";
    case CaseStatus::Resolved: return "Resolved";
  }
  return "Open";
}

GovernanceBasis governance_basis_from_string(const std::string& text) {
  if (text == "Binding") return GovernanceBasis::Binding;
  if (text == "Voluntary") return GovernanceBasis::Voluntary;
  throw Error(Errc::SchemaError, "unknown governance basis '" + text + "'");
}

RegistryEntry& SystemRegistry::register_system(
    const SystemProfile& profile,
    std::pair<AutonomyLevel, AutonomyLevel> autonomy_range,
    const std::string& key_metric, GovernanceBasis basis) {
  if (entries_.count(profile.id)) {
    throw Error(Errc::DuplicateSystem,
                "system '" + profile.id + "' is already registered");
  }
  RegistryEntry entry;
  entry.profile = profile;
  entry.autonomy_range = autonomy_range;
  entry.key_metric = key_metric;
  entry.basis = basis;
  order_.push_back(profile.id);
  return entries_[profile.id] = std::move(entry);
}

SystemRegistry SystemRegistry::load(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(Errc::SchemaError, std::string("registry is not valid JSON: ") + err.what());
  }
  if (!root.is_object() || !root.contains("systems") || !root["systems"].is_array()) {
    throw Error(Errc::SchemaError, "registry root needs a 'systems' array");
  }
  SystemRegistry registry;
  for (const json& node : root["systems"]) {
    SystemProfile profile;
    profile.id = node.at("id").get<std::string>();
    profile.name = node.at("name").get<std::string>();
    profile.authority = node.at("authority").get<std::string>();
    profile.domain = node.at("domain").get<std::string>();
    const json& evidence = node.at("evidence");
    profile.evidence.decision_scope =
        decision_scope_from_string(evidence.at("decision_scope").get<std::string>());
    profile.evidence.human_involvement = human_involvement_from_string(
        evidence.at("human_involvement").get<std::string>());
    profile.evidence.domain_criticality = domain_criticality_from_string(
        evidence.at("domain_criticality").get<std::string>());
    profile.endangers_essential_services =
        node.value("endangers_essential_services", false);
    profile.cross_org_dependencies = node.value("cross_org_dependencies", false);
    profile.multi_agent_ecosystem = node.value("multi_agent_ecosystem", false);

    const json& range = node.at("autonomy_range");
    auto autonomy_range =
        std::make_pair(autonomy_level_from_string(range.at(0).get<std::string>()),
                       autonomy_level_from_string(range.at(1).get<std::string>()));
    RegistryEntry& entry = registry.register_system(
        profile, autonomy_range, node.at("key_metric").get<std::string>(),
        governance_basis_from_string(node.at("governance_basis").get<std::string>()));
    if (node.contains("envelope_bounds")) {
      for (const auto& [metric, b] : node.at("envelope_bounds").items()) {
        MetricBounds bounds;
        bounds.min = b.at("min").get<double>();
        bounds.max = b.at("max").get<double>();
        entry.envelope_bounds[metric] = bounds;
      }
    }
    entry.vendor_internals = node.value("vendor_internals", "");
  }
  return registry;
}

SystemRegistry SystemRegistry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::SchemaError, "cannot open registry file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

bool SystemRegistry::has(const std::string& system_id) const {
  return entries_.count(system_id) > 0;
}

const RegistryEntry& SystemRegistry::entry(const std::string& system_id) const {
  auto it = entries_.find(system_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownSystem, "no registered system '" + system_id + "'");
  }
  return it->second;
}

RegistryEntry& SystemRegistry::entry(const std::string& system_id) {
  auto it = entries_.find(system_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownSystem, "no registered system '" + system_id + "'");
  }
  return it->second;
}

std::vector<const RegistryEntry*> SystemRegistry::list() const {
  std::vector<const RegistryEntry*> result;
  for (const std::string& id : order_) result.push_back(&entries_.at(id));
  return result;
}

std::vector<const RegistryEntry*> SystemRegistry::list_by_basis(
    GovernanceBasis basis) const {
  std::vector<const RegistryEntry*> result;
  for (const RegistryEntry* entry : list()) {
    if (entry->basis == basis) result.push_back(entry);
  }
  return result;
}

std::vector<const RegistryEntry*> SystemRegistry::list_by_authority(
    const std::string& authority) const {
  std::vector<const RegistryEntry*> result;
  for (const RegistryEntry* entry : list()) {
    if (entry->profile.authority == authority) result.push_back(entry);
  }
  return result;
}

DisclosurePackage publish_disclosure(SystemRegistry& registry,
                                     const std::string& system_id, AccessTier tier) {
  if (tier == AccessTier::Oversight) {
    throw Error(Errc::SchemaError, "disclosure tier must be Public or Regulator");
  }
  RegistryEntry& entry = registry.entry(system_id);
  const GovernanceLevel level = assign_governance_level(entry.profile);
  const AutonomyAssessment autonomy = classify_autonomy(entry.profile.evidence);

  DisclosurePackage package;
  package.system_id = system_id;
  package.tier = tier;
  package.fields["system"] = system_id;
  package.fields["name"] = entry.profile.name;
  package.fields["authority"] = entry.profile.authority;
  package.fields["domain"] = entry.profile.domain;
  package.fields["autonomy"] =
      entry.autonomy_range.first == entry.autonomy_range.second
          ? to_string(entry.autonomy_range.first)
          : to_string(entry.autonomy_range.first) + "-" +
                to_string(entry.autonomy_range.second);
  package.fields["governance_level"] = to_string(level);
  package.fields["oversight_posture"] = oversight_posture(level);
  package.fields["governance_basis"] = to_string(entry.basis);
  package.fields["key_metric"] = entry.key_metric;

  if (tier == AccessTier::Regulator) {
    package.fields["assessed_autonomy"] = to_string(autonomy.level);
    package.fields["autonomy_rationale"] = autonomy.rationale;
    package.fields["evidence_scope"] = to_string(entry.profile.evidence.decision_scope);
    package.fields["evidence_human"] =
        to_string(entry.profile.evidence.human_involvement);
    package.fields["evidence_criticality"] =
        to_string(entry.profile.evidence.domain_criticality);
    package.fields["envelope_bounds"] = format_bounds(entry.envelope_bounds);
    package.fields["vendor_internals"] = entry.vendor_internals;
    package.fields["trail_access"] = "trail://" + system_id;
  }

  entry.tiers_published.insert(tier);
  return package;
}

std::vector<FairnessFlag> monitor_fairness(const std::vector<EnforcementEvent>& events,
                                           const std::vector<Zone>& zones,
                                           bool cascade_active, double threshold,
                                           Minutes window, Minutes now) {
  if (threshold <= 1.0) {
    throw Error(Errc::SchemaError, "fairness threshold must exceed 1");
  }
  double total_share = 0.0;
  std::map<std::string, const Zone*> by_id;
  for (const Zone& zone : zones) {
    total_share += zone.baseline_share;
    by_id[zone.zone_id] = &zone;
  }
  if (std::fabs(total_share - 1.0) > 1e-9) {
    throw Error(Errc::SchemaError, "zone baseline shares must sum to 1");
  }

  std::map<std::string, int> counts;
  int total = 0;
  for (const EnforcementEvent& event : events) {
    if (!by_id.count(event.zone_id)) {
      throw Error(Errc::UnknownZone, "enforcement event in unknown zone '" +
                                         event.zone_id + "'");
    }
    if (event.timestamp < now - window || event.timestamp > now) continue;
    counts[event.zone_id] += 1;
    total += 1;
  }

  std::vector<FairnessFlag> flags;
  if (total == 0) return flags;
  for (const Zone& zone : zones) {
    auto it = counts.find(zone.zone_id);
    if (it == counts.end()) continue;
    double observed = static_cast<double>(it->second) / total;
    double ratio = zone.baseline_share > 0.0
                       ? observed / zone.baseline_share
                       : std::numeric_limits<double>::infinity();
    if (ratio < threshold) continue;
    FairnessFlag flag;
    flag.zone_id = zone.zone_id;
    flag.observed_share = observed;
    flag.baseline_share = zone.baseline_share;
    flag.concentration_ratio = ratio;
    flag.cascade_active = cascade_active;
    flag.human_review = cascade_active && zone.vulnerable;
    flag.raised_at = now;
    flags.push_back(flag);
  }
  return flags;
}

ContestationDesk::ContestationDesk(std::string review_path, std::string remedy,
                                   std::vector<std::string> languages)
    : review_path_(std::move(review_path)),
      remedy_(std::move(remedy)),
      languages_(std::move(languages)) {}

ContestationCase& ContestationDesk::open_contestation(const AuditTrail& trail,
                                                      RecordId decision,
                                                      const Topology& topology) {
  ContestationCase contestation;
  contestation.case_id = "case-" + std::to_string(cases_.size() + 1);
  contestation.decision_record = decision;
  contestation.causal_chain = attribute(trail, decision, topology); // UnknownRecord
  contestation.review_path = review_path_;
  contestation.remedy = remedy_;
  cases_.push_back(std::move(contestation));
  return cases_.back();
}

std::string ContestationDesk::render_explanation(const ContestationCase& contestation,
                                                 const std::string& language,
                                                 const AuditTrail& trail,
                                                 const AgentRegistry& agents) const {
  if (std::find(languages_.begin(), languages_.end(), language) == languages_.end()) {
    throw Error(Errc::UnsupportedLanguage,
                "no explanation template for language '" + language + "'");
  }
  const AuditRecord& decision = trail.record(contestation.decision_record);

  std::vector<std::string> relied;
  for (RecordId cause : decision.cause_links) {
    const AuditRecord& rec = trail.record(cause);
    relied.push_back(rec.event_kind + " #" + std::to_string(rec.record_id) + " (" +
                     rec.agent_id + ")");
  }
  if (relied.empty()) relied.push_back("the issuing system's own detection");

  std::vector<std::string> systems;
  std::vector<std::string> authorities;
  for (const auto& [agent, ids] : contestation.causal_chain.contributing) {
    systems.push_back(agent);
    if (agents.is_registered(agent)) {
      const std::string& authority = agents.entry(agent).profile.authority;
      if (std::find(authorities.begin(), authorities.end(), authority) ==
          authorities.end()) {
        authorities.push_back(authority);
      }
    }
  }

  std::ostringstream out;
  if (language == "ar") {
    out << "القرار قيد المراجعة: " << decision.event_kind << " رقم "
        << decision.record_id << " صادر عن " << decision.agent_id << "\n"
        << "المعلومات المعتمد عليها: " << join(relied, "، ") << "\n"
        << "الأنظمة المساهمة: " << join(systems, "، ") << "\n"
        << "الجهات المسؤولة: " << join(authorities, "، ") << "\n"
        << "المراجعة المتاحة: " << contestation.review_path << "\n"
        << "سبل الانتصاف الممكنة: " << contestation.remedy << "\n";
  } else {
    out << "Decision under review: " << decision.event_kind << " #"
        << decision.record_id << " issued by " << decision.agent_id << "\n"
        << "Information materially relied upon: " << join(relied, ", ") << "\n"
        << "Contributing systems: " << join(systems, ", ") << "\n"
        << "Responsible authorities: " << join(authorities, ", ") << "\n"
        << "Review available: " << contestation.review_path << "\n"
        << "Possible remedy: " << contestation.remedy << "\n";
  }
  return out.str();
}

void ContestationDesk::advance_status(ContestationCase& contestation,
                                      CaseStatus next) const {
  if (contestation.status == CaseStatus::Open && next != CaseStatus::Open &&
      contestation.causal_chain.contributing.empty()) {
    throw Error(Errc::MissingContext,
                "case cannot leave Open without its causal chain");
  }
  contestation.status = next;
}

bool ContestationDesk::has_case(const std::string& case_id) const {
  return std::any_of(cases_.begin(), cases_.end(), [&](const ContestationCase& c) {
    return c.case_id == case_id;
  });
}

const ContestationCase& ContestationDesk::case_by_id(const std::string& case_id) const {
  for (const ContestationCase& contestation : cases_) {
    if (contestation.case_id == case_id) return contestation;
  }
  throw Error(Errc::UnknownRecord, "no contestation case '" + case_id + "'");
}

} // namespace citygov
