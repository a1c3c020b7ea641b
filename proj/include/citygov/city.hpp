#pragma once

#include "citygov/orchestration.hpp"

namespace citygov {

enum class GovernanceBasis { Binding, Voluntary };
enum class CaseStatus { Open, UnderReview, Resolved };

std::string to_string(GovernanceBasis basis);
std::string to_string(CaseStatus status);
GovernanceBasis governance_basis_from_string(const std::string& text);

struct RegistryEntry {
  SystemProfile profile;
  std::pair<AutonomyLevel, AutonomyLevel> autonomy_range{AutonomyLevel::L2,
                                                         AutonomyLevel::L2};
  std::string key_metric;
  GovernanceBasis basis = GovernanceBasis::Voluntary;
  std::map<std::string, MetricBounds> envelope_bounds; // confidential
  std::string vendor_internals;                        // confidential
  std::set<AccessTier> tiers_published;
};

/// City-wide registry of deployed AI systems.
class SystemRegistry {
public:
  RegistryEntry& register_system(const SystemProfile& profile,
                                 std::pair<AutonomyLevel, AutonomyLevel> autonomy_range,
                                 const std::string& key_metric,
                                 GovernanceBasis basis); // DuplicateSystem

  static SystemRegistry load_file(const std::string& path);
  static SystemRegistry load(const std::string& text);

  bool has(const std::string& system_id) const;
  const RegistryEntry& entry(const std::string& system_id) const; // UnknownSystem
  RegistryEntry& entry(const std::string& system_id);

  std::vector<const RegistryEntry*> list() const;
  std::vector<const RegistryEntry*> list_by_basis(GovernanceBasis basis) const;
  std::vector<const RegistryEntry*> list_by_authority(const std::string& authority) const;
  std::size_t size() const { return entries_.size(); }

private:
  std::map<std::string, RegistryEntry> entries_;
  std::vector<std::string> order_; // registration order
};

struct DisclosurePackage {
  std::string system_id;
  AccessTier tier = AccessTier::Public;
  std::map<std::string, std::string> fields;
};

/// Public packages omit fields marked confidential (envelope bounds, vendor
/// internals); regulator packages carry everything plus a trail access
/// pointer. Public is a strict subset of Regulator for every entry.
DisclosurePackage publish_disclosure(SystemRegistry& registry,
                                     const std::string& system_id, AccessTier tier);

struct Zone {
  std::string zone_id;
  double baseline_share = 0.0; // fraction of the city enforcement baseline
  bool vulnerable = false;
};

struct EnforcementEvent {
  std::string zone_id;
  Minutes timestamp = 0;
};

struct FairnessFlag {
  std::string zone_id;
  double observed_share = 0.0;
  double baseline_share = 0.0;
  double concentration_ratio = 0.0;
  bool cascade_active = false;
  bool human_review = false;
  Minutes raised_at = 0;
};

/// Flags every zone whose observed share of enforcement events inside the
/// sliding window reaches ratio >= threshold against its baseline share.
/// During an active cascade, flags on vulnerable zones request human review.
std::vector<FairnessFlag> monitor_fairness(const std::vector<EnforcementEvent>& events,
                                           const std::vector<Zone>& zones,
                                           bool cascade_active, double threshold,
                                           Minutes window, Minutes now);

struct ContestationCase {
  std::string case_id;
  RecordId decision_record = 0;
  AttributionReport causal_chain;
  std::map<std::string, std::string> explanations; // language tag -> text
  std::string review_path;
  std::string remedy;
  CaseStatus status = CaseStatus::Open;
};

/// Resident-facing contestation bound to the causal chain behind a decision.
class ContestationDesk {
public:
  ContestationDesk(std::string review_path, std::string remedy,
                   std::vector<std::string> languages = {"en", "ar"});

  /// Opens a case for a decision record; the causal chain is the attribution
  /// over the shared trail. Throws UnknownRecord.
  ContestationCase& open_contestation(const AuditTrail& trail, RecordId decision,
                                      const Topology& topology);

  /// Deterministic template fill in the requested language. Throws
  /// UnsupportedLanguage for tags outside the configured set.
  std::string render_explanation(const ContestationCase& contestation,
                                 const std::string& language,
                                 const AuditTrail& trail,
                                 const AgentRegistry& agents) const;

  /// Status may leave Open only once the causal chain is present.
  void advance_status(ContestationCase& contestation, CaseStatus next) const;

  bool has_case(const std::string& case_id) const;
  const ContestationCase& case_by_id(const std::string& case_id) const; // UnknownRecord
  const std::vector<ContestationCase>& cases() const { return cases_; }
  const std::vector<std::string>& languages() const { return languages_; }

private:
  std::string review_path_;
  std::string remedy_;
  std::vector<std::string> languages_;
  std::vector<ContestationCase> cases_;
};

} // namespace citygov
