#pragma once

#include <string>

#include "citygov/errors.hpp"

namespace citygov {

enum class DecisionScope { Advisory, BoundedTask, Operational, RealTimeControl };
enum class HumanInvolvement { PreApproval, ExceptionHandling, Monitoring, SupervisoryOverride };
enum class DomainCriticality { CustomerFacing, PublicSpace, CriticalInfrastructure };
enum class AutonomyLevel { L2 = 2, L3 = 3, L4 = 4 };
enum class GovernanceLevel { G1 = 1, G2 = 2, G3 = 3, G4 = 4, G5 = 5 };
enum class Activation { Off = 0, Basic = 1, Full = 2 };

std::string to_string(DecisionScope scope);
std::string to_string(HumanInvolvement involvement);
std::string to_string(DomainCriticality criticality);
std::string to_string(AutonomyLevel level);
std::string to_string(GovernanceLevel level);
std::string to_string(Activation activation);
DecisionScope decision_scope_from_string(const std::string& text);
HumanInvolvement human_involvement_from_string(const std::string& text);
DomainCriticality domain_criticality_from_string(const std::string& text);
AutonomyLevel autonomy_level_from_string(const std::string& text);

struct AutonomyEvidence {
  DecisionScope decision_scope = DecisionScope::Advisory;
  HumanInvolvement human_involvement = HumanInvolvement::PreApproval;
  DomainCriticality domain_criticality = DomainCriticality::CustomerFacing;
};

struct SystemProfile {
  std::string id;
  std::string name;
  std::string authority;
  std::string domain;
  AutonomyEvidence evidence;
  bool endangers_essential_services = false;
  bool cross_org_dependencies = false;
  bool multi_agent_ecosystem = false;
};

/// Per-layer activation intensity for a governance level. The agent layer is
/// Full at every level; Basic enables monitoring, declaration intake and
/// trace recording while blocking actions run in advisory mode; Full enables
/// enforcement.
struct LayerActivationMap {
  Activation agent = Activation::Full;
  Activation orchestration = Activation::Off;
  Activation city = Activation::Off;

  bool operator==(const LayerActivationMap&) const = default;
};

struct AutonomyAssessment {
  AutonomyLevel level = AutonomyLevel::L2;
  std::string rationale;
};

/// Deterministic decision table over (decision scope, human involvement).
/// Criticality is recorded as evidence but weighs on the governance level,
/// not the autonomy level. The same table ships as data so assessors can
/// audit it; tests keep file and code in sync.
AutonomyAssessment classify_autonomy(const AutonomyEvidence& evidence);

/// Governance level assignment. G5 is gated on the declared multi-agent
/// ecosystem flag. G4 requires the two-part test: real-time autonomous
/// control in infrastructure whose failure endangers persons or essential
/// services, and operational dependencies that cross organisational
/// boundaries. Both parts must hold.
GovernanceLevel assign_governance_level(const SystemProfile& profile);

LayerActivationMap layer_activation(GovernanceLevel level);

/// Fixed oversight posture label per level.
std::string oversight_posture(GovernanceLevel level);

} // namespace citygov
