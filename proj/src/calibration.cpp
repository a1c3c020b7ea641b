#include "citygov/calibration.hpp"

namespace citygov {

std::string to_string(DecisionScope scope) {
  switch (scope) {
    case DecisionScope::Advisory: return "Advisory";
    case DecisionScope::BoundedTask: return "BoundedTask";
    case DecisionScope::Operational: return "Operational";
    case DecisionScope::RealTimeControl: return "RealTimeControl";
  }
  return "Advisory";
}

std::string to_string(HumanInvolvement involvement) {
  switch (involvement) {
    case HumanInvolvement::PreApproval: return "PreApproval";
    case HumanInvolvement::ExceptionHandling: return "ExceptionHandling";
    case HumanInvolvement::Monitoring: return "Monitoring";
    case HumanInvolvement::SupervisoryOverride: return "SupervisoryOverride";
  }
  return "PreApproval";
}

std::string to_string(DomainCriticality criticality) {
  switch (criticality) {
    case DomainCriticality::CustomerFacing: return "CustomerFacing";
    case DomainCriticality::PublicSpace: return "PublicSpace";
    case DomainCriticality::CriticalInfrastructure: return "CriticalInfrastructure";
  }
  return "CustomerFacing";
}

std::string to_string(AutonomyLevel level) {
  switch (level) {
    case AutonomyLevel::L2: return "L2";
    case AutonomyLevel::L3: return "L3";
    case AutonomyLevel::L4: return "L4";
  }
  return "L2";
}

std::string to_string(GovernanceLevel level) {
  switch (level) {
    case GovernanceLevel::G1: return "G1";
    case GovernanceLevel::G2: return "G2";
    case GovernanceLevel::G3: return "G3";
    case GovernanceLevel::G4: return "G4";
    case GovernanceLevel::G5: return "G5";
  }
  return "G1";
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Off: return "Off";
    case Activation::Basic: return "Basic";
    case Activation::Full: return "Full";
  }
  return "Off";
}

DecisionScope decision_scope_from_string(const std::string& text) {
  if (text == "Advisory") return DecisionScope::Advisory;
  if (text == "BoundedTask") return DecisionScope::BoundedTask;
  if (text == "Operational") return DecisionScope::Operational;
  if (text == "RealTimeControl") return DecisionScope::RealTimeControl;
  throw Error(Errc::SchemaError, "unknown decision scope '" + text + "'");
}

HumanInvolvement human_involvement_from_string(const std::string& text) {
  if (text == "PreApproval") return HumanInvolvement::PreApproval;
  if (text == "ExceptionHandling") return HumanInvolvement::ExceptionHandling;
  if (text == "Monitoring") return HumanInvolvement::Monitoring;
  if (text == "SupervisoryOverride") return HumanInvolvement::SupervisoryOverride;
  throw Error(Errc::SchemaError, "unknown human involvement '" + text + "'");
}

DomainCriticality domain_criticality_from_string(const std::string& text) {
  if (text == "CustomerFacing") return DomainCriticality::CustomerFacing;
  if (text == "PublicSpace") return DomainCriticality::PublicSpace;
  if (text == "CriticalInfrastructure") return DomainCriticality::CriticalInfrastructure;
  throw Error(Errc::SchemaError, "unknown domain criticality '" + text + "'");
}

AutonomyLevel autonomy_level_from_string(const std::string& text) {
  if (text == "L2") return AutonomyLevel::L2;
  if (text == "L3") return AutonomyLevel::L3;
  if (text == "L4") return AutonomyLevel::L4;
  throw Error(Errc::SchemaError, "unknown autonomy level '" + text + "'");
}

AutonomyAssessment classify_autonomy(const AutonomyEvidence& evidence) {
  const DecisionScope scope = evidence.decision_scope;
  const HumanInvolvement human = evidence.human_involvement;

  const bool oversight_only = human == HumanInvolvement::Monitoring ||
                              human == HumanInvolvement::SupervisoryOverride;

  if (scope == DecisionScope::RealTimeControl && oversight_only) {
    return {AutonomyLevel::L4,
            "real-time control with " + to_string(human) +
                " only: autonomous operation, human oversees"};
  }
  if (scope == DecisionScope::RealTimeControl) {
    // Real-time capability gated by approval or exception handling stays
    // below full autonomy.
    return {AutonomyLevel::L3,
            "real-time control gated by " + to_string(human)};
  }
  if (scope == DecisionScope::Operational) {
    return {AutonomyLevel::L3,
            "operational decision scope with " + to_string(human)};
  }
  if (scope == DecisionScope::BoundedTask &&
      human != HumanInvolvement::PreApproval) {
    return {AutonomyLevel::L3,
            "bounded tasks executed without pre-approval (" + to_string(human) + ")"};
  }
  if (scope == DecisionScope::BoundedTask) {
    return {AutonomyLevel::L2, "bounded tasks under pre-approval"};
  }
  return {AutonomyLevel::L2, "advisory scope: human decides, system assists"};
}

GovernanceLevel assign_governance_level(const SystemProfile& profile) {
  if (profile.multi_agent_ecosystem) {
    return GovernanceLevel::G5;
  }
  const AutonomyAssessment assessment = classify_autonomy(profile.evidence);
  const bool autonomy_qualifies =
      assessment.level == AutonomyLevel::L4 ||
      (assessment.level == AutonomyLevel::L3 &&
       profile.evidence.decision_scope == DecisionScope::RealTimeControl);
  if (autonomy_qualifies && profile.endangers_essential_services &&
      profile.cross_org_dependencies) {
    return GovernanceLevel::G4;
  }
  if (profile.evidence.decision_scope == DecisionScope::Operational ||
      profile.evidence.decision_scope == DecisionScope::RealTimeControl) {
    return GovernanceLevel::G3;
  }
  if (profile.evidence.decision_scope == DecisionScope::BoundedTask) {
    return GovernanceLevel::G2;
  }
  return GovernanceLevel::G1;
}

LayerActivationMap layer_activation(GovernanceLevel level) {
  switch (level) {
    case GovernanceLevel::G1:
    case GovernanceLevel::G2:
      return {Activation::Full, Activation::Off, Activation::Off};
    case GovernanceLevel::G3:
      return {Activation::Full, Activation::Basic, Activation::Off};
    case GovernanceLevel::G4:
      return {Activation::Full, Activation::Full, Activation::Basic};
    case GovernanceLevel::G5:
      return {Activation::Full, Activation::Full, Activation::Full};
  }
  return {Activation::Full, Activation::Off, Activation::Off};
}

std::string oversight_posture(GovernanceLevel level) {
  switch (level) {
    case GovernanceLevel::G1: return "human-in-command";
    case GovernanceLevel::G2: return "human-on-the-loop";
    case GovernanceLevel::G3: return "human-over-the-loop";
    case GovernanceLevel::G4: return "supervisory";
    case GovernanceLevel::G5: return "societal";
  }
  return "human-in-command";
}

} // namespace citygov
