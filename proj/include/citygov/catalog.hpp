#pragma once

#include <set>
#include <string>
#include <vector>

#include "citygov/errors.hpp"

namespace citygov {

enum class Layer { Agent, Orchestration, City, Unassigned };
enum class MeasureKind { Novel, Integration, Implementation, Stub };
enum class Framework { AiAct, Iso42001, NistRmf, Other };
enum class Resolution {
  TieredLogging,
  GraduatedRetention,
  ConsolidatedAssessment,
  StrictestClockTriage,
  TieredDisclosure,
};

std::string to_string(Layer layer);
std::string to_string(MeasureKind kind);
std::string to_string(Framework framework);
std::string to_string(Resolution resolution);
Layer layer_from_string(const std::string& text);
MeasureKind measure_kind_from_string(const std::string& text);
Framework framework_from_string(const std::string& text);
Resolution resolution_from_string(const std::string& text);

/// One traceability link from a measure to a regulatory provision.
/// Locators are opaque labels matched by exact string comparison.
struct ObligationRef {
  Framework framework = Framework::Other;
  std::string locator;
  std::string note;
};

struct GovernanceMeasure {
  std::string id;   // "R-01".."R-25"
  std::string name; // empty for stubs
  Layer layer = Layer::Unassigned;
  MeasureKind kind = MeasureKind::Stub;
  std::string gap_addressed;
  std::vector<ObligationRef> obligations;
  bool activatable = false;
};

struct ConflictRule {
  std::string id; // "T1".."T5"
  std::string tension;
  std::vector<std::string> implementing_measures;
  Resolution resolution = Resolution::TieredLogging;
  Layer layer = Layer::Orchestration;
};

struct Finding {
  std::string subject; // measure or rule id, or "catalog"
  std::string rule;    // name of the violated integrity rule
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const { return findings.empty(); }
};

/// The governance control catalog. Immutable after load; safe to share
/// read-only across threads.
class Catalog {
public:
  /// Parses catalog text without integrity checks. Throws SchemaError on
  /// malformed input. Use for inspecting catalogs that may be invalid.
  static Catalog parse(const std::string& text);

  /// Parses and enforces all integrity invariants. Throws SchemaError or
  /// IntegrityError.
  static Catalog load(const std::string& text);
  static Catalog load_file(const std::string& path);

  const std::vector<GovernanceMeasure>& measures() const { return measures_; }
  const std::vector<ConflictRule>& rules() const { return rules_; }

  bool has_measure(const std::string& id) const;
  const GovernanceMeasure& measure(const std::string& id) const; // UnknownMeasure

  /// All measure ids whose obligations match (framework, locator) exactly.
  std::set<std::string> trace_forward(const ObligationRef& obligation) const;

  /// The measure's obligation set; empty iff stub. Throws UnknownMeasure.
  std::vector<ObligationRef> trace_backward(const std::string& measure_id) const;

  /// The conflict rule for a tension id. Throws UnknownRule.
  const ConflictRule& resolve_rule(const std::string& tension_id) const;

  std::size_t count_kind(MeasureKind kind) const;
  std::set<std::string> ids_in_layer(Layer layer) const;

private:
  std::vector<GovernanceMeasure> measures_;
  std::vector<ConflictRule> rules_;
};

/// Checks every catalog invariant and returns one finding per violation.
/// Never throws; the shipped catalog yields zero findings.
ValidationReport validate_catalog(const Catalog& catalog);

} // namespace citygov
