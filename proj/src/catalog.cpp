#include "citygov/catalog.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace citygov {

namespace {

using nlohmann::json;

const std::set<std::string>& stub_ids() {
  static const std::set<std::string> ids = {"R-11", "R-15", "R-17",
                                            "R-18", "R-21", "R-22", "R-25"};
  return ids;
}

const std::set<std::string>& novel_ids() {
  static const std::set<std::string> ids = {"R-01", "R-02", "R-03", "R-04",
                                            "R-05"};
  return ids;
}

json require(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key)) {
    throw Error(Errc::SchemaError, where + ": missing field '" + key + "'");
  }
  return node.at(key);
}

std::string require_string(const json& node, const char* key,
                           const std::string& where) {
  json value = require(node, key, where);
  if (!value.is_string()) {
    throw Error(Errc::SchemaError, where + ": field '" + key + "' must be a string");
  }
  return value.get<std::string>();
}

ObligationRef parse_obligation(const json& node, const std::string& where) {
  if (!node.is_object()) {
    throw Error(Errc::SchemaError, where + ": obligation must be an object");
  }
  ObligationRef ref;
  ref.framework = framework_from_string(require_string(node, "framework", where));
  ref.locator = require_string(node, "locator", where);
  if (node.contains("note")) {
    ref.note = node.at("note").get<std::string>();
  }
  return ref;
}

GovernanceMeasure parse_measure(const json& node) {
  if (!node.is_object()) {
    throw Error(Errc::SchemaError, "measure entry must be an object");
  }
  GovernanceMeasure m;
  m.id = require_string(node, "id", "measure");
  const std::string where = "measure " + m.id;
  m.name = require_string(node, "name", where);
  m.layer = layer_from_string(require_string(node, "layer", where));
  m.kind = measure_kind_from_string(require_string(node, "kind", where));
  m.gap_addressed = require_string(node, "gap_addressed", where);
  json activatable = require(node, "activatable", where);
  if (!activatable.is_boolean()) {
    throw Error(Errc::SchemaError, where + ": 'activatable' must be a boolean");
  }
  m.activatable = activatable.get<bool>();
  json obligations = require(node, "obligations", where);
  if (!obligations.is_array()) {
    throw Error(Errc::SchemaError, where + ": 'obligations' must be an array");
  }
  for (const json& entry : obligations) {
    m.obligations.push_back(parse_obligation(entry, where));
  }
  return m;
}

ConflictRule parse_rule(const json& node) {
  if (!node.is_object()) {
    throw Error(Errc::SchemaError, "rule entry must be an object");
  }
  ConflictRule r;
  r.id = require_string(node, "id", "rule");
  const std::string where = "rule " + r.id;
  r.tension = require_string(node, "tension", where);
  json measures = require(node, "implementing_measures", where);
  if (!measures.is_array()) {
    throw Error(Errc::SchemaError, where + ": 'implementing_measures' must be an array");
  }
  for (const json& entry : measures) {
    if (!entry.is_string()) {
      throw Error(Errc::SchemaError, where + ": implementing measure ids must be strings");
    }
    r.implementing_measures.push_back(entry.get<std::string>());
  }
  r.resolution = resolution_from_string(require_string(node, "resolution", where));
  r.layer = layer_from_string(require_string(node, "layer", where));
  return r;
}

struct RuleExpectation {
  std::vector<std::string> measures;
  Resolution resolution;
  Layer layer;
};

const std::map<std::string, RuleExpectation>& rule_expectations() {
  static const std::map<std::string, RuleExpectation> expected = {
      {"T1", {{"R-19"}, Resolution::TieredLogging, Layer::Agent}},
      {"T2", {{"R-19", "R-07"}, Resolution::GraduatedRetention, Layer::Orchestration}},
      {"T3", {{"R-12"}, Resolution::ConsolidatedAssessment, Layer::Orchestration}},
      {"T4", {{"R-05"}, Resolution::StrictestClockTriage, Layer::Orchestration}},
      {"T5", {{"R-14"}, Resolution::TieredDisclosure, Layer::City}},
  };
  return expected;
}

std::string join_ids(const std::set<std::string>& ids) {
  std::string out;
  for (const std::string& id : ids) {
    if (!out.empty()) out += ",";
    out += id;
  }
  return out;
}

} // namespace

std::string to_string(Layer layer) {
  switch (layer) {
    case Layer::Agent: return "Agent";
    case Layer::Orchestration: return "Orchestration";
    case Layer::City: return "City";
    case Layer::Unassigned: return "Unassigned";
  }
  return "Unassigned";
}

std::string to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::Novel: return "novel";
    case MeasureKind::Integration: return "integration";
    case MeasureKind::Implementation: return "implementation";
    case MeasureKind::Stub: return "stub";
  }
  return "stub";
}

std::string to_string(Framework framework) {
  switch (framework) {
    case Framework::AiAct: return "AIACT";
    case Framework::Iso42001: return "ISO42001";
    case Framework::NistRmf: return "NISTRMF";
    case Framework::Other: return "OTHER";
  }
  return "OTHER";
}

std::string to_string(Resolution resolution) {
  switch (resolution) {
    case Resolution::TieredLogging: return "TieredLogging";
    case Resolution::GraduatedRetention: return "GraduatedRetention";
    case Resolution::ConsolidatedAssessment: return "ConsolidatedAssessment";
    case Resolution::StrictestClockTriage: return "StrictestClockTriage";
    case Resolution::TieredDisclosure: return "TieredDisclosure";
  }
  return "TieredLogging";
}

Layer layer_from_string(const std::string& text) {
  if (text == "Agent") return Layer::Agent;
  if (text == "Orchestration") return Layer::Orchestration;
  if (text == "City") return Layer::City;
  if (text == "Unassigned") return Layer::Unassigned;
  throw Error(Errc::SchemaError, "unknown layer '" + text + "'");
}

MeasureKind measure_kind_from_string(const std::string& text) {
  if (text == "novel") return MeasureKind::Novel;
  if (text == "integration") return MeasureKind::Integration;
  if (text == "implementation") return MeasureKind::Implementation;
  if (text == "stub") return MeasureKind::Stub;
  throw Error(Errc::SchemaError, "unknown measure kind '" + text + "'");
}

Framework framework_from_string(const std::string& text) {
  if (text == "AIACT") return Framework::AiAct;
  if (text == "ISO42001") return Framework::Iso42001;
  if (text == "NISTRMF") return Framework::NistRmf;
  if (text == "OTHER") return Framework::Other;
  throw Error(Errc::SchemaError, "unknown framework '" + text + "'");
}

Resolution resolution_from_string(const std::string& text) {
  if (text == "TieredLogging") return Resolution::TieredLogging;
  if (text == "GraduatedRetention") return Resolution::GraduatedRetention;
  if (text == "ConsolidatedAssessment") return Resolution::ConsolidatedAssessment;
  if (text == "StrictestClockTriage") return Resolution::StrictestClockTriage;
  if (text == "TieredDisclosure") return Resolution::TieredDisclosure;
  throw Error(Errc::SchemaError, "unknown resolution '" + text + "'");
}

Catalog Catalog::parse(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(Errc::SchemaError, std::string("catalog is not valid JSON: ") + err.what());
  }
  if (!root.is_object()) {
    throw Error(Errc::SchemaError, "catalog root must be an object");
  }
  json measures = require(root, "measures", "catalog");
  json rules = require(root, "rules", "catalog");
  if (!measures.is_array() || !rules.is_array()) {
    throw Error(Errc::SchemaError, "catalog 'measures' and 'rules' must be arrays");
  }
  Catalog catalog;
  for (const json& entry : measures) {
    catalog.measures_.push_back(parse_measure(entry));
  }
  for (const json& entry : rules) {
    catalog.rules_.push_back(parse_rule(entry));
  }
  return catalog;
}

Catalog Catalog::load(const std::string& text) {
  Catalog catalog = parse(text);
  ValidationReport report = validate_catalog(catalog);
  if (!report.ok()) {
    const Finding& first = report.findings.front();
    std::ostringstream message;
    message << first.subject << " violates " << first.rule << ": " << first.message;
    if (report.findings.size() > 1) {
      message << " (+" << report.findings.size() - 1 << " more findings)";
    }
    throw Error(Errc::IntegrityError, message.str());
  }
  return catalog;
}

Catalog Catalog::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::SchemaError, "cannot open catalog file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

bool Catalog::has_measure(const std::string& id) const {
  return std::any_of(measures_.begin(), measures_.end(),
                     [&](const GovernanceMeasure& m) { return m.id == id; });
}

const GovernanceMeasure& Catalog::measure(const std::string& id) const {
  for (const GovernanceMeasure& m : measures_) {
    if (m.id == id) return m;
  }
  throw Error(Errc::UnknownMeasure, "no measure with id '" + id + "'");
}

std::set<std::string> Catalog::trace_forward(const ObligationRef& obligation) const {
  std::set<std::string> result;
  for (const GovernanceMeasure& m : measures_) {
    for (const ObligationRef& ref : m.obligations) {
      if (ref.framework == obligation.framework && ref.locator == obligation.locator) {
        result.insert(m.id);
        break;
      }
    }
  }
  return result;
}

std::vector<ObligationRef> Catalog::trace_backward(const std::string& measure_id) const {
  return measure(measure_id).obligations;
}

const ConflictRule& Catalog::resolve_rule(const std::string& tension_id) const {
  for (const ConflictRule& r : rules_) {
    if (r.id == tension_id) return r;
  }
  throw Error(Errc::UnknownRule, "no conflict rule with id '" + tension_id + "'");
}

std::size_t Catalog::count_kind(MeasureKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(measures_.begin(), measures_.end(),
                    [&](const GovernanceMeasure& m) { return m.kind == kind; }));
}

std::set<std::string> Catalog::ids_in_layer(Layer layer) const {
  std::set<std::string> result;
  for (const GovernanceMeasure& m : measures_) {
    if (m.layer == layer) result.insert(m.id);
  }
  return result;
}

ValidationReport validate_catalog(const Catalog& catalog) {
  ValidationReport report;
  auto add = [&](const std::string& subject, const std::string& rule,
                 const std::string& message) {
    report.findings.push_back({subject, rule, message});
  };

  const auto& measures = catalog.measures();

  if (measures.size() != 25) {
    add("catalog", "entry-count",
        "expected 25 measures, found " + std::to_string(measures.size()));
  }

  std::set<std::string> seen;
  for (const GovernanceMeasure& m : measures) {
    if (!seen.insert(m.id).second) {
      add(m.id, "unique-ids", "duplicate measure id");
    }
  }

  for (const GovernanceMeasure& m : measures) {
    const bool in_stub_set = stub_ids().count(m.id) > 0;
    const bool is_stub = m.kind == MeasureKind::Stub;
    if (is_stub != in_stub_set) {
      add(m.id, "stub-set",
          in_stub_set ? "measure must be a stub" : "measure must not be a stub");
    }
    if (is_stub) {
      if (m.activatable) {
        add(m.id, "stub-inert", "stub measures are not activatable");
      }
      if (m.layer != Layer::Unassigned) {
        add(m.id, "stub-unassigned", "stub measures carry no layer assignment");
      }
      if (!m.obligations.empty()) {
        add(m.id, "stub-obligations", "stub measures carry no obligations");
      }
    } else {
      if (!m.activatable) {
        add(m.id, "active-activatable", "non-stub measures are activatable");
      }
      if (m.layer == Layer::Unassigned) {
        add(m.id, "active-layer", "non-stub measures have a layer");
      }
      if (m.obligations.empty()) {
        add(m.id, "obligation-coverage",
            "non-stub measures need at least one obligation reference");
      }
      if (m.name.empty()) {
        add(m.id, "active-name", "non-stub measures have a name");
      }
    }
    const bool in_novel_set = novel_ids().count(m.id) > 0;
    if ((m.kind == MeasureKind::Novel) != in_novel_set) {
      add(m.id, "novel-set",
          in_novel_set ? "measure must have kind novel" : "only R-01..R-05 are novel");
    }
    for (const ObligationRef& ref : m.obligations) {
      if (ref.locator.empty()) {
        add(m.id, "locator-nonempty", "obligation locator must be non-empty");
      }
    }
  }

  // Layer census from the published assignments. Orchestration is checked
  // for containment only: the remaining assignments live in catalog material
  // not shipped here.
  const std::set<std::string> expected_agent = {"R-09", "R-10", "R-19", "R-20", "R-23"};
  const std::set<std::string> expected_city = {"R-04", "R-08", "R-13", "R-14", "R-16"};
  const std::set<std::string> expected_orch_subset = {
      "R-01", "R-02", "R-03", "R-05", "R-06", "R-07", "R-12", "R-24"};
  if (measures.size() == 25 && seen.size() == 25) {
    std::set<std::string> agent = catalog.ids_in_layer(Layer::Agent);
    std::set<std::string> city = catalog.ids_in_layer(Layer::City);
    std::set<std::string> orch = catalog.ids_in_layer(Layer::Orchestration);
    if (agent != expected_agent) {
      add("catalog", "agent-census",
          "agent-layer measures must be exactly {" + join_ids(expected_agent) +
              "}, found {" + join_ids(agent) + "}");
    }
    if (city != expected_city) {
      add("catalog", "city-census",
          "city-layer measures must be exactly {" + join_ids(expected_city) +
              "}, found {" + join_ids(city) + "}");
    }
    if (!std::includes(orch.begin(), orch.end(), expected_orch_subset.begin(),
                       expected_orch_subset.end())) {
      add("catalog", "orchestration-census",
          "orchestration layer must include {" + join_ids(expected_orch_subset) + "}");
    }
  }

  const auto& rules = catalog.rules();
  if (rules.size() != 5) {
    add("catalog", "rule-count",
        "expected 5 conflict rules, found " + std::to_string(rules.size()));
  }
  std::set<std::string> rule_seen;
  for (const ConflictRule& r : rules) {
    if (!rule_seen.insert(r.id).second) {
      add(r.id, "unique-rule-ids", "duplicate rule id");
    }
    auto it = rule_expectations().find(r.id);
    if (it == rule_expectations().end()) {
      add(r.id, "rule-ids", "conflict rule ids are T1..T5");
      continue;
    }
    const RuleExpectation& expected = it->second;
    if (r.implementing_measures != expected.measures) {
      std::string want;
      for (const std::string& id : expected.measures) {
        if (!want.empty()) want += ",";
        want += id;
      }
      add(r.id, "rule-measure-mapping", "implementing measures must be [" + want + "]");
    }
    if (r.resolution != expected.resolution) {
      add(r.id, "rule-resolution",
          "resolution must be " + to_string(expected.resolution));
    }
    if (r.layer != expected.layer) {
      add(r.id, "rule-layer", "rule layer must be " + to_string(expected.layer));
    }
  }
  for (const std::string& id : {"T1", "T2", "T3", "T4", "T5"}) {
    if (!rule_seen.count(id)) {
      add(id, "rule-ids", "missing conflict rule");
    }
  }

  return report;
}

} // namespace citygov
