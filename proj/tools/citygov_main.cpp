#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "citygov/simulation.hpp"

#ifndef CITYGOV_DATA_DIR
#define CITYGOV_DATA_DIR "data"
#endif

namespace {

using namespace citygov;

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case Errc::SchemaError:
    case Errc::DanglingReference:
      return 2;
    default:
      return 1;
  }
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(Errc::SchemaError, "cannot write to " + path);
  }
  out << content;
}

std::string print_package(const DisclosurePackage& package) {
  std::ostringstream out;
  out << "disclosure package (" << to_string(package.tier) << ") for "
      << package.system_id << "\n";
  for (const auto& [field, value] : package.fields) {
    out << "  " << field << ": " << value << "\n";
  }
  return out.str();
}

int cmd_validate(const std::string& catalog_path) {
  Catalog catalog = Catalog::parse([&] {
    std::ifstream in(catalog_path);
    if (!in) throw Error(Errc::SchemaError, "cannot open catalog file: " + catalog_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }());
  ValidationReport report = validate_catalog(catalog);
  if (report.ok()) {
    std::cout << "catalog ok: " << catalog.measures().size() << " measures, "
              << catalog.rules().size() << " rules, 0 findings\n";
    return 0;
  }
  for (const Finding& finding : report.findings) {
    std::cout << finding.subject << " [" << finding.rule << "] " << finding.message
              << "\n";
  }
  std::cout << report.findings.size() << " findings\n";
  return 1;
}

int cmd_trace_query(const Catalog& catalog, const std::string& measure,
                    const std::string& obligation) {
  if (!measure.empty()) {
    for (const ObligationRef& ref : catalog.trace_backward(measure)) {
      std::cout << to_string(ref.framework) << ": " << ref.locator;
      if (!ref.note.empty()) std::cout << " (" << ref.note << ")";
      std::cout << "\n";
    }
    return 0;
  }
  auto colon = obligation.find(':');
  if (colon == std::string::npos) {
    throw Error(Errc::SchemaError, "obligation must be <framework>:<locator>");
  }
  ObligationRef ref;
  ref.framework = framework_from_string(obligation.substr(0, colon));
  ref.locator = obligation.substr(colon + 1);
  for (const std::string& id : catalog.trace_forward(ref)) {
    std::cout << id << "\n";
  }
  return 0;
}

int cmd_classify(const std::string& scope, const std::string& human,
                 const std::string& criticality, bool endangers, bool crossorg,
                 bool ecosystem) {
  SystemProfile profile;
  profile.id = "cli";
  profile.evidence.decision_scope = decision_scope_from_string(scope);
  profile.evidence.human_involvement = human_involvement_from_string(human);
  profile.evidence.domain_criticality = domain_criticality_from_string(criticality);
  profile.endangers_essential_services = endangers;
  profile.cross_org_dependencies = crossorg;
  profile.multi_agent_ecosystem = ecosystem;

  AutonomyAssessment assessment = classify_autonomy(profile.evidence);
  GovernanceLevel level = assign_governance_level(profile);
  LayerActivationMap activation = layer_activation(level);

  std::cout << "autonomy level: " << to_string(assessment.level) << " ("
            << assessment.rationale << ")\n";
  std::cout << "governance level: " << to_string(level) << "\n";
  std::cout << "layer activation: A=" << to_string(activation.agent)
            << " O=" << to_string(activation.orchestration)
            << " C=" << to_string(activation.city) << "\n";
  std::cout << "oversight posture: " << oversight_posture(level) << "\n";
  return 0;
}

int cmd_deadlines(Minutes t0, const std::vector<std::string>& regime_args) {
  std::vector<RegimeWindow> regimes;
  for (const std::string& arg : regime_args) {
    auto eq = arg.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::SchemaError, "regime must be NAME=WINDOW_MIN");
    }
    RegimeWindow regime;
    regime.regime = arg.substr(0, eq);
    regime.window = std::stoll(arg.substr(eq + 1));
    regimes.push_back(regime);
  }
  if (regimes.empty()) {
    throw Error(Errc::EmptyRegimeSet, "at least one --regime is required");
  }
  Minutes baseline = regimes.front().window;
  std::cout << "regime\twindow_min\tdeadline_min\n";
  for (const RegimeWindow& regime : regimes) {
    std::cout << regime.regime << '\t' << regime.window << '\t'
              << t0 + regime.window << "\n";
    baseline = std::min(baseline, regime.window);
  }
  std::cout << "baseline: " << baseline << " min (deadline " << t0 + baseline
            << ")\n";
  return 0;
}

int cmd_run(const Catalog& catalog, const std::string& scenario_path, bool baseline,
            const std::string& trace_out, bool summary, const std::string& format,
            const std::string& trail_out, const std::string& incident_out) {
  Scenario scenario = Scenario::load_file(scenario_path);
  ActivationTrace trace = run_scenario(
      catalog, scenario, baseline ? RunMode::Baseline : RunMode::WithFramework);

  if (!trace_out.empty()) {
    write_or_print(trace_out, emit_trace(trace, "tsv"));
  }
  if (!trail_out.empty()) {
    write_or_print(trail_out, trace.trail_export);
  }
  if (!incident_out.empty()) {
    std::string exported;
    for (const IncidentRecord& incident : trace.incidents) {
      exported += export_incident(incident);
    }
    write_or_print(incident_out, exported);
  }
  if (summary) {
    std::cout << render_summary_text(summarize(trace));
  } else if (trace_out.empty()) {
    std::cout << emit_trace(trace, format);
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"governance control-plane engine and scenario simulator"};
  app.require_subcommand(1);

  std::string data_dir = CITYGOV_DATA_DIR;
  app.add_option("--data-dir", data_dir, "directory holding catalog.json and registry.json");

  auto* validate = app.add_subcommand("validate", "validate the control catalog");
  std::string catalog_path;
  validate->add_option("--catalog", catalog_path, "catalog file");

  auto* trace_query = app.add_subcommand("trace-query", "traceability queries");
  std::string query_measure, query_obligation;
  trace_query->add_option("--measure", query_measure, "measure id, e.g. R-05");
  trace_query->add_option("--obligation", query_obligation,
                          "obligation as <framework>:<locator>");

  auto* classify = app.add_subcommand("classify", "autonomy and governance level");
  std::string scope, human, criticality;
  bool endangers = false, crossorg = false, ecosystem = false;
  classify->add_option("--scope", scope, "decision scope")->required();
  classify->add_option("--human", human, "human involvement")->required();
  classify->add_option("--criticality", criticality, "domain criticality")->required();
  classify->add_flag("--endangers", endangers, "failure endangers essential services");
  classify->add_flag("--crossorg", crossorg, "dependencies cross organisations");
  classify->add_flag("--ecosystem", ecosystem, "multi-agent ecosystem");

  auto* deadlines = app.add_subcommand("deadlines", "strictest-clock deadlines");
  Minutes t0 = 0;
  std::vector<std::string> regime_args;
  deadlines->add_option("--t0", t0, "incident t0 in simulated minutes");
  deadlines->add_option("--regime", regime_args, "regime window as NAME=MINUTES");

  auto* registry_cmd = app.add_subcommand("registry", "system registry queries");
  auto* registry_list = registry_cmd->add_subcommand("list", "list registered systems");
  std::string basis_filter, registry_path;
  registry_list->add_option("--basis", basis_filter, "Binding or Voluntary");
  registry_cmd->add_option("--registry", registry_path, "registry file");

  auto* disclose = app.add_subcommand("disclose", "tiered disclosure package");
  std::string disclose_system, disclose_tier = "Public", disclose_registry;
  disclose->add_option("--system", disclose_system, "system id")->required();
  disclose->add_option("--tier", disclose_tier, "Public or Regulator");
  disclose->add_option("--registry", disclose_registry, "registry file");

  auto* contest = app.add_subcommand("contest", "open a contestation case");
  std::string contest_decision, contest_scenario;
  contest->add_option("--decision", contest_decision, "decision record id or alias")
      ->required();
  contest->add_option("--scenario", contest_scenario, "scenario file");

  auto* explain = app.add_subcommand("explain", "render a case explanation");
  std::string explain_case, explain_lang = "en", explain_scenario;
  explain->add_option("--case", explain_case, "case id")->required();
  explain->add_option("--lang", explain_lang, "language tag");
  explain->add_option("--scenario", explain_scenario, "scenario file");

  auto* run = app.add_subcommand("run", "run a scenario");
  std::string scenario_path, trace_out, run_format = "tsv", trail_out, incident_out;
  bool baseline = false, summary = false;
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_flag("--baseline", baseline, "run with governance disabled");
  run->add_option("--trace-out", trace_out, "write tsv trace to this path");
  run->add_flag("--summary", summary, "print summary metrics");
  run->add_option("--format", run_format, "stdout format: tsv or text");
  run->add_option("--trail-out", trail_out, "write the audit trail export");
  run->add_option("--incident-out", incident_out, "write incident exports");

  CLI11_PARSE(app, argc, argv);

  try {
    if (catalog_path.empty()) catalog_path = data_dir + "/catalog.json";
    if (registry_path.empty()) registry_path = data_dir + "/registry.json";
    if (disclose_registry.empty()) disclose_registry = data_dir + "/registry.json";
    const std::string default_scenario = data_dir + "/scenarios/corridor_cascade.json";
    if (contest_scenario.empty()) contest_scenario = default_scenario;
    if (explain_scenario.empty()) explain_scenario = default_scenario;

    if (validate->parsed()) {
      return cmd_validate(catalog_path);
    }
    if (trace_query->parsed()) {
      if (query_measure.empty() == query_obligation.empty()) {
        throw Error(Errc::SchemaError,
                    "trace-query needs exactly one of --measure / --obligation");
      }
      return cmd_trace_query(Catalog::load_file(catalog_path), query_measure,
                             query_obligation);
    }
    if (classify->parsed()) {
      return cmd_classify(scope, human, criticality, endangers, crossorg, ecosystem);
    }
    if (deadlines->parsed()) {
      return cmd_deadlines(t0, regime_args);
    }
    if (registry_cmd->parsed()) {
      SystemRegistry registry = SystemRegistry::load_file(registry_path);
      std::vector<const RegistryEntry*> entries =
          basis_filter.empty()
              ? registry.list()
              : registry.list_by_basis(governance_basis_from_string(basis_filter));
      std::cout << "system\tauthority\tdomain\tautonomy\tgovernance\tkey_metric\n";
      for (const RegistryEntry* entry : entries) {
        std::string autonomy =
            entry->autonomy_range.first == entry->autonomy_range.second
                ? to_string(entry->autonomy_range.first)
                : to_string(entry->autonomy_range.first) + "-" +
                      to_string(entry->autonomy_range.second);
        std::cout << entry->profile.name << '\t' << entry->profile.authority << '\t'
                  << entry->profile.domain << '\t' << autonomy << '\t'
                  << to_string(entry->basis) << '\t' << entry->key_metric << "\n";
      }
      return 0;
    }
    if (disclose->parsed()) {
      SystemRegistry registry = SystemRegistry::load_file(disclose_registry);
      DisclosurePackage package = publish_disclosure(
          registry, disclose_system, access_tier_from_string(disclose_tier));
      std::cout << print_package(package);
      return 0;
    }
    if (contest->parsed()) {
      Catalog catalog = Catalog::load_file(catalog_path);
      Scenario scenario = Scenario::load_file(contest_scenario);
      RunSession session(catalog, scenario, RunMode::WithFramework);
      RecordId decision;
      if (auto id = session.lookup_alias(contest_decision)) {
        decision = *id;
      } else {
        decision = static_cast<RecordId>(std::stoull(contest_decision));
      }
      const ContestationCase* found = nullptr;
      for (const ContestationCase& existing : session.desk().cases()) {
        if (existing.decision_record == decision) {
          found = &existing;
          break;
        }
      }
      const ContestationCase& contestation =
          found ? *found
                : session.desk().open_contestation(session.trail(), decision,
                                                   session.topology());
      std::cout << "case: " << contestation.case_id << " (status "
                << to_string(contestation.status) << ")\n";
      std::cout << "decision record: " << contestation.decision_record << "\n";
      std::cout << "causal chain (topology v"
                << contestation.causal_chain.topology_version << "):\n";
      for (const auto& [agent, ids] : contestation.causal_chain.contributing) {
        std::cout << "  " << agent << ":";
        for (RecordId id : ids) std::cout << " " << id;
        std::cout << "\n";
      }
      std::cout << "review: " << contestation.review_path << "\n";
      std::cout << "remedy: " << contestation.remedy << "\n";
      return 0;
    }
    if (explain->parsed()) {
      Catalog catalog = Catalog::load_file(catalog_path);
      Scenario scenario = Scenario::load_file(explain_scenario);
      RunSession session(catalog, scenario, RunMode::WithFramework);
      const ContestationCase& contestation = session.desk().case_by_id(explain_case);
      std::cout << session.desk().render_explanation(contestation, explain_lang,
                                                     session.trail(),
                                                     session.agents());
      return 0;
    }
    if (run->parsed()) {
      return cmd_run(Catalog::load_file(catalog_path), scenario_path, baseline,
                     trace_out, summary, run_format, trail_out, incident_out);
    }
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
