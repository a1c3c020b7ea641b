#include "citygov/errors.hpp"

namespace citygov {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::SchemaError: return "SchemaError";
    case Errc::IntegrityError: return "IntegrityError";
    case Errc::UnknownMeasure: return "UnknownMeasure";
    case Errc::UnknownRule: return "UnknownRule";
    case Errc::UnregisteredAgent: return "UnregisteredAgent";
    case Errc::UnknownMetric: return "UnknownMetric";
    case Errc::DanglingCauseLink: return "DanglingCauseLink";
    case Errc::UnknownAgent: return "UnknownAgent";
    case Errc::DanglingResource: return "DanglingResource";
    case Errc::EmptyRegimeSet: return "EmptyRegimeSet";
    case Errc::SingleAuthority: return "SingleAuthority";
    case Errc::UnknownRecord: return "UnknownRecord";
    case Errc::MissingContext: return "MissingContext";
    case Errc::OpenIncident: return "OpenIncident";
    case Errc::DuplicateSystem: return "DuplicateSystem";
    case Errc::UnknownSystem: return "UnknownSystem";
    case Errc::UnknownZone: return "UnknownZone";
    case Errc::UnsupportedLanguage: return "UnsupportedLanguage";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::UnknownFormat: return "UnknownFormat";
  }
  return "Error";
}

} // namespace citygov
