#pragma once

#include <stdexcept>
#include <string>

namespace citygov {

enum class Errc {
  SchemaError,
  IntegrityError,
  UnknownMeasure,
  UnknownRule,
  UnregisteredAgent,
  UnknownMetric,
  DanglingCauseLink,
  UnknownAgent,
  DanglingResource,
  EmptyRegimeSet,
  SingleAuthority,
  UnknownRecord,
  MissingContext,
  OpenIncident,
  DuplicateSystem,
  UnknownSystem,
  UnknownZone,
  UnsupportedLanguage,
  DanglingReference,
  UnknownFormat,
};

const char* errc_name(Errc code);

/// Single exception type for all engine errors; code() carries the condition.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

private:
  Errc code_;
};

} // namespace citygov
