#pragma once

#include <stdexcept>
#include <string>

namespace scalewise {

// Broad error families. The CLI maps them onto exit codes and the service
// maps them onto HTTP statuses.
enum class ErrorCategory { validation, backend, io, state };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::backend: return "backend";
    case ErrorCategory::io: return "io";
    case ErrorCategory::state: return "state";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message),
        category_(category),
        kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  // Short machine-readable name, e.g. "RangeError".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define SCALEWISE_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& message)                   \
        : Error(ErrorCategory::Category, #Name, message) {}     \
  };

SCALEWISE_DEFINE_ERROR(ParseError, validation)
SCALEWISE_DEFINE_ERROR(ValidationError, validation)
SCALEWISE_DEFINE_ERROR(RangeError, validation)
SCALEWISE_DEFINE_ERROR(ArityError, validation)
SCALEWISE_DEFINE_ERROR(PreconditionError, validation)
SCALEWISE_DEFINE_ERROR(MissingItemScores, validation)

// memory tree
SCALEWISE_DEFINE_ERROR(EmptyUidError, validation)
SCALEWISE_DEFINE_ERROR(SequenceError, state)
SCALEWISE_DEFINE_ERROR(TopicOrderError, state)
SCALEWISE_DEFINE_ERROR(DuplicateTopicError, state)
SCALEWISE_DEFINE_ERROR(NoStatementsError, state)
SCALEWISE_DEFINE_ERROR(UnknownTopicError, state)
SCALEWISE_DEFINE_ERROR(ForwardRevisionError, state)

// agents and backends
SCALEWISE_DEFINE_ERROR(BackendError, backend)
SCALEWISE_DEFINE_ERROR(EmptyCompletionError, backend)
SCALEWISE_DEFINE_ERROR(NecessityUnavailable, backend)
SCALEWISE_DEFINE_ERROR(ScoringUnavailable, backend)
SCALEWISE_DEFINE_ERROR(UpdateUnavailable, backend)

// sessions and respondents
SCALEWISE_DEFINE_ERROR(PhaseError, state)
SCALEWISE_DEFINE_ERROR(ScriptExhausted, state)

// persistence
SCALEWISE_DEFINE_ERROR(IOError, io)
SCALEWISE_DEFINE_ERROR(VersionMismatch, io)

#undef SCALEWISE_DEFINE_ERROR

}  // namespace scalewise
