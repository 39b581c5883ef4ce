#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simura {

// Every failure the library can surface, as a closed set so callers can
// switch on the kind instead of matching message text.
enum class ErrorKind {
  // memory / belief construction
  OrderViolation,
  // llm gateway
  TransportError,
  BackendRefusal,
  ScriptMiss,
  MissingTag,
  // perception
  EncodeFailure,
  MemoryUpdateFailure,
  // proposer
  AllSamplesMalformed,
  // simulator
  SimulationFailure,
  // evaluator
  AllVerdictsMalformed,
  EmptyVerdicts,
  // planner
  PlanningFailure,
  // action DSL
  UnknownAction,
  ArityError,
  TypeError,
  MultipleActions,
  SyntaxError,
  // grounding
  GroundingParseFailure,
  BidNotInObservation,
  // environment
  DriverUnavailable,
  ProtocolError,
  // flightqa
  GenerationUnderflow,
  ExtensionViolation,
  JudgeParseFailure,
  EmptyInput,
  // configuration / cli
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::OrderViolation: return "OrderViolation";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::BackendRefusal: return "BackendRefusal";
    case ErrorKind::ScriptMiss: return "ScriptMiss";
    case ErrorKind::MissingTag: return "MissingTag";
    case ErrorKind::EncodeFailure: return "EncodeFailure";
    case ErrorKind::MemoryUpdateFailure: return "MemoryUpdateFailure";
    case ErrorKind::AllSamplesMalformed: return "AllSamplesMalformed";
    case ErrorKind::SimulationFailure: return "SimulationFailure";
    case ErrorKind::AllVerdictsMalformed: return "AllVerdictsMalformed";
    case ErrorKind::EmptyVerdicts: return "EmptyVerdicts";
    case ErrorKind::PlanningFailure: return "PlanningFailure";
    case ErrorKind::UnknownAction: return "UnknownAction";
    case ErrorKind::ArityError: return "ArityError";
    case ErrorKind::TypeError: return "TypeError";
    case ErrorKind::MultipleActions: return "MultipleActions";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::GroundingParseFailure: return "GroundingParseFailure";
    case ErrorKind::BidNotInObservation: return "BidNotInObservation";
    case ErrorKind::DriverUnavailable: return "DriverUnavailable";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::GenerationUnderflow: return "GenerationUnderflow";
    case ErrorKind::ExtensionViolation: return "ExtensionViolation";
    case ErrorKind::JudgeParseFailure: return "JudgeParseFailure";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace simura
