#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace joininfer {

enum class Errc {
  DuplicateTuple,
  ValueOutOfRange,
  NegativeProbability,
  ArityMismatch,
  KeepNotSubset,
  EmptyIntersection,
  DuplicateVariable,
  BadHeader,
  BadToken,
  CountMismatch,
  InconsistentEvidence,
  Unsatisfiable,
  UncoverableVariable,
  IndexOverflow,
  InconsistentOrder,
  UnsortedInput,
  InconsistentModel,
  TooLarge,
  Timeout,
  InvalidArgument,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateTuple: return "DuplicateTuple";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::NegativeProbability: return "NegativeProbability";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::KeepNotSubset: return "KeepNotSubset";
    case Errc::EmptyIntersection: return "EmptyIntersection";
    case Errc::DuplicateVariable: return "DuplicateVariable";
    case Errc::BadHeader: return "BadHeader";
    case Errc::BadToken: return "BadToken";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::InconsistentEvidence: return "InconsistentEvidence";
    case Errc::Unsatisfiable: return "Unsatisfiable";
    case Errc::UncoverableVariable: return "UncoverableVariable";
    case Errc::IndexOverflow: return "IndexOverflow";
    case Errc::InconsistentOrder: return "InconsistentOrder";
    case Errc::UnsortedInput: return "UnsortedInput";
    case Errc::InconsistentModel: return "InconsistentModel";
    case Errc::TooLarge: return "TooLarge";
    case Errc::Timeout: return "Timeout";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Resource errors (overflow, size guards, deadlines) as opposed to model errors.
constexpr bool is_resource_error(Errc code) noexcept {
  return code == Errc::IndexOverflow || code == Errc::TooLarge || code == Errc::Timeout;
}

/// Every failure raised by the library. `module()` names the component that
/// detected it ("model", "uai", "storage", ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string_view module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " + std::string(errc_name(code)) +
                           (detail.empty() ? "" : " (" + detail + ")")),
        code_(code),
        module_(module) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

/// Cooperative wall-clock bound. Long-running loops call `check()`.
class Deadline {
 public:
  using Clock = std::chrono::steady_clock;

  Deadline() = default;
  explicit Deadline(std::chrono::duration<double> budget)
      : end_(Clock::now() + std::chrono::duration_cast<Clock::duration>(budget)) {}

  bool expired() const { return end_ && Clock::now() >= *end_; }

  void check(std::string_view module = "engine") const {
    if (expired()) throw Error(Errc::Timeout, module, "wall-clock budget exhausted");
  }

 private:
  std::optional<Clock::time_point> end_;
};

}  // namespace joininfer
