// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace xengine {

enum class Errc {
  // document loading
  MalformedDocument,
  NonTopologicalEdge,
  UnknownDevice,
  NonPositiveSize,
  NegativeCost,
  EmptyNetwork,
  PercentOutOfRange,
  MissingLink,
  // model
  DimensionMismatch,
  IncompleteEnergyTable,
  // solution files
  UnknownVariable,
  NonIntegralBinary,
  EmptySolution,
  InfeasibleMarker,
  // solvers
  InfeasibleProblem,
  TooLarge,
  ExternalSolverUnavailable,
  SolverFailed,
  UnparsableSolution,
  ObjectiveMismatch,
  // schedules
  IllegalAssignment,
  IllegalSchedule,
  // rendering
  EmptySeries,
  NonPositiveTime,
  // cli / io
  IoError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace xengine
