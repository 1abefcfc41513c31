/// @brief exception hierarchy shared by all qtdg modules
#pragma once

#include <stdexcept>
#include <string>

namespace qtdg {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorClass { config, numerical };

class Error : public std::runtime_error {
  public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    [[nodiscard]] ErrorClass error_class() const noexcept { return cls_; }

  private:
    ErrorClass cls_;
};

#define QTDG_DEFINE_ERROR(Name, Class)                                                  \
    class Name : public Error {                                                         \
      public:                                                                           \
        explicit Name(const std::string& what) : Error(ErrorClass::Class, #Name ": " + what) {} \
    }

// contract violations and malformed input
QTDG_DEFINE_ERROR(ContractError, config);
QTDG_DEFINE_ERROR(ParseError, config);
QTDG_DEFINE_ERROR(NonConformingMesh, config);
QTDG_DEFINE_ERROR(UnknownProblem, config);
QTDG_DEFINE_ERROR(UnassignedBoundary, config);
QTDG_DEFINE_ERROR(MixedSignFacet, config);
QTDG_DEFINE_ERROR(UnclassifiedFacet, config);
QTDG_DEFINE_ERROR(OrderTooHigh, config);
QTDG_DEFINE_ERROR(MissingExactSolution, config);
QTDG_DEFINE_ERROR(NonMonotoneH, config);
QTDG_DEFINE_ERROR(QuadratureUnavailable, config);

// numerical breakdowns
QTDG_DEFINE_ERROR(DegenerateElement, numerical);
QTDG_DEFINE_ERROR(HardFailure, numerical);
QTDG_DEFINE_ERROR(SingularLeadingCoefficient, numerical);
QTDG_DEFINE_ERROR(SingularMatrix, numerical);

#undef QTDG_DEFINE_ERROR

/// Wraps a module error with the name of the pipeline stage that raised it.
class StageError : public Error {
  public:
    StageError(const std::string& stage, const Error& cause)
        : Error(cause.error_class(), stage + ": " + cause.what()), stage_(stage) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

/// OracleOrderTooLow is the basis-module name for an oracle that cannot supply
/// the derivative orders the recurrence needs.
using OracleOrderTooLow = OrderTooHigh;

}  // namespace qtdg
