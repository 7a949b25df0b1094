#pragma once

#include <stdexcept>
#include <string>

namespace spheremoduli {

// Base class for all library errors. `code()` is a stable machine-readable
// name (e.g. "DegenerateTriangle"); what() carries the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define SPHEREMODULI_ERROR(Name)                                               \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& msg = "") : Error(#Name, msg) {}      \
    }

SPHEREMODULI_ERROR(DegenerateTriangle);
SPHEREMODULI_ERROR(UnresolvedSymmetry);
SPHEREMODULI_ERROR(NotCompletionVertex);
SPHEREMODULI_ERROR(AngleOutOfRange);
SPHEREMODULI_ERROR(NumericalStall);
SPHEREMODULI_ERROR(LengthMismatch);
SPHEREMODULI_ERROR(NotDiskResult);
SPHEREMODULI_ERROR(InvalidPieceParams);
SPHEREMODULI_ERROR(GluingCycle);
SPHEREMODULI_ERROR(ZeroLengthEdge);
SPHEREMODULI_ERROR(ParamOutOfRange);
SPHEREMODULI_ERROR(HasDiagonal);
SPHEREMODULI_ERROR(EmbeddingCheckFailed);
SPHEREMODULI_ERROR(InvalidMetric);
SPHEREMODULI_ERROR(InvalidTuple);
SPHEREMODULI_ERROR(NotEquatorial);
SPHEREMODULI_ERROR(PiDiagonalPresent);
SPHEREMODULI_ERROR(NoSlitSphereAtDiagonal);
SPHEREMODULI_ERROR(NotLengthPi);
SPHEREMODULI_ERROR(StepTooLarge);
SPHEREMODULI_ERROR(ChartDegeneracy);
SPHEREMODULI_ERROR(NotAntipodalPair);
SPHEREMODULI_ERROR(NonOddLabel);
SPHEREMODULI_ERROR(InvalidDocument);
SPHEREMODULI_ERROR(InternalError);

#undef SPHEREMODULI_ERROR

} // namespace spheremoduli
