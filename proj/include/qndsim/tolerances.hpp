#pragma once

// Central tolerance table. Library checks and the test suites use these
// constants instead of ad-hoc literals so they cannot drift apart.

namespace qndsim::tol {

// Algebraic checks: hermiticity, unitarity, trace/normalization defects.
inline constexpr double kAlgebra = 1e-10;

// Round trips (tensor then partial trace, POVM completeness).
inline constexpr double kRoundTrip = 1e-12;

// Properties checked on randomized inputs, where float error accumulates.
inline constexpr double kRandomized = 1e-9;

// Outcomes with probability below this floor cannot be conditioned on.
inline constexpr double kProbabilityFloor = 1e-14;

// Fidelity value comparisons in tests and reports.
inline constexpr double kFidelity = 1e-9;

// Numeric precision of CSV output (significant digits).
inline constexpr int kCsvDigits = 12;

}  // namespace qndsim::tol
