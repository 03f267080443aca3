#pragma once

#include <stdexcept>
#include <string>

namespace hja {

/* Malformed input that violates a documented precondition. */
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/* Unparseable stream-level structure (bad header, wrong format). */
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/* Consensus direction numerically zero; the score matrix cannot be split
 * into a consensus component and a residual. */
struct DegenerateConsensus : std::runtime_error {
    explicit DegenerateConsensus(const std::string& msg) : std::runtime_error(msg) {}
};

/* Requested residual rank exceeds min(K-1, N-2). */
struct RankTooLarge : std::runtime_error {
    explicit RankTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

/* A required comparison graph is disconnected; message names the components. */
struct ConnectivityError : std::runtime_error {
    explicit ConnectivityError(const std::string& msg) : std::runtime_error(msg) {}
};

/* Alternating solver could not recover from repeated re-anchoring failures. */
struct SolverStalled : std::runtime_error {
    explicit SolverStalled(const std::string& msg) : std::runtime_error(msg) {}
};

/* Projected information matrix is numerically singular. */
struct SingularInformation : std::runtime_error {
    explicit SingularInformation(const std::string& msg) : std::runtime_error(msg) {}
};

/* Constraint Jacobian is rank deficient beyond the expected count, so no
 * well-defined tangent chart exists at the given point. */
struct ChartError : std::runtime_error {
    explicit ChartError(const std::string& msg) : std::runtime_error(msg) {}
};

/* Rank selection had no usable fold or candidate. */
struct SelectionError : std::runtime_error {
    explicit SelectionError(const std::string& msg) : std::runtime_error(msg) {}
};

/* Fewer than three qualifying near-tie pairs. */
struct InsufficientNearTiePairs : std::runtime_error {
    explicit InsufficientNearTiePairs(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hja
