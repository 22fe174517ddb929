#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eigengame {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

enum class ErrorCode {
  invalid_dimension,
  invalid_argument,
  range,
  parse,
  data,
  empty_dataset,
  io,
  degenerate_parent,
  degenerate_step,
  orthonormalization,
  rank,
  invalid_tangent,
  degenerate_landscape,
  boundary,
  assumption_violated,
  worker_failure,
};

/// Every failure raised by this library. The code identifies the failure
/// class; the message carries the specifics.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input file. Positions are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(ErrorCode::parse, what + " (row " + std::to_string(row) +
                                    ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::range: return "range";
    case ErrorCode::parse: return "parse";
    case ErrorCode::data: return "data";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::io: return "io";
    case ErrorCode::degenerate_parent: return "degenerate-parent";
    case ErrorCode::degenerate_step: return "degenerate-step";
    case ErrorCode::orthonormalization: return "orthonormalization";
    case ErrorCode::rank: return "rank";
    case ErrorCode::invalid_tangent: return "invalid-tangent";
    case ErrorCode::degenerate_landscape: return "degenerate-landscape";
    case ErrorCode::boundary: return "boundary";
    case ErrorCode::assumption_violated: return "assumption-violated";
    case ErrorCode::worker_failure: return "worker-failure";
  }
  return "unknown";
}

/// Derives an independent 64-bit seed from a base seed and a stream tag
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace eigengame
