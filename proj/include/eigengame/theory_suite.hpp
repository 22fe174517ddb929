#pragma once

#include "eigengame/common.hpp"
#include "eigengame/linalg.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace eigengame {

enum class CheckStatus { pass, fail, assumption_violated };

const char* to_string(CheckStatus s);

struct TheoryCheck {
  std::string name;
  CheckStatus status = CheckStatus::fail;
  /// Worst measured quantity and the threshold it was held to.
  double measured = 0;
  double threshold = 0;
  std::string detail;
};

struct TheoryReport {
  VectorXd lambda;
  std::uint64_t seed = 0;
  std::vector<TheoryCheck> checks;
  /// True when no check failed; assumption violations do not count as failures.
  bool passed() const;
};

/// Runs the analysis invariants on M = diag(lambda). Landscape checks use
/// lambda / lambda_1 so absolute tolerances stay meaningful.
TheoryReport theory_suite(const VectorXd& lambda, std::uint64_t seed = 0);
TheoryReport theory_suite(const SpectrumSpec& spec, std::uint64_t seed = 0);

void write_theory_json(std::ostream& os, const TheoryReport& report);

}  // namespace eigengame
