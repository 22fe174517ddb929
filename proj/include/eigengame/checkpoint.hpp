#pragma once

#include "eigengame/common.hpp"
#include "eigengame/game.hpp"

#include <cstdint>
#include <string>

namespace eigengame {

struct Checkpoint {
  MatrixXd v_hat;
  std::int64_t iter = 0;
  double alpha = 0;
  std::string variant = "riemannian";
  std::uint64_t seed = 0;
};

/// Writes V-hat in the binary matrix format at `path` and the metadata
/// {iter, alpha, variant, seed} as JSON at `path + ".json"`.
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint to_checkpoint(const EigenState<double>& s, std::uint64_t seed);
EigenState<double> to_state(const Checkpoint& c);

}  // namespace eigengame
