#pragma once

#include <optional>
#include <string>

#include "hyre/belief.hpp"
#include "hyre/ensemble.hpp"

namespace hyre::bench {

// Versioned binary container: ensemble config, every parameter block with its
// frozen flag, epinet indices, and optionally a belief state. Loading restores
// forward outputs bit-exactly.
void checkpoint_save(const EnsembleModel& model, const BeliefState* belief,
                     const std::string& path);

struct Checkpoint {
  EnsembleModel model;
  std::optional<BeliefState> belief;
};

Checkpoint checkpoint_load(const std::string& path);

}  // namespace hyre::bench
