#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyre/matrix.hpp"

namespace hyre {

enum class TaskKind { regression, binary, preference };

TaskKind parse_task_kind(const std::string& tag);
const char* task_kind_name(TaskKind k);

// Per-feature/target z-scoring statistics, always derived from training rows
// only.
struct NormStats {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
};

// A supervised dataset. For regression/binary, `targets[i]` labels row i of
// `features`. For preference, rows are item representations and `pairs` lists
// (chosen, rejected) row indices; `targets` stays empty.
struct Dataset {
  nn::Matrix features;  // N x D
  std::vector<double> targets;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  TaskKind kind = TaskKind::regression;
  std::optional<NormStats> norm;

  std::size_t size() const {
    return kind == TaskKind::preference ? pairs.size() : targets.size();
  }
  std::size_t feature_dim() const { return features.cols; }

  void validate() const;  // throws invalid_argument on broken invariants
};

}  // namespace hyre
