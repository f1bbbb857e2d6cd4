#include "hyre/dataset.hpp"

#include <stdexcept>
#include <string>

namespace hyre {

TaskKind parse_task_kind(const std::string& tag) {
  if (tag == "regression") return TaskKind::regression;
  if (tag == "binary") return TaskKind::binary;
  if (tag == "preference") return TaskKind::preference;
  throw std::invalid_argument("unknown task kind: " + tag);
}

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::regression: return "regression";
    case TaskKind::binary: return "binary";
    case TaskKind::preference: return "preference";
  }
  return "?";
}

void Dataset::validate() const {
  if (kind == TaskKind::preference) {
    if (!targets.empty()) {
      throw std::invalid_argument("Dataset: preference data carries pairs, not targets");
    }
    for (const auto& [c, r] : pairs) {
      if (c >= features.rows || r >= features.rows) {
        throw std::invalid_argument("Dataset: pair index out of range");
      }
    }
  } else {
    if (targets.size() != features.rows) {
      throw std::invalid_argument("Dataset: " + std::to_string(targets.size()) +
                                  " targets for " + std::to_string(features.rows) +
                                  " rows");
    }
    if (kind == TaskKind::binary) {
      for (double y : targets) {
        if (y != 0.0 && y != 1.0) {
          throw std::invalid_argument("Dataset: binary target not in {0,1}");
        }
      }
    }
  }
  if (!features.all_finite()) {
    throw std::invalid_argument("Dataset: non-finite feature");
  }
}

}  // namespace hyre
