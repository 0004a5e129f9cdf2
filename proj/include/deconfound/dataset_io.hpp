#pragma once

#include <filesystem>

#include "deconfound/scm_sim.hpp"

namespace deconfound {

// Dataset CSV: header `x1..xp,a1..ak,y,split`, one row per sample, floats at
// 17 significant digits (doubles round-trip bit-identically). A file holds
// rows of a single split; readers reject mixed files. The reader flags a
// binary outcome when every y is exactly 0 or 1.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& d);
Dataset read_dataset_csv(const std::filesystem::path& path);

// Prediction CSV consumed by the diagnostics entry point: header
// `y_hat,y,a1..ak`.
struct PredictionTable {
  Vector y_hat;
  Vector y;
  Matrix a;
};

void write_prediction_csv(const std::filesystem::path& path,
                          const PredictionTable& t);
PredictionTable read_prediction_csv(const std::filesystem::path& path);

}  // namespace deconfound
