#pragma once

#include <filesystem>

#include "sermm/experiment.hpp"

namespace sermm {

/// Row-normalized confusion heatmap (white to dark blue) with the rounded
/// percentage drawn in each cell. Rows are true classes.
void write_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         int cell_px = 40);

}  // namespace sermm
