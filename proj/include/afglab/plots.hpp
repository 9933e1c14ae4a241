#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afglab/afs.hpp"
#include "afglab/evaluation.hpp"
#include "afglab/groupviz.hpp"

namespace afg {

// Two-panel line plot (distance, KL) versus layer index, written as binary
// PPM. When dump_csv is non-empty the exact plotted series goes there too;
// tests assert on the dump, never on pixels.
void plot_afs(const LayerDistanceCurve& curve,
              const std::filesystem::path& image_out,
              const std::filesystem::path& dump_csv = {});
void plot_afs_from_csv(const std::filesystem::path& curve_csv,
                       const std::filesystem::path& image_out,
                       const std::filesystem::path& dump_csv = {});

// Grid of group-feature tiles, one row per layer. The sidecar dump lists
// grid coordinates with layer/group indices and objectives.
void montage(const std::vector<std::vector<GroupFeature>>& per_layer,
             const std::filesystem::path& image_out,
             const std::filesystem::path& dump_csv = {});

// Fixed-width text table of reports, one row per report.
std::string render_reports_table(const std::vector<EvalReport>& reports);

}  // namespace afg
