#pragma once

#include <string>
#include <vector>

namespace lautum {

// Renders the post-transfer target-accuracy curves of one or more metrics
// CSVs into a self-contained SVG line chart, one series per file. Series
// labels come from the sibling "<stem>.summary" config echo when present
// ("mode, lambda" legend convention), else from the file stem. Output bytes
// are a pure function of the inputs.
void render_plot(const std::vector<std::string>& csv_paths,
                 const std::string& out_path);

}  // namespace lautum
