#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nerula {

struct Series {
    std::string label;
    std::vector<double> y;  // plotted against index 0..n-1
};

/// Minimal SVG line chart; series share the axes. Non-finite points are skipped.
std::string line_chart_svg(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace nerula
