#pragma once

#include <string>
#include <vector>

namespace rml {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool line = false;  // polyline through the points, otherwise markers
    std::string color;  // empty picks from the palette
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 720;
    int height = 480;
};

// Standalone SVG 1.1 document. Points that cannot be placed (nonpositive on a
// log axis, non-finite) are skipped.
std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace rml
