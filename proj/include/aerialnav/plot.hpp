#pragma once

#include <string>

#include "aerialnav/executor.hpp"

namespace aerialnav {

/// Top-down (x, y) SVG: obstacle footprints, one polyline per planned
/// trajectory generation (class "spline", hover generation 0 omitted) and one
/// flown-path polyline (class "flown") through the recorded frames.
std::string render_plot_svg(const EpisodeLog& log);
/// Throws WriteError.
void write_plot_svg(const EpisodeLog& log, const std::string& path);

}  // namespace aerialnav
