#pragma once

#include <string>
#include <string_view>

#include "aerialnav/executor.hpp"

namespace aerialnav {

/// JSON text of the log. Wall-clock timings are left out unless requested so
/// that deterministic runs serialize identically.
std::string serialize_episode_log(const EpisodeLog& log, bool include_timings = false);
/// Throws ParseError or ValidationError.
EpisodeLog parse_episode_log(std::string_view text);

/// Throws WriteError.
void write_episode_log(const EpisodeLog& log, const std::string& path, bool include_timings = false);
EpisodeLog read_episode_log(const std::string& path);

}  // namespace aerialnav
