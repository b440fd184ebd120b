#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aerialnav/world.hpp"

namespace aerialnav {

enum class ScenarioKind { Empty, Corridor, Slalom, LongHorizon, SphereField, SingleSphere };

inline constexpr ScenarioKind kAllScenarioKinds[] = {ScenarioKind::Empty,       ScenarioKind::Corridor,
                                                     ScenarioKind::Slalom,      ScenarioKind::LongHorizon,
                                                     ScenarioKind::SphereField, ScenarioKind::SingleSphere};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& text);

/// Seeded procedural scenario of the given kind. Every result passes validate().
///   Empty         goal 4-8 m away in a random horizontal direction
///   Corridor      two walls 1.8-2.4 m apart, goal at the far end
///   Slalom        three posts alternating across the straight line
///   LongHorizon   three subgoals with 90 degree turns between them
///   SphereField   3-6 spheres scattered between start and goal
///   SingleSphere  one sphere centred near the straight line
ScenarioSpec make_scenario(ScenarioKind kind, std::uint64_t seed);

}  // namespace aerialnav
