#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bevfuse/geometry.hpp"

namespace bevfuse {

enum class ObjectClass : std::uint8_t {
  Car = 0,
  Truck,
  Bus,
  Pedestrian,
  Bicycle,
  Motorcycle,
  Barrier,
};

constexpr int kNumClasses = 7;

std::string_view class_name(ObjectClass cls);
std::optional<ObjectClass> class_from_name(std::string_view name);

struct GtObject {
  std::int64_t gt_id{0};
  ObjectClass cls{ObjectClass::Car};
  BEVBox box;
  double vx{0.0};  // m/s
  double vy{0.0};  // m/s
};

struct SceneFrame {
  Micros t_us{0};
  std::vector<GtObject> objects;
};

struct Scene {
  std::string scene_id;
  std::vector<SceneFrame> frames;
};

// Frame timestamps strictly increasing, gt_ids unique within a frame,
// all boxes valid. Throws ValidationError on violation.
void validate_scene(const Scene& scene);

}  // namespace bevfuse
