#include "bevfuse/scene.hpp"

#include <cmath>
#include <unordered_set>

#include "bevfuse/errors.hpp"

namespace bevfuse {

std::string_view class_name(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::Car: return "car";
    case ObjectClass::Truck: return "truck";
    case ObjectClass::Bus: return "bus";
    case ObjectClass::Pedestrian: return "pedestrian";
    case ObjectClass::Bicycle: return "bicycle";
    case ObjectClass::Motorcycle: return "motorcycle";
    case ObjectClass::Barrier: return "barrier";
  }
  return "car";
}

std::optional<ObjectClass> class_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    const auto cls = static_cast<ObjectClass>(i);
    if (class_name(cls) == name) return cls;
  }
  return std::nullopt;
}

void validate_scene(const Scene& scene) {
  Micros prev = 0;
  bool first = true;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const auto& frame = scene.frames[f];
    if (!first && frame.t_us <= prev) {
      throw ValidationError("scene '" + scene.scene_id + "': frame timestamps not strictly increasing at index " +
                            std::to_string(f));
    }
    first = false;
    prev = frame.t_us;
    std::unordered_set<std::int64_t> ids;
    ids.reserve(frame.objects.size());
    for (const auto& obj : frame.objects) {
      if (!ids.insert(obj.gt_id).second) {
        throw ValidationError("scene '" + scene.scene_id + "': duplicate gt_id " + std::to_string(obj.gt_id) +
                              " in frame at t_us=" + std::to_string(frame.t_us));
      }
      if (obj.box.w <= 0.0 || obj.box.d <= 0.0 || !std::isfinite(obj.box.x) || !std::isfinite(obj.box.y)) {
        throw ValidationError("scene '" + scene.scene_id + "': invalid box for gt_id " + std::to_string(obj.gt_id));
      }
    }
  }
}

}  // namespace bevfuse
