#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace gvqa {

// Image coordinate bounds shared by tags, boxes, and detections.
inline constexpr double kImageWidth = 1600.0;
inline constexpr double kImageHeight = 900.0;

enum class Camera {
    Front,
    FrontLeft,
    FrontRight,
    Back,
    BackLeft,
    BackRight,
};

inline constexpr std::array<Camera, 6> kAllCameras = {
    Camera::Front,     Camera::FrontLeft, Camera::FrontRight,
    Camera::Back,      Camera::BackLeft,  Camera::BackRight,
};

inline std::string_view camera_name(Camera c) {
    switch (c) {
        case Camera::Front:      return "CAM_FRONT";
        case Camera::FrontLeft:  return "CAM_FRONT_LEFT";
        case Camera::FrontRight: return "CAM_FRONT_RIGHT";
        case Camera::Back:       return "CAM_BACK";
        case Camera::BackLeft:   return "CAM_BACK_LEFT";
        case Camera::BackRight:  return "CAM_BACK_RIGHT";
    }
    return "CAM_FRONT";
}

/// Natural-language position of the camera relative to the ego vehicle.
inline std::string_view camera_phrase(Camera c) {
    switch (c) {
        case Camera::Front:      return "front";
        case Camera::FrontLeft:  return "front left";
        case Camera::FrontRight: return "front right";
        case Camera::Back:       return "back";
        case Camera::BackLeft:   return "back left";
        case Camera::BackRight:  return "back right";
    }
    return "front";
}

inline std::optional<Camera> parse_camera(std::string_view name) {
    for (Camera c : kAllCameras) {
        if (camera_name(c) == name) return c;
    }
    return std::nullopt;
}

}  // namespace gvqa
