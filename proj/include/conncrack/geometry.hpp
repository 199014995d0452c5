#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace conncrack::geometry {

/// Camera mount: height above the road, tilt of the bottom FOV ray from the
/// vertical, vertical field of view, and the vertical pixel count.
struct MountConfig {
    double camera_height_m = 1.0;
    double tilt_alpha_deg = 10.25;
    double fov_theta_deg = 69.5;
    std::uint32_t vertical_pixels = 1080;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

struct ResolutionRow {
    double fov_fraction = 0.0;
    double resolution_px_per_cm = 0.0;
    bool reachable = false;
};

using ResolutionProfile = std::vector<ResolutionRow>;

/// Ground pixels per centimeter for the image row at `fov_fraction` of the
/// field of view above the bottom edge. Rays at or past the horizon yield 0.
double spatial_resolution(const MountConfig& config, double fov_fraction);

/// True when the whole row at `fov_fraction` (both of its bounding rays)
/// looks below the horizon, i.e. its resolution is finite and nonzero.
bool is_reachable(const MountConfig& config, double fov_fraction);

ResolutionProfile resolution_profile(const MountConfig& config, std::span<const double> fractions);

/// Rear mount used for the data collection: 1 m, camera axis at 45 degrees.
MountConfig rear_mount();
/// Windshield mount: 1.5 m, camera axis horizontal.
MountConfig front_mount();

} // namespace conncrack::geometry
