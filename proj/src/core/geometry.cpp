#include "conncrack/geometry.hpp"

#include "conncrack/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace conncrack::geometry {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_fraction(double f) {
    if (!(f >= 0.0 && f <= 1.0))
        throw ConfigError("fov fraction must lie in [0, 1], got " + std::to_string(f));
}

} // namespace

void MountConfig::validate() const {
    if (!(camera_height_m > 0.0) || !std::isfinite(camera_height_m))
        throw ConfigError("camera height must be positive");
    if (!(fov_theta_deg > 0.0 && fov_theta_deg < 180.0))
        throw ConfigError("field of view must lie in (0, 180) degrees");
    if (vertical_pixels < 1)
        throw ConfigError("vertical pixel count must be at least 1");
    if (!(tilt_alpha_deg >= 0.0 && tilt_alpha_deg < 90.0))
        throw ConfigError("tilt angle must lie in [0, 90) degrees");
}

bool is_reachable(const MountConfig& config, double fov_fraction) {
    config.validate();
    check_fraction(fov_fraction);
    return config.tilt_alpha_deg + fov_fraction * config.fov_theta_deg +
               config.fov_theta_deg / config.vertical_pixels < 90.0;
}

double spatial_resolution(const MountConfig& config, double fov_fraction) {
    config.validate();
    check_fraction(fov_fraction);

    const double near_deg = config.tilt_alpha_deg + fov_fraction * config.fov_theta_deg;
    const double far_deg = near_deg + config.fov_theta_deg / config.vertical_pixels;
    if (far_deg >= 90.0) return 0.0;

    const double d = config.camera_height_m;
    const double ground_span_m =
        d * std::tan(far_deg * kDegToRad) - d * std::tan(near_deg * kDegToRad);
    return 1.0 / ground_span_m / 100.0;
}

ResolutionProfile resolution_profile(const MountConfig& config, std::span<const double> fractions) {
    config.validate();
    ResolutionProfile profile;
    profile.reserve(fractions.size());
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (i > 0 && !(fractions[i] > fractions[i - 1]))
            throw ConfigError("fov fractions must be strictly increasing");
        profile.push_back({fractions[i], spatial_resolution(config, fractions[i]),
                           is_reachable(config, fractions[i])});
    }
    return profile;
}

MountConfig rear_mount() {
    return {1.0, 45.0 - 69.5 / 2.0, 69.5, 1080};
}

MountConfig front_mount() {
    return {1.5, 90.0 - 69.5 / 2.0, 69.5, 1080};
}

} // namespace conncrack::geometry
