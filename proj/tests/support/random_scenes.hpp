#pragma once

#include <cstdint>
#include <random>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat::testing {

using Rng = std::mt19937_64;

/// Pinhole camera with square pixels, principal point at (w/2, h/2).
Camera make_camera(int width, int height, double hfov_deg = 60.0, const Pose &pose = {});

/// Random pose near the origin with a random orientation.
Camera random_camera(Rng &rng, int width, int height);

Quat random_rotation(Rng &rng);

/// `n` Gaussians scattered through the camera frustum (with some slack past
/// the edges) at depths 1..6, footprints of roughly 1..12 px.
GaussianScene random_scene(Rng &rng, std::size_t n, const Camera &cam, double opacity_lo = 0.1,
                           double opacity_hi = 0.95);

ImageBuffer random_image(Rng &rng, int width, int height);
MaskBuffer random_mask(Rng &rng, int width, int height, double p_observed = 0.5);

double uniform(Rng &rng, double lo, double hi);

} // namespace dreamsplat::testing
