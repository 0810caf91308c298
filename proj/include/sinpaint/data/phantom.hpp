#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sinpaint/array2d.hpp"
#include "sinpaint/rng.hpp"

namespace sinpaint::data {

// Center offsets are in pixels from the image center ((side - 1) / 2 on each axis),
// x along columns, y along rows.
struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double density = 0.0;
};

enum class Background {
    fov,   // background density inside the inscribed field-of-view disk, 0 outside
    full,  // background density on every pixel
};

struct CirclePhantomSpec {
    std::size_t image_side = 256;
    std::vector<Circle> circles;
    std::vector<Circle> holes;  // air pockets, rendered at background density
    double background_density = 1.0;
    double object_density = 25.0;
    double noise_sigma = 0.5;
    std::uint64_t seed = 0;
    Background background = Background::fov;
};

enum class PriorMode { boundary_only, uniform, per_object_random };

struct PriorSpec {
    std::size_t image_side = 256;
    std::vector<Circle> circles;  // density holds the per-object prior value
    PriorMode mode = PriorMode::per_object_random;
};

// Random layout knobs, given for a 256-pixel side and scaled linearly with it.
struct PhantomDistribution {
    std::size_t circles_min = 5;
    std::size_t circles_max = 15;
    double radius_min = 10.0;
    double radius_max = 40.0;
    double noise_sigma = 0.5;
    std::size_t placement_attempts = 2000;
};

struct PriorDistribution {
    PriorMode mode = PriorMode::per_object_random;
    double density_scale = 25.0;
    double density_min = 0.2;  // fractions of density_scale
    double density_max = 1.0;
    double drop_fraction = 0.1;  // share of the smallest circles left out of the prior
};

struct DefectSpec {
    std::size_t count = 0;
    double radius_min = 3.0;
    double radius_max = 8.0;
    std::uint64_t seed = 0;
    std::size_t max_attempts = 100;
};

// Radius (pixels) of the inscribed field of view: side / 2 - 1.
double fov_radius(std::size_t side);

std::string to_string(PriorMode m);
PriorMode parse_prior_mode(const std::string& s);

// Non-overlapping circles inside the field of view by rejection sampling.
CirclePhantomSpec random_phantom_spec(std::size_t side, const PhantomDistribution& dist, Rng& rng);

// Same geometry, one prior density per object, optionally dropping the smallest circles.
PriorSpec make_prior_spec(const CirclePhantomSpec& phantom, const PriorDistribution& dist, Rng& rng);

// Pixel (i, j) belongs to a circle when its center lies inside it. Object pixels
// get object_density + N(0, noise_sigma^2) clipped at 0, drawn from `seed`.
Array2D render_phantom(const CirclePhantomSpec& spec);

// Noise-free, zero background.
Array2D render_prior(const PriorSpec& spec);

// Adds `defect.count` holes strictly inside randomly chosen circles. Throws
// InvariantError if a hole cannot be placed within max_attempts.
CirclePhantomSpec inject_defects(const CirclePhantomSpec& spec, const DefectSpec& defect);

// Throws ConfigError for circles leaving the field of view or non-positive
// densities/radii.
void validate(const CirclePhantomSpec& spec);
void validate(const PriorSpec& spec);

}  // namespace sinpaint::data
