#include "sinpaint/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sinpaint::data {

namespace {

double center_coord(std::size_t side) { return (double(side) - 1.0) / 2.0; }

bool inside(const Circle& c, double x, double y) {
    const double dx = x - c.cx, dy = y - c.cy;
    return dx * dx + dy * dy <= c.radius * c.radius;
}

void check_circles(const std::vector<Circle>& circles, std::size_t side, const char* what) {
    const double fov = fov_radius(side);
    for (std::size_t i = 0; i < circles.size(); ++i) {
        const auto& c = circles[i];
        if (!(c.radius > 0.0)) {
            throw ConfigError(std::string(what) + " circle " + std::to_string(i) + " has non-positive radius");
        }
        if (std::hypot(c.cx, c.cy) + c.radius > fov + 1e-9) {
            throw ConfigError(std::string(what) + " circle " + std::to_string(i) + " at (" +
                              std::to_string(c.cx) + ", " + std::to_string(c.cy) + "), r=" +
                              std::to_string(c.radius) + " leaves the field of view (radius " +
                              std::to_string(fov) + ")");
        }
    }
}

}  // namespace

double fov_radius(std::size_t side) { return double(side) / 2.0 - 1.0; }

std::string to_string(PriorMode m) {
    switch (m) {
        case PriorMode::boundary_only: return "boundary_only";
        case PriorMode::uniform: return "uniform";
        case PriorMode::per_object_random: return "per_object_random";
    }
    return "?";
}

PriorMode parse_prior_mode(const std::string& s) {
    if (s == "boundary_only") return PriorMode::boundary_only;
    if (s == "uniform") return PriorMode::uniform;
    if (s == "per_object_random") return PriorMode::per_object_random;
    throw ConfigError("unknown prior mode '" + s + "' (boundary_only, uniform, per_object_random)");
}

void validate(const CirclePhantomSpec& spec) {
    if (spec.image_side < 4) throw ConfigError("phantom side must be >= 4");
    check_circles(spec.circles, spec.image_side, "phantom");
    check_circles(spec.holes, spec.image_side, "defect");
    for (const auto& c : spec.circles) {
        if (!(c.density > 0.0)) throw ConfigError("phantom circle densities must be positive");
    }
    if (spec.noise_sigma < 0.0 || spec.background_density < 0.0) {
        throw ConfigError("phantom noise sigma and background density must be non-negative");
    }
}

void validate(const PriorSpec& spec) {
    if (spec.image_side < 4) throw ConfigError("prior side must be >= 4");
    check_circles(spec.circles, spec.image_side, "prior");
    for (const auto& c : spec.circles) {
        if (!(c.density > 0.0)) throw ConfigError("prior circle densities must be positive");
    }
}

CirclePhantomSpec random_phantom_spec(std::size_t side, const PhantomDistribution& dist, Rng& rng) {
    if (dist.circles_min > dist.circles_max || dist.radius_min <= 0.0 || dist.radius_min > dist.radius_max) {
        throw ConfigError("phantom distribution: need 0 < radius_min <= radius_max, circles_min <= circles_max");
    }
    const double scale = double(side) / 256.0;
    const double fov = fov_radius(side);
    CirclePhantomSpec spec;
    spec.image_side = side;
    spec.noise_sigma = dist.noise_sigma;
    spec.seed = rng();

    std::uniform_int_distribution<std::size_t> count_dist(dist.circles_min, dist.circles_max);
    std::uniform_real_distribution<double> radius_dist(dist.radius_min * scale, dist.radius_max * scale);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const std::size_t count = count_dist(rng);
    for (std::size_t attempt = 0; attempt < dist.placement_attempts && spec.circles.size() < count; ++attempt) {
        const double r = radius_dist(rng);
        const double reach = fov - r;
        if (reach < 0.0) continue;
        const double x = unit(rng) * reach, y = unit(rng) * reach;
        if (std::hypot(x, y) > reach) continue;
        const bool clear = std::all_of(spec.circles.begin(), spec.circles.end(), [&](const Circle& o) {
            return std::hypot(x - o.cx, y - o.cy) >= r + o.radius + 1.0;
        });
        if (clear) spec.circles.push_back(Circle{x, y, r, spec.object_density});
    }
    return spec;
}

PriorSpec make_prior_spec(const CirclePhantomSpec& phantom, const PriorDistribution& dist, Rng& rng) {
    if (dist.density_min <= 0.0 || dist.density_min > dist.density_max) {
        throw ConfigError("prior density range must satisfy 0 < min <= max");
    }
    if (dist.drop_fraction < 0.0 || dist.drop_fraction >= 1.0) {
        throw ConfigError("prior drop fraction must lie in [0, 1)");
    }
    const std::size_t n = phantom.circles.size();
    const auto n_drop = std::size_t(std::floor(dist.drop_fraction * double(n) + 0.5));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return phantom.circles[a].radius < phantom.circles[b].radius;
    });
    std::vector<bool> dropped(n, false);
    for (std::size_t i = 0; i < n_drop; ++i) dropped[order[i]] = true;

    PriorSpec prior;
    prior.image_side = phantom.image_side;
    prior.mode = dist.mode;
    std::uniform_real_distribution<double> density(dist.density_min, dist.density_max);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = dist.mode == PriorMode::per_object_random ? density(rng) : 1.0;
        if (dropped[i]) continue;
        Circle c = phantom.circles[i];
        c.density = d * dist.density_scale;
        prior.circles.push_back(c);
    }
    return prior;
}

Array2D render_phantom(const CirclePhantomSpec& spec) {
    validate(spec);
    const std::size_t n = spec.image_side;
    const double c = center_coord(n);
    const double fov = fov_radius(n);
    Array2D img(n, n);
    Rng rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = double(j) - c, y = double(i) - c;
            double v = 0.0;
            if (spec.background == Background::full || x * x + y * y <= fov * fov) v = spec.background_density;
            const Circle* hit = nullptr;
            for (const auto& circ : spec.circles)
                if (inside(circ, x, y)) hit = &circ;
            if (hit) {
                // One draw per object pixel, holes included, so holes do not shift the noise field.
                const double eps = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
                const bool in_hole = std::any_of(spec.holes.begin(), spec.holes.end(),
                                                 [&](const Circle& h) { return inside(h, x, y); });
                if (!in_hole) v = std::max(0.0, hit->density + eps);
            }
            img(i, j) = float(v);
        }
    return img;
}

Array2D render_prior(const PriorSpec& spec) {
    validate(spec);
    const std::size_t n = spec.image_side;
    const double c = center_coord(n);
    Array2D img(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = double(j) - c, y = double(i) - c;
            for (const auto& circ : spec.circles) {
                if (!inside(circ, x, y)) continue;
                if (spec.mode == PriorMode::boundary_only &&
                    std::hypot(x - circ.cx, y - circ.cy) <= circ.radius - 1.0) {
                    continue;
                }
                img(i, j) = float(circ.density);
            }
        }
    return img;
}

CirclePhantomSpec inject_defects(const CirclePhantomSpec& spec, const DefectSpec& defect) {
    if (defect.count == 0) return spec;
    if (spec.circles.empty()) throw InvariantError("inject_defects: phantom has no objects to hold defects");
    if (defect.radius_min <= 0.0 || defect.radius_min > defect.radius_max) {
        throw ConfigError("defect radius range must satisfy 0 < min <= max");
    }
    const double scale = double(spec.image_side) / 256.0;
    const double pc = center_coord(spec.image_side);
    CirclePhantomSpec out = spec;
    Rng rng(defect.seed);
    std::uniform_int_distribution<std::size_t> pick(0, spec.circles.size() - 1);
    std::uniform_real_distribution<double> radius(defect.radius_min * scale, defect.radius_max * scale);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t h = 0; h < defect.count; ++h) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < defect.max_attempts && !placed; ++attempt) {
            const Circle& host = spec.circles[pick(rng)];
            const double r = radius(rng);
            const double reach = host.radius - r - 1.0;
            if (reach < 0.0) continue;
            // Snap the hole center to a pixel center.
            const double x = std::round(host.cx + unit(rng) * reach + pc) - pc;
            const double y = std::round(host.cy + unit(rng) * reach + pc) - pc;
            if (std::hypot(x - host.cx, y - host.cy) > reach) continue;
            const bool clear = std::all_of(out.holes.begin(), out.holes.end(), [&](const Circle& o) {
                return std::hypot(x - o.cx, y - o.cy) >= r + o.radius + 1.0;
            });
            if (!clear) continue;
            out.holes.push_back(Circle{x, y, r, spec.background_density});
            placed = true;
        }
        if (!placed) {
            throw InvariantError("inject_defects: could not place defect " + std::to_string(h) + " after " +
                                 std::to_string(defect.max_attempts) + " attempts");
        }
    }
    return out;
}

}  // namespace sinpaint::data
