#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "polbc/math.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// 2D plane with a U-shaped wall around the spawn. Moving straight up is
// capped by the top segment at y_wall; escaping requires dipping below the
// side segments and going around. Reward per step is the change in y, so the
// episode return telescopes to y_final - y_0.
class PointWorld {
public:
    struct StepResult {
        Vec state;
        double reward;
        bool done;
    };

    struct Geometry {
        double y_wall = 0.65;   // top segment height
        double half_width = 1.0; // top segment spans x in [-w, w]
        double y_side = -0.2;   // side segments descend to this y
        double speed = 0.05;
        std::size_t step_limit = 100;
    };

    PointWorld() = default;
    explicit PointWorld(const Geometry& geom) : geom_(geom) {}

    std::size_t observation_dim() const { return 2; }
    const Geometry& geometry() const { return geom_; }

    Vec reset(Rng&) {
        x_ = 0.0;
        y_ = 0.0;
        steps_ = 0;
        return Vec{x_, y_};
    }

    StepResult step(double angle, Rng&) {
        if (!(angle >= 0.0 && angle <= 2.0 * M_PI + 1e-9))
            throw std::invalid_argument("PointWorld: action must be in [0, 2pi]");
        double dx = geom_.speed * std::cos(angle);
        double dy = geom_.speed * std::sin(angle);
        double t = first_contact(x_, y_, dx, dy);
        double y_old = y_;
        x_ += t * dx;
        y_ += t * dy;
        steps_ += 1;
        return {Vec{x_, y_}, y_ - y_old, steps_ >= geom_.step_limit};
    }

    // Best possible return given the step budget: straight line to a side
    // corner, then straight up. Used to sanity-check the geometry.
    double best_known_return() const {
        double budget = geom_.speed * static_cast<double>(geom_.step_limit);
        double to_corner = std::hypot(geom_.half_width, geom_.y_side);
        if (budget <= to_corner) return 0.0;
        return geom_.y_side + (budget - to_corner);
    }

private:
    // Fraction of the move [0,1] until the first wall contact, slightly
    // short of the wall so the point never sits on a segment.
    double first_contact(double x, double y, double dx, double dy) const {
        double best = 1.0;
        bool hit = false;
        // Top segment: y = y_wall, x in [-w, w].
        hit |= hit_horizontal(x, y, dx, dy, geom_.y_wall, -geom_.half_width, geom_.half_width,
                              best);
        // Side segments: x = +-w, y in [y_side, y_wall].
        hit |= hit_vertical(x, y, dx, dy, -geom_.half_width, geom_.y_side, geom_.y_wall, best);
        hit |= hit_vertical(x, y, dx, dy, geom_.half_width, geom_.y_side, geom_.y_wall, best);
        return hit ? std::max(0.0, best - 1e-9 / geom_.speed) : 1.0;
    }

    // A hair of slack past the end of the move so rounding in the crossing
    // fraction can't let the point land exactly on (or tunnel through) a wall.
    static constexpr double kContactSlack = 1e-9;

    static bool hit_horizontal(double x, double y, double dx, double dy, double wall_y,
                               double x_lo, double x_hi, double& best) {
        if (dy == 0.0) return false;
        double t = (wall_y - y) / dy;
        if (t <= 0.0 || t > best + kContactSlack) return false;
        double cx = x + t * dx;
        if (cx < x_lo || cx > x_hi) return false;
        best = std::min(best, t);
        return true;
    }

    static bool hit_vertical(double x, double y, double dx, double dy, double wall_x,
                             double y_lo, double y_hi, double& best) {
        if (dx == 0.0) return false;
        double t = (wall_x - x) / dx;
        if (t <= 0.0 || t > best + kContactSlack) return false;
        double cy = y + t * dy;
        if (cy < y_lo || cy > y_hi) return false;
        best = std::min(best, t);
        return true;
    }

    Geometry geom_;
    double x_ = 0.0;
    double y_ = 0.0;
    std::size_t steps_ = 0;
};

} // namespace polbc
