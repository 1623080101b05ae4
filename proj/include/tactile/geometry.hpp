#pragma once

#include <cmath>

namespace tactile {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) noexcept { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) noexcept { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) noexcept { x *= s; y *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2 a, Vec2 b) noexcept = default;
};

constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double norm2(Vec2 a) noexcept { return dot(a, a); }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }

/// Counter-clockwise quarter turn: (x, y) -> (-y, x).
constexpr Vec2 perp(Vec2 a) noexcept { return {-a.y, a.x}; }

inline Vec2 rotate(Vec2 a, double theta) noexcept {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
}

}  // namespace tactile
