#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bfront {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : Error { using Error::Error; };
struct ModelError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct SolverError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
struct DiagnosticError : Error { using Error::Error; };
struct ConstructionError : Error { using Error::Error; };
struct InfeasibleError : Error { using Error::Error; };
struct RegionError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
// Left normal: rotates e by +90 degrees.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

// Unit vector at an angle in degrees. Quadrant reduction keeps mirror-image
// angles (e.g. 210 and 330) exact mirror images in floating point.
inline Vec2 unit_from_degrees(double deg) {
    double a = std::fmod(deg, 360.0);
    if (a < 0) a += 360.0;
    double sx = 1.0, sy = 1.0;
    if (a > 180.0) { a = 360.0 - a; sy = -1.0; }
    if (a > 90.0) { a = 180.0 - a; sx = -1.0; }
    double c, s;
    if (a == 0.0) { c = 1.0; s = 0.0; }
    else if (a == 90.0) { c = 0.0; s = 1.0; }
    else if (a == 30.0) { c = std::sqrt(3.0) / 2.0; s = 0.5; }
    else if (a == 60.0) { c = 0.5; s = std::sqrt(3.0) / 2.0; }
    else if (a == 45.0) { c = s = std::sqrt(0.5); }
    else {
        const double r = a * std::numbers::pi / 180.0;
        c = std::cos(r);
        s = std::sin(r);
    }
    return {sx * c, sy * s};
}

}  // namespace bfront
