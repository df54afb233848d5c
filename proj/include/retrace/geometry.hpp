#pragma once

#include <cmath>

namespace retrace {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wrap an angle to (-pi, pi].  std::remainder lands in [-pi, pi] with
// ties-to-even, so only the -pi endpoint needs fixing.
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

/// Planar rigid transform: translation (x, y) in meters, rotation theta in
/// radians, always stored wrapped to (-pi, pi].
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    static Pose identity() { return {}; }

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct PoseTolerance {
    double trans_tol = 1e-3;   // meters
    double rot_tol = 0.00872664625997164788;  // 0.5 degrees
};

inline Pose make_pose(double x, double y, double theta) {
    return {x, y, wrap_angle(theta)};
}

/// Rigid transform a followed by b (b expressed in a's frame).
inline Pose compose(const Pose& a, const Pose& b) {
    double c = std::cos(a.theta), s = std::sin(a.theta);
    return {a.x + c * b.x - s * b.y,
            a.y + s * b.x + c * b.y,
            wrap_angle(a.theta + b.theta)};
}

inline Pose inverse(const Pose& p) {
    double c = std::cos(p.theta), s = std::sin(p.theta);
    return {-(c * p.x + s * p.y),
            -(-s * p.x + c * p.y),
            wrap_angle(-p.theta)};
}

// Transform `to` into `from`'s frame.  Written difference-first (never via
// compose(inverse(from), to)) so the result depends only on the relative
// displacement; shifting both poses by the same translation leaves the
// returned bits unchanged.
inline Pose relative(const Pose& from, const Pose& to) {
    double dx = to.x - from.x, dy = to.y - from.y;
    double c = std::cos(from.theta), s = std::sin(from.theta);
    return {c * dx + s * dy,
            -s * dx + c * dy,
            wrap_angle(to.theta - from.theta)};
}

/// Apply a transform to a point (no rotation of the point itself).
inline void transform_point(const Pose& p, double px, double py, double& ox, double& oy) {
    double c = std::cos(p.theta), s = std::sin(p.theta);
    ox = p.x + c * px - s * py;
    oy = p.y + s * px + c * py;
}

inline double translation_distance(const Pose& a, const Pose& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Shortest signed arc between two wrapped angles.
inline double angular_distance(double a, double b) {
    return wrap_angle(a - b);
}

/// True iff translation distance <= trans_tol and wrapped angular distance
/// <= rot_tol (both inclusive).
inline bool approx_eq(const Pose& a, const Pose& b, const PoseTolerance& tol) {
    return translation_distance(a, b) <= tol.trans_tol &&
           std::abs(angular_distance(a.theta, b.theta)) <= tol.rot_tol;
}

}  // namespace retrace
