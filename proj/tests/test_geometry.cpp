#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "retrace/geometry.hpp"
#include "retrace/util.hpp"

using namespace retrace;

namespace {

// Independent oracle: 3x3 homogeneous matrices.
using Mat3 = std::array<double, 9>;

Mat3 pose_to_mat(const Pose& p) {
    double c = std::cos(p.theta), s = std::sin(p.theta);
    return {c, -s, p.x, s, c, p.y, 0, 0, 1};
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
            r[i * 3 + j] = s;
        }
    return r;
}

Mat3 mat_inv_rigid(const Mat3& m) {
    // [R t; 0 1]^-1 = [R^T -R^T t; 0 1]
    Mat3 r{};
    r[0] = m[0];
    r[1] = m[3];
    r[3] = m[1];
    r[4] = m[4];
    r[2] = -(r[0] * m[2] + r[1] * m[5]);
    r[5] = -(r[3] * m[2] + r[4] * m[5]);
    r[8] = 1;
    return r;
}

Pose mat_to_pose(const Mat3& m) { return {m[2], m[5], std::atan2(m[3], m[0])}; }

bool pose_close(const Pose& a, const Pose& b, double tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol &&
           std::abs(angular_distance(a.theta, b.theta)) <= tol;
}

Pose random_pose(Rng& rng) {
    return make_pose(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-6, 6));
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(0.5) == 0.5);
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        double w = wrap_angle(rng.uniform(-50, 50));
        CHECK(w > -kPi);
        CHECK(w <= kPi);
    }
}

TEST_CASE("compose identity cases are exact") {
    Pose p = make_pose(0.3, -1.2, 0.7);
    CHECK(compose(p, Pose::identity()) == p);
    CHECK(compose(Pose::identity(), p) == p);
}

TEST_CASE("pure translations add") {
    Pose a = make_pose(1, 0, 0), b = make_pose(0, 1, 0);
    Pose c = compose(a, b);
    CHECK(c.x == 1.0);
    CHECK(c.y == 1.0);
    CHECK(c.theta == 0.0);
}

TEST_CASE("compose rotation case matches the matrix oracle") {
    Pose a = make_pose(0, 0, kPi / 2), b = make_pose(1, 0, 0);
    Pose got = compose(a, b);
    Pose want = mat_to_pose(mat_mul(pose_to_mat(a), pose_to_mat(b)));
    CHECK(pose_close(got, want, 1e-12));
    CHECK(got.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(got.y == doctest::Approx(1.0));
    CHECK(got.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("inverse") {
    CHECK(inverse(Pose::identity()) == Pose::identity());
    Pose t = inverse(make_pose(1, 0, 0));
    CHECK(t.x == -1.0);
    CHECK(t.y == 0.0);

    Pose p = make_pose(1, 2, kPi / 3);
    Pose round = compose(p, inverse(p));
    CHECK(pose_close(round, Pose::identity(), 1e-12));
    Pose oracle = mat_to_pose(mat_inv_rigid(pose_to_mat(p)));
    CHECK(pose_close(inverse(p), oracle, 1e-12));
}

TEST_CASE("relative") {
    Pose p = make_pose(0.4, 0.9, -2.0);
    CHECK(pose_close(relative(p, p), Pose::identity(), 1e-15));
    CHECK(pose_close(relative(Pose::identity(), make_pose(1, 1, 0)), make_pose(1, 1, 0), 1e-15));

    Pose from = make_pose(0, 0, kPi / 2), to = make_pose(0, 1, kPi / 2);
    Pose rel = relative(from, to);
    CHECK(pose_close(rel, make_pose(1, 0, 0), 1e-12));
    CHECK(pose_close(compose(from, rel), to, 1e-12));
}

TEST_CASE("approx_eq semantics") {
    PoseTolerance tol{1e-3, 2e-3};
    Pose p = make_pose(0.1, 0.2, 0.3);
    CHECK(approx_eq(p, p, tol));

    CHECK_FALSE(approx_eq(make_pose(0, 0, 0), make_pose(0.005, 0, 0), PoseTolerance{0.001, 1.0}));

    // both branch signs across the pi seam
    Pose a = make_pose(0, 0, kPi - 0.0005), b = make_pose(0, 0, -kPi + 0.0005);
    CHECK(std::abs(angular_distance(a.theta, b.theta)) == doctest::Approx(0.001));
    CHECK(approx_eq(a, b, PoseTolerance{1e-6, 0.002}));
    CHECK(approx_eq(b, a, PoseTolerance{1e-6, 0.002}));

    // boundary is inclusive
    CHECK(approx_eq(make_pose(0, 0, 0), make_pose(0.001, 0, 0), PoseTolerance{0.001, 1e-9}));
}

TEST_CASE("associativity over 1000 random triples") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        CHECK(pose_close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-10));
    }
}

TEST_CASE("relative/compose closure over random pairs") {
    Rng rng(43);
    for (int i = 0; i < 1000; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng);
        CHECK(pose_close(compose(a, relative(a, b)), b, 1e-10));
    }
}

TEST_CASE("approx_eq is symmetric and reflexive") {
    Rng rng(44);
    for (int i = 0; i < 200; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng);
        PoseTolerance tol{rng.uniform(0, 2), rng.uniform(0, 1)};
        CHECK(approx_eq(a, a, tol));
        CHECK(approx_eq(a, b, tol) == approx_eq(b, a, tol));
    }
}
