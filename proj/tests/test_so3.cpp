#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "elevodom/error.hpp"
#include "elevodom/so3.hpp"
#include "support.hpp"

using namespace elevodom;
using testing::max_abs_diff;

namespace {

// Matrix exponential by its power series, summed to 40 terms.
Mat3 series_exp(const Vec3& theta) {
  const Mat3 K = so3::skew(theta);
  Mat3 term = Mat3::Identity();
  Mat3 sum = Mat3::Identity();
  for (int k = 1; k <= 40; ++k) {
    term = term * K / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("skew builds the cross-product matrix") {
  const Vec3 a(0.3, -1.2, 2.0), b(-0.7, 0.4, 1.1);
  CHECK(max_abs_diff(so3::skew(a) * b, a.cross(b)) < 1e-15);
  CHECK(max_abs_diff(so3::skew(a).transpose(), -so3::skew(a)) == 0.0);
}

TEST_CASE("exp matches the power series") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = testing::random_vec3(rng, 1.0).normalized();
    const Vec3 theta = angle(rng) * axis;
    CHECK(max_abs_diff(so3::exp(theta), series_exp(theta)) < 1e-12);
  }
}

TEST_CASE("exp handles tiny and zero angles") {
  CHECK(max_abs_diff(so3::exp(Vec3::Zero()), Mat3::Identity()) == 0.0);
  const Vec3 tiny(1e-9, -2e-9, 5e-10);
  CHECK(max_abs_diff(so3::exp(tiny), series_exp(tiny)) < 1e-15);
  CHECK(so3::is_rotation(so3::exp(tiny)));
}

TEST_CASE("log inverts exp away from pi") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi - 1e-3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 theta = angle(rng) * testing::random_vec3(rng, 1.0).normalized();
    CHECK(max_abs_diff(so3::log(so3::exp(theta)), theta) < 1e-10);
  }
  const Vec3 small(3e-8, 0.0, -1e-8);
  CHECK(max_abs_diff(so3::log(so3::exp(small)), small) < 1e-15);
}

TEST_CASE("log is stable near pi") {
  const Vec3 axis = Vec3(1.0, -2.0, 0.5).normalized();
  for (double eps : {1e-3, 1e-6, 1e-9, 0.0}) {
    const Vec3 theta = (std::numbers::pi - eps) * axis;
    const Vec3 back = so3::log(so3::exp(theta));
    CHECK(back.norm() == doctest::Approx(std::numbers::pi - eps).epsilon(1e-7));
    // At exactly pi the sign of the axis is ambiguous.
    CHECK(std::abs(back.normalized().dot(axis)) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(max_abs_diff(so3::exp(back), so3::exp(theta)) < 1e-7);
  }
}

TEST_CASE("log rejects non-rotations") {
  Mat3 scaled = 1.01 * Mat3::Identity();
  CHECK_THROWS_AS(so3::log(scaled), Error);
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  try {
    so3::log(reflection);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidRotation);
  }
}

TEST_CASE("s2_oplus stays on the sphere and matches its tangent projector") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vec3 n = testing::random_vec3(rng, 1.0).normalized();
    const Vec3 delta = testing::random_vec3(rng, 1.0);
    CHECK(so3::s2_oplus(n, delta).norm() == doctest::Approx(1.0).epsilon(1e-14));
    // Finite-difference Jacobian against (I - n n^T).
    const double h = 1e-7;
    const Vec3 fd = (so3::s2_oplus(n, h * delta) - so3::s2_oplus(n, -h * delta)) / (2.0 * h);
    const Vec3 expected = (Mat3::Identity() - n * n.transpose()) * delta;
    CHECK(max_abs_diff(fd, expected) < 1e-7);
  }
  CHECK(max_abs_diff(so3::s2_oplus(Vec3::UnitZ(), Vec3::Zero()), Vec3::UnitZ()) == 0.0);
  // A perturbation along the normal itself is projected away.
  CHECK(max_abs_diff(so3::s2_oplus(Vec3::UnitZ(), Vec3(0, 0, 0.3)), Vec3::UnitZ()) == 0.0);
}

TEST_CASE("s2_oplus rejects non-unit normals") {
  try {
    so3::s2_oplus(Vec3(0, 0, 1.0 + 1e-6), Vec3::Zero());
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidNormal);
  }
}

TEST_CASE("orthonormalize projects onto SO(3)") {
  std::mt19937_64 rng(5);
  const Mat3 R = testing::random_rotation(rng);
  Mat3 noisy = R;
  noisy(0, 1) += 1e-6;
  CHECK_FALSE(so3::is_rotation(noisy));
  const Mat3 fixed = so3::orthonormalize(noisy);
  CHECK(so3::is_rotation(fixed));
  CHECK(max_abs_diff(fixed, R) < 1e-6);
}

TEST_CASE("pose helpers") {
  std::mt19937_64 rng(9);
  const Twist tau = (Twist() << 0.1, -0.2, 0.3, 1.0, 2.0, -3.0).finished();
  const Pose T = pose_from_twist(tau);
  CHECK(max_abs_diff(twist_from_pose(T), tau) < 1e-14);
  const Pose I = T * T.inverse();
  CHECK(max_abs_diff(I.R, Mat3::Identity()) < 1e-14);
  CHECK(I.p.norm() < 1e-14);
  const Vec3 x = testing::random_vec3(rng, 1.0);
  CHECK(max_abs_diff(T * x, T.R * x + T.p) == 0.0);
}
