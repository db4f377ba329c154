#pragma once

#include <algorithm>
#include <cmath>

namespace meshfield {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return s * a; }
inline Vec3 operator*(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
inline Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
inline Vec3& operator+=(Vec3& a, Vec3 b) { a = a + b; return a; }
inline Vec3& operator-=(Vec3& a, Vec3 b) { a = a - b; return a; }
inline Vec3& operator*=(Vec3& a, double s) { a = a * s; return a; }

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length_squared(Vec3 a) { return dot(a, a); }
inline double length(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(Vec3 a) { return a / length(a); }
inline Vec3 min(Vec3 a, Vec3 b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(Vec3 a, Vec3 b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline double max_component(Vec3 a) { return std::max(a.x, std::max(a.y, a.z)); }
inline double max_abs(Vec3 a) {
  return std::max(std::abs(a.x), std::max(std::abs(a.y), std::abs(a.z)));
}
inline bool operator==(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
inline bool operator!=(Vec3 a, Vec3 b) { return !(a == b); }

// Row-major 3x3 matrix.
struct Mat3 {
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[3 * r + c]; }
  double operator()(int r, int c) const { return m[3 * r + c]; }

  static Mat3 identity() { return Mat3{}; }
  static Mat3 zero() { return Mat3{{0, 0, 0, 0, 0, 0, 0, 0, 0}}; }
  static Mat3 from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
    return Mat3{{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
  }
  // Cross-product matrix: skew(a) * b == cross(a, b).
  static Mat3 skew(Vec3 a) {
    return Mat3{{0, -a.z, a.y, a.z, 0, -a.x, -a.y, a.x, 0}};
  }
};

inline Vec3 operator*(const Mat3& m, Vec3 v) {
  return {m.m[0] * v.x + m.m[1] * v.y + m.m[2] * v.z,
          m.m[3] * v.x + m.m[4] * v.y + m.m[5] * v.z,
          m.m[6] * v.x + m.m[7] * v.y + m.m[8] * v.z};
}

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r = Mat3::zero();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) r(i, j) += a(i, k) * b(k, j);
  return r;
}

inline Mat3 operator*(double s, const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = s * a.m[i];
  return r;
}

inline Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = a.m[i] + b.m[i];
  return r;
}

inline Mat3 transpose(const Mat3& a) {
  return Mat3{{a.m[0], a.m[3], a.m[6], a.m[1], a.m[4], a.m[7], a.m[2], a.m[5], a.m[8]}};
}

inline bool operator==(const Mat3& a, const Mat3& b) {
  for (int i = 0; i < 9; ++i)
    if (a.m[i] != b.m[i]) return false;
  return true;
}

inline double determinant(const Mat3& a) {
  return a.m[0] * (a.m[4] * a.m[8] - a.m[5] * a.m[7]) -
         a.m[1] * (a.m[3] * a.m[8] - a.m[5] * a.m[6]) +
         a.m[2] * (a.m[3] * a.m[7] - a.m[4] * a.m[6]);
}

inline Mat3 inverse(const Mat3& a) {
  double det = determinant(a);
  Mat3 r;
  double inv = 1.0 / det;
  r.m[0] = (a.m[4] * a.m[8] - a.m[5] * a.m[7]) * inv;
  r.m[1] = (a.m[2] * a.m[7] - a.m[1] * a.m[8]) * inv;
  r.m[2] = (a.m[1] * a.m[5] - a.m[2] * a.m[4]) * inv;
  r.m[3] = (a.m[5] * a.m[6] - a.m[3] * a.m[8]) * inv;
  r.m[4] = (a.m[0] * a.m[8] - a.m[2] * a.m[6]) * inv;
  r.m[5] = (a.m[2] * a.m[3] - a.m[0] * a.m[5]) * inv;
  r.m[6] = (a.m[3] * a.m[7] - a.m[4] * a.m[6]) * inv;
  r.m[7] = (a.m[1] * a.m[6] - a.m[0] * a.m[7]) * inv;
  r.m[8] = (a.m[0] * a.m[4] - a.m[1] * a.m[3]) * inv;
  return r;
}

// Rodrigues. Zero vector maps to the identity exactly.
inline Mat3 axis_angle_to_matrix(Vec3 v) {
  double theta = length(v);
  if (theta < 1e-12) return Mat3::identity();
  Vec3 axis = v / theta;
  double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
  Mat3 r;
  r.m[0] = t * axis.x * axis.x + c;
  r.m[1] = t * axis.x * axis.y - s * axis.z;
  r.m[2] = t * axis.x * axis.z + s * axis.y;
  r.m[3] = t * axis.x * axis.y + s * axis.z;
  r.m[4] = t * axis.y * axis.y + c;
  r.m[5] = t * axis.y * axis.z - s * axis.x;
  r.m[6] = t * axis.x * axis.z - s * axis.y;
  r.m[7] = t * axis.y * axis.z + s * axis.x;
  r.m[8] = t * axis.z * axis.z + c;
  return r;
}

// d exp([v]x) / d v_i, evaluated at v. At v = 0 this is skew(e_i).
inline Mat3 axis_angle_derivative(Vec3 v, int i, const Mat3& rot) {
  double theta2 = length_squared(v);
  Vec3 e{i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0, i == 2 ? 1.0 : 0.0};
  if (theta2 < 1e-16) return Mat3::skew(e);
  Vec3 col{e.x - rot.m[3 * 0 + i], e.y - rot.m[3 * 1 + i], e.z - rot.m[3 * 2 + i]};
  Mat3 num = Mat3::skew(v[i] * v + cross(v, col));
  return (1.0 / theta2) * (num * rot);
}

// Affine map x -> linear * x + offset. Also used for rigid camera poses.
struct Affine {
  Mat3 linear;
  Vec3 offset;

  static Affine identity() { return {Mat3::identity(), {0, 0, 0}}; }
  Vec3 point(Vec3 p) const { return linear * p + offset; }
  Vec3 vector(Vec3 v) const { return linear * v; }
};

inline Affine operator*(const Affine& a, const Affine& b) {
  return {a.linear * b.linear, a.linear * b.offset + a.offset};
}

inline bool operator==(const Affine& a, const Affine& b) {
  return a.linear == b.linear && a.offset == b.offset;
}

}  // namespace meshfield
