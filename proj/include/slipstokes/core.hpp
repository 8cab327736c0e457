// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

namespace slipstokes {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// General (not necessarily symmetric) 2x2 matrix, row-major entries.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    Mat2() = default;
    Mat2(double m11, double m12, double m21, double m22)
        : a11(m11), a12(m12), a21(m21), a22(m22) {}

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    Mat2 operator+(const Mat2& o) const {
        return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
    }
    Mat2 operator-(const Mat2& o) const {
        return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
    }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    Vec2 apply(const Vec2& v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }

    double trace() const { return a11 + a22; }
    double frobenius() const { return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22); }
};

/// Symmetric 2x2 matrix; only the three independent entries are stored
/// (a21 is structurally identical to a12).
struct SymMat2 {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;

    SymMat2() = default;
    SymMat2(double m11, double m12, double m22) : a11(m11), a12(m12), a22(m22) {}

    static SymMat2 diag(double d1, double d2) { return {d1, 0.0, d2}; }
    static SymMat2 identity() { return {1.0, 0.0, 1.0}; }

    SymMat2 operator+(const SymMat2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    SymMat2 operator-(const SymMat2& o) const { return {a11 - o.a11, a12 - o.a12, a22 - o.a22}; }
    SymMat2 operator*(double s) const { return {a11 * s, a12 * s, a22 * s}; }
    SymMat2& operator+=(const SymMat2& o) { a11 += o.a11; a12 += o.a12; a22 += o.a22; return *this; }

    /// Frobenius norm; the matrix norm used throughout.
    double norm() const { return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22); }

    /// Full contraction A : B (counts the off-diagonal twice).
    double ddot(const SymMat2& o) const { return a11 * o.a11 + 2.0 * a12 * o.a12 + a22 * o.a22; }

    double trace() const { return a11 + a22; }

    /// Projection onto the diagonal part.
    SymMat2 diag_part() const { return {a11, 0.0, a22}; }

    Vec2 apply(const Vec2& v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }

    Mat2 full() const { return {a11, a12, a12, a22}; }
};

inline SymMat2 operator*(double s, const SymMat2& m) { return m * s; }

inline SymMat2 sym(const Mat2& m) {
    return {m.a11, 0.5 * (m.a12 + m.a21), m.a22};
}

} // namespace slipstokes
