#pragma once
/// @file geometry.hpp
/// @brief Poincare-ball and Euclidean vector kernels shared by every scoring model.
///
/// All kernels work on flat real arrays. Outputs are written through spans so the
/// training hot path never allocates; value-returning overloads are provided for
/// convenience. Each differentiable kernel has a matching `*_backward` that
/// accumulates the vector-Jacobian product into caller-owned gradient buffers
/// and returns the gradient with respect to the curvature where one exists.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace kge::geometry {

using Vec = std::vector<double>;
using CSpan = std::span<const double>;
using Span = std::span<double>;

inline constexpr double kBallEps = 1e-5;
inline constexpr double kDenEps = 1e-6;
inline constexpr double kAtanhMax = 1.0 - 1e-10;
inline constexpr double kNormEps = 1e-15;
inline constexpr double kPairEps = 1e-15;

// ---------------------------------------------------------------------------
// scalar helpers

inline double softplus(double x) {
    return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

/// Inverse of softplus; used to store a target curvature in raw form.
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

/// Strictly positive curvature stored as an unconstrained raw value.
struct Curvature {
    double raw = softplus_inverse(1.0);

    static Curvature from_value(double c) { return Curvature{softplus_inverse(c)}; }
    double value() const { return softplus(raw); }
    /// d value / d raw
    double slope() const { return sigmoid(raw); }
};

// ---------------------------------------------------------------------------
// dense primitives

inline double dot(CSpan x, CSpan y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double squared_norm(CSpan x) { return dot(x, x); }
inline double norm(CSpan x) { return std::sqrt(squared_norm(x)); }

inline bool all_finite(CSpan x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline double clamp_atanh_arg(double u) { return std::clamp(u, 0.0, kAtanhMax); }

// ---------------------------------------------------------------------------
// ball projection

inline double ball_radius(double c) { return (1.0 - kBallEps) / std::sqrt(c); }

/// True when a point of norm `n` needs projecting. The slack keeps projection
/// idempotent under rounding of the rescaled norm.
inline bool outside_ball(double n, double r) { return n > r * (1.0 + 1e-12); }

/// Rescales `x` in place onto radius (1-eps)/sqrt(c) when it lies outside.
inline void project_to_ball_inplace(Span x, double c) {
    const double n = norm(x);
    const double r = ball_radius(c);
    if (outside_ball(n, r)) {
        const double s = r / n;
        for (double& v : x) v *= s;
    }
}

inline void project_to_ball(CSpan x, double c, Span out) {
    std::copy(x.begin(), x.end(), out.begin());
    project_to_ball_inplace(out, c);
}

inline Vec project_to_ball(CSpan x, double c) {
    Vec out(x.begin(), x.end());
    project_to_ball_inplace(out, c);
    return out;
}

/// Backward of the projection. `pre` is the unprojected input. Overwrites
/// `grad` (the upstream gradient w.r.t. the projected output) with the gradient
/// w.r.t. `pre`; returns d/dc contribution.
inline double project_to_ball_backward(CSpan pre, double c, Span grad) {
    const double n = norm(pre);
    const double r = ball_radius(c);
    if (!outside_ball(n, r)) return 0.0;
    // p = r * u, u = pre / n
    double gu = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i) gu += grad[i] * pre[i];
    gu /= n;  // <g, u>
    const double s = r / n;
    for (std::size_t i = 0; i < pre.size(); ++i) grad[i] = s * (grad[i] - gu * pre[i] / n);
    const double dr_dc = -0.5 * r / c;
    return gu * dr_dc;
}

// ---------------------------------------------------------------------------
// Mobius addition

namespace detail {
struct MobiusTerms {
    double xy, x2, y2, a, b, den;
};

inline MobiusTerms mobius_terms(double xy, double x2, double y2, double c) {
    MobiusTerms t{xy, x2, y2, 0, 0, 0};
    t.a = 1.0 + 2.0 * c * xy + c * y2;
    t.b = 1.0 - c * x2;
    t.den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    if (std::abs(t.den) < kDenEps) t.den = std::copysign(kDenEps, t.den);
    return t;
}
}  // namespace detail

/// Mobius sum without the ball projection; `out` may alias neither input.
inline void mobius_add_raw(CSpan x, CSpan y, double c, Span out) {
    double xy = 0.0, x2 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xy += x[i] * y[i];
        x2 += x[i] * x[i];
        y2 += y[i] * y[i];
    }
    const auto t = detail::mobius_terms(xy, x2, y2, c);
    const double a = t.a / t.den, b = t.b / t.den;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
}

inline void mobius_add(CSpan x, CSpan y, double c, Span out) {
    mobius_add_raw(x, y, c, out);
    project_to_ball_inplace(out, c);
}

inline Vec mobius_add(CSpan x, CSpan y, double c) {
    Vec out(x.size());
    mobius_add(x, y, c, out);
    return out;
}

/// Backward of the projected Mobius sum. `grad` is consumed as scratch.
inline double mobius_add_backward(CSpan x, CSpan y, double c, Span grad, Span gx, Span gy) {
    const std::size_t d = x.size();
    const auto t = detail::mobius_terms(dot(x, y), squared_norm(x), squared_norm(y), c);

    double gc = 0.0;
    {
        // Re-derive the unprojected output to route through the projection.
        const double a = t.a / t.den, b = t.b / t.den;
        double n2 = 0.0, gu = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double o = a * x[i] + b * y[i];
            n2 += o * o;
            gu += grad[i] * o;
        }
        const double n = std::sqrt(n2);
        const double r = ball_radius(c);
        if (outside_ball(n, r)) {
            gu /= n;
            const double s = r / n, k = gu / n;
            for (std::size_t i = 0; i < d; ++i) grad[i] = s * (grad[i] - k * (a * x[i] + b * y[i]));
            gc += gu * (-0.5 * r / c);
        }
    }

    // out = (a x + b y) / den
    double g_out_dot_num = 0.0, ga = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double num = t.a * x[i] + t.b * y[i];
        g_out_dot_num += grad[i] * num;
        ga += grad[i] * x[i];
        gb += grad[i] * y[i];
    }
    ga /= t.den;
    gb /= t.den;
    const double raw_den = 1.0 + 2.0 * c * t.xy + c * c * t.x2 * t.y2;
    const double gden = std::abs(raw_den) < kDenEps ? 0.0 : -g_out_dot_num / (t.den * t.den);

    const double g_xy = 2.0 * c * ga + 2.0 * c * gden;
    const double g_x2 = -c * gb + c * c * t.y2 * gden;
    const double g_y2 = c * ga + c * c * t.x2 * gden;
    const double a = t.a / t.den, b = t.b / t.den;
    for (std::size_t i = 0; i < d; ++i) {
        gx[i] += a * grad[i] + g_xy * y[i] + 2.0 * g_x2 * x[i];
        gy[i] += b * grad[i] + g_xy * x[i] + 2.0 * g_y2 * y[i];
    }
    gc += ga * (2.0 * t.xy + t.y2) - gb * t.x2 + gden * (2.0 * t.xy + 2.0 * c * t.x2 * t.y2);
    return gc;
}

// ---------------------------------------------------------------------------
// exponential / logarithmic maps at the origin

namespace detail {
// f(n) = tanh(s n) / (s n) with derivatives w.r.t. n and s.
struct RadialScale {
    double f, df_dn, df_ds;
};

inline RadialScale tanh_scale(double n, double s) {
    const double u = s * n;
    if (u < 1e-4) {
        return {1.0 - u * u / 3.0, -2.0 * s * s * n / 3.0, -2.0 * s * n * n / 3.0};
    }
    const double th = std::tanh(u);
    const double sech2 = 1.0 - th * th;
    const double g = (u * sech2 - th) / (u * u);  // d/du [tanh(u)/u]
    return {th / u, g * s, g * n};
}

inline RadialScale atanh_scale(double n, double s) {
    const double u = s * n;
    if (u < 1e-4) {
        return {1.0 + u * u / 3.0, 2.0 * s * s * n / 3.0, 2.0 * s * n * n / 3.0};
    }
    if (u >= kAtanhMax) {
        const double k = std::atanh(kAtanhMax);
        const double g = -k / (u * u);
        return {k / u, g * s, g * n};
    }
    const double at = std::atanh(u);
    const double g = (u / (1.0 - u * u) - at) / (u * u);
    return {at / u, g * s, g * n};
}

template <class ScaleFn>
inline void radial_map(CSpan x, double c, Span out, ScaleFn scale) {
    const double n = norm(x);
    if (n < kNormEps) {
        std::copy(x.begin(), x.end(), out.begin());
        return;
    }
    const double f = scale(n, std::sqrt(c)).f;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f * x[i];
}

template <class ScaleFn>
inline double radial_map_backward(CSpan x, double c, CSpan grad, Span gx, ScaleFn scale) {
    const double n = norm(x);
    if (n < kNormEps) {
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += grad[i];
        return 0.0;
    }
    const double s = std::sqrt(c);
    const auto rs = scale(n, s);
    const double gxdot = dot(grad, x);
    const double k = rs.df_dn * gxdot / n;
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += rs.f * grad[i] + k * x[i];
    // ds/dc = 1 / (2 s)
    return gxdot * rs.df_ds / (2.0 * s);
}
}  // namespace detail

/// tanh(sqrt(c)|x|) x / (sqrt(c)|x|), then projected onto the ball.
inline void exp_map0(CSpan x, double c, Span out) {
    detail::radial_map(x, c, out, detail::tanh_scale);
    project_to_ball_inplace(out, c);
}

inline Vec exp_map0(CSpan x, double c) {
    Vec out(x.size());
    exp_map0(x, c, out);
    return out;
}

/// `grad` is consumed as scratch.
inline double exp_map0_backward(CSpan x, double c, Span grad, Span gx) {
    Vec pre(x.size());
    detail::radial_map(x, c, pre, detail::tanh_scale);
    double gc = project_to_ball_backward(pre, c, grad);
    gc += detail::radial_map_backward(x, c, grad, gx, detail::tanh_scale);
    return gc;
}

/// artanh(sqrt(c)|x|) x / (sqrt(c)|x|); the artanh argument is clamped below 1.
inline void log_map0(CSpan x, double c, Span out) { detail::radial_map(x, c, out, detail::atanh_scale); }

inline Vec log_map0(CSpan x, double c) {
    Vec out(x.size());
    log_map0(x, c, out);
    return out;
}

inline double log_map0_backward(CSpan x, double c, CSpan grad, Span gx) {
    return detail::radial_map_backward(x, c, grad, gx, detail::atanh_scale);
}

// ---------------------------------------------------------------------------
// Givens rotations

/// Unit-normalised rotation block for a raw parameter pair; a zero pair maps to
/// the identity block.
inline void givens_block(double a, double b, double& cs, double& sn) {
    const double n = std::hypot(a, b);
    if (n < kPairEps) {
        cs = 1.0;
        sn = 0.0;
    } else {
        cs = a / n;
        sn = b / n;
    }
}

/// Rotation parameterised by consecutive pairs (r[2i], r[2i+1]).
inline void givens_rotate(CSpan r_hat, CSpan x, Span out) {
    assert(r_hat.size() % 2 == 0 && r_hat.size() == x.size());
    for (std::size_t i = 0; i < r_hat.size() / 2; ++i) {
        double cs, sn;
        givens_block(r_hat[2 * i], r_hat[2 * i + 1], cs, sn);
        const double x0 = x[2 * i], x1 = x[2 * i + 1];
        out[2 * i] = cs * x0 - sn * x1;
        out[2 * i + 1] = sn * x0 + cs * x1;
    }
}

inline Vec givens_rotate(CSpan r_hat, CSpan x) {
    Vec out(x.size());
    givens_rotate(r_hat, x, out);
    return out;
}

inline void givens_rotate_backward(CSpan r_hat, CSpan x, CSpan grad, Span gx, Span g_r_hat) {
    for (std::size_t i = 0; i < r_hat.size() / 2; ++i) {
        const double a = r_hat[2 * i], b = r_hat[2 * i + 1];
        const double n = std::hypot(a, b);
        double cs = 1.0, sn = 0.0;
        if (n >= kPairEps) {
            cs = a / n;
            sn = b / n;
        }
        const double x0 = x[2 * i], x1 = x[2 * i + 1];
        const double g0 = grad[2 * i], g1 = grad[2 * i + 1];
        gx[2 * i] += cs * g0 + sn * g1;
        gx[2 * i + 1] += -sn * g0 + cs * g1;
        if (n < kPairEps) continue;
        const double gcs = g0 * x0 + g1 * x1;
        const double gsn = -g0 * x1 + g1 * x0;
        const double proj = gcs * cs + gsn * sn;
        g_r_hat[2 * i] += (gcs - proj * cs) / n;
        g_r_hat[2 * i + 1] += (gsn - proj * sn) / n;
    }
}

// ---------------------------------------------------------------------------
// Mobius matrix-vector product restricted to a Givens rotation

inline void mobius_matvec_rot(CSpan r_hat, CSpan x, double c, Span out) {
    Vec tangent(x.size());
    log_map0(x, c, tangent);
    givens_rotate(r_hat, tangent, tangent);
    exp_map0(tangent, c, out);
}

inline Vec mobius_matvec_rot(CSpan r_hat, CSpan x, double c) {
    Vec out(x.size());
    mobius_matvec_rot(r_hat, x, c, out);
    return out;
}

// ---------------------------------------------------------------------------
// flexible addition

/// Element-wise scaling; a single entry broadcasts over every coordinate.
struct AlphaView {
    CSpan values;
    double operator[](std::size_t i) const { return values.size() == 1 ? values[0] : values[i]; }
};

inline double flexible_denominator(double xy) {
    const double den = 1.0 + xy;
    return std::abs(den) < kDenEps ? std::copysign(kDenEps, den) : den;
}

/// alpha * (x + y) / (1 + <x, y>). `out` may alias `x` or `y`.
inline void flexible_add(CSpan x, CSpan y, CSpan alpha, Span out) {
    const double inv = 1.0 / flexible_denominator(dot(x, y));
    if (alpha.size() == 1) {
        const double s = alpha[0] * inv;
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * (x[i] + y[i]);
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha[i] * inv * (x[i] + y[i]);
    }
}

/// |flexible_add(x, y, alpha)| in one pass, without writing the sum.
inline double flexible_add_norm(CSpan x, CSpan y, CSpan alpha) {
    double xy = 0.0, s2 = 0.0;
    if (alpha.size() == 1) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = x[i] + y[i];
            xy += x[i] * y[i];
            s2 += s * s;
        }
        s2 *= alpha[0] * alpha[0];
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = alpha[i] * (x[i] + y[i]);
            xy += x[i] * y[i];
            s2 += s * s;
        }
    }
    return std::sqrt(s2) / std::abs(flexible_denominator(xy));
}

inline Vec flexible_add(CSpan x, CSpan y, CSpan alpha) {
    Vec out(x.size());
    flexible_add(x, y, alpha, out);
    return out;
}

inline void flexible_add_backward(CSpan x, CSpan y, CSpan alpha, CSpan grad, Span gx, Span gy,
                                  Span g_alpha) {
    const double xy = dot(x, y);
    const double raw_den = 1.0 + xy;
    const bool guarded = std::abs(raw_den) < kDenEps;
    const double den = flexible_denominator(xy);
    const double inv = 1.0 / den;
    const std::size_t d = x.size();

    double g_dot_out = 0.0;
    if (alpha.size() == 1) {
        double gs = 0.0;
        for (std::size_t i = 0; i < d; ++i) gs += grad[i] * (x[i] + y[i]);
        g_alpha[0] += gs * inv;
        g_dot_out = alpha[0] * gs;
        const double gden = guarded ? 0.0 : -g_dot_out * inv * inv;
        const double k = alpha[0] * inv;
        for (std::size_t i = 0; i < d; ++i) {
            gx[i] += k * grad[i] + gden * y[i];
            gy[i] += k * grad[i] + gden * x[i];
        }
        return;
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double gs = grad[i] * (x[i] + y[i]);
        g_dot_out += alpha[i] * gs;
        g_alpha[i] += gs * inv;
    }
    const double gden = guarded ? 0.0 : -g_dot_out * inv * inv;
    for (std::size_t i = 0; i < d; ++i) {
        const double gsum = alpha[i] * inv * grad[i];
        gx[i] += gsum + gden * y[i];
        gy[i] += gsum + gden * x[i];
    }
}

// ---------------------------------------------------------------------------
// hyperbolic distance

/// (2 / sqrt(c)) artanh(sqrt(c) |(-x) (+)_c y|)
inline double hyperbolic_distance(CSpan x, CSpan y, double c) {
    Vec neg(x.size()), m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
    mobius_add(neg, y, c, m);
    const double s = std::sqrt(c);
    return 2.0 / s * std::atanh(clamp_atanh_arg(s * norm(m)));
}

/// Distance from the norm of the Mobius residual, with derivatives w.r.t. that
/// norm and the curvature.
struct DistanceFromNorm {
    double value, d_norm, d_c;
};

inline DistanceFromNorm hyperbolic_distance_from_norm(double n, double c) {
    const double s = std::sqrt(c);
    const double u = s * n;
    const double uc = clamp_atanh_arg(u);
    const double at = std::atanh(uc);
    const bool clamped = u >= kAtanhMax;
    const double dat_du = clamped ? 0.0 : 1.0 / (1.0 - uc * uc);
    // value = 2 at(s n) / s
    const double d_norm = 2.0 * dat_du;
    const double d_s = 2.0 * (dat_du * n * s - at) / (s * s);
    return {2.0 * at / s, d_norm, d_s / (2.0 * s)};
}

// ---------------------------------------------------------------------------
// misc

/// phi(x) = x e^x
inline double phi(double x) { return x * std::exp(x); }
inline double phi_derivative(double x) { return (1.0 + x) * std::exp(x); }

}  // namespace kge::geometry
