#pragma once

// Smooth cutoff functions shared across the modules. All transitions are C-infinity,
// built from the classical exp(-1/t) construction.

namespace apspec::cutoff {

/// 0 for t <= 0, 1 for t >= 1, smooth and monotone in between.
double smooth_step(double t);

/// Even plateau bump: 1 on |t| <= inner, 0 on |t| >= outer.
double plateau(double t, double inner, double outer);

/// The division cutoff: 1 on [-1/3, 1/3], supported in (-1, 1).
inline double division_bump(double t) { return plateau(t, 1.0 / 3.0, 1.0); }

/// One-sided window in (0, inf): 0 below support_lo, 1 on [one_lo, one_hi],
/// 0 above support_hi.
double band(double t, double support_lo, double one_lo, double one_hi, double support_hi);

/// Compactly supported normalized bump on (lo, hi) with unit integral.
double unit_bump(double x, double lo, double hi);

}  // namespace apspec::cutoff
