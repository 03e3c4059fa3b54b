#pragma once

#include <cmath>

namespace strand {

/// Scalar time profile with analytic value / rate / acceleration.
/// Kinds:
///   Constant: value v0
///   Ramp:     linear v0 -> v1 over [t0, t1], clamped outside
///   Smooth:   quintic C^2 step v0 -> v1 over [t0, t1]
///   Triangle: 0 at t0, peak v1 at tp, back to 0 at t1, 0 outside
///   Sine:     v0 + amp * sin(2*pi*freq*(t - t0))
struct Profile {
  enum class Kind { Constant, Ramp, Smooth, Triangle, Sine };
  Kind kind = Kind::Constant;
  double v0 = 0.0, v1 = 0.0;
  double t0 = 0.0, t1 = 1.0, tp = 0.5;
  double amp = 0.0, freq = 1.0;

  static Profile constant(double v) {
    Profile p;
    p.v0 = v;
    return p;
  }

  static Profile ramp(double v0, double v1, double t0, double t1) {
    Profile p;
    p.kind = Kind::Ramp;
    p.v0 = v0;
    p.v1 = v1;
    p.t0 = t0;
    p.t1 = t1;
    return p;
  }

  static Profile smooth(double v0, double v1, double t0, double t1) {
    Profile p = ramp(v0, v1, t0, t1);
    p.kind = Kind::Smooth;
    return p;
  }

  static Profile triangle(double peak, double t0, double tp, double t1) {
    Profile p;
    p.kind = Kind::Triangle;
    p.v1 = peak;
    p.t0 = t0;
    p.tp = tp;
    p.t1 = t1;
    return p;
  }

  static Profile sine(double offset, double amp, double freq, double t0 = 0.0) {
    Profile p;
    p.kind = Kind::Sine;
    p.v0 = offset;
    p.amp = amp;
    p.freq = freq;
    p.t0 = t0;
    return p;
  }

  double value(double t) const;
  double rate(double t) const;
  double accel(double t) const;
};

}  // namespace strand
