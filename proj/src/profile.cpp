#include "strandsim/profile.hpp"

namespace strand {

double Profile::value(double t) const {
  switch (kind) {
    case Kind::Constant: return v0;
    case Kind::Ramp: {
      if (t <= t0) return v0;
      if (t >= t1) return v1;
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
    case Kind::Smooth: {
      if (t <= t0) return v0;
      if (t >= t1) return v1;
      const double s = (t - t0) / (t1 - t0);
      return v0 + (v1 - v0) * (10 - 15 * s + 6 * s * s) * s * s * s;
    }
    case Kind::Triangle: {
      if (t <= t0 || t >= t1) return 0.0;
      if (t <= tp) return v1 * (t - t0) / (tp - t0);
      return v1 * (t1 - t) / (t1 - tp);
    }
    case Kind::Sine: return v0 + amp * std::sin(2 * M_PI * freq * (t - t0));
  }
  return 0.0;
}

double Profile::rate(double t) const {
  switch (kind) {
    case Kind::Constant: return 0.0;
    case Kind::Ramp:
      return (t <= t0 || t >= t1) ? 0.0 : (v1 - v0) / (t1 - t0);
    case Kind::Smooth: {
      if (t <= t0 || t >= t1) return 0.0;
      const double T = t1 - t0, s = (t - t0) / T;
      return (v1 - v0) / T * 30.0 * s * s * (1 - s) * (1 - s);
    }
    case Kind::Triangle: {
      if (t <= t0 || t >= t1) return 0.0;
      return t <= tp ? v1 / (tp - t0) : -v1 / (t1 - tp);
    }
    case Kind::Sine: return amp * 2 * M_PI * freq * std::cos(2 * M_PI * freq * (t - t0));
  }
  return 0.0;
}

double Profile::accel(double t) const {
  switch (kind) {
    case Kind::Constant:
    case Kind::Ramp:
    case Kind::Triangle: return 0.0;
    case Kind::Smooth: {
      if (t <= t0 || t >= t1) return 0.0;
      const double T = t1 - t0, s = (t - t0) / T;
      return (v1 - v0) / (T * T) * 60.0 * s * (1 - s) * (1 - 2 * s);
    }
    case Kind::Sine: {
      const double w = 2 * M_PI * freq;
      return -amp * w * w * std::sin(w * (t - t0));
    }
  }
  return 0.0;
}

}  // namespace strand
