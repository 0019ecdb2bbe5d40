#include "rsm/potential.hpp"

#include <cmath>
#include <limits>

#include "rsm/errors.hpp"
#include "rsm/rng.hpp"

namespace rsm {
namespace {

constexpr double two_pi = 6.283185307179586476925287;

// Logistic sigmoid and derivatives, saturating form: finite for every t.
double sigma(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double sigma1(double t) {
  const double e = std::exp(-std::abs(t));
  const double d = 1.0 + e;
  return e / (d * d);
}

double sigma2(double t) { return -sigma1(t) * std::tanh(0.5 * t); }

double quad_coeff(const QuadraticSpec& qs) {
  return qs.sign == QuadSign::negative ? qs.strength : -qs.strength;
}

}  // namespace

double smoothing_window(double x, double w, double l) {
  // sigma(a) + sigma(b) - 1 rewritten as sigma(b) - sigma(-a): no
  // cancellation against 1, so the tails stay positive down to underflow.
  const double a = w * (x + l);
  const double b = w * (l - x);
  return sigma(b) - sigma(-a);
}

WindowDerivs smoothing_window_derivs(double x, double w, double l) {
  const double a = w * (x + l);
  const double b = w * (l - x);
  WindowDerivs d;
  d.f = sigma(b) - sigma(-a);
  d.f1 = w * (sigma1(a) - sigma1(b));
  d.f2 = w * w * (sigma2(a) + sigma2(b));
  return d;
}

void PotentialSpec::validate() const {
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("p must be positive");
  if (!(w > 0.0) || !std::isfinite(w))
    throw DomainError("window sharpness w must be positive");
  if (!(truncation.value > 0.0) || !std::isfinite(truncation.value))
    throw DomainError("truncation value must be positive");
  if (const auto* ns = std::get_if<NoiseSpec>(&perturbation)) {
    if (ns->strength < 0.0) throw DomainError("noise strength must be >= 0");
    if (ns->num_components < 0)
      throw DomainError("noise num_components must be >= 0");
    if (!(ns->freq_min > 0.0))
      throw DomainError("noise freq_min must be positive");
    if (ns->amp_min > ns->amp_max || ns->freq_min > ns->freq_max ||
        ns->phase_min > ns->phase_max)
      throw DomainError("noise parameter range is inverted");
  } else if (const auto* qs = std::get_if<QuadraticSpec>(&perturbation)) {
    if (qs->strength < 0.0)
      throw DomainError("quadratic strength must be >= 0");
  }
}

double effective_length(const PotentialSpec& spec) {
  if (spec.truncation.kind == TruncationKind::by_length)
    return spec.truncation.value;
  return std::pow(spec.truncation.value, 1.0 / spec.p);
}

NoiseRealization NoiseRealization::draw(const NoiseSpec& spec) {
  SplitMix64 rng(spec.seed);
  NoiseRealization r;
  const int n = spec.num_components;
  r.amp.reserve(n);
  r.freq.reserve(n);
  if (spec.kind == NoiseKind::parity_breaking) r.phase.reserve(n);
  for (int i = 0; i < n; ++i) {
    r.amp.push_back(rng.uniform(spec.amp_min, spec.amp_max));
    r.freq.push_back(rng.uniform(spec.freq_min, spec.freq_max));
    if (spec.kind == NoiseKind::parity_breaking)
      r.phase.push_back(rng.uniform(spec.phase_min, spec.phase_max));
  }
  return r;
}

double NoiseRealization::g(double x, NoiseKind kind) const {
  double s = 0.0;
  if (kind == NoiseKind::symmetric) {
    for (std::size_t i = 0; i < amp.size(); ++i)
      s += amp[i] * std::cos(two_pi * x / freq[i]);
  } else {
    for (std::size_t i = 0; i < amp.size(); ++i)
      s += amp[i] * std::sin(two_pi * x / freq[i] + phase[i]);
  }
  return s;
}

double NoiseRealization::g1(double x, NoiseKind kind) const {
  double s = 0.0;
  if (kind == NoiseKind::symmetric) {
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const double k = two_pi / freq[i];
      s -= amp[i] * k * std::sin(k * x);
    }
  } else {
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const double k = two_pi / freq[i];
      s += amp[i] * k * std::cos(k * x + phase[i]);
    }
  }
  return s;
}

double NoiseRealization::g2(double x, NoiseKind kind) const {
  double s = 0.0;
  if (kind == NoiseKind::symmetric) {
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const double k = two_pi / freq[i];
      s -= amp[i] * k * k * std::cos(k * x);
    }
  } else {
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const double k = two_pi / freq[i];
      s -= amp[i] * k * k * std::sin(k * x + phase[i]);
    }
  }
  return s;
}

Potential::Potential(const PotentialSpec& spec) : spec_(spec) {
  spec_.validate();
  l_eff_ = rsm::effective_length(spec_);
  if (spec_.exterior == Exterior::zero) {
    v_ext_ = 0.0;
  } else {
    double base = std::pow(l_eff_, spec_.p);
    if (const auto* qs = std::get_if<QuadraticSpec>(&spec_.perturbation))
      base += quad_coeff(*qs) * l_eff_ * l_eff_;
    v_ext_ = -base;
  }
  if (const auto* ns = std::get_if<NoiseSpec>(&spec_.perturbation))
    noise_ = NoiseRealization::draw(*ns);
  even_ = parity_symmetric();
}

bool Potential::parity_symmetric() const {
  if (const auto* ns = std::get_if<NoiseSpec>(&spec_.perturbation))
    return ns->kind == NoiseKind::symmetric || ns->strength == 0.0 ||
           ns->num_components == 0;
  return true;
}

double Potential::interior(double x) const {
  double base = std::pow(std::abs(x), spec_.p);
  if (const auto* ns = std::get_if<NoiseSpec>(&spec_.perturbation))
    base += ns->strength * noise_.g(x, ns->kind);
  else if (const auto* qs = std::get_if<QuadraticSpec>(&spec_.perturbation))
    base += quad_coeff(*qs) * x * x;
  return -base;
}

void Potential::interior_derivs(double x, double& b1, double& b2,
                                bool& singular) const {
  const double p = spec_.p;
  double d1 = 0.0, d2 = 0.0;
  singular = false;
  if (x == 0.0) {
    // |x|^p is not C^2 at the origin for p < 2; the divergent term is
    // excluded from the reported values and flagged instead.
    if (p < 2.0)
      singular = true;
    else if (p == 2.0)
      d2 = 2.0;
  } else {
    const double ax = std::abs(x);
    const double s = x > 0.0 ? 1.0 : -1.0;
    d1 = s * p * std::pow(ax, p - 1.0);
    d2 = p * (p - 1.0) * std::pow(ax, p - 2.0);
  }
  if (const auto* ns = std::get_if<NoiseSpec>(&spec_.perturbation)) {
    d1 += ns->strength * noise_.g1(x, ns->kind);
    d2 += ns->strength * noise_.g2(x, ns->kind);
  } else if (const auto* qs = std::get_if<QuadraticSpec>(&spec_.perturbation)) {
    d1 += 2.0 * quad_coeff(*qs) * x;
    d2 += 2.0 * quad_coeff(*qs);
  }
  b1 = -d1;
  b2 = -d2;
}

double Potential::operator()(double x) const {
  if (!std::isfinite(x)) throw DomainError("potential evaluated at non-finite x");
  if (even_) x = std::abs(x);
  const double f = smoothing_window(x, spec_.w, l_eff_);
  if (f == 0.0) return v_ext_;  // |x|^p may overflow out here
  const double b = interior(x);
  if (!std::isfinite(b)) return v_ext_;  // window underflow lags base overflow
  return b * f + v_ext_ * (1.0 - f);
}

double Potential::settle_radius(double tol) const {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  tol = std::max(tol, 100.0 * eps * (1.0 + std::abs(v_ext_)));
  const double step = std::max(5.0 / spec_.w, 1e-3);
  const double x_cap = l_eff_ + 2000.0 / spec_.w + 10.0;
  for (double x = l_eff_ + step; x <= x_cap; x += step) {
    const double res = std::max(std::abs((*this)(x) - v_ext_),
                                std::abs((*this)(-x) - v_ext_));
    if (res < tol) return x;
  }
  throw NonConvergence("potential tail never settles to the exterior value");
}

Potential::Derivs Potential::derivatives(double x) const {
  if (!std::isfinite(x))
    throw DomainError("potential derivative requested at non-finite x");
  const bool flip = even_ && x < 0.0;
  if (even_) x = std::abs(x);
  Derivs d;
  const auto wd = smoothing_window_derivs(x, spec_.w, l_eff_);
  if (wd.f == 0.0) return d;  // constant exterior
  const double b = interior(x);
  double b1, b2;
  interior_derivs(x, b1, b2, d.singular);
  if (!std::isfinite(b) || !std::isfinite(b1) || !std::isfinite(b2)) return d;
  d.v1 = b1 * wd.f + (b - v_ext_) * wd.f1;
  d.v2 = b2 * wd.f + 2.0 * b1 * wd.f1 + (b - v_ext_) * wd.f2;
  if (flip) d.v1 = -d.v1;
  return d;
}

double evaluate(const PotentialSpec& spec, double x) {
  return Potential(spec)(x);
}

Potential::Derivs derivatives(const PotentialSpec& spec, double x) {
  return Potential(spec).derivatives(x);
}

}  // namespace rsm
