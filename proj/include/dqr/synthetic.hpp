#ifndef DQR_SYNTHETIC_HPP
#define DQR_SYNTHETIC_HPP

#include <cmath>
#include <string>

#include "dqr/geometry.hpp"

namespace dqr {

/// Standard normal quantile: Acklam's rational approximation polished with
/// one Halley step against erfc, good to full double precision.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

enum class GeneratorKind { SphericalGaussian, Elliptical, LinearHeteroscedastic };

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "spherical-gaussian") return GeneratorKind::SphericalGaussian;
  if (s == "elliptical") return GeneratorKind::Elliptical;
  if (s == "linear-heteroscedastic") return GeneratorKind::LinearHeteroscedastic;
  throw std::invalid_argument("unknown generator kind: " + s);
}

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::SphericalGaussian: return "spherical-gaussian";
    case GeneratorKind::Elliptical: return "elliptical";
    default: return "linear-heteroscedastic";
  }
}

/// Seeded data generators used as oracles. The heteroscedastic kind draws
/// y_j = beta0 + beta1 x + (1 + gamma x) eps_j with x uniform on [0,1]:
/// separate fits of close levels cross in the sparse regions by design.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::SphericalGaussian;
  long n = 1000;
  int k = 2;
  Mat cov_factor;        // elliptical: Y = Z A'; identity when unset
  double beta0 = 1.0;    // heteroscedastic location
  double beta1 = 2.0;    // heteroscedastic slope
  double gamma = 2.0;    // heteroscedastic scale slope
  std::uint64_t seed = 1;

  void validate() const {
    if (n <= 0) throw std::invalid_argument("GeneratorSpec: n must be positive");
    if (k < 2) throw std::invalid_argument("GeneratorSpec: k must be >= 2");
    if (kind == GeneratorKind::Elliptical && cov_factor.size() > 0 &&
        (cov_factor.rows() != k || cov_factor.cols() != k))
      throw std::invalid_argument("GeneratorSpec: cov_factor must be k x k");
    if (kind == GeneratorKind::LinearHeteroscedastic && 1.0 + gamma < 0.0)
      throw std::invalid_argument("GeneratorSpec: scale 1 + gamma x must stay positive");
  }
};

struct GeneratedData {
  Mat responses;
  Mat covariates;  // zero columns unless the kind has a covariate
  std::vector<std::string> covariate_names;
};

inline GeneratedData generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  GeneratedData out;
  out.responses = Mat(spec.n, spec.k);
  switch (spec.kind) {
    case GeneratorKind::SphericalGaussian: {
      for (long i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.k; ++j) out.responses(i, j) = draw_normal(rng);
      out.covariates = Mat(spec.n, 0);
      break;
    }
    case GeneratorKind::Elliptical: {
      Mat factor = spec.cov_factor.size() > 0 ? spec.cov_factor
                                              : Mat(Mat::Identity(spec.k, spec.k));
      Mat z(spec.n, spec.k);
      for (long i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.k; ++j) z(i, j) = draw_normal(rng);
      out.responses = z * factor.transpose();
      out.covariates = Mat(spec.n, 0);
      break;
    }
    case GeneratorKind::LinearHeteroscedastic: {
      out.covariates = Mat(spec.n, 1);
      out.covariate_names = {"x"};
      for (long i = 0; i < spec.n; ++i) {
        const double x = draw_uniform(rng);
        out.covariates(i, 0) = x;
        const double scale = 1.0 + spec.gamma * x;
        for (int j = 0; j < spec.k; ++j)
          out.responses(i, j) = spec.beta0 + spec.beta1 * x + scale * draw_normal(rng);
      }
      break;
    }
  }
  return out;
}

/// Closed-form population quantile of the projection u'Y at covariate value
/// x (ignored by the covariate-free kinds).
inline double population_directional_quantile(const GeneratorSpec& spec, const Vec& u, double tau,
                                              double x = 0.0) {
  spec.validate();
  switch (spec.kind) {
    case GeneratorKind::SphericalGaussian:
      return norm_quantile(tau);
    case GeneratorKind::Elliptical: {
      Mat factor = spec.cov_factor.size() > 0 ? spec.cov_factor
                                              : Mat(Mat::Identity(spec.k, spec.k));
      return (factor.transpose() * u).norm() * norm_quantile(tau);
    }
    default:
      return (spec.beta0 + spec.beta1 * x) * u.sum() +
             (1.0 + spec.gamma * x) * u.norm() * norm_quantile(tau);
  }
}

}  // namespace dqr

#endif  // DQR_SYNTHETIC_HPP
