#ifndef DQR_SAMPLER_HPP
#define DQR_SAMPLER_HPP

#include <cmath>
#include <string>
#include <vector>

#include "dqr/design.hpp"

namespace dqr {

// ---------------------------------------------------------------------------
// Asymmetric Laplace primitives

struct ALParams {
  double mu = 0.0;
  double sigma = 1.0;
  double tau = 0.5;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("ALParams: sigma must be positive");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("ALParams: tau must be in (0,1)");
  }
};

/// Check loss u * (tau - 1{u < 0}).
inline double check_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("check_loss: tau must be in (0,1)");
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

inline double al_density(double y, const ALParams& p) {
  p.validate();
  return p.tau * (1.0 - p.tau) / p.sigma * std::exp(-check_loss((y - p.mu) / p.sigma, p.tau));
}

/// Distribution function of the asymmetric Laplace, closed form on both
/// sides of the mode.
inline double al_cdf(double y, const ALParams& p) {
  p.validate();
  const double z = (y - p.mu) / p.sigma;
  if (z <= 0.0) return p.tau * std::exp((1.0 - p.tau) * z);
  return 1.0 - (1.0 - p.tau) * std::exp(-p.tau * z);
}

/// Location-scale mixture constants: theta = (1-2tau)/(tau(1-tau)),
/// psi^2 = 2/(tau(1-tau)).
struct MixtureConstants {
  double theta;
  double psi2;
};

inline MixtureConstants mixture_constants(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("mixture_constants: tau must be in (0,1)");
  const double d = tau * (1.0 - tau);
  return {(1.0 - 2.0 * tau) / d, 2.0 / d};
}

// ---------------------------------------------------------------------------
// Priors and MCMC settings

/// Gamma hyperpriors on precisions and on the inverse scale. The scale sigma
/// itself gets an inverse-gamma prior (a gamma prior on 1/sigma), the
/// conjugate choice under the mixture representation; sigma is sampled here,
/// not fixed to one.
struct PriorSpec {
  double coef_precision_shape = 0.001;
  double coef_precision_rate = 0.001;
  double sigma_shape = 0.001;
  double sigma_rate = 0.001;
  double rw2_shape = 0.001;
  double rw2_rate = 0.001;

  void validate() const {
    for (double v : {coef_precision_shape, coef_precision_rate, sigma_shape, sigma_rate,
                     rw2_shape, rw2_rate})
      if (!(v > 0.0)) throw std::invalid_argument("PriorSpec: hyperparameters must be positive");
  }
};

struct McmcSettings {
  long iterations = 22000;
  long burn_in = 2000;
  long thin = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (iterations <= 0 || burn_in < 0 || thin < 1)
      throw std::invalid_argument("McmcSettings: iterations/burn_in/thin out of range");
    if (burn_in >= iterations)
      throw std::invalid_argument("McmcSettings: burn_in must be below iterations");
  }

  long retained() const { return (iterations - burn_in + thin - 1) / thin; }

  // The two chain-size presets used in the reference analyses.
  static McmcSettings preset_small() { return {22000, 2000, 20, 1}; }
  static McmcSettings preset_large() { return {55000, 5000, 50, 1}; }
};

/// Current chain state. Exposed for the joint-distribution sampler checks;
/// gibbs_run drives it internally.
struct GibbsState {
  Vec coef;               // full coefficient vector, layout order
  Vec latent_v;           // n positive mixture latents
  double sigma = 1.0;
  Vec block_precisions;   // [zeta, nu_1, ..., nu_q]
};

/// Retained draws of one chain, row per draw.
struct DrawStore {
  std::vector<std::string> coef_names;
  std::vector<std::string> precision_names;
  Mat coef;                // T x P
  Vec sigma;               // T
  Mat precisions;          // T x (1 + #penalty blocks)
  double tau = 0.5;
  long v_floor_count = 0;  // latent values clamped at the positivity floor

  long draws() const { return coef.rows(); }
};

// ---------------------------------------------------------------------------
// Random variate helpers

/// Inverse-Gaussian draw via the Michael-Schucany-Haas transform. The small
/// root is computed in a cancellation-free form so large means stay finite.
inline double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  if (!(mean > 0.0) || !(shape > 0.0))
    throw std::invalid_argument("sample_inverse_gaussian: mean and shape must be positive");
  const double z = draw_normal(rng);
  const double nu = z * z;
  const double c = mean * nu / (2.0 * shape);
  const double x = mean * (1.0 - 2.0 / (1.0 + std::sqrt(1.0 + 2.0 / c)));
  if (draw_uniform(rng) <= mean / (mean + x)) return x;
  return mean * mean / x;
}

namespace detail {

/// Draw from GIG(1/2, a, b), density proportional to
/// v^{-1/2} exp{-(a v + b / v)/2}. For b -> 0 this degenerates to a
/// Gamma(1/2, a/2) variable; otherwise 1/v is inverse-Gaussian.
inline double sample_gig_half(double a, double b, Rng& rng) {
  if (b < 1e-24) return draw_gamma(rng, 0.5, a / 2.0);
  const double w = sample_inverse_gaussian(std::sqrt(a / b), a, rng);
  return 1.0 / w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gibbs sampler

/// One chain of the mixture-representation Gibbs sampler. Update order per
/// sweep: coefficient block jointly, latent mixture values, scale, block
/// precisions. Owns its RNG; a fresh instance with the same inputs replays
/// the same draws.
///
/// Full conditionals: the coefficient block is multivariate normal with
/// precision D'V^{-1}D/(psi^2 sigma) plus the prior block precisions; each
/// latent is GIG with index 1/2 (1/v inverse-Gaussian); sigma is
/// inverse-gamma with shape sigma_shape + 3n/2 and rate
/// sigma_rate + sum(v) + sum((y - eta - theta v)^2 / (2 psi^2 v)); block
/// precisions are gamma with shape a + rank/2 and rate b + quadratic-form/2.
class GibbsSampler {
 public:
  GibbsSampler(Mat design, Vec y, double tau, PriorSpec priors,
               std::vector<PenaltyBlock> penalty_blocks, std::uint64_t seed)
      : design_(std::move(design)),
        y_(std::move(y)),
        tau_(tau),
        priors_(priors),
        blocks_(std::move(penalty_blocks)),
        rng_(seed) {
    priors_.validate();
    if (!(tau_ > 0.0 && tau_ < 1.0))
      throw std::invalid_argument("GibbsSampler: tau must be in (0,1)");
    const long n = design_.rows();
    const long P = design_.cols();
    if (y_.size() != n) throw std::invalid_argument("GibbsSampler: response length mismatch");
    if (!y_.allFinite()) throw std::invalid_argument("GibbsSampler: non-finite response");

    std::vector<char> covered(size_t(P), 0);
    for (const auto& blk : blocks_) {
      if (blk.range.start < 0 || blk.range.end() > P)
        throw std::invalid_argument("GibbsSampler: penalty block outside design");
      for (int c = blk.range.start; c < blk.range.end(); ++c) {
        if (covered[size_t(c)])
          throw std::invalid_argument("GibbsSampler: overlapping penalty blocks");
        covered[size_t(c)] = 1;
      }
    }
    for (long c = 0; c < P; ++c)
      if (!covered[size_t(c)]) fixed_cols_.push_back(int(c));

    const auto mix = mixture_constants(tau_);
    theta_ = mix.theta;
    psi2_ = mix.psi2;

    state_.coef = Vec::Zero(P);
    if (n > 0) {
      Mat ridge = design_.transpose() * design_ + Mat::Identity(P, P);
      state_.coef = ridge.ldlt().solve(design_.transpose() * y_);
    }
    state_.latent_v = Vec::Ones(n);
    state_.sigma = 1.0;
    state_.block_precisions = Vec::Ones(1 + long(blocks_.size()));
  }

  const GibbsState& state() const { return state_; }
  GibbsState& state() { return state_; }
  const Mat& design() const { return design_; }
  double theta() const { return theta_; }
  double psi2() const { return psi2_; }
  long v_floor_count() const { return v_floor_count_; }
  Rng& rng() { return rng_; }

  /// Replace the response vector (used by joint-distribution checks that
  /// alternate parameter updates with data redraws).
  void set_response(Vec y) {
    if (y.size() != design_.rows())
      throw std::invalid_argument("set_response: length mismatch");
    y_ = std::move(y);
  }

  /// One full Gibbs sweep. Throws DivergedChainError on non-finite state and
  /// NumericalFailureError if the coefficient factorization fails past the
  /// jitter escalation.
  void step() {
    const long n = design_.rows();
    const long P = design_.cols();
    const double inv_scale = 1.0 / (psi2_ * state_.sigma);

    // --- coefficient block ---
    Mat Q = Mat::Zero(P, P);
    Vec rhs = Vec::Zero(P);
    if (n > 0) {
      Vec w = state_.latent_v.cwiseInverse() * inv_scale;
      Q.noalias() = design_.transpose() * w.asDiagonal() * design_;
      rhs.noalias() = design_.transpose() * (w.cwiseProduct(y_ - theta_ * state_.latent_v));
    }
    const double zeta = state_.block_precisions[0];
    for (int c : fixed_cols_) Q(c, c) += zeta;
    for (size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      Q.block(blk.range.start, blk.range.start, blk.range.length, blk.range.length) +=
          state_.block_precisions[long(b) + 1] * blk.penalty;
    }

    Eigen::LLT<Mat> llt(Q);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success && jitter <= 1e-6) {
      llt.compute(Q + jitter * Mat::Identity(P, P));
      jitter *= 10.0;
    }
    if (llt.info() != Eigen::Success)
      throw NumericalFailureError("GibbsSampler: singular conditional precision at iteration " +
                                  std::to_string(iteration_));
    Vec mean = llt.solve(rhs);
    Vec z(P);
    for (long c = 0; c < P; ++c) z[c] = draw_normal(rng_);
    state_.coef = mean + llt.matrixU().solve(z);
    if (n > 0) eta_.noalias() = design_ * state_.coef;

    // --- latent mixture values ---
    const double a_gig = theta_ * theta_ * inv_scale + 2.0 / state_.sigma;
    for (long i = 0; i < n; ++i) {
      const double resid = y_[i] - eta_[i];
      double v = detail::sample_gig_half(a_gig, resid * resid * inv_scale, rng_);
      if (v < 1e-12) {
        v = 1e-12;
        ++v_floor_count_;
      }
      state_.latent_v[i] = v;
    }

    // --- scale ---
    double rate = priors_.sigma_rate;
    for (long i = 0; i < n; ++i) {
      const double resid = y_[i] - eta_[i] - theta_ * state_.latent_v[i];
      rate += state_.latent_v[i] + resid * resid / (2.0 * psi2_ * state_.latent_v[i]);
    }
    state_.sigma = draw_inverse_gamma(rng_, priors_.sigma_shape + 1.5 * double(n), rate);

    // --- block precisions ---
    double ss_fixed = 0.0;
    for (int c : fixed_cols_) ss_fixed += state_.coef[c] * state_.coef[c];
    state_.block_precisions[0] =
        draw_gamma(rng_, priors_.coef_precision_shape + 0.5 * double(fixed_cols_.size()),
                   priors_.coef_precision_rate + 0.5 * ss_fixed);
    for (size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      Vec g = state_.coef.segment(blk.range.start, blk.range.length);
      state_.block_precisions[long(b) + 1] =
          draw_gamma(rng_, priors_.rw2_shape + 0.5 * double(blk.rank),
                     priors_.rw2_rate + 0.5 * g.dot(blk.penalty * g));
    }

    if (!state_.coef.allFinite() || !std::isfinite(state_.sigma) || !(state_.sigma > 0.0) ||
        !state_.block_precisions.allFinite())
      throw DivergedChainError(iteration_, "GibbsSampler: chain diverged at iteration " +
                                               std::to_string(iteration_));
    ++iteration_;
  }

 private:
  Mat design_;
  Vec y_;
  double tau_;
  PriorSpec priors_;
  std::vector<PenaltyBlock> blocks_;
  std::vector<int> fixed_cols_;
  double theta_ = 0.0;
  double psi2_ = 1.0;
  Rng rng_;
  GibbsState state_;
  Vec eta_;
  long iteration_ = 0;
  long v_floor_count_ = 0;
};

/// Run one chain and keep every `thin`th sweep after burn-in. Deterministic
/// given the settings seed.
inline DrawStore gibbs_run(const Mat& design, const Vec& y, double tau, const PriorSpec& priors,
                           const std::vector<PenaltyBlock>& penalty_blocks,
                           const McmcSettings& settings,
                           const std::vector<std::string>& coef_names = {}) {
  settings.validate();
  GibbsSampler sampler(design, y, tau, priors, penalty_blocks, settings.seed);

  DrawStore store;
  store.tau = tau;
  store.coef_names = coef_names;
  if (store.coef_names.empty())
    for (long c = 0; c < design.cols(); ++c)
      store.coef_names.push_back("c" + std::to_string(c + 1));
  store.precision_names.push_back("zeta");
  for (size_t b = 0; b < penalty_blocks.size(); ++b)
    store.precision_names.push_back("nu" + std::to_string(b + 1));

  const long T = settings.retained();
  store.coef.resize(T, design.cols());
  store.sigma.resize(T);
  store.precisions.resize(T, 1 + long(penalty_blocks.size()));

  long kept = 0;
  for (long iter = 0; iter < settings.iterations; ++iter) {
    sampler.step();
    if (iter >= settings.burn_in && (iter - settings.burn_in) % settings.thin == 0 && kept < T) {
      store.coef.row(kept) = sampler.state().coef.transpose();
      store.sigma[kept] = sampler.state().sigma;
      store.precisions.row(kept) = sampler.state().block_precisions.transpose();
      ++kept;
    }
  }
  store.v_floor_count = sampler.v_floor_count();
  return store;
}

}  // namespace dqr

#endif  // DQR_SAMPLER_HPP
