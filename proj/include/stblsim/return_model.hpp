#pragma once

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include "stblsim/quadrature.hpp"
#include "stblsim/rng.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

struct Lognormal {
  double mu = 0.0;
  double sigma = 0.0;
};

struct UniformInterval {
  double lo = 1.0;
  double hi = 1.0;
};

/// Gaussian kernel smoothing of log-returns: an equal-weight mixture of
/// lognormals centred on the observed samples.
struct EmpiricalKernel {
  std::vector<double> log_returns;  // sorted
  double bandwidth = 0.01;
};

using ReturnSpec = std::variant<Lognormal, UniformInterval, EmpiricalKernel>;

/// One-step return distribution R = X_{t+1} / X_t. Immutable.
class ReturnModel {
 public:
  ReturnModel() : ReturnModel(Lognormal{}) {}
  explicit ReturnModel(ReturnSpec spec);

  static ReturnModel lognormal(double mu, double sigma);
  static ReturnModel uniform(double lo, double hi);
  /// Builds the kernel model from positive return observations.
  static ReturnModel empirical(const std::vector<double>& returns,
                               double bandwidth);

  const ReturnSpec& spec() const { return spec_; }
  std::string kind_name() const;

  bool point_mass() const { return point_mass_; }
  double atom() const { return atom_; }

  double pdf(double z) const;
  double pdf_derivative(double z) const;
  double cdf(double z) const;
  /// P(R >= z), computed without cancellation.
  double tail(double z) const;
  double quantile(double u) const;
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  /// E[R; R >= a].
  double upper_moment(double a) const;
  double sample(Rng& rng) const;

  /// Interval carrying all but `tail_mass` of the probability at each end.
  std::pair<double, double> effective_support(double tail_mass) const;

 private:
  ReturnSpec spec_;
  bool point_mass_ = false;
  double atom_ = 0.0;
  double mean_ = 1.0;
  double variance_ = 0.0;
};

double sample_return(const ReturnModel& model, Rng& rng);
double conditional_mean(const ReturnModel& model);

/// Event probabilities for the next step given thresholds in ETH price.
EventProbabilities event_probabilities(const ReturnModel& model, double X,
                                       const Thresholds& th);

/// E[f(R); lo <= R < hi] by adaptive quadrature, clipped to the effective
/// support. Point-mass models are evaluated at the atom.
template <class F>
auto expect(const ReturnModel& model, F f, double lo, double hi,
            const QuadratureSpec& spec) {
  using R = std::decay_t<decltype(f(1.0))>;
  if (model.point_mass()) {
    const double z = model.atom();
    R v = f(z);
    if (z >= lo && z < hi) return v;
    return R(v * 0.0);
  }
  const auto [s_lo, s_hi] = model.effective_support(spec.tail_mass);
  const double a = std::max(lo, s_lo), b = std::min(hi, s_hi);
  return integrate([&](double z) { return R(f(z) * model.pdf(z)); }, a,
                   std::max(a, b), spec);
}

enum class Weight { One, Identity };

/// E[w(R); lo <= R < hi] by quadrature.
double partial_expectation(const ReturnModel& model, double lo, double hi,
                           Weight weight, const QuadratureSpec& spec);

}  // namespace stblsim
