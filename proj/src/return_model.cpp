#include "stblsim/return_model.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace stblsim {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double Phi(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Normal quantile
double Phi_inv(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

struct LnPieces {
  double pdf, dpdf;
};

LnPieces lognormal_pdf(double z, double mu, double sigma) {
  if (!(z > 0.0)) return {0.0, 0.0};
  const double w = (std::log(z) - mu) / sigma;
  const double g = kInvSqrt2Pi * std::exp(-0.5 * w * w) / (z * sigma);
  return {g, -g * (1.0 + w / sigma) / z};
}

double lognormal_tail(double z, double mu, double sigma) {
  if (!(z > 0.0)) return 1.0;
  return Phi((mu - std::log(z)) / sigma);
}

double lognormal_upper_moment(double a, double mu, double sigma) {
  const double m = std::exp(mu + 0.5 * sigma * sigma);
  if (!(a > 0.0)) return m;
  return m * Phi((mu + sigma * sigma - std::log(a)) / sigma);
}

void check_spec(const ReturnSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Lognormal>) {
          if (!(s.sigma >= 0.0) || !std::isfinite(s.mu))
            throw ModelError(ErrorKind::Config,
                             "return_model.sigma: must be >= 0");
        } else if constexpr (std::is_same_v<T, UniformInterval>) {
          if (!(s.lo > 0.0) || !(s.hi >= s.lo))
            throw ModelError(ErrorKind::Config,
                             "return_model: need 0 < lo <= hi");
        } else {
          if (s.log_returns.empty())
            throw ModelError(ErrorKind::Config,
                             "return_model.samples: must be non-empty");
          if (!(s.bandwidth > 0.0))
            throw ModelError(ErrorKind::Config,
                             "return_model.bandwidth: must be > 0");
        }
      },
      spec);
}

}  // namespace

ReturnModel::ReturnModel(ReturnSpec spec) : spec_(std::move(spec)) {
  check_spec(spec_);
  if (auto* ln = std::get_if<Lognormal>(&spec_)) {
    const double s2 = ln->sigma * ln->sigma;
    mean_ = std::exp(ln->mu + 0.5 * s2);
    variance_ = std::expm1(s2) * std::exp(2.0 * ln->mu + s2);
    if (ln->sigma == 0.0) {
      point_mass_ = true;
      atom_ = std::exp(ln->mu);
    }
  } else if (auto* u = std::get_if<UniformInterval>(&spec_)) {
    mean_ = 0.5 * (u->lo + u->hi);
    variance_ = (u->hi - u->lo) * (u->hi - u->lo) / 12.0;
    if (u->hi == u->lo) {
      point_mass_ = true;
      atom_ = u->lo;
    }
  } else {
    auto& e = std::get<EmpiricalKernel>(spec_);
    std::sort(e.log_returns.begin(), e.log_returns.end());
    const double h2 = e.bandwidth * e.bandwidth;
    double m1 = 0.0, m2 = 0.0;
    for (double c : e.log_returns) {
      m1 += std::exp(c + 0.5 * h2);
      m2 += std::exp(2.0 * c + 2.0 * h2);
    }
    const double n = static_cast<double>(e.log_returns.size());
    mean_ = m1 / n;
    variance_ = std::max(0.0, m2 / n - mean_ * mean_);
  }
}

ReturnModel ReturnModel::lognormal(double mu, double sigma) {
  return ReturnModel(Lognormal{mu, sigma});
}

ReturnModel ReturnModel::uniform(double lo, double hi) {
  return ReturnModel(UniformInterval{lo, hi});
}

ReturnModel ReturnModel::empirical(const std::vector<double>& returns,
                                   double bandwidth) {
  EmpiricalKernel k;
  k.bandwidth = bandwidth;
  for (double r : returns) {
    if (!(r > 0.0))
      throw ModelError(ErrorKind::Config,
                       "return_model.samples: returns must be positive");
    k.log_returns.push_back(std::log(r));
  }
  return ReturnModel(std::move(k));
}

std::string ReturnModel::kind_name() const {
  switch (spec_.index()) {
    case 0: return "lognormal";
    case 1: return "uniform";
    default: return "empirical";
  }
}

double ReturnModel::pdf(double z) const {
  if (point_mass_) return 0.0;
  if (auto* ln = std::get_if<Lognormal>(&spec_))
    return lognormal_pdf(z, ln->mu, ln->sigma).pdf;
  if (auto* u = std::get_if<UniformInterval>(&spec_))
    return (z >= u->lo && z <= u->hi) ? 1.0 / (u->hi - u->lo) : 0.0;
  const auto& e = std::get<EmpiricalKernel>(spec_);
  double acc = 0.0;
  for (double c : e.log_returns) acc += lognormal_pdf(z, c, e.bandwidth).pdf;
  return acc / static_cast<double>(e.log_returns.size());
}

double ReturnModel::pdf_derivative(double z) const {
  if (point_mass_) return 0.0;
  if (auto* ln = std::get_if<Lognormal>(&spec_))
    return lognormal_pdf(z, ln->mu, ln->sigma).dpdf;
  if (std::holds_alternative<UniformInterval>(spec_)) return 0.0;
  const auto& e = std::get<EmpiricalKernel>(spec_);
  double acc = 0.0;
  for (double c : e.log_returns) acc += lognormal_pdf(z, c, e.bandwidth).dpdf;
  return acc / static_cast<double>(e.log_returns.size());
}

double ReturnModel::tail(double z) const {
  if (point_mass_) return z <= atom_ ? 1.0 : 0.0;
  if (auto* ln = std::get_if<Lognormal>(&spec_))
    return lognormal_tail(z, ln->mu, ln->sigma);
  if (auto* u = std::get_if<UniformInterval>(&spec_))
    return std::clamp((u->hi - z) / (u->hi - u->lo), 0.0, 1.0);
  const auto& e = std::get<EmpiricalKernel>(spec_);
  double acc = 0.0;
  for (double c : e.log_returns) acc += lognormal_tail(z, c, e.bandwidth);
  return acc / static_cast<double>(e.log_returns.size());
}

double ReturnModel::cdf(double z) const {
  if (point_mass_) return z >= atom_ ? 1.0 : 0.0;
  if (auto* ln = std::get_if<Lognormal>(&spec_)) {
    if (!(z > 0.0)) return 0.0;
    return Phi((std::log(z) - ln->mu) / ln->sigma);
  }
  if (auto* u = std::get_if<UniformInterval>(&spec_))
    return std::clamp((z - u->lo) / (u->hi - u->lo), 0.0, 1.0);
  return 1.0 - tail(z);
}

double ReturnModel::upper_moment(double a) const {
  if (point_mass_) return atom_ >= a ? atom_ : 0.0;
  if (auto* ln = std::get_if<Lognormal>(&spec_))
    return lognormal_upper_moment(a, ln->mu, ln->sigma);
  if (auto* u = std::get_if<UniformInterval>(&spec_)) {
    const double lo = std::clamp(a, u->lo, u->hi);
    return 0.5 * (u->hi * u->hi - lo * lo) / (u->hi - u->lo);
  }
  const auto& e = std::get<EmpiricalKernel>(spec_);
  double acc = 0.0;
  for (double c : e.log_returns)
    acc += lognormal_upper_moment(a, c, e.bandwidth);
  return acc / static_cast<double>(e.log_returns.size());
}

double ReturnModel::quantile(double u) const {
  if (point_mass_) return atom_;
  if (!(u > 0.0)) return std::get_if<UniformInterval>(&spec_)
                             ? std::get<UniformInterval>(spec_).lo
                             : 0.0;
  if (!(u < 1.0)) return std::get_if<UniformInterval>(&spec_)
                             ? std::get<UniformInterval>(spec_).hi
                             : kInf;
  if (auto* ln = std::get_if<Lognormal>(&spec_))
    return std::exp(ln->mu + ln->sigma * Phi_inv(u));
  if (auto* un = std::get_if<UniformInterval>(&spec_))
    return un->lo + u * (un->hi - un->lo);
  const auto& e = std::get<EmpiricalKernel>(spec_);
  const double h = e.bandwidth;
  double lo = e.log_returns.front() + h * Phi_inv(u) - 1e-9;
  double hi = e.log_returns.back() + h * Phi_inv(u) + 1e-9;
  auto F = [&](double x) {
    const double z = std::exp(x);
    return u <= 0.5 ? cdf(z) - u : (1.0 - u) - tail(z);
  };
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(
      F, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return std::exp(0.5 * (r.first + r.second));
}

double ReturnModel::sample(Rng& rng) const {
  if (point_mass_) return atom_;
  if (auto* e = std::get_if<EmpiricalKernel>(&spec_)) {
    const auto n = e->log_returns.size();
    const auto i = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    return std::exp(e->log_returns[i] + e->bandwidth * Phi_inv(uniform01(rng)));
  }
  return quantile(uniform01(rng));
}

std::pair<double, double> ReturnModel::effective_support(double m) const {
  if (point_mass_) return {atom_, atom_};
  if (auto* u = std::get_if<UniformInterval>(&spec_)) return {u->lo, u->hi};
  if (auto* ln = std::get_if<Lognormal>(&spec_)) {
    const double k = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * m);
    return {std::exp(ln->mu - k * ln->sigma), std::exp(ln->mu + k * ln->sigma)};
  }
  const auto& e = std::get<EmpiricalKernel>(spec_);
  const double k = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * m);
  return {std::exp(e.log_returns.front() - k * e.bandwidth),
          std::exp(e.log_returns.back() + k * e.bandwidth)};
}

double sample_return(const ReturnModel& model, Rng& rng) {
  return model.sample(rng);
}

double conditional_mean(const ReturnModel& model) { return model.mean(); }

EventProbabilities event_probabilities(const ReturnModel& model, double X,
                                       const Thresholds& th) {
  if (!(th.c <= th.b))
    throw ModelError(ErrorKind::Precondition,
                     "event_probabilities: need c <= b");
  EventProbabilities ev;
  const double qb = model.tail(th.b / X);
  const double qc = model.tail(th.c / X);
  ev.p_A = qb;
  ev.p_B = std::max(0.0, qc - qb);
  ev.p_wipe = std::max(0.0, 1.0 - qc);
  return ev;
}

double partial_expectation(const ReturnModel& model, double lo, double hi,
                           Weight weight, const QuadratureSpec& spec) {
  if (!(lo <= hi))
    throw ModelError(ErrorKind::Precondition,
                     "partial_expectation: need lo <= hi");
  if (weight == Weight::One)
    return expect(model, [](double) { return 1.0; }, lo, hi, spec);
  return expect(model, [](double z) { return z; }, lo, hi, spec);
}

}  // namespace stblsim
