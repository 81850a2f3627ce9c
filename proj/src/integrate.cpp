#include "openstab/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "openstab/parallel.hpp"

namespace openstab {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// quartic continuous extension
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// PI controller constants
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kMaxShrink = 5.0;   // h_new >= h / 5
constexpr double kMaxGrow = 0.1;     // h_new <= h / 0.1

class Stepper {
 public:
  Stepper(const VectorFieldSpec& sys, const IntegratorConfig& cfg)
      : sys_(sys), cfg_(cfg), n_(static_cast<Eigen::Index>(sys.dimension())) {
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &err_}) v->resize(n_);
  }

  bool rhs(const State& y, State& out) const {
    return sys_.eval_into(std::span<const double>(y.data(), y.size()), std::span<double>(out.data(), out.size()));
  }

  double rms_norm(const State& v, const State& y) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::abs(y[i]);
      s += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(n_));
  }

  double initial_step(const State& y0, const State& f0, double hmax) {
    const double dy = rms_norm(y0, y0);
    const double df = rms_norm(f0, y0);
    double h0 = (dy < 1e-10 || df < 1e-10) ? 1e-6 : 0.01 * dy / df;
    h0 = std::min(h0, hmax);
    tmp_ = y0 + h0 * f0;
    if (!rhs(tmp_, k2_)) return std::min(h0, hmax) * 1e-3;
    const double d2 = rms_norm(k2_ - f0, y0) / h0;
    const double dmax = std::max(df, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, hmax});
  }

  // One attempted step from (y, k1). Returns false on a field fault at a stage.
  bool attempt(const State& y, double h, double& err_norm) {
    tmp_ = y + h * a21 * k1_;
    if (!rhs(tmp_, k2_)) return false;
    tmp_ = y + h * (a31 * k1_ + a32 * k2_);
    if (!rhs(tmp_, k3_)) return false;
    tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    if (!rhs(tmp_, k4_)) return false;
    tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    if (!rhs(tmp_, k5_)) return false;
    tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    if (!rhs(tmp_, k6_)) return false;
    ynew_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    if (!rhs(ynew_, k7_)) return false;
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    err_norm = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      err_norm = std::max(err_norm, std::abs(err_[i]) / sc);
    }
    return std::isfinite(err_norm);
  }

  void append_dense(const State& y, double h, std::vector<double>& dense) const {
    const State r2 = ynew_ - y;
    const State r3 = h * k1_ - r2;
    const State r4 = r2 - h * k7_ - r3;
    const State r5 = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
    for (const State* r : {&r2, &r3, &r4, &r5}) dense.insert(dense.end(), r->data(), r->data() + n_);
  }

  const VectorFieldSpec& sys_;
  const IntegratorConfig& cfg_;
  Eigen::Index n_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void IntegratorConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(rtol) || !positive(atol)) throw std::invalid_argument("tolerances must be positive");
  if (!positive(horizon)) throw std::invalid_argument("horizon must be positive and finite");
  if (!positive(blowup_norm)) throw std::invalid_argument("blow-up threshold must be positive");
  if (!positive(domain_margin)) throw std::invalid_argument("domain margin must be positive");
  if (initial_step && !positive(*initial_step)) throw std::invalid_argument("initial step must be positive");
  if (max_step && !positive(*max_step)) throw std::invalid_argument("max step must be positive");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::reached_horizon: return "reached-horizon";
    case Termination::blow_up: return "blow-up";
    case Termination::domain_exit: return "domain-exit";
    case Termination::step_underflow: return "step-underflow";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Trajectory::Trajectory(std::string system_name, std::vector<double> times, std::vector<State> states,
                       std::vector<double> dense, Termination termination)
    : system_name_(std::move(system_name)),
      times_(std::move(times)),
      states_(std::move(states)),
      dense_(std::move(dense)),
      termination_(termination) {
  if (times_.empty() || times_.size() != states_.size())
    throw std::invalid_argument("trajectory needs one state per time");
  if (dense_.size() != 4 * dimension() * step_count())
    throw std::invalid_argument("trajectory dense-output size mismatch");
}

Trajectory::Trajectory(std::string system_name, std::vector<double> times, std::vector<State> states,
                       Pushforward origin, Termination termination)
    : system_name_(std::move(system_name)),
      times_(std::move(times)),
      states_(std::move(states)),
      origin_(std::move(origin)),
      termination_(termination) {
  if (times_.empty() || times_.size() != states_.size())
    throw std::invalid_argument("trajectory needs one state per time");
  if (!origin_->source || !origin_->map) throw std::invalid_argument("pushforward needs source and map");
}

State Trajectory::sample(double t) const {
  if (!(t >= 0.0) || t > end_time())
    throw std::out_of_range("sample time " + format17(t) + " outside [0, " + format17(end_time()) + "]");
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto i = static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
  if (times_[i] == t) return states_[i];

  if (origin_) {
    auto v = (*origin_->map)(origin_->source->sample(t));
    if (!v) throw std::out_of_range("pushforward undefined at t=" + format17(t) + ": " + v.fault().describe());
    return *v;
  }

  const auto n = static_cast<Eigen::Index>(dimension());
  const double theta = (t - times_[i]) / (times_[i + 1] - times_[i]);
  const double theta1 = 1.0 - theta;
  const double* c = dense_.data() + 4 * static_cast<std::size_t>(n) * i;
  Eigen::Map<const State> r2(c, n), r3(c + n, n), r4(c + 2 * n, n), r5(c + 3 * n, n);
  return states_[i] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
}

std::vector<double> Trajectory::refined_times(std::size_t per_step) const {
  per_step = std::max<std::size_t>(1, per_step);
  std::vector<double> out;
  out.reserve(step_count() * per_step + 1);
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
    const double a = times_[i], b = times_[i + 1];
    out.push_back(a);
    for (std::size_t k = 1; k < per_step; ++k) {
      const double t = a + (b - a) * static_cast<double>(k) / static_cast<double>(per_step);
      if (t > a && t < b) out.push_back(t);
    }
  }
  out.push_back(times_.back());
  return out;
}

// ---------------------------------------------------------------------------

Trajectory integrate(const VectorFieldSpec& system, const State& x0, const IntegratorConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(x0.size()) != system.dimension())
    throw std::invalid_argument("initial condition dimension mismatch for system '" + system.name() + "'");
  if (!system.domain().contains(x0))
    throw std::invalid_argument("initial condition outside the domain of system '" + system.name() + "'");

  const double T = config.horizon;
  const double hmax = std::min(config.max_step.value_or(T), T);

  std::vector<double> times{0.0};
  std::vector<State> states{x0};
  std::vector<double> dense;

  auto finish = [&](Termination term) {
    return Trajectory(system.name(), std::move(times), std::move(states), std::move(dense), term);
  };

  if (x0.norm() >= config.blowup_norm) return finish(Termination::blow_up);
  if (system.domain().distance_to_boundary(x0) <= config.domain_margin) return finish(Termination::domain_exit);

  Stepper st(system, config);
  if (!st.rhs(x0, st.k1_)) return finish(Termination::domain_exit);

  State y = x0;
  double t = 0.0;
  double h = config.initial_step ? std::min(*config.initial_step, hmax) : st.initial_step(y, st.k1_, hmax);
  double facold = 1e-4;
  bool last_rejected = false;
  bool domain_trouble = false;

  for (;;) {
    if (t >= T) return finish(Termination::reached_horizon);
    h = std::min(h, hmax);
    bool last_step = false;
    if (t + h >= T) {
      h = T - t;
      last_step = true;
    }
    const double hmin = 1e-14 * std::max(1.0, std::abs(t));
    if (h < hmin) return finish(domain_trouble ? Termination::domain_exit : Termination::step_underflow);

    double err = 0.0;
    if (!st.attempt(y, h, err)) {
      domain_trouble = true;
      h *= 0.25;
      last_rejected = true;
      continue;
    }

    const double fac11 = std::pow(err, kExpo);
    if (err <= 1.0) {
      if (!system.domain().contains(st.ynew_)) {
        domain_trouble = true;
        h *= 0.5;
        last_rejected = true;
        continue;
      }
      st.append_dense(y, h, dense);
      t = last_step ? T : t + h;
      y = st.ynew_;
      st.k1_ = st.k7_;
      times.push_back(t);
      states.push_back(y);
      domain_trouble = false;

      if (y.norm() >= config.blowup_norm) return finish(Termination::blow_up);
      if (system.domain().distance_to_boundary(y) <= config.domain_margin) return finish(Termination::domain_exit);

      double fac = fac11 / std::pow(facold, kBeta);
      fac = std::clamp(fac / kSafety, kMaxGrow, kMaxShrink);
      double hnew = h / fac;
      facold = std::max(err, 1e-4);
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = hnew;
    } else {
      h /= std::min(kMaxShrink, fac11 / kSafety);
      last_rejected = true;
    }
  }
}

std::vector<Trajectory> integrate_batch(const VectorFieldSpec& system, const std::vector<State>& initial,
                                        const IntegratorConfig& config) {
  std::vector<std::optional<Trajectory>> slots(initial.size());
  parallel_for(0, initial.size(), [&](std::size_t i) { slots[i].emplace(integrate(system, initial[i], config)); });
  std::vector<Trajectory> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

State sample(const Trajectory& traj, double t) { return traj.sample(t); }

bool is_equilibrium(const VectorFieldSpec& system, const State& x, double tol) {
  if (!system.domain().contains(x)) throw std::invalid_argument("is_equilibrium: point outside domain");
  auto v = system(x);
  if (!v) return false;
  return v->cwiseAbs().maxCoeff() <= tol;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  for (std::size_t i = 0; i < traj.dimension(); ++i) out << ",x" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < traj.times().size(); ++k) {
    out << format17(traj.times()[k]);
    const State& s = traj.states()[k];
    for (Eigen::Index i = 0; i < s.size(); ++i) out << ',' << format17(s[i]);
    out << '\n';
  }
}

std::string to_csv(const Trajectory& traj) {
  std::ostringstream os;
  write_csv(traj, os);
  return os.str();
}

}  // namespace openstab
