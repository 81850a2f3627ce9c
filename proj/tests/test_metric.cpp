#include <doctest.h>

#include <cmath>
#include <random>

#include "openstab/metric.hpp"

using namespace openstab;

namespace {

State vec2(double a, double b) {
  State s(2);
  s << a, b;
  return s;
}

VectorFieldSpec linear2(double a, double b, double c, double d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g*x1 + %.17g*x2", a, b);
  std::string r1 = buf;
  std::snprintf(buf, sizeof buf, "%.17g*x1 + %.17g*x2", c, d);
  return VectorFieldSpec("lin", std::vector<std::string>{r1, buf}, DomainSpec::whole(2));
}

// Independent oracle: plain max over a fine uniform grid.
double brute_sup(const Trajectory& a, const Trajectory& b, std::size_t n) {
  const double T = std::min(a.end_time(), b.end_time());
  double best = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = T * static_cast<double>(k) / static_cast<double>(n);
    best = std::max(best, (a.sample(t) - b.sample(t)).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("harmonic oscillator orbits keep their distance") {
  const VectorFieldSpec osc("osc", std::vector<std::string>{"x2", "-x1"}, DomainSpec::whole(2));
  const Trajectory a = integrate(osc, vec2(1.0, 0.0));
  const Trajectory b = integrate(osc, vec2(1.1, 0.0));
  const auto d = trajectory_distance(a, b, MetricSpec::euclidean());
  CHECK(d.status == DistanceStatus::converged);
  REQUIRE(d.value);
  CHECK(std::abs(*d.value - 0.1) <= 1e-6);
  const auto hull = is_bounded(a, 1e6);
  CHECK(hull.bounded);
  CHECK(std::abs(hull.hull_radius - 1.0) <= 1e-9);
}

TEST_CASE("sampled sup agrees with a brute-force grid") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const auto sys = linear2(-0.5 + 0.3 * u(rng), 2.0 * u(rng), 2.0 * u(rng), -0.5 + 0.3 * u(rng));
    IntegratorConfig cfg;
    cfg.horizon = 20.0;
    const Trajectory a = integrate(sys, vec2(u(rng), u(rng)), cfg);
    const Trajectory b = integrate(sys, vec2(u(rng), u(rng)), cfg);
    if (a.termination() != Termination::reached_horizon || b.termination() != Termination::reached_horizon) continue;
    const auto d = trajectory_distance(a, b, MetricSpec::euclidean());
    const double oracle = brute_sup(a, b, 200000);
    CHECK(d.observed_sup >= oracle - 1e-9);
    CHECK(d.observed_sup <= oracle * (1.0 + 1e-6) + 1e-12);
  }
}

TEST_CASE("pseudo-metric axioms on random triples") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto sys = linear2(-1.0, 3.0, -3.0, -1.0);
  for (int k = 0; k < 50; ++k) {
    const Trajectory a = integrate(sys, vec2(u(rng), u(rng)));
    const Trajectory b = integrate(sys, vec2(u(rng), u(rng)));
    const Trajectory c = integrate(sys, vec2(u(rng), u(rng)));
    const auto ab = trajectory_distance(a, b, {}), ba = trajectory_distance(b, a, {});
    const auto bc = trajectory_distance(b, c, {}), ac = trajectory_distance(a, c, {});
    CHECK(*ab.value == *ba.value);
    CHECK(*ac.value <= *ab.value + *bc.value + 1e-9);
    CHECK(*trajectory_distance(a, a, {}).value == 0.0);
  }
}

TEST_CASE("denser sampling never lowers the estimate") {
  const VectorFieldSpec vdp("vdp", std::vector<std::string>{"x2", "(1 - x1^2)*x2 - x1"}, DomainSpec::whole(2));
  IntegratorConfig cfg;
  cfg.horizon = 30.0;
  const Trajectory a = integrate(vdp, vec2(0.5, 0.0), cfg), b = integrate(vdp, vec2(2.0, 0.5), cfg);
  double previous = 0.0;
  for (std::size_t n : {11, 101, 1001, 2001}) {
    SamplingPlan plan;
    plan.uniform_points = n;
    plan.include_nodes = false;
    plan.max_refinements = 0;
    const double d = trajectory_distance(a, b, {}, plan).observed_sup;
    CHECK(d >= previous - 1e-15);
    previous = d;
  }
  CHECK(trajectory_distance(a, b, {}).observed_sup >= previous - 1e-12);
}

TEST_CASE("status reports divergence and unresolved growth") {
  const VectorFieldSpec grow("grow", std::vector<std::string>{"x"}, DomainSpec::whole(1));
  SUBCASE("blow-up is divergent") {
    const Trajectory a = integrate(grow, State::Constant(1, 0.0)), b = integrate(grow, State::Constant(1, 1e-3));
    const auto d = trajectory_distance(a, b, {});
    CHECK(d.status == DistanceStatus::divergent);
    CHECK(d.infinite());
    CHECK(d.observed_sup > 1e7);
    const auto t = first_exceedance(a, b, {}, 1.0);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(std::log(1000.0)).epsilon(1e-2));
  }
  SUBCASE("growth within the horizon is only a lower bound") {
    IntegratorConfig cfg;
    cfg.horizon = 5.0;
    const Trajectory a = integrate(grow, State::Constant(1, 0.0), cfg), b = integrate(grow, State::Constant(1, 1e-3), cfg);
    const auto d = trajectory_distance(a, b, {});
    CHECK(d.status == DistanceStatus::lower_bound_only);
    CHECK(*d.value == doctest::Approx(1e-3 * std::exp(5.0)).epsilon(1e-6));
  }
  SUBCASE("contraction converges") {
    const VectorFieldSpec decay("decay", std::vector<std::string>{"-x"}, DomainSpec::whole(1));
    const Trajectory a = integrate(decay, State::Constant(1, 1.0)), b = integrate(decay, State::Constant(1, 1.5));
    const auto d = trajectory_distance(a, b, {});
    CHECK(d.status == DistanceStatus::converged);
    CHECK(*d.value == doctest::Approx(0.5));
    CHECK(d.achieved_at == 0.0);
  }
}

TEST_CASE("distances need a shared system") {
  const VectorFieldSpec a("a", std::vector<std::string>{"-x"}, DomainSpec::whole(1));
  const VectorFieldSpec b("b", std::vector<std::string>{"-x"}, DomainSpec::whole(1));
  CHECK_THROWS_AS(trajectory_distance(integrate(a, State::Ones(1)), integrate(b, State::Ones(1)), {}),
                  std::invalid_argument);
}

TEST_CASE("boundedness") {
  const VectorFieldSpec grow("grow", std::vector<std::string>{"x"}, DomainSpec::whole(1));
  CHECK_FALSE(is_bounded(integrate(grow, State::Ones(1)), 1e6).bounded);
  const VectorFieldSpec decay("decay", std::vector<std::string>{"-x"}, DomainSpec::whole(1));
  const auto r = is_bounded(integrate(decay, State::Constant(1, -2.0)), 1e6);
  CHECK(r.bounded);
  CHECK(r.hull_radius == 2.0);
  CHECK(r.lower[0] == -2.0);
  CHECK(r.upper[0] <= 1e-11);  // decays through zero only within atol
  CHECK_FALSE(is_bounded(integrate(decay, State::Constant(1, -2.0)), 1.0).bounded);
}

TEST_CASE("shell directions and points") {
  std::mt19937_64 rng(8);
  const auto d1 = shell_directions(1, 6, rng);
  CHECK(d1[0][0] == 1.0);
  CHECK(d1[1][0] == -1.0);
  const auto d2 = shell_directions(2, 8, rng);
  for (std::size_t k = 0; k < d2.size(); ++k) {
    CHECK(d2[k].norm() == doctest::Approx(1.0));
    CHECK(d2[k].dot(d2[(k + 1) % 8]) == doctest::Approx(std::cos(2 * M_PI / 8)));
  }
  for (const auto& d : shell_directions(5, 20, rng)) CHECK(d.norm() == doctest::Approx(1.0));

  std::mt19937_64 r1(77), r2(77);
  const auto a = shell_directions(4, 10, r1), b = shell_directions(4, 10, r2);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);

  const State c = vec2(0.5, -2.0);
  for (const MetricSpec& m : {MetricSpec::euclidean(), MetricSpec::weighted({2.0, 0.25}), MetricSpec::arctan()}) {
    for (const auto& dir : d2) {
      auto p = shell_point(m, c, dir, 0.3);
      REQUIRE(p);
      CHECK(metric_distance(m, c, *p) == doctest::Approx(0.3).epsilon(1e-12));
    }
  }
  CHECK_FALSE(shell_point(MetricSpec::arctan(), c, d2[0], 10.0).has_value());
}

TEST_CASE("Euclidean and arctan balls are nested at a bounded point") {
  const VectorFieldSpec decay("decay", std::vector<std::string>{"-x"}, DomainSpec({Interval{0.0, kInf}}));
  IntegratorConfig cfg;
  cfg.horizon = 20.0;
  MetricEquivalenceOptions opt;
  opt.integrator = cfg;
  const std::vector<double> eps{0.1, 0.01};
  const auto ea = check_metric_equivalence(decay, State::Ones(1), MetricSpec::euclidean(), MetricSpec::arctan(), eps, opt);
  const auto ae = check_metric_equivalence(decay, State::Ones(1), MetricSpec::arctan(), MetricSpec::euclidean(), eps, opt);
  for (const auto* r : {&ea, &ae}) {
    CHECK(r->passed);
    for (const auto& e : r->entries) {
      REQUIRE(e.delta_prime);
      CHECK(e.bisection_steps <= 8);
      CHECK(e.worst_target_distance < e.eps);
    }
  }
}
