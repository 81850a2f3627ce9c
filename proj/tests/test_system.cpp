#include <doctest.h>

#include <cmath>
#include <random>

#include "openstab/system.hpp"

using namespace openstab;

namespace {

State vec(std::initializer_list<double> v) {
  State s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s[i++] = x;
  return s;
}

const DomainSpec kPositive({Interval{0.0, kInf}});

}  // namespace

TEST_CASE("domains are open boxes") {
  CHECK_THROWS_AS(DomainSpec({Interval{1.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DomainSpec(std::vector<Interval>{}), std::invalid_argument);
  CHECK(kPositive.contains(vec({1e-300})));
  CHECK_FALSE(kPositive.contains(vec({0.0})));
  CHECK_FALSE(kPositive.contains(vec({-1.0})));
  CHECK(kPositive.distance_to_boundary(vec({2.5})) == 2.5);
  CHECK(std::isinf(DomainSpec::whole(3).distance_to_boundary(vec({1, 2, 3}))));
  CHECK_FALSE(kPositive.is_bounded());
  const DomainSpec box({Interval{0.5, 1.5}});
  CHECK(kPositive.contains_closed(box));
  CHECK_FALSE(DomainSpec({Interval{0.5, 2.0}}).contains_closed(DomainSpec({Interval{0.5, 1.0}})));
}

TEST_CASE("vector fields validate dimensions and smoothness") {
  CHECK_NOTHROW(VectorFieldSpec("osc", std::vector<std::string>{"x2", "-x1"}, DomainSpec::whole(2)));
  CHECK_THROWS_AS(VectorFieldSpec("bad", std::vector<std::string>{"x1"}, DomainSpec::whole(2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(VectorFieldSpec("kink", std::vector<std::string>{"abs(x1)"}, DomainSpec::whole(1)),
                  expr::NonSmoothError);
  CHECK_NOTHROW(VectorFieldSpec("kink", std::vector<std::string>{"abs(x1)"}, DomainSpec::whole(1),
                                expr::DiffOptions{true}));
  const VectorFieldSpec osc("osc", std::vector<std::string>{"y", "-x"}, DomainSpec::whole(2));
  const State v = *osc(vec({1.0, 2.0}));
  CHECK(v[0] == 2.0);
  CHECK(v[1] == -1.0);
  const VectorFieldSpec lg("lg", std::vector<std::string>{"log(x)"}, DomainSpec::whole(1));
  CHECK_FALSE(lg(vec({-1.0})).ok());
}

TEST_CASE("symbolic Jacobian matches finite differences") {
  const SmoothMapSpec f("polar", 2, {"x1*cos(x2)", "x1*sin(x2)"}, DomainSpec({Interval{0, kInf}, Interval{-3, 3}}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> r(0.1, 3.0), th(-2.5, 2.5);
  for (int k = 0; k < 50; ++k) {
    const State p = vec({r(rng), th(rng)});
    const Matrix J = *jacobian(f, p);
    const Matrix F = *finite_difference_jacobian(f, p);
    CHECK((J - F).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(J(0, 0) == doctest::Approx(std::cos(p[1])));
    CHECK(J(1, 1) == doctest::Approx(p[0] * std::cos(p[1])));
  }
  CHECK_THROWS_AS(jacobian(f, vec({-1.0, 0.0})), std::invalid_argument);
}

TEST_CASE("composition substitutes symbolically") {
  const SmoothMapSpec f("f", 1, {"exp(x)"}, DomainSpec::whole(1));
  const SmoothMapSpec g("g", 1, {"log(x)"}, kPositive);
  const SmoothMapSpec gf = compose(g, f, "gf");
  for (double x : {-2.0, 0.0, 1.5})
    CHECK((*gf(vec({x})))[0] == doctest::Approx(x).epsilon(1e-15));
  CHECK(gf.source_domain() == f.source_domain());
  // chain rule through the composite's symbolic Jacobian
  CHECK((*jacobian(gf, vec({0.7})))(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  const SmoothMapSpec id = SmoothMapSpec::identity(2, DomainSpec::whole(2));
  CHECK((*jacobian(id, vec({3.0, 4.0}))).isIdentity());
}

TEST_CASE("morphism declarations check dimensions") {
  const VectorFieldSpec one("one", std::vector<std::string>{"1"}, DomainSpec::whole(1));
  const VectorFieldSpec two("two", std::vector<std::string>{"1", "0"}, DomainSpec::whole(2));
  const SmoothMapSpec f("f", 1, {"x"}, DomainSpec::whole(1));
  CHECK_NOTHROW(MorphismDecl(f, one, one));
  CHECK_THROWS_AS(MorphismDecl(f, two, one), std::invalid_argument);
  CHECK_THROWS_AS(MorphismDecl(f, one, two), std::invalid_argument);
}

TEST_CASE("metric axioms on random points") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (const MetricSpec& m : {MetricSpec::euclidean(), MetricSpec::weighted({0.5, 2.0, 3.0}), MetricSpec::arctan()}) {
    for (int k = 0; k < 200; ++k) {
      const State a = vec({g(rng), g(rng), g(rng)}), b = vec({g(rng), g(rng), g(rng)}),
                  c = vec({g(rng), g(rng), g(rng)});
      CHECK(metric_distance(m, a, a) == 0.0);
      CHECK(metric_distance(m, a, b) == metric_distance(m, b, a));
      CHECK(metric_distance(m, a, c) <= metric_distance(m, a, b) + metric_distance(m, b, c) + 1e-12);
      if (m.kind == MetricKind::arctan_compressed) CHECK(metric_distance(m, a, b) < M_PI * std::sqrt(3.0));
    }
  }
  CHECK_THROWS_AS(MetricSpec::weighted({1.0, -1.0}), std::invalid_argument);
  CHECK(metric_distance(MetricSpec::euclidean(), vec({0, 0}), vec({3, 4})) == 5.0);
  CHECK(metric_distance(MetricSpec::weighted({4.0}), vec({0}), vec({1})) == 2.0);
}
