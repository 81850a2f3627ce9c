#include <doctest.h>

#include <cmath>
#include <random>

#include "openstab/morphism.hpp"

using namespace openstab;

namespace {

const DomainSpec kPositive({Interval{0.0, kInf}});
const DomainSpec kLine = DomainSpec::whole(1);

DomainSpec box(double lo, double hi) { return DomainSpec({Interval{lo, hi}}); }
State at(double x) { return State::Constant(1, x); }

VectorFieldSpec field1(const std::string& name, const std::string& rhs, const DomainSpec& dom = kLine) {
  return VectorFieldSpec(name, std::vector<std::string>{rhs}, dom);
}

const VectorFieldSpec kDecay = field1("decay", "-x", kPositive);
const VectorFieldSpec kCubic = field1("cubic", "-x^3");
const VectorFieldSpec kDrift = field1("drift", "1");
const SmoothMapSpec kExample1("f", 1, {"1/sqrt(log(1/x^2)+1)"}, box(0.0, 1.6487212707));
const SmoothMapSpec kMinusLog("mlog", 1, {"-log(x)"}, kPositive);

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "(%.17g)", v);
  return buf;
}

// Linear field y' = M y as expression strings.
std::vector<std::string> linear_rows(const Matrix& M) {
  std::vector<std::string> rows;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::string r;
    for (Eigen::Index j = 0; j < M.cols(); ++j) r += (j ? " + " : "") + num(M(i, j)) + "*x" + std::to_string(j + 1);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("relatedness of the worked examples") {
  const auto r1 = check_related(MorphismDecl(kExample1, kDecay, kCubic), box(0.5, 1.5), 41, 1e-10);
  CHECK(r1.passed);
  CHECK(r1.points.size() == 41);
  CHECK(r1.max_residual <= 1e-10);
  CHECK(r1.fd_agrees);
  CHECK(r1.fd_points.size() == 5);

  const auto r2 = check_related(MorphismDecl(kMinusLog, kDecay, kDrift), box(0.25, 4.0), 41, 1e-10);
  CHECK(r2.passed);
  CHECK(r2.max_residual <= 1e-15);

  const auto id = SmoothMapSpec::identity(1, kPositive);
  const auto r3 = check_related(MorphismDecl(id, kDecay, kDecay), box(0.25, 4.0), 17, 0.0);
  CHECK(r3.passed);
  CHECK(r3.max_residual == 0.0);

  const SmoothMapSpec sq("sq", 1, {"x^2"}, kLine);
  const auto r4 = check_related(MorphismDecl(sq, kDrift, kDrift), box(1.0, 2.0), 11, 1e-8);
  CHECK_FALSE(r4.passed);
  CHECK(r4.max_residual == doctest::Approx(3.0));  // |2x - 1| at x = 2
}

TEST_CASE("relatedness preconditions and faults") {
  CHECK_THROWS_AS(check_related(MorphismDecl(kMinusLog, kDecay, kDrift), box(-1.0, 1.0), 5, 1e-8),
                  std::invalid_argument);
  // a map declared on all of R that faults on part of the grid
  const SmoothMapSpec lg("lg", 1, {"log(x)"}, kLine);
  const auto r = check_related(MorphismDecl(lg, field1("lin", "-x"), field1("m1", "-1")), box(-1.0, 1.0), 21, 1e-12);
  CHECK_FALSE(r.faults.empty());
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.passed);  // faulted points are excluded from the maximum
  // image outside the target domain fails the check
  const auto r2 = check_related(MorphismDecl(kMinusLog, kDecay, field1("pdrift", "1", kPositive)), box(0.5, 2.0), 5, 1e-8);
  CHECK(r2.outside_target > 0);
  CHECK_FALSE(r2.passed);
}

TEST_CASE("openness via the submersion criterion") {
  const auto o1 = check_open(kMinusLog, box(0.5, 2.0), 31, 1e-6);
  CHECK(o1.submersion());
  CHECK(o1.min_sigma == doctest::Approx(0.5).epsilon(1e-14));

  const SmoothMapSpec c("c", 1, {"3"}, kLine);
  const auto o2 = check_open(c, box(-1.0, 1.0), 11, 1e-6);
  CHECK_FALSE(o2.submersion());
  CHECK(o2.degenerate.size() == 11);

  const auto o3 = check_open(kExample1, box(0.8, 1.2), 41, 0.1);
  CHECK(o3.submersion());
  CHECK(o3.min_sigma >= 0.1);

  const SmoothMapSpec up("up", 1, {"x", "x^2"}, kLine);
  const auto o4 = check_open(up, box(-1.0, 1.0), 5, 1e-6);
  CHECK_FALSE(o4.submersion());
  CHECK(o4.points.empty());
  CHECK_FALSE(o4.reason.empty());

  const SmoothMapSpec proj("proj", 2, {"x1 + x2^2"}, DomainSpec::whole(2));
  CHECK(check_open(proj, DomainSpec({Interval{-1, 1}, Interval{-1, 1}}), 5, 0.5).submersion());
}

TEST_CASE("pushforward reproduces the target solutions") {
  IntegratorConfig cfg;
  cfg.horizon = 20.0;
  const Trajectory src = integrate(kDecay, at(1.0), cfg);

  // -log amplifies absolute error once x falls toward atol, so compare on a shorter window
  IntegratorConfig short_cfg;
  short_cfg.horizon = 10.0;
  const Trajectory p2 = pushforward(integrate(kDecay, at(1.0), short_cfg), kMinusLog, "drift");
  CHECK(p2.is_pushforward());
  const Trajectory t2 = integrate(kDrift, at(0.0), short_cfg);
  const Trajectory p1 = pushforward(src, kExample1, "cubic");
  const Trajectory t1 = integrate(kCubic, at(1.0), cfg);
  double e1 = 0.0, e2 = 0.0;
  for (double t = 0.0; t <= 20.0; t += 0.01) {
    if (t <= 10.0) e2 = std::max(e2, std::abs(p2.sample(t)[0] - t));
    e1 = std::max(e1, std::abs(p1.sample(t)[0] - t1.sample(t)[0]));
  }
  CHECK(e2 <= 1e-6);
  CHECK(e1 <= 1e-6);
  CHECK(trajectory_distance(p2, t2, {}).observed_sup <= 1e-6);

  const Trajectory same = pushforward(src, SmoothMapSpec::identity(1, kPositive), "decay");
  for (double t = 0.0; t <= 20.0; t += 0.37) CHECK(same.sample(t) == src.sample(t));
}

TEST_CASE("pushforward truncates where the map faults") {
  const VectorFieldSpec grow = field1("grow", "x", kPositive);
  IntegratorConfig cfg;
  cfg.horizon = 5.0;
  const Trajectory src = integrate(grow, at(0.1), cfg);
  const SmoothMapSpec lim("lim", 1, {"log(0.5 - x)"}, box(-1.0, 0.5));
  const Trajectory p = pushforward(src, lim);
  CHECK(p.termination() == Termination::domain_exit);
  CHECK(p.end_time() < std::log(5.0));
  CHECK(p.end_time() > std::log(5.0) - 0.1);
  CHECK_THROWS_AS(pushforward(integrate(grow, at(0.7), cfg), lim), std::invalid_argument);
}

TEST_CASE("pushforward is functorial") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VectorFieldSpec osc("osc", std::vector<std::string>{"x2", "-x1 - 0.1*x2"}, DomainSpec::whole(2));
  for (int k = 0; k < 10; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const SmoothMapSpec f("f", 2, {num(a) + "*x1 + sin(x2)", "x2 + " + num(b) + "*x1^3"}, DomainSpec::whole(2));
    const SmoothMapSpec g("g", 2, {"atan(x1) + " + num(c) + "*x2", "exp(x2/4)"}, DomainSpec::whole(2));
    State x0(2);
    x0 << u(rng), u(rng);
    const auto src = std::make_shared<const Trajectory>(integrate(osc, x0));
    const auto pf = std::make_shared<const Trajectory>(pushforward(src, std::make_shared<const SmoothMapSpec>(f)));
    const Trajectory lhs = pushforward(*src, compose(g, f, "gf"));
    const Trajectory rhs = pushforward(pf, std::make_shared<const SmoothMapSpec>(g));
    for (double t = 0.0; t <= src->end_time(); t += 0.731)
      CHECK((lhs.sample(t) - rhs.sample(t)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("equilibria are preserved") {
  const SmoothMapSpec f("f", 1, {"exp(x) - 1"}, kLine);
  const VectorFieldSpec src = field1("lin", "-x");
  const VectorFieldSpec tgt = conjugate_field(src, f, SmoothMapSpec("finv", 1, {"log(x + 1)"}, box(-1.0, kInf)),
                                              box(-1.0, kInf));
  const MorphismDecl decl(f, src, tgt);
  CHECK(check_equilibria_preserved(decl, at(0.0), 1e-12));
  CHECK_THROWS_AS(check_equilibria_preserved(decl, at(0.5), 1e-12), std::invalid_argument);
  CHECK_THROWS_AS(check_equilibria_preserved(MorphismDecl(kMinusLog, kDecay, kDrift), at(1.0), 1e-9),
                  std::invalid_argument);

  const Trajectory eq = integrate(src, at(0.0));
  const Trajectory pf = pushforward(eq, f);
  for (const auto& s : pf.states()) CHECK(std::abs(s[0]) <= 1e-12);
}

TEST_CASE("conjugated fields are related by construction") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VectorFieldSpec vdp("vdp", std::vector<std::string>{"x2", "(1 - x1^2)*x2 - x1"}, DomainSpec::whole(2));
  const DomainSpec region({Interval{-1, 1}, Interval{-1, 1}});
  for (int k = 0; k < 10; ++k) {
    const double a = u(rng), b = u(rng), c = 1.0 + 0.5 * u(rng);
    // triangular polynomial diffeomorphism and its inverse
    const SmoothMapSpec f("f", 2, {num(c) + "*x1 + " + num(a), "x2 + " + num(b) + "*x1^3"}, DomainSpec::whole(2));
    const SmoothMapSpec finv("finv", 2,
                             {"(x1 - " + num(a) + ")/" + num(c), "x2 - " + num(b) + "*((x1 - " + num(a) + ")/" + num(c) + ")^3"},
                             DomainSpec::whole(2));
    const VectorFieldSpec y = conjugate_field(vdp, f, finv, DomainSpec::whole(2));
    const auto r = check_related(MorphismDecl(f, vdp, y), region, 15, 1e-9);
    CHECK(r.passed);
    CHECK(r.max_residual <= 1e-9);
  }
}

TEST_CASE("modulus of continuity estimates") {
  const auto id = estimate_modulus(SmoothMapSpec::identity(1, kLine), 0.2, box(-1.0, 1.0), 9);
  for (double d : id.values()) {
    CHECK(d >= 0.2 * 0.9 / 2 * (1 - 1e-9));
    CHECK(d <= 0.2);
  }
  const auto ml = estimate_modulus(kMinusLog, 0.1, box(0.5, 2.0), 7);
  for (std::size_t k = 0; k < ml.points().size(); ++k) {
    const double ref = 0.1 * ml.points()[k][0] / 2;
    CHECK(ml.values()[k] >= ref / 2);
    CHECK(ml.values()[k] <= ref * 2);
  }
  const auto lin = estimate_modulus(SmoothMapSpec("ten", 1, {"10*x"}, kLine), 1.0, box(-1.0, 1.0), 5);
  for (double d : lin.values()) CHECK(d == doctest::Approx(0.045).epsilon(1e-6));
  CHECK(lin.degenerate.empty());

  const auto flat = estimate_modulus(SmoothMapSpec("c", 1, {"1/(x - 2)"}, box(-kInf, 2.0)), 1e-3, box(0.0, 1.9), 5);
  CHECK(flat.values().back() < flat.values().front());
}

TEST_CASE("modulus soundness on a nonlinear planar map") {
  const SmoothMapSpec f("f", 2, {"x1 + sin(3*x2)", "x2^3 + x1*x2"}, DomainSpec::whole(2));
  const DomainSpec region({Interval{-1, 1}, Interval{-1, 1}});
  const double eps = 0.05;
  const auto field = estimate_modulus(f, eps, region, 5);
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < field.points().size(); ++k) {
    const State& x = field.points()[k];
    const State fx = *f(x);
    for (int s = 0; s < 100; ++s) {
      State dir(2);
      dir << g(rng), g(rng);
      const State xp = x + dir.normalized() * field.values()[k] * u(rng);
      if (((*f(xp)) - fx).norm() >= eps) ++violations;
    }
  }
  CHECK(violations == 0);
  // interpolation reproduces grid values and stays between neighbours
  for (std::size_t k = 0; k < field.points().size(); ++k) CHECK(field(field.points()[k]) == field.values()[k]);
  State mid(2);
  mid << 0.25, 0.25;
  const double v = field(mid);
  CHECK(v > 0.0);
  CHECK_THROWS_AS(field(State::Constant(2, 3.0)), std::out_of_range);
}

TEST_CASE("transfer on the worked examples") {
  const auto c1 = transfer(MorphismDecl(kExample1, kDecay, kCubic), at(1.0));
  CHECK(c1.conclusion.status == TransferStatus::transferred_stable);
  CHECK(c1.image[0] == doctest::Approx(1.0));
  CHECK(c1.ledger.tube_covers_hull);
  CHECK(c1.target_agrees == true);
  CHECK(c1.scope.find("tube") != std::string::npos);

  const auto c2 = transfer(MorphismDecl(kMinusLog, kDecay, kDrift), at(1.0));
  CHECK(c2.conclusion.status == TransferStatus::transferred_stable);
  CHECK(c2.image[0] == 0.0);
  CHECK(c2.target_agrees == true);

  const VectorFieldSpec grow = field1("grow", "x");
  const auto c3 = transfer(MorphismDecl(SmoothMapSpec::identity(1, kLine), grow, grow), at(0.0));
  CHECK(c3.conclusion.status == TransferStatus::not_transferable);
  CHECK(c3.conclusion.reason.find("source not stable") != std::string::npos);

  CHECK_THROWS_AS(transfer(MorphismDecl(kMinusLog, kDecay, kDrift), at(-1.0)), std::invalid_argument);
}

TEST_CASE("negating any hypothesis blocks the conclusion") {
  const auto cert = transfer(MorphismDecl(kMinusLog, kDecay, kDrift), at(1.0));
  REQUIRE(conclude(cert.ledger).status == TransferStatus::transferred_stable);
  const std::vector<std::pair<const char*, void (*)(TransferLedger&)>> mutations{
      {"source", [](TransferLedger& l) { l.source.overall = Verdict::inconclusive; }},
      {"bounded", [](TransferLedger& l) { l.boundedness.bounded = false; }},
      {"related", [](TransferLedger& l) { l.relatedness.passed = false; }},
      {"open", [](TransferLedger& l) { l.openness.verdict = OpennessVerdict::degenerate_points; }},
      {"tube", [](TransferLedger& l) { l.tube_covers_hull = false; }},
  };
  for (const auto& [name, mutate] : mutations) {
    TransferLedger l = cert.ledger;
    mutate(l);
    CAPTURE(name);
    CHECK(conclude(l).status == TransferStatus::not_transferable);
  }
}

TEST_CASE("linear conjugation preserves the origin") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    Matrix A(2, 2), B(2, 2);
    A << u(rng), u(rng), u(rng), u(rng);
    do B << u(rng), u(rng), u(rng), u(rng);
    while (std::abs(B.determinant()) < 0.2);
    const Matrix C = B * A * B.inverse();
    const VectorFieldSpec src("src", linear_rows(A), DomainSpec::whole(2));
    const VectorFieldSpec tgt("tgt", linear_rows(C), DomainSpec::whole(2));
    const SmoothMapSpec f("B", 2, linear_rows(B), DomainSpec::whole(2));
    CHECK(check_equilibria_preserved(MorphismDecl(f, src, tgt), State::Zero(2), 1e-12));
  }
}
