#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "crncouple/oracle.hpp"

using namespace crncouple;

namespace {

const char* kBirthDeath = "species A\ninit A 0\nreaction in: 0 -> A rate 1\nreaction out: A -> 0 rate 1\n";

const char* kGene =
    "species M P\ninit M 0\ninit P 0\nreaction R1: 0 -> M rate 2\nreaction R2: M -> M + P rate 10\n"
    "reaction R3: M -> 0 rate 0.2625\nreaction R4: P -> 0 rate 1";

const char* kQuadratic = "species A\ninit A poisson(15)\nreaction r1: 0 -> 2 A rate 400\nreaction r2: 2 A -> 0 rate 0.14";

std::vector<double> dense_row(const GeneratorMatrix& q, std::size_t r) {
  std::vector<double> row(q.n, 0.0);
  row[r] = q.diag[r];
  for (std::size_t p = q.row_start[r]; p < q.row_start[r + 1]; ++p) row[q.col[p]] += q.val[p];
  return row;
}

double count_of(const State& x, std::size_t i) { return static_cast<double>(x[i]); }

TransientResult mean_of_species(const Network& net, const std::vector<Count>& bounds, double t, std::size_t i) {
  const TruncatedSpace space(bounds);
  const GeneratorMatrix q = build_generator(net, space);
  return transient_expectation(q, initial_distribution(net, space), t,
                               observable_over(space, [i](const State& x) { return count_of(x, i); }));
}

}  // namespace

TEST(TruncatedSpace, IndexRoundTrip) {
  const TruncatedSpace s({3, 4});
  EXPECT_EQ(s.size(), 20u);
  for (std::size_t r = 0; r < s.size(); ++r) EXPECT_EQ(s.index_of(s.state_at(r).counts), r);
  EXPECT_EQ(s.index_of(std::vector<Count>{1, 0}), 5u);
  EXPECT_FALSE(s.contains(std::vector<Count>{4, 0}));
  EXPECT_FALSE(s.contains(std::vector<Count>{0, -1}));
}

TEST(Generator, BirthDeathRows) {
  const Network net = parse_network(kBirthDeath);
  const GeneratorMatrix q = build_generator(net, TruncatedSpace({2}));
  EXPECT_EQ(dense_row(q, 0), (std::vector<double>{-1, 1, 0}));
  EXPECT_EQ(dense_row(q, 1), (std::vector<double>{1, -2, 1}));
  EXPECT_EQ(dense_row(q, 2), (std::vector<double>{0, 2, -2}));
  EXPECT_EQ(q.dropped[2], 1.0);
  EXPECT_EQ(q.max_dropped_rate, 1.0);
}

TEST(Generator, RowsSumToZero) {
  const Network net = parse_network(kGene);
  const GeneratorMatrix q = build_generator(net, TruncatedSpace({12, 40}));
  for (std::size_t r = 0; r < q.n; ++r) EXPECT_NEAR(q.row_sum(r), 0.0, 1e-12 * std::abs(q.diag[r]) + 1e-15);
}

TEST(Generator, BoundTooSmallRejected) {
  EXPECT_THROW(build_generator(parse_network(kQuadratic), TruncatedSpace({10})), std::invalid_argument);
  EXPECT_THROW(build_generator(parse_network("species A\ninit A 5\nreaction d: A -> 0 rate 1\n"), TruncatedSpace({4})),
               std::invalid_argument);
  EXPECT_THROW(build_generator(parse_network(kBirthDeath), TruncatedSpace({2, 2})), std::invalid_argument);
}

TEST(InitialDistribution, PoissonProductSumsToOne) {
  const Network net = parse_network(kQuadratic);
  const auto p = initial_distribution(net, TruncatedSpace({100}));
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(p[15], std::exp(-15.0 + 15.0 * std::log(15.0) - std::lgamma(16.0)), 1e-15);
}

TEST(Transient, BirthDeathMean) {
  const Network net = parse_network(kBirthDeath);
  const TransientResult r = mean_of_species(net, {40}, 1.0, 0);
  EXPECT_NEAR(r.value, 1.0 - std::exp(-1.0), 1e-9);
  EXPECT_LT(r.leaked_mass, 1e-12);
}

TEST(Transient, BirthDeathRelaxesToPoissonOne) {
  const Network net = parse_network(kBirthDeath);
  const TruncatedSpace space({40});
  const auto res = transient_expectation(build_generator(net, space), initial_distribution(net, space), 30.0,
                                         observable_over(space, [](const State& x) { return x[0] == 0 ? 1.0 : 0.0; }));
  EXPECT_NEAR(res.value, std::exp(-1.0), 1e-6);
}

TEST(Transient, ConstantObservableIntegratesToOne) {
  const Network net = parse_network(kGene);
  const TruncatedSpace space({15, 60});
  const auto one = observable_over(space, [](const State&) { return 1.0; });
  const auto res = transient_expectation(build_generator(net, space), initial_distribution(net, space), 2.0, one);
  EXPECT_NEAR(res.value, 1.0, 1e-10);
}

TEST(Transient, ZeroTimeReturnsInitialExpectation) {
  const Network net = parse_network(kQuadratic);
  const auto r = mean_of_species(net, {100}, 0.0, 0);
  EXPECT_NEAR(r.value, 15.0, 1e-9);
  EXPECT_EQ(r.leaked_mass, 0.0);
}

TEST(Transient, RejectsBadInitialDistribution) {
  const Network net = parse_network(kBirthDeath);
  const TruncatedSpace space({3});
  const GeneratorMatrix q = build_generator(net, space);
  const std::vector<double> f(4, 1.0), half{0.5, 0, 0, 0};
  EXPECT_THROW(transient_expectation(q, half, 1.0, f), std::invalid_argument);
  EXPECT_THROW(transient_expectation(q, f, 1.0, std::vector<double>(3)), std::invalid_argument);
}

TEST(Transient, QuadraticNetworkLeakIsNegligible) {
  const Network net = parse_network(kQuadratic);
  const TransientResult r = mean_of_species(net, {120}, 1.0, 0);
  EXPECT_LT(r.leaked_mass, 1e-8);
  EXPECT_NEAR(r.value, 53.452248, 1e-5);
  EXPECT_GT(r.terms, 100u);
}

// Enlarging the truncation moves a [0,1]-valued observable by no more than
// the leaked mass of the smaller space.
TEST(Transient, LeakedMassBoundsTruncationError) {
  const Network net = parse_network(kBirthDeath);
  auto indicator = [](const State& x) { return x[0] <= 2 ? 1.0 : 0.0; };
  for (Count small : {3, 4, 6}) {
    const TruncatedSpace s1({small}), s2({60});
    const auto r1 = transient_expectation(build_generator(net, s1), initial_distribution(net, s1), 2.0,
                                          observable_over(s1, indicator));
    const auto r2 = transient_expectation(build_generator(net, s2), initial_distribution(net, s2), 2.0,
                                          observable_over(s2, indicator));
    EXPECT_GT(r1.leaked_mass, 0.0);
    EXPECT_LE(std::abs(r1.value - r2.value), r1.leaked_mass + 1e-10) << "bound " << small;
  }
}

TEST(MomentOde, GeneExpressionClosedForm) {
  const Network net = parse_network(kGene);
  const auto m = moment_ode_mean(net, initial_mean(net), 30.0);
  EXPECT_NEAR(m[0], 7.616151398416233, 1e-9);
  EXPECT_NEAR(m[1], 76.15120540225654, 1e-8);
}

TEST(MomentOde, ZeroTimeIsIdentity) {
  const Network net = parse_network(kGene);
  const std::vector<double> x0{3.0, 7.0};
  EXPECT_EQ(moment_ode_mean(net, x0, 0.0), x0);
}

TEST(MomentOde, NonAffineRejected) {
  const Network net = parse_network(kQuadratic);
  EXPECT_FALSE(is_affine(net));
  EXPECT_TRUE(is_affine(parse_network(kGene)));
  EXPECT_THROW(moment_ode_mean(net, initial_mean(net), 1.0), NonAffineError);
}

TEST(Oracles, UniformizationAgreesWithMomentOde) {
  const Network net = parse_network(kGene);
  const double t = 5.0;
  const auto ode = moment_ode_mean(net, initial_mean(net), t);
  const TransientResult m = mean_of_species(net, {40, 320}, t, 0);
  const TransientResult p = mean_of_species(net, {40, 320}, t, 1);
  EXPECT_LT(p.leaked_mass, 1e-8);
  EXPECT_NEAR(m.value, ode[0], 1e-4 * ode[0]);
  EXPECT_NEAR(p.value, ode[1], 1e-4 * ode[1]);
}
