#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "crncouple/model.hpp"

using namespace crncouple;

namespace {

const char* kQuadratic =
    "species A\ninit A 0\nreaction r1: 0 -> 2 A rate 400\nreaction r2: 2 A -> 0 rate 0.1";

const char* kGene =
    "species M P\ninit M 0\ninit P 0\nreaction R1: 0 -> M rate 2.0\nreaction R2: M -> M + P rate 10.0\n"
    "reaction R3: M -> 0 rate 0.2625\nreaction R4: P -> 0 rate 1.0";

State st(std::initializer_list<Count> c) { return State{std::vector<Count>(c)}; }

std::vector<Diagnostic> diagnostics_of(const std::string& text) {
  try {
    parse_network(text);
  } catch (const ParseError& e) {
    return e.diagnostics();
  }
  return {};
}

}  // namespace

TEST(ParseNetwork, QuadraticBirthDeath) {
  const Network net = parse_network(kQuadratic);
  ASSERT_EQ(net.dim(), 1u);
  ASSERT_EQ(net.num_channels(), 2u);
  EXPECT_EQ(net.channels[0].net_change, std::vector<Count>{2});
  EXPECT_EQ(net.channels[1].net_change, std::vector<Count>{-2});
  EXPECT_EQ(net.channels[1].reactants, std::vector<Count>{2});
  EXPECT_DOUBLE_EQ(net.channels[0].rate_constant, 400.0);
}

TEST(ParseNetwork, GeneExpression) {
  const Network net = parse_network(kGene);
  ASSERT_EQ(net.dim(), 2u);
  ASSERT_EQ(net.num_channels(), 4u);
  const std::vector<std::vector<Count>> zeta = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(net.channels[k].net_change, zeta[k]) << k;
  EXPECT_EQ(net.channels[1].id, "R2");
  EXPECT_EQ(net.channels[1].reactants, (std::vector<Count>{1, 0}));
}

TEST(ParseNetwork, UnknownSpeciesInReaction) {
  const auto d = diagnostics_of("species A\nreaction r: A -> B rate 1");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].line, 2);
  EXPECT_NE(d[0].message.find("unknown species 'B'"), std::string::npos);
}

TEST(ParseNetwork, CollectsAllDiagnostics) {
  const auto d = diagnostics_of(
      "species A A\n"
      "reaction r1: A -> 0 rate -1\n"
      "reaction r2 A -> 0 rate 1\n"
      "bogus line\n"
      "init C 3\n");
  ASSERT_EQ(d.size(), 5u);
  std::vector<int> lines;
  for (const auto& x : d) lines.push_back(x.line);
  EXPECT_NE(std::find(lines.begin(), lines.end(), 1), lines.end());  // duplicate species
  EXPECT_NE(std::find(lines.begin(), lines.end(), 2), lines.end());  // negative rate
  EXPECT_NE(std::find(lines.begin(), lines.end(), 3), lines.end());  // missing colon
  EXPECT_NE(std::find(lines.begin(), lines.end(), 4), lines.end());  // unknown directive
  EXPECT_NE(std::find(lines.begin(), lines.end(), 5), lines.end());  // unknown species in init
}

TEST(ParseNetwork, EmptyFile) {
  const auto d = diagnostics_of("# nothing here\n\n");
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d[0].message, "no species declared");
}

TEST(ParseNetwork, CommentsFusedTermsAndPoissonInit) {
  const Network net = parse_network(
      "species A B  # two species\n"
      "init A poisson(15)\n"
      "reaction dimer: 2A+B -> 3B rate 1e-3 # fused terms\n");
  EXPECT_EQ(net.init[0].kind, InitialCondition::Kind::poisson);
  EXPECT_DOUBLE_EQ(net.init[0].mean, 15.0);
  EXPECT_EQ(net.init[1].kind, InitialCondition::Kind::fixed);
  EXPECT_EQ(net.init[1].count, 0);
  EXPECT_EQ(net.channels[0].reactants, (std::vector<Count>{2, 1}));
  EXPECT_EQ(net.channels[0].net_change, (std::vector<Count>{-2, 2}));
}

TEST(ParseNetwork, NoOpChannelIsWarningNotError) {
  const Network net = parse_network("species G\ninit G 1\nreaction idle: G -> G rate 1\n");
  const auto w = validation_warnings(net);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("idle"), std::string::npos);
}

TEST(Intensity, FallingFactorialWithoutDivision) {
  const Network q = parse_network(kQuadratic);
  EXPECT_DOUBLE_EQ(intensity(q.channels[1], st({5})), 2.0);  // 0.1 * 5 * 4
  EXPECT_DOUBLE_EQ(intensity(q.channels[1], st({1})), 0.0);
  EXPECT_DOUBLE_EQ(intensity(q.channels[0], st({7})), 400.0);
  const Network g = parse_network(kGene);
  EXPECT_DOUBLE_EQ(intensity(g.channels[0], st({0, 0})), 2.0);
  EXPECT_DOUBLE_EQ(intensity(g.channels[0], st({9, 3})), 2.0);
  EXPECT_DOUBLE_EQ(intensity(g.channels[1], st({3, 10})), 30.0);
}

TEST(Intensity, TotalIntensity) {
  Network g = parse_network(kGene);
  EXPECT_DOUBLE_EQ(total_intensity(g, st({3, 10})), 2.0 + 30.0 + 0.7875 + 10.0);
  EXPECT_DOUBLE_EQ(total_intensity(parse_network(kQuadratic), st({5})), 402.0);
  const Network absorbing = parse_network("species A\nreaction d: A -> 0 rate 1\n");
  EXPECT_DOUBLE_EQ(total_intensity(absorbing, st({0})), 0.0);
}

// Any channel with positive intensity keeps every count nonnegative.
TEST(Intensity, PositiveOnlyWhereFiringStaysNonnegative) {
  const Network net = parse_network(
      "species A B C\n"
      "reaction a: 2A + B -> C rate 0.5\n"
      "reaction b: 3C -> A rate 2\n"
      "reaction c: B -> 0 rate 1\n"
      "reaction d: 0 -> B rate 4\n"
      "reaction e: A + C -> 2B rate 1\n");
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<Count> dist(0, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    const State x = st({dist(gen), dist(gen), dist(gen)});
    for (const auto& ch : net.channels) {
      const double a = intensity(ch, x);
      EXPECT_GE(a, 0.0);
      bool stays = true;
      for (std::size_t i = 0; i < 3; ++i) stays = stays && x[i] + ch.net_change[i] >= 0;
      if (!stays) EXPECT_EQ(a, 0.0) << ch.id;
    }
  }
}

TEST(Serialize, RoundTripOnRandomNetworks) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> nspecies(1, 4), nreact(1, 6), mult(0, 3);
  std::uniform_real_distribution<double> rate(0.0, 50.0), mean(0.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = nspecies(gen);
    std::string text = "species";
    for (int i = 0; i < d; ++i) text += " S" + std::to_string(i);
    text += "\n";
    for (int i = 0; i < d; ++i) {
      if (gen() % 2)
        text += "init S" + std::to_string(i) + " poisson(" + std::to_string(mean(gen)) + ")\n";
      else
        text += "init S" + std::to_string(i) + " " + std::to_string(gen() % 20) + "\n";
    }
    const int r = nreact(gen);
    for (int k = 0; k < r; ++k) {
      auto complex = [&] {
        std::string c;
        for (int i = 0; i < d; ++i) {
          const int m = mult(gen);
          if (m == 0) continue;
          if (!c.empty()) c += " + ";
          c += std::to_string(m) + " S" + std::to_string(i);
        }
        return c.empty() ? std::string("0") : c;
      };
      text += "reaction k" + std::to_string(k) + ": " + complex() + " -> " + complex() + " rate " +
              std::to_string(rate(gen)) + "\n";
    }
    const Network a = parse_network(text);
    const std::string canon = serialize_network(a);
    const Network b = parse_network(canon);
    EXPECT_EQ(a, b) << text;
    EXPECT_EQ(serialize_network(b), canon);
  }
}

TEST(Perturbation, ExampleSensitivityLayout) {
  const Network base = parse_network(kGene);
  const auto [nx, nz] = apply_perturbation(base, {"R3", 0.25 + 1.0 / 80.0, 0.25 - 1.0 / 80.0});
  EXPECT_DOUBLE_EQ(nx.channels[2].rate_constant, 0.2625);
  EXPECT_DOUBLE_EQ(nz.channels[2].rate_constant, 0.2375);
  for (std::size_t k : {0u, 1u, 3u}) {
    EXPECT_EQ(nx.channels[k], base.channels[k]);
    EXPECT_EQ(nz.channels[k], base.channels[k]);
  }
  EXPECT_EQ(nx.species, base.species);
  EXPECT_EQ(nx.channels[2].net_change, base.channels[2].net_change);
  EXPECT_TRUE(same_structure(nx, nz));
}

TEST(Perturbation, ZeroSpreadGivesEqualNetworks) {
  const Network base = parse_network(kGene);
  const auto [nx, nz] = apply_perturbation(base, {"R3", 0.3, 0.3});
  EXPECT_EQ(nx, nz);
}

TEST(Perturbation, UnknownChannel) {
  EXPECT_THROW(apply_perturbation(parse_network(kGene), {"R9", 1.0, 1.0}), std::invalid_argument);
}

TEST(SampleInitial, FixedCountsBypassRandomness) {
  const Network g = parse_network(kGene);
  const auto [x, z] = sample_initial(g, InitCoupling::shared, 99, 3);
  EXPECT_EQ(x, st({0, 0}));
  EXPECT_EQ(z, st({0, 0}));
}

TEST(SampleInitial, DegeneratePoisson) {
  const Network n = parse_network("species A\ninit A poisson(0)\nreaction r: A -> 0 rate 1\n");
  for (std::uint32_t p = 0; p < 50; ++p) {
    const auto [x, z] = sample_initial(n, InitCoupling::independent, 5, p);
    EXPECT_EQ(x[0], 0);
    EXPECT_EQ(z[0], 0);
  }
}

TEST(SampleInitial, SharedDuplicatesIndependentDiffers) {
  const Network n = parse_network("species A\ninit A poisson(15)\nreaction r1: 0 -> 2 A rate 400\n");
  int differ = 0;
  const int N = 20000;
  double sx = 0, sz = 0, sxx = 0, szz = 0, sxz = 0;
  for (int p = 0; p < N; ++p) {
    const auto [xs, zs] = sample_initial(n, InitCoupling::shared, 11, static_cast<std::uint32_t>(p));
    EXPECT_EQ(xs, zs);
    const auto [x, z] = sample_initial(n, InitCoupling::independent, 11, static_cast<std::uint32_t>(p));
    EXPECT_EQ(x, xs);  // X draw uses the same stream in both modes
    differ += x != z;
    const double a = static_cast<double>(x[0]), b = static_cast<double>(z[0]);
    sx += a, sz += b, sxx += a * a, szz += b * b, sxz += a * b;
  }
  // Poisson(15): mean 15, variance 15.  SE of the mean = sqrt(15/N).
  const double mx = sx / N, mz = sz / N;
  EXPECT_NEAR(mx, 15.0, 4.0 * std::sqrt(15.0 / N));
  EXPECT_NEAR(mz, 15.0, 4.0 * std::sqrt(15.0 / N));
  EXPECT_NEAR(sxx / N - mx * mx, 15.0, 0.6);
  const double rho = (sxz / N - mx * mz) / std::sqrt((sxx / N - mx * mx) * (szz / N - mz * mz));
  EXPECT_LT(std::abs(rho), 0.03);
  EXPECT_GT(differ, N / 2);
}

TEST(SampleInitial, LargeMeanInversion) {
  // Inversion from the mode keeps working when exp(-mean) underflows.
  double s = 0.0;
  const int N = 4000;
  UniformStream u(StreamKey{3, 0, StreamRole::init, 0, 0});
  for (int i = 0; i < N; ++i) s += static_cast<double>(poisson_from_uniform(1000.0, u.uniform_at(i)));
  EXPECT_NEAR(s / N, 1000.0, 4.0 * std::sqrt(1000.0 / N));
  EXPECT_EQ(poisson_from_uniform(800.0, 0.5), 800);  // median of Poisson(800) is 800
}
