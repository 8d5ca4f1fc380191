#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "crncouple/streams.hpp"

using namespace crncouple;

namespace {

// Asymptotic Kolmogorov critical value at the 1% level.
double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

// Known-answer vectors from the Random123 distribution.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(DeriveStream, SameKeySameEpochs) {
  const StreamKey key{42, 7, StreamRole::crp_channel, 3, 2};
  PoissonStream a = derive_poisson_stream(key), b = derive_poisson_stream(key);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(a.epoch(i), b.epoch(i));
}

TEST(DeriveStream, PartitionIndexGivesUncorrelatedStreams) {
  std::vector<double> a, b;
  for (std::uint32_t m = 0; m < 10000; ++m) {
    a.push_back(PoissonStream({9, 0, StreamRole::crp_channel, 1, m}).epoch(0));
    b.push_back(PoissonStream({9, 0, StreamRole::crp_channel, 1, m + 10000}).epoch(0));
  }
  EXPECT_LT(std::abs(correlation(a, b)), 0.03);
  // Neighbouring partition indices as well.
  std::vector<double> c(a.begin() + 1, a.end()), d(a.begin(), a.end() - 1);
  EXPECT_LT(std::abs(correlation(c, d)), 0.03);
}

TEST(DeriveStream, PathIndexGivesUncorrelatedStreams) {
  std::vector<double> a, b;
  for (std::uint32_t p = 0; p < 10000; ++p) {
    a.push_back(PoissonStream({9, p, StreamRole::single, 0, 0}).epoch(0));
    b.push_back(PoissonStream({9, p + 1, StreamRole::single, 0, 0}).epoch(0));
  }
  EXPECT_LT(std::abs(correlation(a, b)), 0.03);
  // Same path, different role.
  std::vector<double> c;
  for (std::uint32_t p = 0; p < 10000; ++p) c.push_back(PoissonStream({9, p, StreamRole::single_z, 0, 0}).epoch(0));
  EXPECT_LT(std::abs(correlation(a, c)), 0.03);
}

TEST(DeriveStream, ChannelOutOfRange) {
  EXPECT_THROW(UniformStream({1, 0, StreamRole::single, 1u << 24, 0}), std::out_of_range);
}

TEST(PoissonStream, NextEpochAfter) {
  PoissonStream s({5, 0, StreamRole::single, 0, 0});
  const double e0 = s.epoch(0), e1 = s.epoch(1), e2 = s.epoch(2);
  ASSERT_LT(e0, e1);
  ASSERT_LT(e1, e2);
  EXPECT_EQ(s.next_epoch_after(0.0), e0);
  EXPECT_EQ(s.next_epoch_after(0.5 * (e0 + e1)), e1);
  EXPECT_EQ(s.next_epoch_after(0.5 * (e0 + e1)), e1);
  EXPECT_EQ(s.next_epoch_after(e1), e2);  // strictly greater
  EXPECT_THROW(s.next_epoch_after(-1.0), std::invalid_argument);
}

TEST(PoissonStream, MultiReaderOrderIndependence) {
  const StreamKey key{77, 3, StreamRole::crp_channel, 0, 0};
  PoissonStream fwd(key), rev(key);
  const double near = 2.0, far = 50.0;
  const double f1 = fwd.next_epoch_after(near), f2 = fwd.next_epoch_after(far);
  const double r2 = rev.next_epoch_after(far), r1 = rev.next_epoch_after(near);
  EXPECT_EQ(f1, r1);
  EXPECT_EQ(f2, r2);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(fwd.epoch(i), rev.epoch(i));
}

TEST(PoissonStream, FirstEpochMeanIsOne) {
  double sum = 0.0;
  const int N = 100000;
  for (int p = 0; p < N; ++p) sum += PoissonStream({123, static_cast<std::uint32_t>(p), StreamRole::single, 0, 0}).next_epoch_after(0.0);
  EXPECT_NEAR(sum / N, 1.0, 0.01);
}

// Counts on [0, 5] are Poisson(5): mean 5 and variance 5.
TEST(PoissonStream, CountMoments) {
  const int N = 100000;
  const double T = 5.0;
  std::vector<double> counts(N);
  for (int p = 0; p < N; ++p)
    counts[p] = static_cast<double>(PoissonStream({321, static_cast<std::uint32_t>(p), StreamRole::crp_channel, 2, 0}).count_through(T));
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= N;
  double m2 = 0.0, m4 = 0.0;
  for (double c : counts) {
    const double d = c - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double var = m2 / (N - 1);
  const double se_mean = std::sqrt(var / N);
  const double se_var = std::sqrt((m4 / N - var * var * (N - 3.0) / (N - 1.0)) / N);
  EXPECT_NEAR(mean, T, 3.0 * se_mean);
  EXPECT_NEAR(var, T, 3.0 * se_var);
}

TEST(PoissonStream, GapsAreExponentialKs) {
  PoissonStream s({2718, 0, StreamRole::split_shared, 0, 0});
  std::vector<double> gaps;
  double prev = 0.0;
  for (std::size_t i = 0; i < 10000; ++i) {
    const double e = s.epoch(i);
    gaps.push_back(e - prev);
    prev = e;
  }
  EXPECT_LT(ks_statistic(gaps, [](double x) { return 1.0 - std::exp(-x); }), ks_critical_1pct(gaps.size()));
}

TEST(UniformStream, StableIndexedAccess) {
  UniformStream a({8, 1, StreamRole::crn_uniform, 0, 0});
  const double u3 = a.uniform_at(3);
  EXPECT_EQ(a.uniform_at(3), u3);
  UniformStream b({8, 1, StreamRole::crn_uniform, 0, 0});
  EXPECT_EQ(b.uniform_at(3), u3);  // first access at index 3
  EXPECT_EQ(b.uniform_at(0), a.uniform_at(0));
}

TEST(UniformStream, MeanOverSeeds) {
  double sum = 0.0;
  const int N = 100000;
  for (int p = 0; p < N; ++p) {
    const double u = UniformStream({static_cast<std::uint64_t>(p) * 7919u, 0, StreamRole::crn_uniform, 0, 0}).uniform_at(0);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / N, 0.5, 0.005);
}

TEST(UniformStream, KsAgainstUniform) {
  UniformStream s({31415, 0, StreamRole::crn_uniform, 0, 0});
  std::vector<double> xs;
  for (std::size_t i = 0; i < 10000; ++i) xs.push_back(s.uniform_at(i));
  EXPECT_LT(ks_statistic(xs, [](double x) { return x; }), ks_critical_1pct(xs.size()));
}
