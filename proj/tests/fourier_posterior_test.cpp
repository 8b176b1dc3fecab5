// Copyright 2026 The qpemag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qpemag/fourier_posterior.hpp"
#include "qpemag/grid_oracle.hpp"
#include "qpemag/rng.hpp"
#include "qpemag/validation.hpp"

namespace qpemag {
namespace {

constexpr double kPi = std::numbers::pi;

ClickRecord ideal_click(int u, unsigned k = 0, double phi_ctrl = 0.0) {
    return {u, k, phi_ctrl, 1.0, Contrast::ideal()};
}

std::vector<ClickRecord> random_sequence(RandomStream &rng, std::size_t length) {
    std::vector<ClickRecord> out;
    for (std::size_t i = 0; i < length; ++i) {
        out.push_back(detail::random_click(rng, 5));
    }
    return out;
}

TEST(FlatPrior, IsUniform) {
    const auto post = flat_prior();
    EXPECT_EQ(post.coefficient(0), Complex(kFlatDensity, 0.0));
    for (int j : {-3, -1, 1, 2, 64}) {
        EXPECT_EQ(post.coefficient(j), Complex{});
    }
    EXPECT_EQ(post.clicks_applied(), 0u);
    for (double phi : {0.0, 1.0, 4.0}) {
        EXPECT_DOUBLE_EQ(eval_density(post, phi), kFlatDensity);
    }
    EXPECT_EQ(posterior_sharpness(post), 0.0);
    EXPECT_THROW(phase_estimate(post), NoInformationError);
}

TEST(BayesUpdate, SingleIdealClick) {
    const auto post = bayes_update(flat_prior(), ideal_click(+1));
    EXPECT_DOUBLE_EQ(post.coefficient(0).real(), 1.0 / (2.0 * kPi));
    EXPECT_NEAR(std::abs(post.coefficient(1) - 1.0 / (4.0 * kPi)), 0.0, 1e-17);
    EXPECT_NEAR(std::abs(post.coefficient(-1) - 1.0 / (4.0 * kPi)), 0.0, 1e-17);
    EXPECT_EQ(post.coefficient(2), Complex{});
    EXPECT_EQ(post.clicks_applied(), 1u);
    EXPECT_NEAR(eval_density(post, 0.0), 1.0 / kPi, 1e-15);
    EXPECT_NEAR(posterior_sharpness(post), 0.5, 1e-15);
    EXPECT_NEAR(phase_estimate(post), 0.0, 1e-15);
}

TEST(BayesUpdate, NegativeClickFlipsSign) {
    const auto post = bayes_update(flat_prior(), ideal_click(-1));
    EXPECT_NEAR(std::abs(post.coefficient(1) + 1.0 / (4.0 * kPi)), 0.0, 1e-17);
    EXPECT_NEAR(std::abs(post.coefficient(-1) + 1.0 / (4.0 * kPi)), 0.0, 1e-17);
    EXPECT_NEAR(phase_estimate(post), kPi, 1e-15);
}

TEST(BayesUpdate, ControlPhaseOffsetsTheCosine) {
    const double phi0 = 2.2;
    const auto post = bayes_update(flat_prior(), ideal_click(+1, 0, phi0));
    EXPECT_NEAR(std::abs(post.coefficient(-1) - std::polar(1.0 / (4.0 * kPi), phi0)), 0.0, 4e-17);
    EXPECT_NEAR(phase_estimate(post), phi0, 1e-14);
}

TEST(BayesUpdate, HigherExponentLivesOnCoarseLattice) {
    const auto post = bayes_update(flat_prior(), ideal_click(+1, 3));
    EXPECT_EQ(post.spacing(), 8u);
    EXPECT_EQ(post.coefficient(-1), Complex{});
    EXPECT_NEAR(std::abs(post.coefficient(8) - 1.0 / (4.0 * kPi)), 0.0, 1e-17);
    EXPECT_THROW(phase_estimate(post), NoInformationError);

    const auto refined = bayes_update(post, ideal_click(+1, 1));
    EXPECT_EQ(refined.spacing(), 2u);
    EXPECT_EQ(refined.max_index(), 10);
    EXPECT_EQ(refined.coefficient(1), Complex{});
    EXPECT_NE(refined.coefficient(6), Complex{});
}

TEST(BayesUpdate, ZeroInformationClickIsANoOp) {
    RandomStream rng(3, 0);
    auto post = flat_prior();
    for (const auto &c : random_sequence(rng, 6)) {
        post.update(c);
    }
    const auto before = post;
    post.update(ClickRecord{+1, 2, 0.7, 0.8, Contrast{0.3, 0.3}});
    post.update(ClickRecord{-1, 0, 0.7, 0.0, Contrast{0.9, 0.1}});
    EXPECT_EQ(post.clicks_applied(), before.clicks_applied() + 2);
    EXPECT_EQ(post.max_index(), before.max_index());
    for (std::int64_t j = -before.max_index(); j <= before.max_index(); ++j) {
        EXPECT_EQ(post.coefficient(j), before.coefficient(j));
    }
}

TEST(BayesUpdate, RejectsInvalidClicks) {
    auto post = flat_prior();
    EXPECT_THROW(post.update(ClickRecord{0, 0, 0.0, 1.0, Contrast::ideal()}), std::invalid_argument);
    EXPECT_THROW(post.update(ClickRecord{1, 0, 0.0, 1.5, Contrast::ideal()}), std::invalid_argument);
    EXPECT_THROW(post.update(ClickRecord{1, 0, 0.0, 1.0, Contrast{0.2, 0.4}}), std::invalid_argument);
}

TEST(BayesUpdate, MatchesGridOracle) {
    RandomStream rng(17, 0);
    for (int s = 0; s < 200; ++s) {
        auto post = flat_prior();
        oracle::GridPosterior grid;
        for (const auto &c : random_sequence(rng, 1 + rng.next_below(12))) {
            post.update(c);
            grid.update(c);
        }
        const auto spectrum = grid.spectrum();
        for (std::int64_t j = 0; j <= std::min<std::int64_t>(post.max_index(), 200); ++j) {
            ASSERT_NEAR(std::abs(post.coefficient(j) - spectrum[static_cast<std::size_t>(j)]), 0.0, 1e-9)
                << "sequence " << s << " harmonic " << j;
            ASSERT_NEAR(std::abs(post.coefficient(-j) - std::conj(spectrum[static_cast<std::size_t>(j)])), 0.0, 1e-9);
        }
    }
}

TEST(BayesUpdate, TwentyClickSequenceMatchesGridFirstHarmonic) {
    RandomStream rng(23, 0);
    auto post = flat_prior();
    oracle::GridPosterior grid(8192);
    for (const auto &c : random_sequence(rng, 20)) {
        post.update(c);
        grid.update(c);
    }
    EXPECT_NEAR(std::abs(post.coefficient(-1) - grid.coefficient(-1)), 0.0, 1e-9);
}

TEST(BayesUpdate, InvariantsHoldAfterEveryUpdate) {
    RandomStream rng(29, 0);
    PosteriorInvariantChecker checker;
    for (int s = 0; s < 100; ++s) {
        auto post = flat_prior();
        for (const auto &c : random_sequence(rng, 1 + rng.next_below(15))) {
            post.update(c);
            checker.check(post);
        }
    }
    EXPECT_TRUE(checker.ok()) << checker.summary();
}

TEST(BayesUpdate, PermutationInvariant) {
    RandomStream rng(31, 0);
    for (int s = 0; s < 50; ++s) {
        auto clicks = random_sequence(rng, 8);
        auto forward = flat_prior();
        for (const auto &c : clicks) {
            forward.update(c);
        }
        std::reverse(clicks.begin(), clicks.end());
        std::swap(clicks[1], clicks[5]);
        auto shuffled = flat_prior();
        for (const auto &c : clicks) {
            shuffled.update(c);
        }
        ASSERT_EQ(forward.spacing(), shuffled.spacing());
        for (std::int64_t j = -forward.max_index(); j <= forward.max_index(); ++j) {
            ASSERT_NEAR(std::abs(forward.coefficient(j) - shuffled.coefficient(j)), 0.0, 1e-10);
        }
    }
}

TEST(PhaseEstimate, ArgumentOfFirstHarmonic) {
    RandomStream rng(37, 0);
    for (int s = 0; s < 50; ++s) {
        auto post = flat_prior();
        oracle::GridPosterior grid;
        for (const auto &c : random_sequence(rng, 1 + rng.next_below(10))) {
            post.update(c);
            grid.update(c);
        }
        if (post.coefficient(-1) == Complex{}) {
            continue;
        }
        // Circular mean of the grid density.
        Complex mean{};
        for (std::size_t n = 0; n < grid.size(); ++n) {
            mean += grid.density()[n] * std::polar(1.0, grid.phi(n));
        }
        const double expected = wrap_phase(std::arg(mean));
        const double diff = std::remainder(phase_estimate(post) - expected, kTwoPi);
        EXPECT_NEAR(diff, 0.0, 1e-8);
    }
}

TEST(PhaseEstimate, ImaginaryCoefficientGivesQuarterTurn) {
    // Posterior (1 + cos(phi - pi/2)) / 2pi has b_{-1} = i / 4pi.
    const auto post = bayes_update(flat_prior(), ideal_click(+1, 0, kPi / 2.0));
    EXPECT_NEAR(std::abs(post.coefficient(-1) - Complex(0.0, 1.0 / (4.0 * kPi))), 0.0, 1e-17);
    EXPECT_NEAR(phase_estimate(post), kPi / 2.0, 1e-15);
}

TEST(PosteriorSharpness, ApproachesOneUnderManyClicks) {
    // All +1 ideal clicks at k = 0 with alternating quadratures sharpen a
    // unimodal posterior around 0.
    auto post = flat_prior();
    double previous = 0.0;
    for (int m = 0; m < 200; ++m) {
        post.update(ideal_click(+1, 0, (m % 2) ? 0.3 : -0.3));
        const double s = posterior_sharpness(post);
        EXPECT_GE(s, previous - 1e-15);
        EXPECT_LT(s, 1.0);
        previous = s;
    }
    EXPECT_GT(previous, 0.99);
}

TEST(EvalDensity, IntegratesToOne) {
    RandomStream rng(41, 0);
    for (int s = 0; s < 20; ++s) {
        auto post = flat_prior();
        for (const auto &c : random_sequence(rng, 10)) {
            post.update(c);
        }
        double sum = 0.0;
        for (int n = 0; n < 4096; ++n) {
            sum += eval_density(post, kTwoPi * n / 4096.0);
        }
        EXPECT_NEAR(sum * kTwoPi / 4096.0, 1.0, 1e-9);
    }
}

TEST(EvalDensity, SamplerAgreesWithDirectSum) {
    RandomStream rng(43, 0);
    auto post = flat_prior();
    for (const auto &c : random_sequence(rng, 30)) {
        post.update(c);
    }
    oracle::DensitySampler sampler(256);
    const auto d = sampler(post);
    for (std::size_t n = 0; n < d.size(); n += 17) {
        EXPECT_NEAR(d[n], eval_density(post, kTwoPi * static_cast<double>(n) / 256.0), 1e-12);
    }
}

TEST(GridOracle, IdealClickGivesRaisedCosine) {
    oracle::GridPosterior grid(64);
    grid.update(ideal_click(+1));
    for (std::size_t n = 0; n < grid.size(); ++n) {
        EXPECT_NEAR(grid.density()[n], (1.0 + std::cos(grid.phi(n))) / kTwoPi, 1e-15);
    }
}

TEST(GridOracle, ZeroInformationClickLeavesGrid) {
    oracle::GridPosterior grid(64);
    grid.update(ideal_click(+1, 2, 0.4));
    const std::vector<double> before(grid.density().begin(), grid.density().end());
    grid.update(ClickRecord{-1, 1, 1.0, 0.9, Contrast{0.4, 0.4}});
    for (std::size_t n = 0; n < grid.size(); ++n) {
        EXPECT_NEAR(grid.density()[n], before[n], 1e-15);
    }
}

TEST(GridOracle, RejectsAliasing) {
    oracle::GridPosterior grid(64);
    grid.update(ideal_click(+1, 3));
    EXPECT_THROW(grid.update(ideal_click(+1, 4)), std::invalid_argument);
}

}  // namespace
}  // namespace qpemag
