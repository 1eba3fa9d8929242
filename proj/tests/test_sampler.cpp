#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isodyn/pipeline.hpp"
#include "isodyn/sampler.hpp"
#include "isodyn/synth.hpp"
#include "toy.hpp"

using namespace isodyn;
using namespace isodyn::toy;

namespace {

struct MomentCheck {
    double mean;
    double se;
};

MomentCheck sample_moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

TEST(FoldedNormal, ZeroMeanMomentsMatchClosedForm) {
    Rng rng(7, 0);
    const double s = 2.5;
    std::vector<double> x(100000);
    for (double& v : x) v = folded_normal::sample(0.0, s, rng);
    const auto m = sample_moments(x);
    EXPECT_NEAR(m.mean, s * std::sqrt(2.0 / kPi), 3.0 * m.se);
    EXPECT_NEAR(folded_normal::mean(0.0, s), s * std::sqrt(2.0 / kPi), 1e-15);
}

TEST(FoldedNormal, ShiftedMomentsAndDensity) {
    Rng rng(8, 0);
    for (double mu : {0.3, 1.0, 4.0}) {
        std::vector<double> x(100000);
        for (double& v : x) v = folded_normal::sample(mu, 1.0, rng);
        const auto m = sample_moments(x);
        EXPECT_NEAR(m.mean, folded_normal::mean(mu, 1.0), 3.0 * m.se) << mu;
        // density integrates to one
        double total = 0.0;
        for (int i = 0; i < 20000; ++i) total += 1e-3 * std::exp(folded_normal::log_pdf((i + 0.5) * 1e-3, mu, 1.0));
        EXPECT_NEAR(total, 1.0, 1e-6);
    }
    EXPECT_DOUBLE_EQ(folded_normal::log_pdf(0.7, 1.3, 0.4), folded_normal::log_pdf(1.3, 0.7, 0.4));
}

TEST(ProposeRho, ZeroIncrementsStayMonotoneAndRatioVanishes) {
    Rng rng(1, 1);
    const MassDensityVector flat({5.0, 5.0, 5.0, 5.0});
    const std::vector<double> var(4, 0.25);
    for (int i = 0; i < 1000; ++i) {
        const auto p = propose_rho(flat, var, rng);
        for (std::size_t h = 1; h < p.value.size(); ++h) ASSERT_LE(p.value[h], p.value[h - 1]);
        ASSERT_EQ(p.log_q_ratio, 0.0);
    }
}

TEST(FoldedLogRatio, KernelIsSymmetricForArbitraryIncrements) {
    Rng rng(9, 1);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> a(3), b(3), var(3);
        for (int k = 0; k < 3; ++k) {
            a[k] = 5.0 * rng.uniform();
            b[k] = 5.0 * rng.uniform();
            var[k] = 0.01 + 4.0 * rng.uniform();
        }
        ASSERT_NEAR(folded_log_ratio(a, b, var), 0.0, 1e-12);
    }
}

TEST(ProposeRho, IncrementMomentsMatchFoldedNormal) {
    Rng rng(2, 1);
    const MassDensityVector cur({10.0, 6.0, 5.5, 1.0});
    const std::vector<double> var{4.0, 1.0, 0.25, 9.0};
    const auto d = rho_increments(cur);
    std::vector<std::vector<double>> draws(4, std::vector<double>(100000));
    for (std::size_t i = 0; i < 100000; ++i) {
        const auto inc = rho_increments(propose_rho(cur, var, rng).value);
        for (int h = 0; h < 4; ++h) draws[h][i] = inc[h];
    }
    for (int h = 0; h < 4; ++h) {
        const auto m = sample_moments(draws[h]);
        EXPECT_NEAR(m.mean, folded_normal::mean(d[h], std::sqrt(var[h])), 3.0 * m.se) << h;
    }
}

TEST(ProposeF, ConstantOnesRemainValidAndMonotone) {
    Rng rng(3, 2);
    const PhaseDensityVector ones({1.0, 1.0, 1.0, 1.0});
    const std::vector<double> var(3, 0.09);
    for (int i = 0; i < 2000; ++i) {
        const auto p = propose_f(ones, var, rng);
        ASSERT_EQ(p.value[3], 1.0);
        for (std::size_t j = 1; j < p.value.size(); ++j) ASSERT_LE(p.value[j - 1], p.value[j]);
        for (double x : p.value.values()) ASSERT_GE(x, 0.0);
    }
}

TEST(ProposeF, IncrementMomentsMatchFoldedNormal) {
    Rng rng(4, 2);
    const PhaseDensityVector cur({0.4, 0.55, 0.6, 1.0});
    const std::vector<double> var{1e-4, 4e-4, 2.5e-3};
    const auto d = f_increments(cur);
    std::vector<std::vector<double>> draws(3, std::vector<double>(100000));
    for (std::size_t i = 0; i < 100000; ++i) {
        const auto inc = f_increments(propose_f(cur, var, rng).value);
        for (int j = 0; j < 3; ++j) draws[j][i] = inc[j];
    }
    for (int j = 0; j < 3; ++j) {
        const auto m = sample_moments(draws[j]);
        EXPECT_NEAR(m.mean, folded_normal::mean(d[j], std::sqrt(var[j])), 3.0 * m.se) << j;
    }
}

TEST(ProposeF, ClampedDrawsAreMarkedOutOfSupport) {
    Rng rng(6, 2);
    const PhaseDensityVector cur({0.05, 0.3, 1.0});
    const std::vector<double> var{0.04, 0.25};
    int outside = 0;
    for (int i = 0; i < 5000; ++i) {
        const auto p = propose_f(cur, var, rng);
        if (!p.in_support) {
            ++outside;
            EXPECT_EQ(p.value[0], 0.0);
        }
        EXPECT_EQ(p.log_q_ratio, 0.0);
    }
    EXPECT_GT(outside, 500);
    EXPECT_LT(outside, 4500);
}

TEST(Metropolis, AcceptanceRule) {
    Rng rng(5, 3);
    for (int i = 0; i < 10000; ++i) {
        ASSERT_FALSE(metropolis_accept(kNegInf, rng));
        ASSERT_TRUE(metropolis_accept(0.0, rng));
        ASSERT_FALSE(metropolis_accept(std::nan(""), rng));
    }
    int hits = 0;
    for (int i = 0; i < 100000; ++i) hits += metropolis_accept(std::log(0.3), rng);
    EXPECT_NEAR(hits / 1e5, 0.3, 3.0 * std::sqrt(0.21 / 1e5));
}

TEST(MhStep, IdenticalProposalAlwaysAcceptedAndInfeasibleNever) {
    const Toy toy;
    const ModelState start(PhaseDensityVector({1.0}), MassDensityVector(toy.truth), toy.rgrid, toy.egrid);
    const PosteriorModel model(toy.data, toy.prior, toy.rgrid, toy.egrid);
    ChainStreams rng(11);

    auto pos = ChainPosition::start(model, start);
    const ProposalScales zero{{0.0, 0.0}, {}};
    for (int i = 0; i < 50; ++i) {
        const auto out = mh_step(model, pos, UpdateBlock::rho, zero, rng);
        ASSERT_TRUE(out.accepted);
        ASSERT_EQ(pos.state, start);
    }

    // A prior box pinned at the current state rejects every non-trivial move.
    const PosteriorModel pinned(toy.data, PriorSpec({4.0e7, 1.0e7}, {4.0e7 * (1 + 1e-12), 1.0e7 * (1 + 1e-12)}),
                                toy.rgrid, toy.egrid);
    auto p2 = ChainPosition::start(pinned, start);
    const ProposalScales wide{{1e12, 1e12}, {}};
    for (int i = 0; i < 200; ++i) {
        const auto out = mh_step(pinned, p2, UpdateBlock::rho, wide, rng);
        ASSERT_FALSE(out.accepted);
        ASSERT_EQ(p2.state, start);
    }
}

TEST(MhStep, OutOfSupportPhaseDensityIsNeverAccepted) {
    const Toy toy;
    const EnergyGrid two(2);
    const PosteriorModel model(toy.data, toy.prior, toy.rgrid, two);
    const ModelState start(PhaseDensityVector({0.5, 1.0}), MassDensityVector(toy.truth), toy.rgrid, two);
    ChainStreams rng(12);
    auto pos = ChainPosition::start(model, start);
    const ProposalScales scales{{0.0, 0.0}, {0.5}};
    int accepted = 0;
    for (int i = 0; i < 4000; ++i) {
        accepted += mh_step(model, pos, UpdateBlock::f, scales, rng).accepted;
        ASSERT_GT(pos.state.f[0], 0.0);
    }
    EXPECT_GT(accepted, 100);
}

TEST(AdaptScales, ConstantHistoryGivesFloor) {
    RunningVariance h(3);
    for (int i = 0; i < 50; ++i) h.push(std::vector<double>{1.0, 2.0, 3.0});
    for (double v : adapt_scales(h, 1e-6)) EXPECT_EQ(v, 1e-6);
}

TEST(AdaptScales, TwoPointHistory) {
    RunningVariance h(2);
    h.push(std::vector<double>{1.5, -2.0});
    h.push(std::vector<double>{4.0, 7.0});
    const auto v = adapt_scales(h, 0.0);
    EXPECT_DOUBLE_EQ(v[0], 2.5 * 2.5 / 2.0);
    EXPECT_DOUBLE_EQ(v[1], 9.0 * 9.0 / 2.0);
    RunningVariance one(1);
    one.push(std::vector<double>{1.0});
    EXPECT_THROW(adapt_scales(one, 0.0), std::invalid_argument);
}

TEST(AdaptScales, MatchesTwoPassVariance) {
    Rng rng(9, 0);
    const int dim = 5, n = 5000;
    std::vector<std::vector<double>> hist(n, std::vector<double>(dim));
    RunningVariance rv(dim);
    for (auto& row : hist) {
        for (int i = 0; i < dim; ++i) row[i] = 1e6 + (i + 1) * 37.0 * rng.normal();
        rv.push(row);
    }
    const auto got = adapt_scales(rv, 0.0);
    for (int i = 0; i < dim; ++i) {
        double mean = 0.0;
        for (const auto& row : hist) mean += row[i];
        mean /= n;
        double ss = 0.0;
        for (const auto& row : hist) ss += (row[i] - mean) * (row[i] - mean);
        const double expected = ss / (n - 1);
        EXPECT_NEAR(got[i], expected, 1e-12 * expected);
    }
}

TEST(Hpd, UniformNormalAndConstantSamples) {
    Rng rng(10, 0);
    std::vector<double> u(100000), z(100000);
    for (double& x : u) x = rng.uniform();
    for (double& x : z) x = rng.normal();
    const auto hu = hpd(u);
    EXPECT_NEAR(hu.hi - hu.lo, 0.95, 0.02);
    const auto hz = hpd(z);
    EXPECT_NEAR(hz.lo, -1.96, 0.05);
    EXPECT_NEAR(hz.hi, 1.96, 0.05);
    const double inside =
        std::count_if(z.begin(), z.end(), [&](double x) { return x >= hz.lo && x <= hz.hi; }) / 1e5;
    EXPECT_NEAR(inside, 0.95, 0.01);

    const std::vector<double> c(500, 3.25);
    const auto hc = hpd(c);
    EXPECT_EQ(hc.lo, 3.25);
    EXPECT_EQ(hc.hi, 3.25);
    EXPECT_THROW(hpd(std::vector<double>(99, 1.0)), DomainError);
}

TEST(Hpd, TiesGoToLowerStart) {
    std::vector<double> x;
    for (int i = 0; i < 200; ++i) x.push_back(i);
    const auto h = hpd(x, 0.5);
    EXPECT_EQ(h.lo, 0.0);
    EXPECT_EQ(h.hi, 99.0);
}

TEST(ModalState, SingleAppendAndTies) {
    const Toy toy;
    const ModelState a(PhaseDensityVector({1.0}), MassDensityVector(toy.truth), toy.rgrid, toy.egrid);
    const ModelState b(PhaseDensityVector({1.0}), MassDensityVector({3.0e7, 1.0e7}), toy.rgrid, toy.egrid);
    ChainTrace t;
    EXPECT_THROW(modal_state(t), DomainError);
    t.push(a, -10.0, 0, toy.prior);
    EXPECT_EQ(modal_state(t), a);
    t.push(b, -10.0, 1, toy.prior);
    EXPECT_EQ(modal_state(t), a);
    t.push(b, -9.0, 2, toy.prior);
    EXPECT_EQ(modal_index(t), 2u);
}

TEST(ChainTrace, RejectsStatesOutsidePriorOrNonFinite) {
    const Toy toy;
    const ModelState out(PhaseDensityVector({1.0}), MassDensityVector({2.0e8, 1.0e7}), toy.rgrid, toy.egrid);
    const ModelState in(PhaseDensityVector({1.0}), MassDensityVector(toy.truth), toy.rgrid, toy.egrid);
    ChainTrace t;
    EXPECT_THROW(t.push(out, -1.0, 0, toy.prior), std::logic_error);
    EXPECT_THROW(t.push(in, kNegInf, 0, toy.prior), std::logic_error);
}

TEST(ChainConfig, Validation) {
    auto c = ChainConfig::with_steps(1000);
    EXPECT_EQ(c.t0, 100);
    EXPECT_EQ(c.burn_in, 250);
    EXPECT_NO_THROW(c.validate());
    c.t0 = 1000;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ChainConfig::with_steps(1000);
    c.burn_in = 1000;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

namespace {

const ChainTrace& toy_trace() {
    static const ChainTrace trace = run_toy_chain(Toy{}, 100000, 77);
    return trace;
}

}  // namespace

TEST(ToyPosterior, ChainMarginalsMatchGridEnumeration) {
    const Toy toy;
    const auto& trace = toy_trace();
    EXPECT_GT(trace.acceptance_rate, 0.0);
    EXPECT_LT(trace.acceptance_rate, 1.0);
    const int n = 200, bins = 20;
    const auto grid = enumerate(toy, n);
    for (int axis = 0; axis < 2; ++axis) {
        const auto p = marginal(grid, axis, bins);
        const auto q = histogram(trace, axis, toy.prior.rho_lo[axis], toy.prior.rho_hi[axis], bins);
        double tv = 0.0;
        for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(p[b] - q[b]);
        EXPECT_LT(tv, 0.05) << "rho_" << axis + 1;
    }
}

TEST(ToyPosterior, ModalStateMatchesGridMap) {
    const Toy toy;
    const auto& trace = toy_trace();
    const auto grid = enumerate(toy, 200);
    const auto best = std::max_element(grid.lp.begin(), grid.lp.end()) - grid.lp.begin();
    const double map1 = grid.r1[best / grid.n], map2 = grid.r2[best % grid.n];
    const auto mode = modal_state(trace);
    const double cell1 = grid.r1[1] - grid.r1[0], cell2 = grid.r2[1] - grid.r2[0];
    EXPECT_NEAR(mode.rho[0], map1, 3 * cell1);
    EXPECT_NEAR(mode.rho[1], map2, 3 * cell2);
    EXPECT_GE(trace.log_posts[modal_index(trace)], grid.lp[best] - 0.05);
}

TEST(ToyPosterior, DetailedBalanceBetweenRegions) {
    // Fixed-scale kernel so the chain is exactly Markov; regions split on rho_1.
    const Toy toy;
    const PosteriorModel model(toy.data, toy.prior, toy.rgrid, toy.egrid);
    auto pos = ChainPosition::start(
        model, ModelState(PhaseDensityVector({1.0}), MassDensityVector(toy.truth), toy.rgrid, toy.egrid));
    const auto& t = toy_trace();
    std::vector<double> r1;
    for (const auto& s : t.states) r1.push_back(s.rho[0]);
    std::sort(r1.begin(), r1.end());
    const double c1 = r1[r1.size() / 3], c2 = r1[2 * r1.size() / 3];
    auto region = [&](const ModelState& s) { return s.rho[0] < c1 ? 0 : (s.rho[0] < c2 ? 1 : 2); };

    const ProposalScales scales{{std::pow(0.5 * (c2 - c1), 2), std::pow(0.5 * (c2 - c1), 2)}, {}};
    ChainStreams rng(123);
    long flow[3][3] = {};
    int cur = region(pos.state);
    for (int i = 0; i < 60000; ++i) {
        mh_step(model, pos, UpdateBlock::rho, scales, rng);
        const int next = region(pos.state);
        ++flow[cur][next];
        cur = next;
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            const double ab = flow[a][b], ba = flow[b][a];
            EXPECT_LE(std::abs(ab - ba), 3.0 * std::sqrt(ab + ba) + 1.0) << a << "<->" << b;
        }
    EXPECT_GT(flow[0][2] + flow[2][0], 0);
}

TEST(RunChain, DeterministicGivenSeed) {
    const Toy toy;
    auto cfg = ChainConfig::with_steps(3000, 5);
    const PosteriorModel model(toy.data, toy.prior, toy.rgrid, toy.egrid);
    cfg.seed_profile = {4.0e7, 5.0, 0.5, 1.0};
    const auto a = run_chain(model, cfg);
    const auto b = run_chain(model, cfg);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.log_posts, b.log_posts);
    cfg.seed = 6;
    EXPECT_NE(run_chain(model, cfg).log_posts, a.log_posts);
    for (double lp : a.log_posts) EXPECT_TRUE(std::isfinite(lp));
}

TEST(RunChain, SyntheticFitAcceptanceStrictlyBetweenZeroAndOne) {
    const PlummerSpec spec;
    const Dataset d = sample_iso(spec, 270, {20.0}, 3);
    const RadialGrid rg(25.0 / 19, 19);
    const EnergyGrid eg(9);
    const auto cfg = ChainConfig::with_steps(600, 1);
    const auto prior = PriorSpec::around(seed_profile(cfg.seed_profile, rg).values(), 1e-5, 1e2);
    const auto t = run_chain(d, prior, rg, eg, cfg);
    EXPECT_GT(t.acceptance_rate, 0.0);
    EXPECT_LT(t.acceptance_rate, 1.0);
    EXPECT_EQ(t.size(), 600u - 150u);
    for (const auto& s : t.states) EXPECT_TRUE(prior.contains(s.rho));
}

TEST(RunChain, ReferenceIsotropicFitCoversBinnedTruth) {
    const io::RunConfig cfg = io::parse_config("");
    const Dataset d = sample_iso(cfg.plummer, cfg.n_iso, {cfg.sigma_err}, derive_seed(1, 100, 0), cfg.generator_r_max);
    const auto r = isodyn::fit(d, cfg, derive_seed(1, 0, 0));
    const auto truth = binned_plummer_density(cfg.plummer, cfg.rgrid());
    int inside = 0;
    for (int h = 0; h < cfg.n_x; ++h) {
        const auto& row = r.summary[cfg.n_e + h];
        inside += truth[h] >= row.interval.lo && truth[h] <= row.interval.hi;
    }
    EXPECT_GE(inside, 0.8 * cfg.n_x) << inside << " of " << cfg.n_x << " bins cover the truth";
}
