#include "fbmch/error.hpp"
#include "fbmch/kernel.hpp"
#include "fbmch/malliavin.hpp"
#include "fbmch/noise.hpp"
#include "fbmch/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fbmch;

namespace {

ModelConfig small_config(double sigma = 0.1) {
    ModelConfig c;
    c.n_modes = 8;
    c.n_grid = 16;
    c.n_time = 32;
    c.T = 0.5;
    c.sigma = sigma;
    c.cutoff_n = 5;
    return c;
}

ModelConfig linear_config(double sigma = 0.1) {
    ModelConfig c = small_config(sigma);
    c.f_coeffs = {0.0, 0.0, 0.0, 0.0};
    c.allow_nonconforming = true;
    return c;
}

NoiseBundle bundle_for(const ModelConfig& c, std::uint64_t index = 0) {
    return NoiseSampler(c.noise()).sample_bundle(20240917, index);
}

// D_{y,s} u(x, t) from a slice.
double slice_value(const MalliavinSlice& slice, double x, double y) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < slice.psi.rows(); ++k) {
        for (Eigen::Index j = 0; j < slice.psi.cols(); ++j) {
            v += basis_eval(static_cast<std::size_t>(k), x) * slice.psi(k, j) * basis_eval(static_cast<std::size_t>(j), y);
        }
    }
    return v;
}

}  // namespace

TEST(Gcal, MinusOneAtZeroState) {
    ModelConfig c = small_config(0.0);
    c.u0 = {0.0};
    const Solver s(c);
    const MalliavinEngine e(s);
    const Eigen::MatrixXd g = e.gcal_eval(s.solve(bundle_for(c)));
    EXPECT_EQ(g.maxCoeff(), -1.0);
    EXPECT_EQ(g.minCoeff(), -1.0);
}

TEST(Gcal, BoundedAndZeroBeyondCutoff) {
    ModelConfig c = small_config(0.0);
    c.cutoff_n = 2;
    c.u0 = {4.0};
    const Solver s(c);
    const MalliavinEngine e(s);
    EXPECT_EQ(e.gcal_eval(s.solve(bundle_for(c))).cwiseAbs().maxCoeff(), 0.0);

    ModelConfig r = small_config(2.0);
    r.cutoff_n = 1;
    const Solver sr(r);
    const MalliavinEngine er(sr);
    double bound = 0.0;
    for (double u = -3.0; u <= 3.0; u += 1e-4) bound = std::max(bound, std::abs(nonlinearity_eval(r, u).df));
    EXPECT_LE(er.gcal_eval(sr.solve(bundle_for(r, 3))).cwiseAbs().maxCoeff(), bound * (1.0 + 1e-9));
}

TEST(MalliavinSolve, ZeroSigmaGivesZero) {
    const ModelConfig c = small_config(0.0);
    const Solver s(c);
    const MalliavinEngine e(s);
    const TrajectoryRecord tr = s.solve(bundle_for(c));
    EXPECT_EQ(e.solve(tr, 0.1, 32).psi.cwiseAbs().maxCoeff(), 0.0);
    const MalliavinGrid g = e.norm_at(tr, kPi / 2.0, 0.5);
    EXPECT_EQ(g.squared_norm, 0.0);
    EXPECT_EQ(g.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MalliavinSolve, SourceAfterTargetIsEmpty) {
    const ModelConfig c = small_config();
    const Solver s(c);
    const MalliavinEngine e(s);
    const MalliavinSlice slice = e.solve(s.solve(bundle_for(c)), 0.3, 16);
    EXPECT_EQ(slice.psi.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(slice.history.empty());
}

TEST(MalliavinSolve, LinearCaseMatchesClosedForm) {
    const ModelConfig c = linear_config();
    const Solver s(c);
    const MalliavinEngine e(s);
    const TrajectoryRecord tr = s.solve(bundle_for(c));
    const HurstParams p(c.H);
    for (double sv : {0.01, 0.2, 0.47, 0.499}) {
        const MalliavinSlice slice = e.solve(tr, sv, 32);
        for (double x : {0.0, 1.1}) {
            for (double y : {0.4, kPi}) {
                const double ref = c.sigma * khstar_source(x, 0.5, 0.0, y, sv, p, 8);
                EXPECT_NEAR(slice_value(slice, x, y), ref, 1e-8 * std::abs(ref)) << sv << " " << x << " " << y;
            }
        }
    }
}

TEST(MalliavinNorm, LinearCaseMatchesHnorm) {
    const ModelConfig c = linear_config();
    const Solver s(c);
    const MalliavinEngine e(s);
    const MalliavinGrid g = e.norm_at(s.solve(bundle_for(c)), kPi / 2.0, 0.5);
    const double ref = c.sigma * c.sigma * hnorm_green(kPi / 2.0, 0.5, 0.0, HurstParams(c.H), 8);
    EXPECT_NEAR(g.squared_norm / ref, 1.0, 1e-3);
}

TEST(MalliavinNorm, RestrictedMonotoneInWindow) {
    const ModelConfig c = small_config();
    const Solver s(c);
    const MalliavinEngine e(s);
    const MalliavinGrid g = e.norm_at(s.solve(bundle_for(c)), kPi / 2.0, 0.5);
    ASSERT_EQ(g.eps.size(), g.restricted.size());
    for (std::size_t i = 1; i < g.eps.size(); ++i) {
        EXPECT_LT(g.eps[i], g.eps[i - 1]);
        EXPECT_LE(g.restricted[i], g.restricted[i - 1]);
    }
    EXPECT_GT(g.restricted.back(), 0.0);
    EXPECT_LE(g.restricted.front(), g.squared_norm);
}

TEST(MalliavinNorm, SigmaLinearity) {
    const ModelConfig c = small_config();
    ModelConfig c2 = c;
    c2.sigma = 2.0 * c.sigma;
    const Solver s(c), s2(c2);
    const MalliavinEngine e(s), e2(s2);
    const TrajectoryRecord tr = s.solve(bundle_for(c));
    const SourcePlan plan = e.plan(0.5);
    const MalliavinGrid g = e.norm_at(tr, kPi / 2.0, plan);
    const MalliavinGrid g2 = e2.norm_at(tr, kPi / 2.0, plan);
    EXPECT_NEAR(g2.squared_norm / g.squared_norm, 4.0, 4e-12);
    EXPECT_LE((g2.values - 2.0 * g.values).cwiseAbs().maxCoeff(), 1e-12 * g.values.cwiseAbs().maxCoeff());
}

TEST(MalliavinNorm, Deterministic) {
    const ModelConfig c = small_config();
    const Solver s(c);
    const MalliavinEngine e(s);
    const TrajectoryRecord tr = s.solve(bundle_for(c));
    const MalliavinGrid a = e.norm_at(tr, 1.0, 0.5);
    const MalliavinGrid b = e.norm_at(tr, 1.0, 0.5);
    EXPECT_EQ(a.squared_norm, b.squared_norm);
    EXPECT_TRUE(a.values == b.values);
    std::ostringstream os;
    a.write_csv(os);
    EXPECT_FALSE(os.str().empty());
}

namespace {

struct FdCase {
    ModelConfig config;
    NoiseSampler sampler;
    NoiseBundle bundle;
    Solver solver;
    std::size_t mode = 1;
    std::size_t cell = 40;
    std::size_t target = 24;
    double x = 0.9;

    FdCase()
        : config(small_config()),
          sampler(config.noise()),
          bundle(sampler.sample_bundle(20240917, 5)),
          solver(config) {}

    double bumped(double amount) const {
        NoiseBundle b = bundle;
        b.white_cells(static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(cell)) += amount;
        sampler.rebuild_mode(b, mode);
        return solver.solve(b).state(target).evaluate(x);
    }

    double analytic(ForcingRule rule) const {
        MalliavinOptions opt;
        opt.forcing = rule;
        const MalliavinEngine e(solver, opt);
        const double s = (static_cast<double>(cell) + 0.5) * sampler.cell_width();
        const MalliavinSlice slice = e.solve(solver.solve(bundle), s, target);
        double v = 0.0;
        for (std::size_t k = 0; k < config.n_modes; ++k) {
            v += basis_eval(k, x) * slice.psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(mode));
        }
        return v;
    }
};

}  // namespace

TEST(MalliavinFd, ConsistentForcingIsTheDiscreteDerivative) {
    const FdCase fc;
    const double d = fc.analytic(ForcingRule::solver_consistent);
    const double base = fc.bumped(0.0);
    std::vector<double> err;
    for (double h : {1e-2, 1e-3}) err.push_back(std::abs((fc.bumped(h) - base) / h - d));
    const double order = std::log10(err[0] / err[1]);
    EXPECT_GE(order, 1.0 - 0.05) << order;
    const double central = (fc.bumped(1e-4) - fc.bumped(-1e-4)) / 2e-4;
    EXPECT_NEAR(central / d, 1.0, 1e-6);
}

TEST(MalliavinFd, ExactForcingWithinFivePercent) {
    const FdCase fc;
    const double d = fc.analytic(ForcingRule::exact);
    const double central = (fc.bumped(1e-4) - fc.bumped(-1e-4)) / 2e-4;
    EXPECT_LE(std::abs(central - d), 0.05 * std::abs(d));
}
