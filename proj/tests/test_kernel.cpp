#include "fbmch/error.hpp"
#include "fbmch/kernel.hpp"
#include "fbmch/quadrature.hpp"
#include "fbmch/spectral.hpp"
#include "oracle_values.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fbmch;

namespace {
const HurstParams P075(0.75);
}

TEST(Gamma, Values) {
    EXPECT_DOUBLE_EQ(gamma_fn(1.0), 1.0);
    EXPECT_NEAR(gamma_fn(0.5) / std::sqrt(kPi), 1.0, 1e-12);
    EXPECT_NEAR(gamma_fn(0.25) / oracle::gamma_quarter, 1.0, 1e-12);
    EXPECT_THROW(gamma_fn(0.0), DomainError);
    EXPECT_THROW(gamma_fn(-1.5), DomainError);
}

TEST(Hurst, ConstantsMatchOracle) {
    const struct {
        double H, c1, c2;
    } rows[] = {{0.6, oracle::c1_060, oracle::c2_060},
                {0.75, oracle::c1_075, oracle::c2_075},
                {0.9, oracle::c1_090, oracle::c2_090}};
    for (const auto& r : rows) {
        const HurstParams p(r.H);
        EXPECT_NEAR(p.c1() / r.c1, 1.0, 1e-12) << r.H;
        EXPECT_NEAR(p.c2() / r.c2, 1.0, 1e-12) << r.H;
    }
}

TEST(Hurst, FinitePositiveAndBoundaryLimit) {
    for (double H = 0.51; H < 0.995; H += 0.02) {
        const HurstParams p(H);
        EXPECT_TRUE(std::isfinite(p.c1()) && p.c1() > 0.0) << H;
        EXPECT_TRUE(std::isfinite(p.c2()) && p.c2() > 0.0) << H;
    }
    EXPECT_NEAR(HurstParams(0.501).c2(), 1.0, 1e-3);
    EXPECT_NEAR(HurstParams(0.501).c2(), oracle::c2_0501, 1e-12);
}

TEST(Hurst, OutOfDomainRejected) {
    EXPECT_THROW(HurstParams(0.5), DomainError);
    EXPECT_THROW(HurstParams(1.0), DomainError);
    EXPECT_THROW(HurstParams(0.3), DomainError);
}

TEST(Covariance, Examples) {
    EXPECT_NEAR(covariance_R(0.7, 0.7, P075), std::pow(0.7, 1.5), 1e-15);
    EXPECT_EQ(covariance_R(0.7, 0.0, P075), 0.0);
    EXPECT_NEAR(covariance_R(2.0, 1.0, P075), std::sqrt(2.0), 1e-14);
}

TEST(Kernel, OracleValues) {
    EXPECT_NEAR(kernel_K(1.0, 0.5, P075), oracle::K_1_half, 1e-9);
    EXPECT_NEAR(kernel_K(2.0, 1.0, P075), oracle::K_2_1, 1e-9);
}

TEST(Kernel, TwoFormsAgree) {
    for (double H : {0.55, 0.6, 0.75, 0.9, 0.97}) {
        const HurstParams p(H);
        for (auto [t, s] : {std::pair{1.0, 0.5}, std::pair{2.0, 1.0}, std::pair{1.0, 1e-3}, std::pair{0.3, 0.29}}) {
            const double a = kernel_K(t, s, p);
            const double b = kernel_K_c2form(t, s, p);
            EXPECT_NEAR(a, b, std::max(1e-8, 10.0 * kDefaultQuadTol * std::abs(a))) << H << " " << t << " " << s;
        }
    }
    EXPECT_NEAR(kernel_K(1.0, 0.5, P075), kernel_K_c2form(1.0, 0.5, P075), 1e-8);
}

TEST(Kernel, VanishesTowardDiagonal) {
    double prev = kernel_K(1.0, 1.0 - 1e-2, P075);
    for (double d : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const double v = kernel_K(1.0, 1.0 - d, P075);
        EXPECT_LT(v, prev);
        prev = v;
    }
    // K(t, t - d) ~ d^{H - 1/2}.
    const double slope = std::log(kernel_K(1.0, 1.0 - 1e-4, P075) / kernel_K(1.0, 1.0 - 1e-8, P075)) / std::log(1e4);
    EXPECT_NEAR(slope, 0.25, 0.01);
}

TEST(Kernel, DomainErrors) {
    EXPECT_THROW(kernel_K(1.0, 1.0, P075), DomainError);
    EXPECT_THROW(kernel_K(1.0, 0.0, P075), DomainError);
    EXPECT_THROW(kernel_dK_dt(1.0, 1.5, P075), DomainError);
}

TEST(Kernel, FactorizationReproducesCovariance) {
    // tau = u^2 absorbs the tau^{1-2H} product singularity at 0.
    auto f = [](double u) { return 2.0 * u * kernel_K(2.0, u * u, P075) * kernel_K(1.0, u * u, P075); };
    const double v = integrate_graded(f, 1e-300, 1.0, -1.0, 1e-10, 1e-10).value;
    EXPECT_NEAR(v, std::sqrt(2.0), 1e-5);
}

namespace {
// Observed order of the midpoint factorization sum against R(2, 1) between n = 32 and n = 512.
double factorization_order(const HurstParams& p) {
    std::vector<double> err;
    for (std::size_t n : {32u, 512u}) {
        const double ds = 1.0 / static_cast<double>(n);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = (static_cast<double>(j) + 0.5) * ds;
            sum += kernel_K(2.0, s, p) * kernel_K(1.0, s, p) * ds;
        }
        err.push_back(std::abs(sum - covariance_R(2.0, 1.0, p)));
    }
    return std::log(err[0] / err[1]) / std::log(16.0);
}
}  // namespace

// The product singularity s^{1-2H} at s = 0 limits the midpoint sum to order 2 - 2H.
TEST(Kernel, DiscreteFactorizationConverges) {
    EXPECT_GE(factorization_order(HurstParams(0.6)), 0.5);
    EXPECT_NEAR(factorization_order(P075), 0.5, 0.02);
}

TEST(KernelTable, LowerTriangularAndCsvRoundTrip) {
    const KernelTable table = KernelTable::build(P075, {0.25, 0.5, 1.0}, {0.1, 0.3, 0.6});
    EXPECT_EQ(table.K_values(0, 1), 0.0);
    EXPECT_EQ(table.K_values(1, 2), 0.0);
    EXPECT_GT(table.K_values(2, 2), 0.0);
    std::stringstream ss;
    table.write_csv(ss);
    const KernelTable back = KernelTable::read_csv(ss);
    EXPECT_EQ(back.t_grid, table.t_grid);
    EXPECT_EQ(back.s_grid, table.s_grid);
    EXPECT_EQ(back.H, table.H);
    EXPECT_TRUE(back.K_values == table.K_values);
    EXPECT_TRUE(back.dK_values == table.dK_values);
}

TEST(KernelDerivative, OracleAndShape) {
    EXPECT_NEAR(kernel_dK_dt(2.0, 1.0, P075), oracle::dKdt_2_1, 1e-13);
    const double d1 = 1e-6, d2 = 1e-3;
    const double slope = std::log(kernel_dK_dt(1.0 + d2, 1.0, P075) / kernel_dK_dt(1.0 + d1, 1.0, P075)) /
                         std::log(d2 / d1);
    EXPECT_NEAR(slope, 0.75 - 1.5, 0.01);
    const double h = 1e-4;
    const double fd = (kernel_K(2.0 + h, 1.0, P075) - kernel_K(2.0 - h, 1.0, P075)) / (2.0 * h);
    EXPECT_NEAR(fd / kernel_dK_dt(2.0, 1.0, P075), 1.0, 1e-4);
}

TEST(Khstar, SingleModeIsKernelOverPi) {
    for (double s : {0.1, 0.5, 0.9}) {
        EXPECT_NEAR(khstar_source(0.3, 1.0, 0.0, 2.0, s, P075, 1), kernel_K(1.0, s, P075) / kPi, 1e-9);
    }
}

TEST(Khstar, VanishesAtAndBeyondTarget) {
    EXPECT_EQ(khstar_source(0.0, 1.0, 0.0, 0.0, 1.0, P075, 32), 0.0);
    EXPECT_EQ(khstar_source(0.0, 1.0, 0.0, 0.0, 1.3, P075, 32), 0.0);
    double prev = std::abs(khstar_source(0.0, 1.0, 0.0, 0.0, 1.0 - 1e-4, P075, 32));
    for (double d : {1e-6, 1e-8, 1e-10}) {
        const double v = std::abs(khstar_source(0.0, 1.0, 0.0, 0.0, 1.0 - d, P075, 32));
        EXPECT_LT(v, prev);
        prev = v;
    }
    // Once k^4 d << 1 for every mode the value scales like K(t, t - d) ~ d^{H - 1/2}.
    const double slope = std::log(khstar_source(0.0, 1.0, 0.0, 0.0, 1.0 - 1e-8, P075, 32) /
                                  khstar_source(0.0, 1.0, 0.0, 0.0, 1.0 - 1e-12, P075, 32)) /
                         std::log(1e4);
    EXPECT_NEAR(slope, 0.25, 0.02);
    EXPECT_THROW(khstar_source(0.0, 1.0, 0.5, 0.0, 0.4, P075, 32), DomainError);
}

TEST(Khstar, FullModeOracle) {
    EXPECT_NEAR(khstar_source(0.0, 1.0, 0.0, 0.0, 0.5, P075, 32), oracle::source_kernel_K32, 1e-6);
    EXPECT_NEAR(khstar_mode_integral(63, 1.0, 0.0, 0.5, P075) / oracle::mode63_integral, 1.0, 1e-6);
}

TEST(Hnorm, ModeZeroAndOracle) {
    EXPECT_NEAR(hnorm_mode(0, 0.4, P075), std::pow(0.4, 1.5), 1e-15);
    EXPECT_NEAR(hnorm_green(1.0, 0.7, 0.2, P075, 1), std::pow(0.5, 1.5) / kPi, 1e-14);
    EXPECT_NEAR(hnorm_mode(1, 0.5, P075) / oracle::hnorm_mode1_half, 1.0, 1e-8);
}

TEST(Hnorm, MonotoneInWindow) {
    double prev = 0.0;
    for (double zeta : {0.49, 0.4, 0.25, 0.1, 0.0}) {
        const double v = hnorm_green(0.0, 0.5, zeta, P075, 64);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Hnorm, MatchesSquaredSourceIntegral) {
    // Both sides are the same H-norm: one by the semigroup double integral, one through K*.
    for (std::size_t k : {0u, 1u, 2u, 5u}) {
        const double t = 0.5;
        auto sq = [&](double s) {
            const double v = khstar_mode_integral(k, t, 0.0, s, P075);
            return v * v;
        };
        const double lhs = hnorm_mode(k, t, P075);
        const double rhs = integrate_graded(sq, 0.0, t, 1e-12, 1e-12, 1e-9).value;
        EXPECT_NEAR(rhs / lhs, 1.0, 1e-4) << k;
    }
}

TEST(Lambda, OraclesAndErrors) {
    EXPECT_NEAR(lambda_lower(1.0, 0.5, P075) / oracle::lambda_075_1_half, 1.0, 1e-9);
    EXPECT_NEAR(lambda_lower(1.0, 1e-3, HurstParams(0.6)) / oracle::lambda_060_1_1em3, 1.0, 1e-9);
    EXPECT_THROW(lambda_lower(1.0, 1.5, P075), DomainError);
    EXPECT_THROW(lambda_lower(1.0, 0.0, P075), DomainError);
}

TEST(Lambda, PositiveOnGrid) {
    for (double H : {0.6, 0.75, 0.9}) {
        const HurstParams p(H);
        for (double f : {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.9, 0.99}) {
            EXPECT_GT(lambda_lower(1.0, f, p), 0.0) << H << " " << f;
        }
    }
}

TEST(Lambda, LimitRatioDecreases) {
    for (double H : {0.6, 0.75, 0.9}) {
        const HurstParams p(H);
        double prev = INFINITY;
        for (double e : {0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-5}) {
            const double r = std::pow(e, 2.0 * H + 0.25) / lambda_lower(1.0, e, p);
            EXPECT_LT(r, prev) << H << " " << e;
            prev = r;
        }
    }
}

TEST(KhstarCache, Deterministic) {
    khstar_cache().clear();
    const double a = khstar_cache().get_or_compute(3, 1.0, 0.0, 0.4, P075, 1e-10);
    EXPECT_EQ(khstar_cache().size(), 1u);
    const double b = khstar_cache().get_or_compute(3, 1.0, 0.0, 0.4, P075, 1e-10);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, khstar_mode_integral(3, 1.0, 0.0, 0.4, P075, 1e-10));
}
