#include "fbmch/error.hpp"
#include "fbmch/kernel.hpp"
#include "fbmch/noise.hpp"
#include "fbmch/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace fbmch;

namespace {

NoiseConfig small_config(SamplerKind kind, std::size_t n_time, std::size_t n_modes, double T = 1.0) {
    NoiseConfig c;
    c.T = T;
    c.n_time = n_time;
    c.n_modes = n_modes;
    c.substeps = 8;
    c.sampler = kind;
    return c;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Noise, RejectsBrownianHurst) {
    NoiseConfig c = small_config(SamplerKind::volterra, 4, 2);
    c.H = 0.5;
    EXPECT_THROW(NoiseSampler{c}, DomainError);
}

TEST(Noise, BundlesAreDeterministic) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 16, 8));
    const NoiseBundle a = s.sample_bundle(42, 7);
    const NoiseBundle b = s.sample_bundle(42, 7);
    EXPECT_TRUE(a.white_cells == b.white_cells);
    EXPECT_TRUE(a.fbm_paths == b.fbm_paths);
    const NoiseBundle c = s.sample_bundle(42, 8);
    EXPECT_FALSE(a.white_cells == c.white_cells);
    const NoiseBundle d = s.sample_bundle(43, 7);
    EXPECT_FALSE(a.white_cells == d.white_cells);
    EXPECT_EQ(a.fbm_paths.col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Noise, ModesAndTrajectoriesIndependent) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 4, 3));
    const std::size_t N = 10000;
    std::vector<double> m1(N), m2(N), next(N);
    for (std::size_t i = 0; i < N; ++i) {
        const NoiseBundle b = s.sample_bundle(99, i);
        m1[i] = b.fbm_paths(1, 4);
        m2[i] = b.fbm_paths(2, 4);
    }
    for (std::size_t i = 0; i < N; ++i) next[i] = m1[(i + 1) % N];
    const double bound = 3.0 / std::sqrt(static_cast<double>(N));
    EXPECT_LE(std::abs(correlation(m1, m2)), bound);
    EXPECT_LE(std::abs(correlation(m1, next)), bound);
}

TEST(Noise, FieldValueZeros) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 8, 6));
    const NoiseBundle b = s.sample_bundle(1, 0);
    for (double t : {0.0, 0.25, 1.0}) EXPECT_EQ(field_value(b, 0.0, t), 0.0);
    for (double x : {0.0, 1.0, kPi}) EXPECT_EQ(field_value(b, x, 0.0), 0.0);
    EXPECT_THROW(field_value(b, 1.0, 0.3), DomainError);
    // Only the constant mode has a nonzero primitive at pi.
    EXPECT_NEAR(field_value(b, kPi, 0.5), std::sqrt(kPi) * b.fbm_paths(0, 4), 1e-14);
}

TEST(Noise, FieldCovarianceAtClosedFormPoint) {
    // E[W(pi/2, 1/2) W(pi, 1)] = (pi/2) R(1/2, 1) for any number of modes.
    const NoiseSampler s(small_config(SamplerKind::cholesky, 2, 3));
    const std::size_t N = 20000;
    RunningStats prod;
    for (std::size_t i = 0; i < N; ++i) {
        const NoiseBundle b = s.sample_bundle(5, i);
        prod.add(field_value(b, kPi / 2.0, 0.5) * field_value(b, kPi, 1.0));
    }
    const double expected = kPi / 2.0 * covariance_R(0.5, 1.0, HurstParams(0.75));
    EXPECT_LE(std::abs(prod.mean() - expected), 3.0 * prod.std_error()) << prod.mean() << " vs " << expected;
}

TEST(Noise, CholeskyCovariance) {
    const NoiseSampler s(small_config(SamplerKind::cholesky, 2, 1));
    const HurstParams p(0.75);
    const std::size_t N = 50000;
    RunningStats v1, v2, c12;
    for (std::size_t i = 0; i < N; ++i) {
        const NoiseBundle b = s.sample_bundle(11, i);
        const double x = b.fbm_paths(0, 1), y = b.fbm_paths(0, 2);
        v1.add(x * x);
        v2.add(y * y);
        c12.add(x * y);
    }
    EXPECT_LE(std::abs(v1.mean() - covariance_R(0.5, 0.5, p)), 3.0 * v1.std_error());
    EXPECT_LE(std::abs(v2.mean() - covariance_R(1.0, 1.0, p)), 3.0 * v2.std_error());
    EXPECT_LE(std::abs(c12.mean() - covariance_R(0.5, 1.0, p)), 3.0 * c12.std_error());
}

namespace {
double volterra_variance_error(double H, std::size_t substeps) {
    NoiseConfig vc = small_config(SamplerKind::volterra, 64, 1);
    vc.H = H;
    vc.substeps = substeps;
    const NoiseSampler v(vc);
    const double var_v = v.path_matrix().row(64).squaredNorm() * v.cell_width();
    return std::abs(var_v - 1.0);
}
}  // namespace

TEST(Noise, VolterraMarginalVarianceMatchesCholesky) {
    NoiseConfig cc = small_config(SamplerKind::cholesky, 64, 1);
    const NoiseSampler c(cc);
    EXPECT_NEAR(c.path_matrix().row(64).squaredNorm() * c.cell_width(), 1.0, 1e-10);
    EXPECT_LE(volterra_variance_error(0.75, 8), 0.02);
    EXPECT_LE(volterra_variance_error(0.6, 8), 0.02);
}

// The midpoint rule meets K^2 ~ s^{1-2H} at s = 0, so the variance bias decays like h^{2-2H}.
TEST(Noise, VolterraBiasShrinksWithSubsteps) {
    const double coarse = volterra_variance_error(0.9, 8);
    const double fine = volterra_variance_error(0.9, 64);
    EXPECT_LT(fine, coarse);
    EXPECT_NEAR(std::log(coarse / fine) / std::log(8.0), 0.2, 0.05);
}

TEST(Noise, StationaryIncrements) {
    const NoiseSampler s(small_config(SamplerKind::cholesky, 8, 1));
    RunningStats early, late;
    for (std::size_t i = 0; i < 20000; ++i) {
        const NoiseBundle b = s.sample_bundle(13, i);
        const double a = b.fbm_paths(0, 2) - b.fbm_paths(0, 1);
        const double z = b.fbm_paths(0, 8) - b.fbm_paths(0, 7);
        early.add(a * a);
        late.add(z * z);
    }
    const double target = std::pow(0.125, 1.5);
    EXPECT_LE(std::abs(early.mean() - target), 3.0 * early.std_error());
    EXPECT_LE(std::abs(late.mean() - target), 3.0 * late.std_error());
}

TEST(Noise, EmpiricalVarianceOfFbm) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 16, 2));
    RunningStats v;
    for (std::size_t i = 0; i < 10000; ++i) {
        const NoiseBundle b = s.sample_bundle(3, i);
        v.add(b.fbm_paths(1, 16) * b.fbm_paths(1, 16));
    }
    const auto last = static_cast<Eigen::Index>(16);
    const double model = s.path_matrix().row(last).squaredNorm() * s.cell_width();
    EXPECT_LE(std::abs(v.mean() - model), 3.0 * v.std_error());
    EXPECT_LE(std::abs(v.mean() - 1.0), 0.05);
}

TEST(Convolution, ConstantModeIsThePath) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 16, 4));
    const NoiseBundle b = s.sample_bundle(8, 2);
    for (std::size_t m = 0; m <= 16; ++m) {
        const double t = b.time_grid[m];
        EXPECT_NEAR(stochastic_convolution(b, t)[0], b.fbm_paths(0, static_cast<Eigen::Index>(m)), 1e-15);
    }
    const SpectralField zero = stochastic_convolution(b, 0.0);
    EXPECT_EQ(zero.coeffs().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convolution, ModeVarianceMatchesHnorm) {
    const NoiseSampler s(small_config(SamplerKind::cholesky, 128, 2, 0.5));
    RunningStats v;
    for (std::size_t i = 0; i < 8000; ++i) {
        const double c = stochastic_convolution(s.sample_bundle(21, i), 0.5)[1];
        v.add(c * c);
    }
    const double h = hnorm_mode(1, 0.5, HurstParams(0.75));
    EXPECT_LE(std::abs(v.mean() - h), 3.0 * v.std_error()) << v.mean() << " vs " << h;
}

TEST(Bundle, FileRoundTrip) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 8, 5));
    const NoiseBundle b = s.sample_bundle(77, 3);
    const auto path = (std::filesystem::temp_directory_path() / "fbmch_bundle_test.bin").string();
    write_bundle(b, path);
    const NoiseBundle r = read_bundle(path);
    std::remove(path.c_str());
    EXPECT_EQ(r.H, b.H);
    EXPECT_EQ(r.T, b.T);
    EXPECT_EQ(r.time_grid, b.time_grid);
    EXPECT_EQ(r.n_modes, b.n_modes);
    EXPECT_EQ(r.seed, b.seed);
    EXPECT_EQ(r.trajectory_index, b.trajectory_index);
    EXPECT_TRUE(r.white_cells == b.white_cells);
    EXPECT_TRUE(r.fbm_paths == b.fbm_paths);
}

TEST(Bundle, RebuildReproducesPaths) {
    const NoiseSampler s(small_config(SamplerKind::volterra, 8, 5));
    NoiseBundle b = s.sample_bundle(77, 4);
    const Eigen::MatrixXd paths = b.fbm_paths;
    b.fbm_paths.setZero();
    s.rebuild_paths(b);
    EXPECT_TRUE(b.fbm_paths == paths);
}
