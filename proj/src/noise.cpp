#include "fbmch/noise.hpp"

#include "fbmch/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <tuple>

namespace fbmch {

std::string to_string(SamplerKind kind) {
    return kind == SamplerKind::volterra ? "volterra" : "cholesky";
}

SamplerKind parse_sampler(const std::string& name) {
    if (name == "volterra") return SamplerKind::volterra;
    if (name == "cholesky") return SamplerKind::cholesky;
    throw std::invalid_argument("unknown sampler '" + name + "' (expected volterra or cholesky)");
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t trajectory_index, std::uint64_t stream) {
    const std::uint64_t key = mix64(mix64(mix64(seed) ^ trajectory_index) ^ (stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(trajectory_index), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<double> uniform_grid(double T, std::size_t n) {
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) grid[i] = T * static_cast<double>(i) / static_cast<double>(n);
    return grid;
}

std::size_t NoiseBundle::grid_index(double t) const {
    const std::size_t n = n_time();
    const double pos = t / T * static_cast<double>(n);
    const double nearest = std::round(pos);
    if (nearest < 0.0 || nearest > static_cast<double>(n) || std::abs(pos - nearest) > 1e-9) {
        throw DomainError("time " + std::to_string(t) + " is not on the bundle's grid");
    }
    return static_cast<std::size_t>(nearest);
}

namespace {

Eigen::MatrixXd volterra_matrix(const NoiseConfig& c, const std::vector<double>& grid) {
    const std::size_t cells = c.n_time * c.substeps;
    const double ds = c.T / static_cast<double>(cells);
    std::vector<double> mids(cells);
    for (std::size_t j = 0; j < cells; ++j) mids[j] = (static_cast<double>(j) + 0.5) * ds;
    const KernelTable table = KernelTable::build(HurstParams(c.H), grid, mids, 1e-12);
    return table.K_values;
}

Eigen::MatrixXd cholesky_matrix(const NoiseConfig& c, const std::vector<double>& grid) {
    const HurstParams params(c.H);
    const auto n = static_cast<Eigen::Index>(c.n_time);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            cov(i, j) = covariance_R(grid[static_cast<std::size_t>(i + 1)], grid[static_cast<std::size_t>(j + 1)], params);
        }
    }
    const double scale = cov.diagonal().mean();
    double jitter = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::MatrixXd trial = cov;
        trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) {
            if (jitter > 0.0) warn("covariance factorization needed diagonal jitter " + std::to_string(jitter));
            const double dt = c.T / static_cast<double>(c.n_time);
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n);
            out.bottomRows(n) = Eigen::MatrixXd(llt.matrixL()) / std::sqrt(dt);
            return out;
        }
        jitter = jitter == 0.0 ? 1e-14 * scale : jitter * 100.0;
    }
    throw NumericError("covariance matrix is not positive definite even with jitter", jitter);
}

std::shared_ptr<const Eigen::MatrixXd> cached_path_matrix(const NoiseConfig& c, const std::vector<double>& grid) {
    using Key = std::tuple<std::uint64_t, std::uint64_t, std::size_t, std::size_t, int>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const Eigen::MatrixXd>> cache;
    const Key key{std::bit_cast<std::uint64_t>(c.H), std::bit_cast<std::uint64_t>(c.T), c.n_time,
                  c.sampler == SamplerKind::volterra ? c.substeps : 1, static_cast<int>(c.sampler)};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto matrix = std::make_shared<const Eigen::MatrixXd>(
        c.sampler == SamplerKind::volterra ? volterra_matrix(c, grid) : cholesky_matrix(c, grid));
    std::lock_guard<std::mutex> lock(mu);
    if (cache.size() > 32) cache.clear();
    return cache.emplace(key, matrix).first->second;
}

}  // namespace

NoiseSampler::NoiseSampler(const NoiseConfig& config) : config_(config) {
    HurstParams check(config.H);
    (void)check;
    if (!(config.T > 0.0)) throw DomainError("time horizon must be positive");
    if (config.n_time == 0 || config.n_modes == 0 || config.substeps == 0) {
        throw DomainError("noise grids need at least one step, mode and substep");
    }
    time_grid_ = uniform_grid(config.T, config.n_time);
    path_matrix_ = cached_path_matrix(config_, time_grid_);
}

std::size_t NoiseSampler::n_cells() const {
    return config_.sampler == SamplerKind::volterra ? config_.n_time * config_.substeps : config_.n_time;
}

double NoiseSampler::cell_width() const {
    return config_.T / static_cast<double>(n_cells());
}

Eigen::VectorXd NoiseSampler::sample_fbm(std::mt19937_64& rng, Eigen::VectorXd* cells) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(cell_width());
    Eigen::VectorXd w(static_cast<Eigen::Index>(n_cells()));
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = normal(rng) * scale;
    Eigen::VectorXd path = path_matrix() * w;
    if (cells) *cells = std::move(w);
    return path;
}

NoiseBundle NoiseSampler::sample_bundle(std::uint64_t seed, std::uint64_t trajectory_index) const {
    NoiseBundle b;
    b.H = config_.H;
    b.T = config_.T;
    b.time_grid = time_grid_;
    b.n_modes = config_.n_modes;
    b.substeps = config_.sampler == SamplerKind::volterra ? config_.substeps : 1;
    b.seed = seed;
    b.trajectory_index = trajectory_index;
    b.sampler_tag = config_.sampler;
    const auto K = static_cast<Eigen::Index>(config_.n_modes);
    b.white_cells.resize(K, static_cast<Eigen::Index>(n_cells()));
    const double scale = std::sqrt(cell_width());
    for (Eigen::Index k = 0; k < K; ++k) {
        std::mt19937_64 rng = substream(seed, trajectory_index, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index j = 0; j < b.white_cells.cols(); ++j) b.white_cells(k, j) = normal(rng) * scale;
    }
    rebuild_paths(b);
    return b;
}

void NoiseSampler::rebuild_paths(NoiseBundle& bundle) const {
    bundle.fbm_paths = bundle.white_cells * path_matrix().transpose();
    bundle.fbm_paths.col(0).setZero();
}

void NoiseSampler::rebuild_mode(NoiseBundle& bundle, std::size_t mode) const {
    const auto k = static_cast<Eigen::Index>(mode);
    bundle.fbm_paths.row(k) = (path_matrix() * bundle.white_cells.row(k).transpose()).transpose();
    bundle.fbm_paths(k, 0) = 0.0;
}

double field_value(const NoiseBundle& bundle, double x, double t) {
    const auto m = static_cast<Eigen::Index>(bundle.grid_index(t));
    double sum = 0.0;
    for (std::size_t k = 0; k < bundle.n_modes; ++k) {
        sum += bundle.fbm_paths(static_cast<Eigen::Index>(k), m) * basis_primitive(k, x);
    }
    return sum;
}

SpectralField stochastic_convolution(const NoiseBundle& bundle, double t) {
    const std::size_t m = bundle.grid_index(t);
    const double dt = bundle.dt();
    SpectralField out(bundle.n_modes);
    if (m == 0) return out;
    out[0] = bundle.fbm_paths(0, static_cast<Eigen::Index>(m));
    for (std::size_t k = 1; k < bundle.n_modes; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double lambda = eigenvalue(k);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double age = (static_cast<double>(m - j) - 0.5) * dt;
            const double db = bundle.fbm_paths(kk, static_cast<Eigen::Index>(j + 1)) -
                              bundle.fbm_paths(kk, static_cast<Eigen::Index>(j));
            sum += std::exp(-lambda * age) * db;
        }
        out[k] = sum;
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'B', 'M', 'C', 'H', 'N', 'B', '1'};
constexpr std::uint32_t kBundleVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated noise bundle file");
    return v;
}

}  // namespace

void write_bundle(const NoiseBundle& b, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put(os, kBundleVersion);
    put(os, b.H);
    put(os, static_cast<std::uint64_t>(b.n_modes));
    put(os, static_cast<std::uint64_t>(b.n_time()));
    put(os, b.seed);
    put(os, b.T);
    put(os, static_cast<std::uint64_t>(b.substeps));
    put(os, static_cast<std::uint32_t>(b.sampler_tag == SamplerKind::volterra ? 0 : 1));
    put(os, b.trajectory_index);
    put(os, static_cast<std::uint64_t>(b.white_cells.cols()));
    for (Eigen::Index k = 0; k < b.white_cells.rows(); ++k) {
        for (Eigen::Index j = 0; j < b.white_cells.cols(); ++j) put(os, b.white_cells(k, j));
    }
    for (Eigen::Index k = 0; k < b.fbm_paths.rows(); ++k) {
        for (Eigen::Index j = 0; j < b.fbm_paths.cols(); ++j) put(os, b.fbm_paths(k, j));
    }
    if (!os) throw std::runtime_error("failed writing " + path);
}

NoiseBundle read_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error(path + " is not a noise bundle");
    if (get<std::uint32_t>(is) != kBundleVersion) throw std::runtime_error("unsupported noise bundle version");
    NoiseBundle b;
    b.H = get<double>(is);
    b.n_modes = get<std::uint64_t>(is);
    const auto n_time = get<std::uint64_t>(is);
    b.seed = get<std::uint64_t>(is);
    b.T = get<double>(is);
    b.substeps = get<std::uint64_t>(is);
    b.sampler_tag = get<std::uint32_t>(is) == 0 ? SamplerKind::volterra : SamplerKind::cholesky;
    b.trajectory_index = get<std::uint64_t>(is);
    const auto cells = get<std::uint64_t>(is);
    b.time_grid = uniform_grid(b.T, n_time);
    const auto K = static_cast<Eigen::Index>(b.n_modes);
    b.white_cells.resize(K, static_cast<Eigen::Index>(cells));
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index j = 0; j < b.white_cells.cols(); ++j) b.white_cells(k, j) = get<double>(is);
    }
    b.fbm_paths.resize(K, static_cast<Eigen::Index>(n_time + 1));
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index j = 0; j < b.fbm_paths.cols(); ++j) b.fbm_paths(k, j) = get<double>(is);
    }
    return b;
}

}  // namespace fbmch
