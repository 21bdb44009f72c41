#include "paircal/result1.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "paircal/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace paircal {

namespace {

constexpr double kV = 1.0;  // known var(delta_p)
constexpr std::int64_t kChunk = 8192;
constexpr int kJackknifeBlocks = 100;

void check(const Result1Config& c) {
  if (!(c.sigma2 > 0.0))
    throw Error(ErrorCode::InvalidConfig, "sigma2 must be positive");
  if (c.n_per_arm < 1)
    throw Error(ErrorCode::InvalidConfig, "n_per_arm must be at least 1");
}

struct BlockSums {
  double wd = 0.0;  // sum of u_p * delta_hat_p
  double w = 0.0;   // sum of u_p
  double d = 0.0;   // sum of delta_hat_p
  std::int64_t n = 0;
};

/// Accumulates one chunk of pairs into per-jackknife-block sums. Each chunk
/// owns an independent substream, so chunk results depend only on (seed,
/// chunk index).
void run_chunk(const Result1Config& cfg, std::int64_t chunk_index,
               std::vector<BlockSums>& blocks) {
  const std::int64_t begin = chunk_index * kChunk;
  const std::int64_t end = std::min(begin + kChunk, cfg.num_pairs);
  std::mt19937_64 rng = detail::substream_rng(cfg.seed, static_cast<std::uint64_t>(chunk_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution type2(0.5);

  const double w1 = 2.0 / static_cast<double>(cfg.n_per_arm);
  const double w2 = (1.0 + cfg.sigma2) / static_cast<double>(cfg.n_per_arm);

  for (std::int64_t i = begin; i < end; ++i) {
    const double mu = std::fabs(normal(rng));
    const bool is_type2 = type2(rng);
    const double delta_p = is_type2 ? mu : -mu;
    const double v_p = is_type2 ? w2 : w1;
    const double delta_hat = delta_p + std::sqrt(v_p) * normal(rng);
    const double u = 1.0 / (kV + v_p);

    const std::size_t block = static_cast<std::size_t>(
        (i * kJackknifeBlocks) / cfg.num_pairs);
    blocks[block].wd += u * delta_hat;
    blocks[block].w += u;
    blocks[block].d += delta_hat;
    blocks[block].n += 1;
  }
}

}  // namespace

double plim_mle(const Result1Config& config) {
  check(config);
  const double n = static_cast<double>(config.n_per_arm);
  const double w1 = 2.0 / n;
  const double w2 = (1.0 + config.sigma2) / n;
  const double e_abs_z = std::sqrt(2.0 / std::acos(-1.0));  // E|Z| = sqrt(2/pi)
  const double e_ud = 0.5 * e_abs_z * (1.0 / (kV + w2) - 1.0 / (kV + w1));
  const double e_u = 0.5 * (1.0 / (kV + w1) + 1.0 / (kV + w2));
  return e_ud / e_u;
}

Result1Simulation simulate_mle(const Result1Config& config, Exec exec) {
  check(config);
  if (config.num_pairs < 100)
    throw Error(ErrorCode::InvalidConfig,
                "simulation needs at least 100 pairs for the block jackknife");

  const std::int64_t n_chunks = (config.num_pairs + kChunk - 1) / kChunk;
  // per-chunk block sums, merged in chunk order after the parallel region
  std::vector<std::vector<BlockSums>> partials(
      static_cast<std::size_t>(n_chunks),
      std::vector<BlockSums>(kJackknifeBlocks));

  if (exec == Exec::Parallel) {
#ifdef _OPENMP
    const int threads = max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t c = 0; c < n_chunks; ++c)
      run_chunk(config, c, partials[static_cast<std::size_t>(c)]);
#else
    for (std::int64_t c = 0; c < n_chunks; ++c)
      run_chunk(config, c, partials[static_cast<std::size_t>(c)]);
#endif
  } else {
    for (std::int64_t c = 0; c < n_chunks; ++c)
      run_chunk(config, c, partials[static_cast<std::size_t>(c)]);
  }

  std::vector<BlockSums> blocks(kJackknifeBlocks);
  for (const auto& part : partials) {
    for (int b = 0; b < kJackknifeBlocks; ++b) {
      blocks[b].wd += part[b].wd;
      blocks[b].w += part[b].w;
      blocks[b].d += part[b].d;
      blocks[b].n += part[b].n;
    }
  }

  double total_wd = 0.0, total_w = 0.0, total_d = 0.0;
  for (const auto& b : blocks) {
    total_wd += b.wd;
    total_w += b.w;
    total_d += b.d;
  }

  Result1Simulation out;
  out.estimate = total_wd / total_w;
  out.mean_unweighted = total_d / static_cast<double>(config.num_pairs);

  // delete-one-block jackknife for both functionals
  const double nb = static_cast<double>(kJackknifeBlocks);
  std::vector<double> loo_w(kJackknifeBlocks), loo_u(kJackknifeBlocks);
  double mean_w = 0.0, mean_u = 0.0;
  for (int b = 0; b < kJackknifeBlocks; ++b) {
    loo_w[b] = (total_wd - blocks[b].wd) / (total_w - blocks[b].w);
    loo_u[b] = (total_d - blocks[b].d) /
               static_cast<double>(config.num_pairs - blocks[b].n);
    mean_w += loo_w[b];
    mean_u += loo_u[b];
  }
  mean_w /= nb;
  mean_u /= nb;
  double ss_w = 0.0, ss_u = 0.0;
  for (int b = 0; b < kJackknifeBlocks; ++b) {
    ss_w += (loo_w[b] - mean_w) * (loo_w[b] - mean_w);
    ss_u += (loo_u[b] - mean_u) * (loo_u[b] - mean_u);
  }
  out.mc_se = std::sqrt((nb - 1.0) / nb * ss_w);
  out.mc_se_unweighted = std::sqrt((nb - 1.0) / nb * ss_u);
  return out;
}

}  // namespace paircal
