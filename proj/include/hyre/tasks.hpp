#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyre/dataset.hpp"
#include "hyre/matrix.hpp"

namespace hyre::tasks {

// ---------------------------------------------------------------------------
// Gaussian-process regression source

// Squared-exponential kernel with observation noise and a factorization jitter.
struct GpSpec {
  double signal_variance = 1.0;  // sigma^2
  double lengthscale = 0.2;      // ell
  double noise_variance = 0.0;   // sigma_n^2
  double jitter = 1e-10;         // escalated up to 1e-6 before giving up

  void validate() const;
};

double gp_kernel(const GpSpec& spec, double a, double b);
nn::Matrix gp_kernel_matrix(const GpSpec& spec, std::span<const double> xs,
                            std::span<const double> ys);

struct GpPosterior {
  std::vector<double> mean;
  nn::Matrix covariance;
};

// Standard GP conditional at query inputs given 1-d training data.
GpPosterior gp_posterior(const GpSpec& spec, const Dataset& train,
                         std::span<const double> query_inputs);

struct GpSample {
  Dataset train;            // inputs on [0,1], targets drawn from the prior
  nn::Matrix test_inputs;   // n_test x 1 even grid on [0,1]
  nn::Matrix posterior_draws;  // n_draws x n_test, candidate true functions
};

GpSample sample_gp_dataset(const GpSpec& spec, std::size_t n_train,
                           std::size_t n_test, std::uint64_t seed,
                           std::size_t n_draws = 1);

// ---------------------------------------------------------------------------
// Bradley-Terry and the conflicting-labeler population

// P(i preferred over j) = e^{theta_i} / (e^{theta_i} + e^{theta_j}),
// overflow-safe.
double bt_preference_prob(double theta_i, double theta_j);

// Deterministic linear decider: label(x) = 1[w . x > 0].
struct LabelerBoundary {
  std::vector<double> weights;

  double label(std::span<const double> x) const;
};

struct ConflictingTask {
  Dataset train;  // binary labels, each point labeled by one random labeler
  std::vector<LabelerBoundary> labelers;
  LabelerBoundary held_out;  // the adaptation target
};

// Points uniform on [0,1]^2; boundaries with i.i.d. standard normal weights.
ConflictingTask gen_conflicting_preferences(std::size_t n_labelers,
                                            std::size_t n_points,
                                            std::uint64_t seed);

// Extra points labeled by one boundary, for pools and eval sets.
Dataset label_points(const LabelerBoundary& boundary, nn::Matrix points);
nn::Matrix sample_unit_square(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hypercube shift task

struct HypercubeTask {
  Dataset train;   // label 1 on [0,1]^5, label 0 on [-1,0]^5
  Dataset target;  // uniform on [-1,1]^5 under a random linear boundary
  LabelerBoundary boundary;
};

HypercubeTask gen_hypercube_task(std::uint64_t seed, std::size_t n_train = 256,
                                 std::size_t n_target = 2048);

// Fresh draws from the hypercube target distribution under the same boundary.
Dataset sample_hypercube_target(const LabelerBoundary& boundary, std::size_t n,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tabular ingestion and the feature-sorted OOD split

struct TableSchema {
  char delimiter = ',';
  bool header = true;
  std::string target;             // column name, or 0-based index if no header
  std::vector<std::string> drop;  // columns excluded from the features
};

TableSchema load_schema(const std::string& path);

// Strict parse: any missing value or malformed cell is a format error naming
// the row and column; no imputation.
Dataset load_table(const std::string& path, const TableSchema& schema);

struct SplitSpec {
  double ood_fraction = 0.05;  // per tail
  double train_fraction = 0.9;  // within the middle block
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset ood;
};

// Sort rows by unnormalized per-row feature mean (stable); floor(frac*N) rows
// from each tail become OOD; the middle block splits train/val by seed.
// Features and targets are z-scored with train-derived stats on all three.
SplitResult ood_split(const Dataset& data, const SplitSpec& spec);

// Canonical dataset dump (header + rows) for provenance.
std::string dump_dataset(const Dataset& data);

}  // namespace hyre::tasks
