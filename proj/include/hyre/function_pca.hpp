#pragma once

#include <span>
#include <string>
#include <vector>

#include "hyre/matrix.hpp"

namespace hyre::pca {

// K heads x M inputs matrix of predictions: probabilities for classification,
// raw outputs for regression.
struct PredictionMatrix {
  nn::Matrix values;
  std::vector<std::string> input_ids;  // optional, defaults to indices

  std::size_t heads() const { return values.rows; }
  std::size_t inputs() const { return values.cols; }
  void validate() const;
};

PredictionMatrix make_prediction_matrix(nn::Matrix values);

// Per-input (column) mean across heads.
std::vector<double> column_means(const PredictionMatrix& preds);

// Removes the per-input mean across heads; every output column sums to zero.
PredictionMatrix residual_matrix(const PredictionMatrix& preds);

struct PcaSummary {
  std::vector<double> mean_prediction;   // length M
  nn::Matrix components;                 // P x K, orthonormal rows
  nn::Matrix component_functions;        // P x M, u_i = C_i * residuals
  std::vector<double> singular_values;   // non-increasing
  std::vector<double> explained_variance;  // sigma_i^2
  double total_variance = 0.0;             // sum of squared residuals
};

// Top-P components of the residual matrix by singular value, via one-sided
// Jacobi. Sign convention: each component's largest-magnitude entry is
// positive. Pass the per-input means to fill mean_prediction (else zeros).
PcaSummary function_pca(const PredictionMatrix& residuals, std::size_t p,
                        std::span<const double> means = {});

// residual_matrix + function_pca with the mean wired through.
PcaSummary analyze_predictions(const PredictionMatrix& preds, std::size_t p);

// p(x) = mean(x) + sum_i coeffs[i] * u_i(x)
std::vector<double> reconstruct(const PcaSummary& summary,
                                std::span<const double> coeffs);

// Coefficients that reconstruct head k's residual: projections of the head's
// residual row onto the component functions.
std::vector<double> head_coefficients(const PcaSummary& summary, std::size_t head);

// Per-component share of total residual variance; zeros if the total is zero.
std::vector<double> explained_variance_ratio(const PcaSummary& summary);

// CSV export of means, components, functions (raw and singular-value-scaled)
// and variances for external plotting.
std::string pca_summary_csv(const PcaSummary& summary,
                            std::span<const std::string> input_ids = {});

}  // namespace hyre::pca
