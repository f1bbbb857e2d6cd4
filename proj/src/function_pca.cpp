#include "hyre/function_pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hyre::pca {

using nn::Matrix;

void PredictionMatrix::validate() const {
  if (values.rows == 0 || values.cols == 0) {
    throw std::invalid_argument("PredictionMatrix: empty");
  }
  if (!values.all_finite()) {
    throw std::invalid_argument("PredictionMatrix: non-finite entry");
  }
  if (!input_ids.empty() && input_ids.size() != values.cols) {
    throw std::invalid_argument("PredictionMatrix: id count != inputs");
  }
}

PredictionMatrix make_prediction_matrix(Matrix values) {
  PredictionMatrix preds;
  preds.values = std::move(values);
  preds.validate();
  return preds;
}

std::vector<double> column_means(const PredictionMatrix& preds) {
  preds.validate();
  const auto& m = preds.values;
  std::vector<double> means(m.cols, 0.0);
  for (std::size_t k = 0; k < m.rows; ++k) {
    const double* row = m.data.data() + k * m.cols;
    for (std::size_t i = 0; i < m.cols; ++i) means[i] += row[i];
  }
  for (auto& v : means) v /= static_cast<double>(m.rows);
  return means;
}

PredictionMatrix residual_matrix(const PredictionMatrix& preds) {
  const auto means = column_means(preds);
  PredictionMatrix out = preds;
  for (std::size_t k = 0; k < out.values.rows; ++k) {
    double* row = out.values.data.data() + k * out.values.cols;
    for (std::size_t i = 0; i < out.values.cols; ++i) row[i] -= means[i];
  }
  return out;
}

namespace {

// One-sided Jacobi on the rows of R: find orthogonal G with G*R having
// pairwise-orthogonal rows. Then row i of G*R is sigma_i * v_i^T and row i of
// G is the i-th member-space component.
struct JacobiResult {
  Matrix rotated;  // K x M, rows orthogonal
  Matrix g;        // K x K orthogonal
};

JacobiResult jacobi_orthogonalize_rows(const Matrix& r) {
  const std::size_t k = r.rows;
  const std::size_t m = r.cols;
  JacobiResult res;
  res.rotated = r;
  res.g = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) res.g.at(i, i) = 1.0;

  constexpr double kTol = 1e-14;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated_any = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double* rp = res.rotated.data.data() + p * m;
        double* rq = res.rotated.data.data() + q * m;
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          alpha += rp[j] * rp[j];
          beta += rq[j] * rq[j];
          gamma += rp[j] * rq[j];
        }
        if (alpha * beta == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) {
          continue;
        }
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t j = 0; j < m; ++j) {
          const double a = rp[j];
          const double b = rq[j];
          rp[j] = c * a - s * b;
          rq[j] = s * a + c * b;
        }
        double* gp = res.g.data.data() + p * k;
        double* gq = res.g.data.data() + q * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double a = gp[j];
          const double b = gq[j];
          gp[j] = c * a - s * b;
          gq[j] = s * a + c * b;
        }
        rotated_any = true;
      }
    }
    if (!rotated_any) break;
  }
  return res;
}

}  // namespace

PcaSummary function_pca(const PredictionMatrix& residuals, std::size_t p,
                        std::span<const double> means) {
  residuals.validate();
  const std::size_t k = residuals.heads();
  const std::size_t m = residuals.inputs();
  if (p == 0 || p > std::min(k, m)) {
    throw std::invalid_argument("function_pca: P must be in [1, min(K, M)]");
  }
  if (!means.empty() && means.size() != m) {
    throw std::invalid_argument("function_pca: means length != inputs");
  }

  JacobiResult jac = jacobi_orthogonalize_rows(residuals.values);

  // order rows by descending norm of the rotated matrix, stable on ties
  std::vector<double> norms(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double* row = jac.rotated.data.data() + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += row[j] * row[j];
    norms[i] = std::sqrt(acc);
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  PcaSummary summary;
  summary.mean_prediction = means.empty() ? std::vector<double>(m, 0.0)
                                          : std::vector<double>(means.begin(), means.end());
  summary.components = Matrix(p, k);
  summary.singular_values.resize(p);
  summary.explained_variance.resize(p);
  summary.total_variance = 0.0;
  for (double v : residuals.values.data) summary.total_variance += v * v;

  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t src = order[i];
    summary.singular_values[i] = norms[src];
    summary.explained_variance[i] = norms[src] * norms[src];
    const double* g_row = jac.g.data.data() + src * k;
    double* c_row = summary.components.data.data() + i * k;
    std::copy(g_row, g_row + k, c_row);
    // sign convention: the largest-magnitude entry of each component positive
    std::size_t arg = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (std::abs(c_row[j]) > std::abs(c_row[arg])) arg = j;
    }
    if (c_row[arg] < 0.0) {
      for (std::size_t j = 0; j < k; ++j) c_row[j] = -c_row[j];
    }
  }
  // u_i = C_i * residuals, the contract the reconstruction relies on
  summary.component_functions = nn::matmul(summary.components, residuals.values);
  return summary;
}

PcaSummary analyze_predictions(const PredictionMatrix& preds, std::size_t p) {
  const auto means = column_means(preds);
  return function_pca(residual_matrix(preds), p, means);
}

std::vector<double> reconstruct(const PcaSummary& summary,
                                std::span<const double> coeffs) {
  const std::size_t p = summary.components.rows;
  const std::size_t m = summary.component_functions.cols;
  if (coeffs.size() != p) {
    throw std::invalid_argument("reconstruct: expected " + std::to_string(p) +
                                " coefficients, got " + std::to_string(coeffs.size()));
  }
  std::vector<double> out = summary.mean_prediction;
  for (std::size_t i = 0; i < p; ++i) {
    const double w = coeffs[i];
    const double* u = summary.component_functions.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += w * u[j];
  }
  return out;
}

std::vector<double> head_coefficients(const PcaSummary& summary, std::size_t head) {
  if (head >= summary.components.cols) {
    throw std::invalid_argument("head_coefficients: head out of range");
  }
  std::vector<double> coeffs(summary.components.rows);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    coeffs[i] = summary.components.at(i, head);
  }
  return coeffs;
}

std::vector<double> explained_variance_ratio(const PcaSummary& summary) {
  std::vector<double> ratio(summary.explained_variance.size(), 0.0);
  if (summary.total_variance <= 0.0) return ratio;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    ratio[i] = summary.explained_variance[i] / summary.total_variance;
  }
  return ratio;
}

std::string pca_summary_csv(const PcaSummary& summary,
                            std::span<const std::string> input_ids) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t p = summary.components.rows;
  const std::size_t m = summary.component_functions.cols;

  out << "# block: variance\ncomponent,singular_value,explained_variance,ratio\n";
  const auto ratios = explained_variance_ratio(summary);
  for (std::size_t i = 0; i < p; ++i) {
    out << i << "," << summary.singular_values[i] << ","
        << summary.explained_variance[i] << "," << ratios[i] << "\n";
  }

  out << "# block: components (rows of C)\n";
  for (std::size_t i = 0; i < p; ++i) {
    out << i;
    for (std::size_t k = 0; k < summary.components.cols; ++k) {
      out << "," << summary.components.at(i, k);
    }
    out << "\n";
  }

  // u_i carries the singular value; u_i_unit is the unit-norm direction
  out << "# block: functions\ninput,mean";
  for (std::size_t i = 0; i < p; ++i) out << ",u" << i << ",u" << i << "_unit";
  out << "\n";
  for (std::size_t j = 0; j < m; ++j) {
    if (!input_ids.empty()) {
      out << input_ids[j];
    } else {
      out << j;
    }
    out << "," << summary.mean_prediction[j];
    for (std::size_t i = 0; i < p; ++i) {
      const double u = summary.component_functions.at(i, j);
      const double sv = summary.singular_values[i];
      out << "," << u << "," << (sv > 0.0 ? u / sv : 0.0);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hyre::pca
