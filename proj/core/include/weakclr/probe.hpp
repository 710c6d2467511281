#pragma once

#include <span>
#include <string>
#include <vector>

#include "weakclr/metrics.hpp"
#include "weakclr/tensor.hpp"

namespace weakclr {

struct ProbeOptions {
    double c = 1.0;            // inverse regularisation strength
    double tolerance = 1e-6;   // stop once the gradient norm drops below this
    int max_iterations = 100;  // Newton iterations
};

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;

    double predict_proba(std::span<const double> x) const;
};

// Minimises 0.5 * ||w||^2 + C * sum_i logloss(y_i, w.x_i + b) by damped
// Newton steps; the intercept is not penalised. Throws
// Error("convergence_error") with the final gradient norm if the tolerance is
// not reached within max_iterations.
LogisticModel fit_logistic_regression(const Matrix<double>& features, std::span<const int> labels,
                                      const ProbeOptions& options = {});

// Value of the probe objective, exposed so independent fits can be compared.
double logistic_objective(const Matrix<double>& features, std::span<const int> labels, std::span<const double> weights,
                          double intercept, double c);

struct ProbeSamples {
    Matrix<double> features; // one row per slice
    std::vector<int> labels;
    std::vector<std::string> patient_ids;
    std::vector<int> slice_indices;
};

// Fits on the training slices, scores the validation slices and reports
// patient-level metrics.
FoldMetrics linear_probe(const ProbeSamples& train, const ProbeSamples& val, int fold_index,
                         const ProbeOptions& options = {}, std::vector<SlicePrediction>* predictions = nullptr);

} // namespace weakclr
