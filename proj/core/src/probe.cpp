#include "weakclr/probe.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }
double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double objective(const Eigen::Map<const RowMatrix>& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                 double c) {
    const Eigen::VectorXd s = (x * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) loss += softplus(s[i]) - y[i] * s[i];
    return 0.5 * w.squaredNorm() + c * loss;
}

} // namespace

double LogisticModel::predict_proba(std::span<const double> x) const {
    double s = intercept;
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
    return sigmoid(s);
}

double logistic_objective(const Matrix<double>& features, std::span<const int> labels, std::span<const double> weights,
                          double intercept, double c) {
    Eigen::Map<const RowMatrix> x(features.data.data(), features.rows, features.cols);
    Eigen::VectorXd y(features.rows);
    for (int i = 0; i < features.rows; ++i) y[i] = labels[i];
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    return objective(x, y, w, intercept, c);
}

LogisticModel fit_logistic_regression(const Matrix<double>& features, std::span<const int> labels,
                                      const ProbeOptions& options) {
    const int n = features.rows, d = features.cols;
    WEAKCLR_CHECK(n > 0 && static_cast<int>(labels.size()) == n, "invalid_argument",
                  "probe needs one label per feature row");
    WEAKCLR_CHECK(options.c > 0.0, "invalid_argument", "probe C must be positive");
    Eigen::Map<const RowMatrix> x(features.data.data(), n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = labels[i];

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    const double c = options.c;
    double f = objective(x, y, w, b, c);
    LogisticModel model;

    for (int iter = 0;; ++iter) {
        const Eigen::VectorXd s = (x * w).array() + b;
        Eigen::VectorXd p(n), dvec(n);
        for (int i = 0; i < n; ++i) {
            p[i] = sigmoid(s[i]);
            dvec[i] = p[i] * (1.0 - p[i]);
        }
        const Eigen::VectorXd r = p - y;
        Eigen::VectorXd grad(d + 1);
        grad.head(d) = w + c * (x.transpose() * r);
        grad[d] = c * r.sum();
        model.gradient_norm = grad.norm();
        model.iterations = iter;
        if (model.gradient_norm < options.tolerance) break;
        if (iter >= options.max_iterations) {
            throw Error("convergence_error", "logistic probe did not converge in " +
                                                 std::to_string(options.max_iterations) +
                                                 " iterations, gradient norm " + std::to_string(model.gradient_norm));
        }

        Eigen::MatrixXd h(d + 1, d + 1);
        const RowMatrix xd = x.array().colwise() * dvec.array();
        h.topLeftCorner(d, d) = c * (x.transpose() * xd);
        h.topLeftCorner(d, d).diagonal().array() += 1.0;
        const Eigen::VectorXd cross = c * (xd.transpose() * Eigen::VectorXd::Ones(n));
        h.topRightCorner(d, 1) = cross;
        h.bottomLeftCorner(1, d) = cross.transpose();
        h(d, d) = c * dvec.sum() + 1e-12;

        const Eigen::VectorXd step = h.ldlt().solve(-grad);
        const double slope = grad.dot(step);
        // slack for rounding in f, otherwise tiny c stalls once decreases fall below ulp(f)
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
        double t = 1.0;
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::VectorXd w_try = w + t * step.head(d);
            const double b_try = b + t * step[d];
            const double f_try = objective(x, y, w_try, b_try, c);
            if (f_try <= f + 1e-4 * t * slope + slack || ls == 59) {
                w = w_try;
                b = b_try;
                f = f_try;
                break;
            }
            t *= 0.5;
        }
    }
    model.weights.assign(w.data(), w.data() + d);
    model.intercept = b;
    return model;
}

FoldMetrics linear_probe(const ProbeSamples& train, const ProbeSamples& val, int fold_index,
                         const ProbeOptions& options, std::vector<SlicePrediction>* predictions) {
    WEAKCLR_CHECK(train.features.cols == val.features.cols, "shape_error", "train/val feature widths differ");
    const LogisticModel model = fit_logistic_regression(train.features, train.labels, options);
    std::vector<SlicePrediction> preds;
    for (int i = 0; i < val.features.rows; ++i) {
        preds.push_back({val.patient_ids[i], val.slice_indices[i], model.predict_proba(val.features.row(i)),
                         val.labels[i]});
    }
    FoldMetrics m = evaluate_fold(fold_index, preds);
    if (predictions) *predictions = std::move(preds);
    return m;
}

} // namespace weakclr
