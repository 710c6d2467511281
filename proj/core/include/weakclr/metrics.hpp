#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace weakclr {

struct SlicePrediction {
    std::string patient_id;
    int slice_index = 0;
    double prob_positive = 0.0;
    int label = 0;
};

struct PatientScore {
    std::string patient_id;
    double prob_positive = 0.0; // mean over the patient's slices
    int true_label = 0;
};

// One score per patient (in order of first appearance), the arithmetic mean
// of its slice probabilities. Throws on out-of-range probabilities or
// conflicting labels within a patient.
std::vector<PatientScore> aggregate_patient(std::span<const SlicePrediction> predictions);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counting one half. nullopt when a class is absent.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

// (TPR + TNR) / 2. nullopt when a class is absent.
std::optional<double> balanced_accuracy(std::span<const int> predictions, std::span<const int> labels);
std::optional<double> balanced_accuracy_at(std::span<const double> probabilities, std::span<const int> labels,
                                           double threshold = 0.5);

struct FoldMetrics {
    int fold_index = 0;
    std::optional<double> auc;
    std::optional<double> balanced_accuracy;
    int n_val_patients = 0;
};

// Patient-level metrics for one validation fold.
FoldMetrics evaluate_fold(int fold_index, std::span<const SlicePrediction> predictions);

enum class Procedure { LinearProbe, FineTune };
std::string_view to_string(Procedure p) noexcept;
Procedure parse_procedure(std::string_view text);

struct Summary {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
    int count = 0;
};

// nullopt for an empty input.
std::optional<Summary> summarize(std::span<const double> values);

struct ProcedureReport {
    std::string method; // method name, or the sweep setting label
    Procedure procedure = Procedure::FineTune;
    int expected_folds = 0;
    std::vector<FoldMetrics> folds;
    bool complete = false;
    std::optional<Summary> auc;
    std::optional<Summary> balanced_accuracy;
    std::vector<std::string> warnings;
};

// Means and population std across folds. A report with fewer than
// expected_folds folds, or with undefined fold metrics, is flagged incomplete.
ProcedureReport aggregate_folds(std::string method, Procedure procedure, std::vector<FoldMetrics> folds,
                                int expected_folds);

// {method, procedure, folds: [{fold, auc, bal_acc}], mean_auc, std_auc,
//  mean_bal_acc, std_bal_acc, complete, expected_folds}
std::string report_to_json(const ProcedureReport& report);
ProcedureReport report_from_json(std::string_view json_text);
void write_metrics_json(const ProcedureReport& report, const std::filesystem::path& path);
ProcedureReport read_metrics_json(const std::filesystem::path& path);

struct AggregateReport {
    std::vector<ProcedureReport> rows;
};

// Table layout: one line per method (first-appearance order), columns AUC and
// balanced accuracy (mean, std) for each procedure. Missing cells read "NA".
void write_report_csv(const AggregateReport& report, const std::filesystem::path& path,
                      std::string_view key_column = "method");
void write_report_json(const AggregateReport& report, const std::filesystem::path& path);

} // namespace weakclr
