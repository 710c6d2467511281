#include "weakclr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "weakclr/error.hpp"
#include "weakclr/log.hpp"

namespace weakclr {

using nlohmann::ordered_json;

std::vector<PatientScore> aggregate_patient(std::span<const SlicePrediction> predictions) {
    std::vector<PatientScore> out;
    std::map<std::string, std::size_t> index;
    std::vector<std::size_t> counts;
    for (const auto& p : predictions) {
        WEAKCLR_CHECK(p.prob_positive >= 0.0 && p.prob_positive <= 1.0, "invalid_argument",
                      "slice probability outside [0, 1] for patient '" + p.patient_id + "'");
        auto [it, inserted] = index.try_emplace(p.patient_id, out.size());
        if (inserted) {
            out.push_back({p.patient_id, 0.0, p.label});
            counts.push_back(0);
        }
        auto& s = out[it->second];
        WEAKCLR_CHECK(s.true_label == p.label, "invalid_argument",
                      "patient '" + p.patient_id + "' has slices with different labels");
        s.prob_positive += p.prob_positive;
        ++counts[it->second];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].prob_positive /= static_cast<double>(counts[i]);
    return out;
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
    WEAKCLR_CHECK(scores.size() == labels.size(), "invalid_argument", "roc_auc: score and label counts differ");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of mid-ranks of the positives; tied groups share their average rank.
    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) {
                positive_rank_sum += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double np = static_cast<double>(n_pos);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::optional<double> balanced_accuracy(std::span<const int> predictions, std::span<const int> labels) {
    WEAKCLR_CHECK(predictions.size() == labels.size(), "invalid_argument",
                  "balanced_accuracy: prediction and label counts differ");
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            (predictions[i] == 1 ? tp : fn)++;
        else
            (predictions[i] == 1 ? fp : tn)++;
    }
    if (tp + fn == 0 || tn + fp == 0) return std::nullopt;
    const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return (tpr + tnr) / 2.0;
}

std::optional<double> balanced_accuracy_at(std::span<const double> probabilities, std::span<const int> labels,
                                           double threshold) {
    std::vector<int> preds(probabilities.size());
    std::transform(probabilities.begin(), probabilities.end(), preds.begin(),
                   [&](double p) { return p >= threshold ? 1 : 0; });
    return balanced_accuracy(preds, labels);
}

FoldMetrics evaluate_fold(int fold_index, std::span<const SlicePrediction> predictions) {
    const auto patients = aggregate_patient(predictions);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : patients) {
        scores.push_back(p.prob_positive);
        labels.push_back(p.true_label);
    }
    FoldMetrics m;
    m.fold_index = fold_index;
    m.n_val_patients = static_cast<int>(patients.size());
    m.auc = roc_auc(scores, labels);
    m.balanced_accuracy = balanced_accuracy_at(scores, labels, 0.5);
    if (!m.auc) log_warn("fold " + std::to_string(fold_index) + ": single-class validation set, AUC undefined");
    return m;
}

std::string_view to_string(Procedure p) noexcept {
    return p == Procedure::LinearProbe ? "linear_probe" : "finetune";
}

Procedure parse_procedure(std::string_view text) {
    if (text == "linear_probe") return Procedure::LinearProbe;
    if (text == "finetune") return Procedure::FineTune;
    throw Error("parse_error", "unknown procedure '" + std::string(text) + "'");
}

std::optional<Summary> summarize(std::span<const double> values) {
    if (values.empty()) return std::nullopt;
    Summary s;
    s.count = static_cast<int>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.count;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / s.count);
    return s;
}

ProcedureReport aggregate_folds(std::string method, Procedure procedure, std::vector<FoldMetrics> folds,
                                int expected_folds) {
    ProcedureReport r;
    r.method = std::move(method);
    r.procedure = procedure;
    r.expected_folds = expected_folds;
    std::sort(folds.begin(), folds.end(), [](const auto& a, const auto& b) { return a.fold_index < b.fold_index; });
    r.folds = std::move(folds);

    std::vector<double> aucs, bals;
    for (const auto& f : r.folds) {
        if (f.auc) aucs.push_back(*f.auc);
        if (f.balanced_accuracy) bals.push_back(*f.balanced_accuracy);
    }
    r.auc = summarize(aucs);
    r.balanced_accuracy = summarize(bals);
    r.complete = static_cast<int>(r.folds.size()) == expected_folds &&
                 static_cast<int>(aucs.size()) == expected_folds && static_cast<int>(bals.size()) == expected_folds;
    if (static_cast<int>(r.folds.size()) < expected_folds) {
        r.warnings.push_back("only " + std::to_string(r.folds.size()) + " of " + std::to_string(expected_folds) +
                             " folds present");
    }
    if (aucs.size() < r.folds.size()) r.warnings.push_back("some folds have undefined AUC (single-class validation)");
    return r;
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

} // namespace

std::string report_to_json(const ProcedureReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["procedure"] = std::string(to_string(r.procedure));
    ordered_json folds = ordered_json::array();
    for (const auto& f : r.folds) {
        folds.push_back(ordered_json{{"fold", f.fold_index},
                                     {"auc", opt(f.auc)},
                                     {"bal_acc", opt(f.balanced_accuracy)},
                                     {"n_val_patients", f.n_val_patients}});
    }
    j["folds"] = folds;
    j["mean_auc"] = r.auc ? ordered_json(r.auc->mean) : ordered_json(nullptr);
    j["std_auc"] = r.auc ? ordered_json(r.auc->std) : ordered_json(nullptr);
    j["mean_bal_acc"] = r.balanced_accuracy ? ordered_json(r.balanced_accuracy->mean) : ordered_json(nullptr);
    j["std_bal_acc"] = r.balanced_accuracy ? ordered_json(r.balanced_accuracy->std) : ordered_json(nullptr);
    j["complete"] = r.complete;
    j["expected_folds"] = r.expected_folds;
    j["warnings"] = r.warnings;
    return j.dump(2);
}

ProcedureReport report_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        std::vector<FoldMetrics> folds;
        for (const auto& f : j.at("folds")) {
            FoldMetrics m;
            m.fold_index = f.at("fold").get<int>();
            m.auc = opt_from(f, "auc");
            m.balanced_accuracy = opt_from(f, "bal_acc");
            m.n_val_patients = f.value("n_val_patients", 0);
            folds.push_back(m);
        }
        const int expected = j.value("expected_folds", static_cast<int>(folds.size()));
        return aggregate_folds(j.at("method").get<std::string>(),
                               parse_procedure(j.at("procedure").get<std::string>()), std::move(folds), expected);
    } catch (const nlohmann::json::exception& e) {
        throw Error("parse_error", std::string("malformed metrics JSON: ") + e.what());
    }
}

void write_metrics_json(const ProcedureReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << report_to_json(report) << '\n';
}

ProcedureReport read_metrics_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

void write_report_csv(const AggregateReport& report, const std::filesystem::path& path, std::string_view key_column) {
    std::vector<std::string> keys;
    std::map<std::pair<std::string, Procedure>, const ProcedureReport*> cells;
    for (const auto& r : report.rows) {
        if (std::find(keys.begin(), keys.end(), r.method) == keys.end()) keys.push_back(r.method);
        cells[{r.method, r.procedure}] = &r;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << key_column
        << ",auc_linear_probe_mean,auc_linear_probe_std,auc_finetune_mean,auc_finetune_std,"
           "bal_acc_linear_probe_mean,bal_acc_linear_probe_std,bal_acc_finetune_mean,bal_acc_finetune_std,complete\n";
    auto fmt = [](double v) {
        std::ostringstream s;
        s.precision(6);
        s << std::fixed << v;
        return s.str();
    };
    for (const auto& key : keys) {
        out << key;
        bool complete = true;
        for (int metric = 0; metric < 2; ++metric) {
            for (auto proc : {Procedure::LinearProbe, Procedure::FineTune}) {
                auto it = cells.find({key, proc});
                const std::optional<Summary>* s = nullptr;
                if (it != cells.end()) s = metric == 0 ? &it->second->auc : &it->second->balanced_accuracy;
                if (s && s->has_value())
                    out << ',' << fmt((*s)->mean) << ',' << fmt((*s)->std);
                else
                    out << ",NA,NA";
                if (metric == 0 && it != cells.end() && !it->second->complete) complete = false;
            }
        }
        out << ',' << (complete ? "true" : "false") << '\n';
    }
}

void write_report_json(const AggregateReport& report, const std::filesystem::path& path) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : report.rows) arr.push_back(ordered_json::parse(report_to_json(r)));
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << arr.dump(2) << '\n';
}

} // namespace weakclr
