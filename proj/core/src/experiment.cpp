#include "weakclr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "weakclr/checkpoint.hpp"
#include "weakclr/error.hpp"
#include "weakclr/log.hpp"
#include "weakclr/manifest.hpp"
#include "weakclr/parallel.hpp"
#include "weakclr/probe.hpp"

namespace fs = std::filesystem;

namespace weakclr {

namespace {

std::string fmt_value(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string fold_dir_name(int fold) { return "fold_" + std::to_string(fold); }

// Rows of the full-cohort feature matrix that belong to the given patients.
ProbeSamples gather(const SliceDataset& histo, const Matrix<double>& features, std::span<const std::string> ids) {
    std::map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < histo.patient_ids.size(); ++i) index[histo.patient_ids[i]] = i;
    std::vector<int> rows;
    for (const auto& id : ids) {
        auto it = index.find(id);
        WEAKCLR_CHECK(it != index.end(), "unknown_patient", "patient '" + id + "' is not in the cohort");
        for (int s : histo.patient_slices[it->second]) rows.push_back(s);
    }
    ProbeSamples out;
    out.features = Matrix<double>(static_cast<int>(rows.size()), features.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(features.row(rows[r]).begin(), features.cols, out.features.row(static_cast<int>(r)).begin());
        out.labels.push_back(histo.labels[rows[r]]);
        out.patient_ids.push_back(histo.slices[rows[r]].source_patient);
        out.slice_indices.push_back(histo.slices[rows[r]].slice_index);
    }
    return out;
}

ExperimentConfig with_method(ExperimentConfig config, const std::string& method) {
    config.train.loss.method = parse_loss_method(method);
    if (config.train.loss.method != LossMethod::WeakSimCLR) config.train.beta_explicit = false;
    return config;
}

// Pretrain (unless "none") and run both procedures for one row of a table.
void run_row(const ExperimentConfig& config, const std::string& method, const std::string& label,
             const SliceDataset* radio, const SliceDataset& histo, const std::vector<FoldSplit>& folds,
             double fraction, const fs::path& row_dir, const ModelState<float>* pretrained, int jobs,
             AggregateReport& report) {
    if (method == "none") {
        report.rows.push_back(run_finetune_cv(config, label, nullptr, histo, folds, fraction, row_dir / "finetune", jobs));
        return;
    }
    ModelState<float> state;
    if (!pretrained) {
        state = run_pretrain(with_method(config, method), *radio, row_dir / "pretrain");
        pretrained = &state;
    }
    report.rows.push_back(
        run_probe_cv(config, label, pretrained->params, histo, folds, fraction, row_dir / "linear_probe", jobs));
    report.rows.push_back(
        run_finetune_cv(config, label, pretrained, histo, folds, fraction, row_dir / "finetune", jobs));
}

bool needs_radio(const std::vector<std::string>& methods) {
    return std::any_of(methods.begin(), methods.end(), [](const auto& m) { return m != "none"; });
}

} // namespace

const std::vector<std::string>& all_methods() {
    static const std::vector<std::string> methods = {"none", "weak", "simclr", "supcon", "weak_simclr"};
    return methods;
}

std::vector<std::string> parse_method_list(std::string_view text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        WEAKCLR_CHECK(std::find(all_methods().begin(), all_methods().end(), item) != all_methods().end(),
                      "config_error", "--methods: unknown method '" + item + "'");
        WEAKCLR_CHECK(std::find(out.begin(), out.end(), item) == out.end(), "config_error",
                      "--methods: '" + item + "' listed twice");
        out.push_back(item);
    }
    WEAKCLR_CHECK(!out.empty(), "config_error", "--methods: empty method list");
    return out;
}

SliceDataset load_radio_dataset(const ExperimentConfig& config) {
    WEAKCLR_CHECK(!config.radio_manifest.empty(), "config_error", "data.radio_manifest is not set");
    const CohortManifest m = load_validated_manifest(config.radio_manifest);
    return load_slice_dataset(m, LabelSource::Radio, config.train.slice_fraction);
}

SliceDataset load_histo_dataset(const ExperimentConfig& config) {
    WEAKCLR_CHECK(!config.histo_manifest.empty(), "config_error", "data.histo_manifest is not set");
    const CohortManifest m = load_validated_manifest(config.histo_manifest);
    return load_slice_dataset(m, LabelSource::Histo, config.train.slice_fraction);
}

std::vector<FoldSplit> make_folds(const ExperimentConfig& config, const SliceDataset& histo) {
    return stratified_kfold(histo.patient_ids, histo.patient_labels, config.train.k_folds, config.train.seed);
}

void write_folds_json(const std::vector<FoldSplit>& folds, const fs::path& path) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& f : folds) arr.push_back({{"fold", f.fold_index}, {"train", f.train_ids}, {"val", f.val_ids}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << arr.dump(2) << '\n';
}

std::vector<FoldSplit> selected_folds(const ExperimentConfig& config, const std::vector<FoldSplit>& folds) {
    if (config.fold < 0) return folds;
    WEAKCLR_CHECK(config.fold < static_cast<int>(folds.size()), "config_error",
                  "eval.fold: no fold " + std::to_string(config.fold) + " with " + std::to_string(folds.size()) +
                      " folds");
    return {folds[config.fold]};
}

ModelState<float> run_pretrain(const ExperimentConfig& config, const SliceDataset& radio, const fs::path& run_dir) {
    fs::create_directories(run_dir);
    write_config_snapshot(config, run_dir);
    PretrainResult r = pretrain(config.train, radio);
    write_loss_curve(r.curve, run_dir / "loss_curve.csv");
    save_checkpoint(r.state, run_dir / kCheckpointName);
    return std::move(r.state);
}

ProcedureReport run_finetune_cv(const ExperimentConfig& config, const std::string& label,
                                const ModelState<float>* init, const SliceDataset& histo,
                                const std::vector<FoldSplit>& folds, double train_fraction, const fs::path& dir,
                                int jobs) {
    fs::create_directories(dir);
    std::vector<FoldMetrics> metrics(folds.size());
    parallel_for(static_cast<int>(folds.size()), jobs, [&](int i) {
        const FoldSplit& fold = folds[i];
        const fs::path run_dir = dir / fold_dir_name(fold.fold_index);
        fs::create_directories(run_dir);
        write_config_snapshot(config, run_dir);
        FinetuneResult r = finetune(config.train, histo, fold, init, train_fraction);
        write_loss_curve(r.curve, run_dir / "loss_curve.csv");
        write_predictions(r.val_predictions, run_dir / "predictions.csv");
        if (config.save_fold_checkpoints) save_checkpoint(r.state, run_dir / kCheckpointName);
        metrics[i] = evaluate_fold(fold.fold_index, r.val_predictions);
    });
    ProcedureReport report = aggregate_folds(label, Procedure::FineTune, std::move(metrics), config.train.k_folds);
    write_metrics_json(report, dir / "metrics.json");
    return report;
}

ProcedureReport run_probe_cv(const ExperimentConfig& config, const std::string& label, const ModelParams<float>& params,
                             const SliceDataset& histo, const std::vector<FoldSplit>& folds, double train_fraction,
                             const fs::path& dir, int jobs) {
    fs::create_directories(dir);
    write_config_snapshot(config, dir);
    const Matrix<double> features = extract_representations(params, histo.slices);
    std::vector<FoldMetrics> metrics(folds.size());
    parallel_for(static_cast<int>(folds.size()), jobs, [&](int i) {
        const FoldSplit& fold = folds[i];
        const auto train_ids = fold_training_ids(config.train, histo, fold, train_fraction);
        const ProbeSamples train = gather(histo, features, train_ids);
        const ProbeSamples val = gather(histo, features, fold.val_ids);
        std::vector<SlicePrediction> preds;
        metrics[i] = linear_probe(train, val, fold.fold_index, config.probe, &preds);
        const fs::path run_dir = dir / fold_dir_name(fold.fold_index);
        fs::create_directories(run_dir);
        write_predictions(preds, run_dir / "predictions.csv");
    });
    ProcedureReport report = aggregate_folds(label, Procedure::LinearProbe, std::move(metrics), config.train.k_folds);
    write_metrics_json(report, dir / "metrics.json");
    return report;
}

AggregateReport run_cv(const ExperimentConfig& config, const std::vector<std::string>& methods, const fs::path& out,
                       int jobs) {
    fs::create_directories(out);
    IncompleteMarker marker(out);
    write_config_snapshot(config, out);
    const SliceDataset histo = load_histo_dataset(config);
    const SliceDataset radio = needs_radio(methods) ? load_radio_dataset(config) : SliceDataset{};
    const auto all = make_folds(config, histo);
    write_folds_json(all, out / "folds.json");
    const auto folds = selected_folds(config, all);

    AggregateReport report;
    for (const auto& method : methods) {
        log_info("cv: method " + method);
        run_row(config, method, method, &radio, histo, folds, config.train.train_fraction, out / method, nullptr,
                jobs, report);
    }
    write_report_csv(report, out / "report.csv", "method");
    write_report_json(report, out / "report.json");
    marker.commit();
    return report;
}

Sweep parse_sweep(std::string_view text) {
    const auto eq = text.find('=');
    WEAKCLR_CHECK(eq != std::string_view::npos, "config_error",
                  "--sweep: expected beta=v1,v2,... or fraction=v1,v2,...");
    Sweep sweep;
    const std::string_view kind = text.substr(0, eq);
    if (kind == "beta")
        sweep.kind = SweepKind::Beta;
    else if (kind == "fraction")
        sweep.kind = SweepKind::Fraction;
    else
        throw Error("config_error", "--sweep: unknown sweep '" + std::string(kind) + "'");
    std::string item;
    std::istringstream in{std::string(text.substr(eq + 1))};
    while (std::getline(in, item, ',')) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        WEAKCLR_CHECK(ec == std::errc() && p == item.data() + item.size() && !item.empty(), "config_error",
                      "--sweep: '" + item + "' is not a number");
        if (sweep.kind == SweepKind::Beta)
            WEAKCLR_CHECK(v >= 0.0 && v <= 1.0, "config_error", "--sweep: beta " + item + " outside [0, 1]");
        else
            WEAKCLR_CHECK(v > 0.0 && v <= 1.0, "config_error", "--sweep: fraction " + item + " outside (0, 1]");
        sweep.values.push_back(v);
    }
    WEAKCLR_CHECK(!sweep.values.empty(), "config_error", "--sweep: no values");
    return sweep;
}

AggregateReport run_ablation(const ExperimentConfig& config, const Sweep& sweep,
                             const std::vector<std::string>& methods, const fs::path& out, int jobs) {
    fs::create_directories(out);
    IncompleteMarker marker(out);
    write_config_snapshot(config, out);
    const SliceDataset histo = load_histo_dataset(config);
    const auto all = make_folds(config, histo);
    write_folds_json(all, out / "folds.json");
    const auto folds = selected_folds(config, all);
    AggregateReport report;

    if (sweep.kind == SweepKind::Beta) {
        const SliceDataset radio = load_radio_dataset(config);
        for (double beta : sweep.values) {
            ExperimentConfig c = config;
            c.train.loss.beta = beta;
            c.train.beta_explicit = true;
            const std::string label = fmt_value(beta);
            log_info("ablate: beta " + label);
            run_row(c, "weak_simclr", label, &radio, histo, folds, c.train.train_fraction, out / ("beta_" + label),
                    nullptr, jobs, report);
        }
        write_report_csv(report, out / "beta_sweep.csv", "beta");
    } else {
        const SliceDataset radio = needs_radio(methods) ? load_radio_dataset(config) : SliceDataset{};
        std::ofstream curve(out / "fraction_curve.csv", std::ios::trunc);
        if (!curve) throw Error("io_error", "cannot write fraction_curve.csv");
        curve << "method,procedure,fraction,mean_auc,std_auc,mean_bal_acc,std_bal_acc,complete\n";
        for (const auto& method : methods) {
            std::optional<ModelState<float>> pretrained;
            if (method != "none")
                pretrained = run_pretrain(with_method(config, method), radio, out / method / "pretrain");
            for (double fraction : sweep.values) {
                const std::string label = method + "@" + fmt_value(fraction);
                log_info("ablate: " + label);
                const std::size_t first = report.rows.size();
                run_row(config, method, label, &radio, histo, folds, fraction,
                        out / method / ("fraction_" + fmt_value(fraction)), pretrained ? &*pretrained : nullptr, jobs,
                        report);
                for (std::size_t r = first; r < report.rows.size(); ++r) {
                    const auto& row = report.rows[r];
                    auto cell = [](const std::optional<Summary>& s, bool mean) {
                        return s ? fmt_value(mean ? s->mean : s->std) : std::string("NA");
                    };
                    curve << method << ',' << to_string(row.procedure) << ',' << fmt_value(fraction) << ','
                          << cell(row.auc, true) << ',' << cell(row.auc, false) << ','
                          << cell(row.balanced_accuracy, true) << ',' << cell(row.balanced_accuracy, false) << ','
                          << (row.complete ? "true" : "false") << '\n';
                }
            }
        }
    }
    write_report_json(report, out / "report.json");
    marker.commit();
    return report;
}

AggregateReport merge_reports(const std::vector<fs::path>& dirs) {
    std::vector<fs::path> files;
    for (const auto& d : dirs) {
        WEAKCLR_CHECK(fs::exists(d), "missing_file", "run directory '" + d.string() + "' does not exist");
        if (fs::is_regular_file(d)) {
            files.push_back(d);
            continue;
        }
        for (const auto& entry : fs::recursive_directory_iterator(d))
            if (entry.is_regular_file() && entry.path().filename() == "metrics.json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    WEAKCLR_CHECK(!files.empty(), "missing_file", "no metrics.json found in the given run directories");
    AggregateReport report;
    for (const auto& f : files) report.rows.push_back(read_metrics_json(f));
    return report;
}

IncompleteMarker::IncompleteMarker(fs::path dir) : path_(std::move(dir) / kIncompleteName) {
    std::ofstream out(path_, std::ios::trunc);
    out << "run did not finish; outputs in this directory are partial\n";
}

IncompleteMarker::~IncompleteMarker() {
    if (!committed_) log_warn("leaving " + path_.string() + " in place");
}

void IncompleteMarker::commit() {
    std::error_code ec;
    fs::remove(path_, ec);
    committed_ = true;
}

} // namespace weakclr
