#pragma once

// Cross-validated experiment protocols: pretraining on the weakly-labelled
// cohort, linear probing and fine-tuning on the histology cohort, and the β /
// training-fraction sweeps. Every run writes into its own directory.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "weakclr/config.hpp"
#include "weakclr/metrics.hpp"
#include "weakclr/train.hpp"

namespace weakclr {

// "none" (train from scratch) followed by the four pretraining objectives.
const std::vector<std::string>& all_methods();
// Comma-separated list; rejects unknown and repeated names.
std::vector<std::string> parse_method_list(std::string_view text);

SliceDataset load_radio_dataset(const ExperimentConfig& config);
SliceDataset load_histo_dataset(const ExperimentConfig& config);

std::vector<FoldSplit> make_folds(const ExperimentConfig& config, const SliceDataset& histo);
void write_folds_json(const std::vector<FoldSplit>& folds, const std::filesystem::path& path);

// Folds selected by eval.fold (all of them when it is -1).
std::vector<FoldSplit> selected_folds(const ExperimentConfig& config, const std::vector<FoldSplit>& folds);

// Writes checkpoint.wclr, loss_curve.csv and the config snapshot to run_dir.
ModelState<float> run_pretrain(const ExperimentConfig& config, const SliceDataset& radio,
                               const std::filesystem::path& run_dir);

// Per-fold runs under dir/fold_<k>/ plus dir/metrics.json.
ProcedureReport run_finetune_cv(const ExperimentConfig& config, const std::string& label,
                                const ModelState<float>* init, const SliceDataset& histo,
                                const std::vector<FoldSplit>& folds, double train_fraction,
                                const std::filesystem::path& dir, int jobs);
ProcedureReport run_probe_cv(const ExperimentConfig& config, const std::string& label, const ModelParams<float>& params,
                             const SliceDataset& histo, const std::vector<FoldSplit>& folds, double train_fraction,
                             const std::filesystem::path& dir, int jobs);

// Table-1 grid: one row per method, linear probe and fine-tuning columns. The
// from-scratch baseline has no pretrained representation, so its probe cell
// stays empty. Writes report.csv / report.json under out.
AggregateReport run_cv(const ExperimentConfig& config, const std::vector<std::string>& methods,
                       const std::filesystem::path& out, int jobs);

enum class SweepKind { Beta, Fraction };

struct Sweep {
    SweepKind kind = SweepKind::Beta;
    std::vector<double> values;
};

// "beta=0,0.2,0.5" or "fraction=0.4,0.6,0.8,1".
Sweep parse_sweep(std::string_view text);

// β sweep: weak_simclr pretraining per value, beta_sweep.csv.
// Fraction sweep: one pretraining per method, then cross-validation with the
// training patients subsampled per value; fraction_curve.csv.
AggregateReport run_ablation(const ExperimentConfig& config, const Sweep& sweep,
                             const std::vector<std::string>& methods, const std::filesystem::path& out, int jobs);

// Collects every metrics.json below the given directories.
AggregateReport merge_reports(const std::vector<std::filesystem::path>& dirs);

// Writes <dir>/INCOMPLETE on construction and removes it on commit(), so an
// aborted run leaves its directory visibly marked.
class IncompleteMarker {
public:
    explicit IncompleteMarker(std::filesystem::path dir);
    ~IncompleteMarker();
    void commit();
    IncompleteMarker(const IncompleteMarker&) = delete;
    IncompleteMarker& operator=(const IncompleteMarker&) = delete;

private:
    std::filesystem::path path_;
    bool committed_ = false;
};

inline constexpr const char* kCheckpointName = "checkpoint.wclr";
inline constexpr const char* kIncompleteName = "INCOMPLETE";

} // namespace weakclr
