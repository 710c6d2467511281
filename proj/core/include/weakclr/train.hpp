#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakclr/augment.hpp"
#include "weakclr/cohort.hpp"
#include "weakclr/losses.hpp"
#include "weakclr/metrics.hpp"
#include "weakclr/network.hpp"
#include "weakclr/optim.hpp"
#include "weakclr/sampling.hpp"

namespace weakclr {

struct TrainConfig {
    int batch_size = 92;
    int n_epochs = 200;
    double lr_pretrain = 1e-4;
    double wd_pretrain = 1e-4;
    double lr_finetune = 1e-5;
    double wd_finetune = 1e-3;
    AdamWOptions adam;
    std::uint64_t seed = 0;
    double train_fraction = 1.0;
    int k_folds = 5;
    bool weighted_sampling_pretrain = true;
    bool weighted_sampling_finetune = true;
    double slice_fraction = 0.7;
    LossConfig loss;
    AugmentConfig aug;
    bool beta_explicit = false; // loss.beta was set by the user

    void validate() const;
};

enum class LabelSource { Histo, Radio };

// Preprocessed central slices of a cohort with patient-inherited labels.
struct SliceDataset {
    std::vector<SliceImage> slices;
    std::vector<int> labels;                   // per slice
    std::vector<std::string> patient_ids;      // manifest order
    std::vector<int> patient_labels;           // per patient
    std::vector<std::vector<int>> patient_slices; // indices into slices
    int height = 0;
    int width = 0;

    // Patients in the given order. Throws Error("unknown_patient").
    SliceDataset subset(std::span<const std::string> ids) const;
};

// Reads, preprocesses and selects central slices (when masks are present) for
// every patient. Throws Error("missing_label") if a patient lacks the
// requested label.
SliceDataset load_slice_dataset(const CohortManifest& manifest, LabelSource source, double slice_fraction);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0; // mean over the epoch's batches
    double lr = 0.0;   // learning rate at the epoch's first step
    std::optional<double> weak_part;
    std::optional<double> simclr_part;
};

using EpochCallback = std::function<void(const EpochLog&)>;

long total_steps(const TrainConfig& config, std::size_t epoch_length);

struct PretrainResult {
    ModelState<float> state;
    std::vector<EpochLog> curve;
};

// Trains on the radiological labels of the dataset with config.loss.method.
// weak: one augmented view, classifier head. simclr / supcon: two views,
// projection head. weak_simclr: three views, both heads. Throws
// Error("nan_loss") as soon as a batch loss is not finite.
PretrainResult pretrain(const TrainConfig& config, const SliceDataset& radio, const EpochCallback& on_epoch = {});

struct FinetuneResult {
    ModelState<float> state;
    std::vector<EpochLog> curve;
    std::vector<SlicePrediction> val_predictions;
    std::vector<std::string> train_ids; // after fraction subsampling
};

// Training patients of a fold after stratified fraction subsampling; the
// validation side is never subsampled.
std::vector<std::string> fold_training_ids(const TrainConfig& config, const SliceDataset& histo, const FoldSplit& fold,
                                           double train_fraction);

// Supervised training of the whole network on the fold's training patients.
// With init, backbone and shared dense layer are copied and the classifier
// head re-initialised; otherwise the model starts from init_model.
FinetuneResult finetune(const TrainConfig& config, const SliceDataset& histo, const FoldSplit& fold,
                        const ModelState<float>* init, double train_fraction, const EpochCallback& on_epoch = {});

// Frozen 512-d representations, no augmentation. One row per slice.
Matrix<double> extract_representations(const ModelParams<float>& params, std::span<const SliceImage> slices);

// Positive-class probabilities from the classifier head, no augmentation.
std::vector<double> predict_positive(const ModelParams<float>& params, std::span<const SliceImage> slices);

void write_loss_curve(std::span<const EpochLog> curve, const std::filesystem::path& path);
void write_predictions(std::span<const SlicePrediction> predictions, const std::filesystem::path& path);
// Reads predictions.csv; labels are not stored there and come back as 0.
std::vector<SlicePrediction> read_predictions(const std::filesystem::path& path);

} // namespace weakclr
