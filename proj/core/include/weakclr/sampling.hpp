#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weakclr/rng.hpp"

namespace weakclr {

struct FoldSplit {
    int fold_index = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
};

// Patient-level stratified k-fold: each class is shuffled (seeded) and dealt
// round-robin over the folds, continuing the deal where the previous class
// stopped so fold sizes stay within one patient of each other.
// Throws Error("too_few_patients") naming the class when a class has fewer
// than k patients.
std::vector<FoldSplit> stratified_kfold(std::span<const std::string> patient_ids, std::span<const int> labels, int k,
                                        std::uint64_t seed);

struct SamplerPlan {
    std::vector<double> weights;
    std::size_t epoch_length = 0;
    bool with_replacement = true;

    // epoch_length indices drawn with replacement proportional to weights.
    std::vector<std::size_t> draw(Rng& rng) const;
};

// weight(slice) = 1 / count(class of slice), so each class is drawn with
// probability 1/2. Throws Error("single_class") unless both classes appear.
SamplerPlan class_weighted_sampler(std::span<const int> slice_labels);
SamplerPlan uniform_sampler(std::size_t n);

// Keeps floor(fraction * n) patients, split across classes by largest
// remainder so class proportions are preserved. Output keeps input order.
std::vector<std::string> stratified_subsample(std::span<const std::string> patient_ids, std::span<const int> labels,
                                              double fraction, std::uint64_t seed);

} // namespace weakclr
