#include "weakclr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

std::map<int, std::vector<std::size_t>> group_by_label(std::span<const std::string> ids, std::span<const int> labels) {
    WEAKCLR_CHECK(ids.size() == labels.size(), "invalid_argument", "patient id and label counts differ");
    std::set<std::string> seen;
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        WEAKCLR_CHECK(seen.insert(ids[i]).second, "invalid_argument", "duplicate patient id '" + ids[i] + "'");
        groups[labels[i]].push_back(i);
    }
    return groups;
}

} // namespace

std::vector<FoldSplit> stratified_kfold(std::span<const std::string> patient_ids, std::span<const int> labels, int k,
                                        std::uint64_t seed) {
    WEAKCLR_CHECK(k >= 2, "invalid_argument", "k-fold needs k >= 2");
    auto groups = group_by_label(patient_ids, labels);
    for (const auto& [label, members] : groups) {
        if (static_cast<int>(members.size()) < k) {
            throw Error("too_few_patients", "class " + std::to_string(label) + " has " +
                                                std::to_string(members.size()) + " patients, fewer than k=" +
                                                std::to_string(k));
        }
    }

    std::vector<int> fold_of(patient_ids.size(), 0);
    int next = 0;
    for (auto& [label, members] : groups) {
        Rng rng(derive_seed(seed, {0xf01d, static_cast<std::uint64_t>(label)}));
        rng.shuffle(members.begin(), members.end());
        for (std::size_t idx : members) {
            fold_of[idx] = next;
            next = (next + 1) % k;
        }
    }

    std::vector<FoldSplit> folds(k);
    for (int f = 0; f < k; ++f) {
        folds[f].fold_index = f;
        for (std::size_t i = 0; i < patient_ids.size(); ++i)
            (fold_of[i] == f ? folds[f].val_ids : folds[f].train_ids).push_back(patient_ids[i]);
    }
    return folds;
}

std::vector<std::size_t> SamplerPlan::draw(Rng& rng) const {
    WEAKCLR_CHECK(!weights.empty(), "invalid_argument", "sampler has no items");
    std::vector<double> cumulative(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total = cumulative.back();
    std::vector<std::size_t> out(epoch_length);
    for (auto& o : out) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        o = std::min(static_cast<std::size_t>(it - cumulative.begin()), weights.size() - 1);
    }
    return out;
}

SamplerPlan class_weighted_sampler(std::span<const int> slice_labels) {
    std::map<int, std::size_t> counts;
    for (int l : slice_labels) ++counts[l];
    if (counts.size() < 2) throw Error("single_class", "weighted sampling needs both classes in the training set");
    SamplerPlan plan;
    plan.epoch_length = slice_labels.size();
    plan.weights.reserve(slice_labels.size());
    for (int l : slice_labels) plan.weights.push_back(1.0 / static_cast<double>(counts[l]));
    return plan;
}

SamplerPlan uniform_sampler(std::size_t n) {
    SamplerPlan plan;
    plan.epoch_length = n;
    plan.weights.assign(n, 1.0);
    return plan;
}

std::vector<std::string> stratified_subsample(std::span<const std::string> patient_ids, std::span<const int> labels,
                                              double fraction, std::uint64_t seed) {
    WEAKCLR_CHECK(fraction > 0.0 && fraction <= 1.0, "invalid_argument", "train fraction must lie in (0, 1]");
    if (fraction == 1.0) return {patient_ids.begin(), patient_ids.end()};
    auto groups = group_by_label(patient_ids, labels);
    const std::size_t n = patient_ids.size();
    const auto total = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));

    std::vector<std::pair<int, std::size_t>> quota;
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (const auto& [label, members] : groups) {
        const double exact = static_cast<double>(total) * members.size() / static_cast<double>(n);
        const auto base = static_cast<std::size_t>(std::floor(exact));
        quota.emplace_back(label, base);
        remainders.emplace_back(exact - base, label);
        assigned += base;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned)
        for (auto& [label, q] : quota)
            if (label == remainders[r].second) ++q;

    std::vector<bool> keep(n, false);
    for (auto& [label, q] : quota) {
        auto members = groups[label];
        Rng rng(derive_seed(seed, {0x5b5, static_cast<std::uint64_t>(label)}));
        rng.shuffle(members.begin(), members.end());
        for (std::size_t i = 0; i < std::min(q, members.size()); ++i) keep[members[i]] = true;
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(patient_ids[i]);
    return out;
}

} // namespace weakclr
