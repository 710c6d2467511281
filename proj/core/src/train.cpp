#include "weakclr/train.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "weakclr/error.hpp"
#include "weakclr/image_io.hpp"
#include "weakclr/log.hpp"

namespace weakclr {

namespace {

constexpr std::uint64_t kTagSampler = 0x5a3b1e;
constexpr std::uint64_t kTagAugment = 0xa7c0;
constexpr std::uint64_t kTagInit = 0x1417;
constexpr std::uint64_t kTagHead = 0x4ead;
constexpr std::uint64_t kTagSubsample = 0x5ab5;
constexpr std::uint64_t kTagFinetune = 0xf17e;
constexpr int kInferenceChunk = 64;

template <typename T>
Matrix<T> take_rows(const Matrix<T>& m, int begin, int count) {
    Matrix<T> out(count, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(begin) * m.cols,
              m.data.begin() + static_cast<std::ptrdiff_t>(begin + count) * m.cols, out.data.begin());
    return out;
}

template <typename T>
void put_rows(Matrix<T>& dst, int begin, const Matrix<T>& src) {
    std::copy(src.data.begin(), src.data.end(), dst.data.begin() + static_cast<std::ptrdiff_t>(begin) * dst.cols);
}

int views_for(LossMethod method) {
    switch (method) {
    case LossMethod::Weak: return 1;
    case LossMethod::SimCLR:
    case LossMethod::SupCon: return 2;
    case LossMethod::WeakSimCLR: return 3;
    }
    return 1;
}

// One optimiser step on a batch of n sources. Image layout: weak uses one view
// per source; the contrastive methods put the two views of source k at rows
// 2k and 2k+1; weak_simclr appends the third views as rows 2n..3n-1.
LossValue train_step(ModelParams<float>& params, ModelParams<float>& grads, AdamW<float>& opt,
                     const std::vector<Image>& images, const std::vector<int>& labels, const LossConfig& loss, double lr,
                     double wd) {
    const int n = static_cast<int>(labels.size());
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& im : images) ptrs.push_back(&im);
    const Tensor4<float> x = stack_images<float>(std::span<const Image* const>(ptrs));

    BackboneTrace<float> bt;
    const Matrix<float> repr = backbone_forward(params, x, &bt);
    grads.set_zero();
    Matrix<float> d_repr(repr.rows, repr.cols);
    LossValue lv;

    switch (loss.method) {
    case LossMethod::Weak: {
        HeadTrace<float> ht;
        const Matrix<float> logits = cls_head_forward(params, repr, &ht);
        Matrix<float> g;
        lv = weak_bce(logits, labels, &g);
        d_repr = cls_head_backward(params, ht, g, grads);
        break;
    }
    case LossMethod::SimCLR:
    case LossMethod::SupCon: {
        HeadTrace<float> ht;
        const Matrix<float> z = ssl_head_forward(params, repr, &ht);
        Matrix<float> g;
        if (loss.method == LossMethod::SimCLR) {
            lv = ntxent(z, loss.temperature, &g);
        } else {
            std::vector<int> row_labels;
            for (int l : labels) row_labels.insert(row_labels.end(), {l, l});
            lv = supcon(z, row_labels, loss.temperature, &g, loss.supcon_reduction);
        }
        d_repr = ssl_head_backward(params, ht, g, grads);
        break;
    }
    case LossMethod::WeakSimCLR: {
        HeadTrace<float> hz, hl;
        const Matrix<float> z = ssl_head_forward(params, take_rows(repr, 0, 2 * n), &hz);
        const Matrix<float> logits = cls_head_forward(params, take_rows(repr, 2 * n, n), &hl);
        Matrix<float> gz, gl;
        lv = weak_simclr(z, logits, labels, loss.temperature, loss.beta, &gz, &gl);
        put_rows(d_repr, 0, ssl_head_backward(params, hz, gz, grads));
        put_rows(d_repr, 2 * n, cls_head_backward(params, hl, gl, grads));
        break;
    }
    }
    if (!std::isfinite(lv.value)) return lv;
    backbone_backward(params, bt, d_repr, grads);
    opt.step(params, grads, lr, wd);
    return lv;
}

struct LoopSettings {
    LossConfig loss;
    AugmentConfig aug;
    int batch_size = 0;
    int n_epochs = 0;
    double base_lr = 0.0;
    double weight_decay = 0.0;
    bool weighted = true;
    AdamWOptions adam;
    std::uint64_t stream_seed = 0;
    std::string tag;
};

std::vector<EpochLog> run_training(ModelParams<float>& params, const SliceDataset& ds, const LoopSettings& s,
                                   const EpochCallback& on_epoch) {
    WEAKCLR_CHECK(!ds.slices.empty(), "empty_dataset", s.tag + ": no training slices");
    const SamplerPlan plan = s.weighted ? class_weighted_sampler(ds.labels) : uniform_sampler(ds.slices.size());
    const int n_views = views_for(s.loss.method);
    const long steps_per_epoch = static_cast<long>((plan.epoch_length + s.batch_size - 1) / s.batch_size);
    const long total = static_cast<long>(s.n_epochs) * steps_per_epoch;
    const std::uint64_t aug_seed = derive_seed(s.stream_seed, {kTagAugment});

    AdamW<float> opt(s.adam);
    ModelParams<float> grads = ModelParams<float>::zeros();
    std::vector<EpochLog> curve;
    long step = 0;
    for (int epoch = 0; epoch < s.n_epochs; ++epoch) {
        Rng sampler_rng(derive_seed(s.stream_seed, {kTagSampler, static_cast<std::uint64_t>(epoch)}));
        const std::vector<std::size_t> draws = plan.draw(sampler_rng);
        EpochLog log{epoch, 0.0, cosine_lr(step, total, s.base_lr), std::nullopt, std::nullopt};
        double weak_sum = 0.0, simclr_sum = 0.0;
        for (long b = 0; b < steps_per_epoch; ++b, ++step) {
            const std::size_t begin = static_cast<std::size_t>(b) * s.batch_size;
            const std::size_t count = std::min<std::size_t>(s.batch_size, draws.size() - begin);
            std::vector<Image> images(count * n_views);
            std::vector<int> labels(count);
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t idx = draws[begin + k];
                labels[k] = ds.labels[idx];
                ViewSet vs = make_views_seeded(ds.slices[idx], aug_seed, static_cast<std::uint64_t>(epoch), begin + k,
                                               n_views, s.aug);
                if (n_views == 1) {
                    images[k] = std::move(vs.views[0]);
                } else {
                    images[2 * k] = std::move(vs.views[0]);
                    images[2 * k + 1] = std::move(vs.views[1]);
                    if (n_views == 3) images[2 * count + k] = std::move(vs.views[2]);
                }
            }
            const double lr = cosine_lr(step, total, s.base_lr);
            const LossValue lv = train_step(params, grads, opt, images, labels, s.loss, lr, s.weight_decay);
            if (!std::isfinite(lv.value)) {
                std::ostringstream msg;
                msg << s.tag << ": non-finite loss " << lv.value << " at epoch " << epoch << ", batch " << b
                    << " (lr " << lr << ")";
                if (lv.weak_part) msg << ", weak part " << *lv.weak_part;
                if (lv.simclr_part) msg << ", simclr part " << *lv.simclr_part;
                throw Error("nan_loss", msg.str());
            }
            log.loss += lv.value;
            if (lv.weak_part) weak_sum += *lv.weak_part;
            if (lv.simclr_part) simclr_sum += *lv.simclr_part;
        }
        log.loss /= static_cast<double>(steps_per_epoch);
        if (s.loss.method == LossMethod::WeakSimCLR) {
            log.weak_part = weak_sum / static_cast<double>(steps_per_epoch);
            log.simclr_part = simclr_sum / static_cast<double>(steps_per_epoch);
        }
        std::ostringstream msg;
        msg << s.tag << " epoch " << epoch + 1 << "/" << s.n_epochs << " loss " << log.loss << " lr " << log.lr;
        log_info(msg.str());
        curve.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    return curve;
}

template <class F>
void for_chunks(std::span<const SliceImage> slices, F&& f) {
    for (std::size_t begin = 0; begin < slices.size(); begin += kInferenceChunk) {
        const std::size_t count = std::min<std::size_t>(kInferenceChunk, slices.size() - begin);
        std::vector<const Image*> ptrs;
        for (std::size_t i = 0; i < count; ++i) ptrs.push_back(&slices[begin + i].image);
        f(begin, stack_images<float>(std::span<const Image* const>(ptrs)));
    }
}

} // namespace

void TrainConfig::validate() const {
    WEAKCLR_CHECK(batch_size >= 2, "config_error", "train.batch_size must be at least 2");
    WEAKCLR_CHECK(n_epochs >= 1, "config_error", "train.n_epochs must be positive");
    WEAKCLR_CHECK(lr_pretrain > 0 && lr_finetune > 0, "config_error", "learning rates must be positive");
    WEAKCLR_CHECK(wd_pretrain >= 0 && wd_finetune >= 0, "config_error", "weight decays must be non-negative");
    WEAKCLR_CHECK(train_fraction > 0 && train_fraction <= 1, "config_error", "train.train_fraction must be in (0, 1]");
    WEAKCLR_CHECK(k_folds >= 2, "config_error", "train.k_folds must be at least 2");
    WEAKCLR_CHECK(slice_fraction > 0 && slice_fraction <= 1, "config_error", "data.slice_fraction must be in (0, 1]");
    loss.validate();
    aug.validate();
}

SliceDataset SliceDataset::subset(std::span<const std::string> ids) const {
    std::map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < patient_ids.size(); ++i) index[patient_ids[i]] = i;
    SliceDataset out;
    out.height = height;
    out.width = width;
    for (const auto& id : ids) {
        auto it = index.find(id);
        WEAKCLR_CHECK(it != index.end(), "unknown_patient", "patient '" + id + "' is not in the cohort");
        const std::size_t p = it->second;
        out.patient_ids.push_back(id);
        out.patient_labels.push_back(patient_labels[p]);
        std::vector<int> idx;
        for (int s : patient_slices[p]) {
            idx.push_back(static_cast<int>(out.slices.size()));
            out.slices.push_back(slices[s]);
            out.labels.push_back(labels[s]);
        }
        out.patient_slices.push_back(std::move(idx));
    }
    return out;
}

SliceDataset load_slice_dataset(const CohortManifest& manifest, LabelSource source, double slice_fraction) {
    SliceDataset ds;
    for (const auto& p : manifest.patients) {
        const std::optional<int> label = source == LabelSource::Histo ? p.y_histo() : p.y_radio();
        WEAKCLR_CHECK(label.has_value(), "missing_label",
                      "patient '" + p.patient_id + "' has no " +
                          (source == LabelSource::Histo ? "histo_stage" : "radio_grade"));
        std::vector<int> chosen;
        if (p.mask_refs) {
            std::vector<std::int64_t> areas;
            for (const auto& ref : *p.mask_refs) {
                const Image m = read_image(manifest.root / ref);
                std::int64_t area = 0;
                for (float v : m.pixels) area += v > 0.5f ? 1 : 0;
                areas.push_back(area);
            }
            try {
                chosen = select_central_slices(areas, slice_fraction);
            } catch (const Error& e) {
                throw Error(e.code(), "patient '" + p.patient_id + "': " + e.what());
            }
        } else {
            for (int i = 0; i < static_cast<int>(p.slice_refs.size()); ++i) chosen.push_back(i);
        }
        std::vector<int> idx;
        for (int s : chosen) {
            const Image raw = read_image(manifest.root / p.slice_refs[s]);
            if (ds.slices.empty()) {
                ds.height = raw.height;
                ds.width = raw.width;
            }
            WEAKCLR_CHECK(raw.height == ds.height && raw.width == ds.width, "shape_mismatch",
                          "patient '" + p.patient_id + "' slice " + std::to_string(s) + " has a different shape");
            idx.push_back(static_cast<int>(ds.slices.size()));
            ds.slices.push_back(preprocess_slice(raw, p.patient_id, s));
            ds.labels.push_back(*label);
        }
        ds.patient_ids.push_back(p.patient_id);
        ds.patient_labels.push_back(*label);
        ds.patient_slices.push_back(std::move(idx));
    }
    return ds;
}

long total_steps(const TrainConfig& config, std::size_t epoch_length) {
    const auto per_epoch = static_cast<long>((epoch_length + config.batch_size - 1) / config.batch_size);
    return static_cast<long>(config.n_epochs) * per_epoch;
}

PretrainResult pretrain(const TrainConfig& config, const SliceDataset& radio, const EpochCallback& on_epoch) {
    config.validate();
    const LossMethod method = config.loss.method;
    if (config.beta_explicit && method != LossMethod::WeakSimCLR) {
        log_warn("loss.beta is ignored for method " + std::string(to_string(method)));
    }
    PretrainResult r;
    r.state = init_model(config.seed);
    LoopSettings s{config.loss,       config.aug,         config.batch_size,
                   config.n_epochs,   config.lr_pretrain, config.wd_pretrain,
                   config.weighted_sampling_pretrain,     config.adam,
                   config.seed,       "pretrain[" + std::string(to_string(method)) + "]"};
    r.curve = run_training(r.state.params, radio, s, on_epoch);
    std::ostringstream prov;
    prov << "pretrain method=" << to_string(method) << " epochs=" << config.n_epochs
         << " batch=" << config.batch_size << " tau=" << config.loss.temperature;
    if (method == LossMethod::WeakSimCLR) prov << " beta=" << config.loss.beta;
    r.state.meta = {config.seed, prov.str()};
    return r;
}

std::vector<std::string> fold_training_ids(const TrainConfig& config, const SliceDataset& histo, const FoldSplit& fold,
                                           double train_fraction) {
    WEAKCLR_CHECK(train_fraction > 0.0 && train_fraction <= 1.0, "invalid_argument",
                  "train fraction must be in (0, 1]");
    if (train_fraction == 1.0) return fold.train_ids;
    std::map<std::string_view, int> label_of;
    for (std::size_t i = 0; i < histo.patient_ids.size(); ++i) label_of[histo.patient_ids[i]] = histo.patient_labels[i];
    std::vector<int> labels;
    for (const auto& id : fold.train_ids) {
        auto it = label_of.find(id);
        WEAKCLR_CHECK(it != label_of.end(), "unknown_patient", "patient '" + id + "' is not in the cohort");
        labels.push_back(it->second);
    }
    return stratified_subsample(fold.train_ids, labels, train_fraction,
                                derive_seed(config.seed, {kTagSubsample, static_cast<std::uint64_t>(fold.fold_index)}));
}

FinetuneResult finetune(const TrainConfig& config, const SliceDataset& histo, const FoldSplit& fold,
                        const ModelState<float>* init, double train_fraction, const EpochCallback& on_epoch) {
    config.validate();
    WEAKCLR_CHECK(train_fraction > 0.0 && train_fraction <= 1.0, "invalid_argument",
                  "train fraction must be in (0, 1]");
    const auto fold_key = static_cast<std::uint64_t>(fold.fold_index);
    // Unknown patients are reported before any training starts.
    const SliceDataset val = histo.subset(fold.val_ids);
    SliceDataset train = histo.subset(fold.train_ids);

    FinetuneResult r;
    r.train_ids = fold_training_ids(config, histo, fold, train_fraction);
    if (train_fraction < 1.0) train = histo.subset(r.train_ids);

    if (init) {
        r.state.params = init->params;
        reinit_cls_head(r.state.params, derive_seed(config.seed, {kTagHead, fold_key}));
    } else {
        r.state = init_model(derive_seed(config.seed, {kTagInit, fold_key}));
    }

    LossConfig loss = config.loss;
    loss.method = LossMethod::Weak;
    LoopSettings s{loss,
                   config.aug,
                   config.batch_size,
                   config.n_epochs,
                   config.lr_finetune,
                   config.wd_finetune,
                   config.weighted_sampling_finetune,
                   config.adam,
                   derive_seed(config.seed, {kTagFinetune, fold_key}),
                   "finetune[fold " + std::to_string(fold.fold_index) + "]"};
    r.curve = run_training(r.state.params, train, s, on_epoch);

    const std::vector<double> probs = predict_positive(r.state.params, val.slices);
    for (std::size_t i = 0; i < val.slices.size(); ++i) {
        r.val_predictions.push_back(
            {val.slices[i].source_patient, val.slices[i].slice_index, probs[i], val.labels[i]});
    }
    std::ostringstream prov;
    prov << "finetune fold=" << fold.fold_index << " fraction=" << train_fraction << " epochs=" << config.n_epochs
         << " init=" << (init ? init->meta.provenance : std::string("none"));
    r.state.meta = {config.seed, prov.str()};
    return r;
}

Matrix<double> extract_representations(const ModelParams<float>& params, std::span<const SliceImage> slices) {
    Matrix<double> out(static_cast<int>(slices.size()), kReprDim);
    for_chunks(slices, [&](std::size_t begin, const Tensor4<float>& x) {
        const Matrix<float> repr = backbone_forward(params, x);
        for (std::size_t i = 0; i < repr.data.size(); ++i) out.data[begin * kReprDim + i] = repr.data[i];
    });
    return out;
}

std::vector<double> predict_positive(const ModelParams<float>& params, std::span<const SliceImage> slices) {
    std::vector<double> out(slices.size());
    for_chunks(slices, [&](std::size_t begin, const Tensor4<float>& x) {
        const Matrix<float> probs = softmax_rows(cls_head_forward(params, backbone_forward(params, x)));
        for (int i = 0; i < probs.rows; ++i) out[begin + i] = probs(i, 1);
    });
    return out;
}

void write_loss_curve(std::span<const EpochLog> curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out.precision(10);
    out << "epoch,loss,lr\n";
    for (const auto& e : curve) out << e.epoch << ',' << e.loss << ',' << e.lr << '\n';
}

void write_predictions(std::span<const SlicePrediction> predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out.precision(17);
    out << "patient_id,slice_index,prob_positive\n";
    for (const auto& p : predictions) out << p.patient_id << ',' << p.slice_index << ',' << p.prob_positive << '\n';
}

std::vector<SlicePrediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot read '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    WEAKCLR_CHECK(line == "patient_id,slice_index,prob_positive", "parse_error",
                  "unexpected predictions header in '" + path.string() + "'");
    std::vector<SlicePrediction> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        SlicePrediction p;
        std::string slice, prob;
        if (!std::getline(row, p.patient_id, ',') || !std::getline(row, slice, ',') || !std::getline(row, prob)) {
            throw Error("parse_error", "malformed predictions row '" + line + "'");
        }
        try {
            p.slice_index = std::stoi(slice);
            p.prob_positive = std::stod(prob);
        } catch (const std::exception&) {
            throw Error("parse_error", "malformed predictions row '" + line + "'");
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace weakclr
