#include "weakclr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw Error("config_error", key + ": " + what);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) fail(key, "expected a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) fail(key, "expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        fail(key, "expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(key, "expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <class I>
std::string fmt_int(I v) {
    return std::to_string(v);
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail(key, what);
}

struct Key {
    std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// Range checks live in the setters so diagnostics name the offending key.
const std::vector<std::pair<std::string, Key>>& table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<std::pair<std::string, Key>> keys = {
        {"train.batch_size",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 2 && n <= 4096, k, "must be in [2, 4096]");
              c.train.batch_size = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.train.batch_size); }}},
        {"train.n_epochs",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 1 && n <= 100000, k, "must be a positive integer");
              c.train.n_epochs = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.train.n_epochs); }}},
        {"train.lr_pretrain",
         {[](C& c, S k, S v) {
              c.train.lr_pretrain = to_double(k, v);
              require(c.train.lr_pretrain > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.train.lr_pretrain); }}},
        {"train.wd_pretrain",
         {[](C& c, S k, S v) {
              c.train.wd_pretrain = to_double(k, v);
              require(c.train.wd_pretrain >= 0.0, k, "must be non-negative");
          },
          [](const C& c) { return fmt(c.train.wd_pretrain); }}},
        {"train.lr_finetune",
         {[](C& c, S k, S v) {
              c.train.lr_finetune = to_double(k, v);
              require(c.train.lr_finetune > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.train.lr_finetune); }}},
        {"train.wd_finetune",
         {[](C& c, S k, S v) {
              c.train.wd_finetune = to_double(k, v);
              require(c.train.wd_finetune >= 0.0, k, "must be non-negative");
          },
          [](const C& c) { return fmt(c.train.wd_finetune); }}},
        {"train.optimizer",
         {[](C&, S k, S v) { require(v == "adamw", k, "only 'adamw' is supported"); },
          [](const C&) { return std::string("adamw"); }}},
        {"train.adam_beta1",
         {[](C& c, S k, S v) {
              c.train.adam.beta1 = to_double(k, v);
              require(c.train.adam.beta1 >= 0.0 && c.train.adam.beta1 < 1.0, k, "must be in [0, 1)");
          },
          [](const C& c) { return fmt(c.train.adam.beta1); }}},
        {"train.adam_beta2",
         {[](C& c, S k, S v) {
              c.train.adam.beta2 = to_double(k, v);
              require(c.train.adam.beta2 >= 0.0 && c.train.adam.beta2 < 1.0, k, "must be in [0, 1)");
          },
          [](const C& c) { return fmt(c.train.adam.beta2); }}},
        {"train.adam_eps",
         {[](C& c, S k, S v) {
              c.train.adam.eps = to_double(k, v);
              require(c.train.adam.eps > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.train.adam.eps); }}},
        {"train.scheduler",
         {[](C&, S k, S v) { require(v == "cosine", k, "only 'cosine' is supported"); },
          [](const C&) { return std::string("cosine"); }}},
        {"train.seed", {[](C& c, S k, S v) { c.train.seed = to_u64(k, v); },
                        [](const C& c) { return fmt_int(c.train.seed); }}},
        {"train.train_fraction",
         {[](C& c, S k, S v) {
              c.train.train_fraction = to_double(k, v);
              require(c.train.train_fraction > 0.0 && c.train.train_fraction <= 1.0, k, "must be in (0, 1]");
          },
          [](const C& c) { return fmt(c.train.train_fraction); }}},
        {"train.k_folds",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 2 && n <= 100, k, "must be in [2, 100]");
              c.train.k_folds = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.train.k_folds); }}},
        {"train.weighted_sampling_pretrain",
         {[](C& c, S k, S v) { c.train.weighted_sampling_pretrain = to_bool(k, v); },
          [](const C& c) { return fmt(c.train.weighted_sampling_pretrain); }}},
        {"train.weighted_sampling_finetune",
         {[](C& c, S k, S v) { c.train.weighted_sampling_finetune = to_bool(k, v); },
          [](const C& c) { return fmt(c.train.weighted_sampling_finetune); }}},
        {"model.dense_activation",
         {[](C&, S k, S v) { require(v == "relu", k, "only 'relu' is supported"); },
          [](const C&) { return std::string("relu"); }}},
        {"model.init_checkpoint", {[](C& c, S, S v) { c.init_checkpoint = v; },
                                   [](const C& c) { return c.init_checkpoint; }}},
        {"data.slice_fraction",
         {[](C& c, S k, S v) {
              c.train.slice_fraction = to_double(k, v);
              require(c.train.slice_fraction > 0.0 && c.train.slice_fraction <= 1.0, k, "must be in (0, 1]");
          },
          [](const C& c) { return fmt(c.train.slice_fraction); }}},
        {"data.radio_manifest", {[](C& c, S, S v) { c.radio_manifest = v; },
                                 [](const C& c) { return c.radio_manifest; }}},
        {"data.histo_manifest", {[](C& c, S, S v) { c.histo_manifest = v; },
                                 [](const C& c) { return c.histo_manifest; }}},
        {"loss.method",
         {[](C& c, S k, S v) {
              try {
                  c.train.loss.method = parse_loss_method(v);
              } catch (const Error& e) {
                  fail(k, e.what());
              }
          },
          [](const C& c) { return std::string(to_string(c.train.loss.method)); }}},
        {"loss.tau",
         {[](C& c, S k, S v) {
              c.train.loss.temperature = to_double(k, v);
              require(c.train.loss.temperature > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.train.loss.temperature); }}},
        {"loss.beta",
         {[](C& c, S k, S v) {
              c.train.loss.beta = to_double(k, v);
              require(c.train.loss.beta >= 0.0 && c.train.loss.beta <= 1.0, k, "must be in [0, 1]");
          },
          [](const C& c) { return fmt(c.train.loss.beta); }}},
        {"loss.supcon_reduction",
         {[](C& c, S k, S v) {
              try {
                  c.train.loss.supcon_reduction = parse_supcon_reduction(v);
              } catch (const Error& e) {
                  fail(k, e.what());
              }
          },
          [](const C& c) { return std::string(to_string(c.train.loss.supcon_reduction)); }}},
        {"aug.crop_low",
         {[](C& c, S k, S v) {
              c.train.aug.crop_low = to_double(k, v);
              require(c.train.aug.crop_low > 0.0 && c.train.aug.crop_low <= 1.0, k, "must be in (0, 1]");
          },
          [](const C& c) { return fmt(c.train.aug.crop_low); }}},
        {"aug.crop_high",
         {[](C& c, S k, S v) {
              c.train.aug.crop_high = to_double(k, v);
              require(c.train.aug.crop_high > 0.0 && c.train.aug.crop_high <= 1.0, k, "must be in (0, 1]");
          },
          [](const C& c) { return fmt(c.train.aug.crop_high); }}},
        {"aug.rot_deg",
         {[](C& c, S k, S v) {
              c.train.aug.rotation_degrees = to_double(k, v);
              require(c.train.aug.rotation_degrees >= 0.0 && c.train.aug.rotation_degrees <= 180.0, k,
                      "must be in [0, 180]");
          },
          [](const C& c) { return fmt(c.train.aug.rotation_degrees); }}},
        {"aug.flip_p",
         {[](C& c, S k, S v) {
              c.train.aug.flip_prob = to_double(k, v);
              require(c.train.aug.flip_prob >= 0.0 && c.train.aug.flip_prob <= 1.0, k, "must be in [0, 1]");
          },
          [](const C& c) { return fmt(c.train.aug.flip_prob); }}},
        {"aug.cutout", {[](C& c, S k, S v) { c.train.aug.cutout_enabled = to_bool(k, v); },
                        [](const C& c) { return fmt(c.train.aug.cutout_enabled); }}},
        {"aug.cutout_frac",
         {[](C& c, S k, S v) {
              c.train.aug.cutout_size_fraction = to_double(k, v);
              require(c.train.aug.cutout_size_fraction > 0.0 && c.train.aug.cutout_size_fraction < 1.0, k,
                      "must be in (0, 1)");
          },
          [](const C& c) { return fmt(c.train.aug.cutout_size_fraction); }}},
        {"synth.n_patients",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 1 && n <= 1000000, k, "must be a positive integer");
              c.synth.n_patients = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.synth.n_patients); }}},
        {"synth.positive_fraction",
         {[](C& c, S k, S v) {
              c.synth.positive_fraction = to_double(k, v);
              require(c.synth.positive_fraction > 0.0 && c.synth.positive_fraction < 1.0, k, "must be in (0, 1)");
          },
          [](const C& c) { return fmt(c.synth.positive_fraction); }}},
        {"synth.slices_per_patient",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 1 && n <= 10000, k, "must be a positive integer");
              c.synth.slices_per_patient = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.synth.slices_per_patient); }}},
        {"synth.image_size",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 1 && n <= 4096, k, "must be a positive integer");
              c.synth.image_size = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.synth.image_size); }}},
        {"synth.weak_noise_rate",
         {[](C& c, S k, S v) {
              c.synth.weak_noise_rate = to_double(k, v);
              require(c.synth.weak_noise_rate >= 0.0 && c.synth.weak_noise_rate < 1.0, k, "must be in [0, 1)");
          },
          [](const C& c) { return fmt(c.synth.weak_noise_rate); }}},
        {"synth.texture_strength",
         {[](C& c, S k, S v) {
              c.synth.texture_strength = to_double(k, v);
              require(c.synth.texture_strength > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.synth.texture_strength); }}},
        {"synth.seed", {[](C& c, S k, S v) { c.synth.seed = to_u64(k, v); },
                        [](const C& c) { return fmt_int(c.synth.seed); }}},
        {"eval.probe_c",
         {[](C& c, S k, S v) {
              c.probe.c = to_double(k, v);
              require(c.probe.c > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.probe.c); }}},
        {"eval.probe_tol",
         {[](C& c, S k, S v) {
              c.probe.tolerance = to_double(k, v);
              require(c.probe.tolerance > 0.0, k, "must be positive");
          },
          [](const C& c) { return fmt(c.probe.tolerance); }}},
        {"eval.probe_max_iter",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= 1 && n <= 10000, k, "must be a positive integer");
              c.probe.max_iterations = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.probe.max_iterations); }}},
        {"eval.fold",
         {[](C& c, S k, S v) {
              const auto n = to_int(k, v);
              require(n >= -1, k, "must be -1 (all folds) or a fold index");
              c.fold = static_cast<int>(n);
          },
          [](const C& c) { return fmt_int(c.fold); }}},
        {"output.save_fold_checkpoints",
         {[](C& c, S k, S v) { c.save_fold_checkpoints = to_bool(k, v); },
          [](const C& c) { return fmt(c.save_fold_checkpoints); }}},
    };
    return keys;
}

const Key& lookup(const std::string& key) {
    static const std::map<std::string, const Key*> index = [] {
        std::map<std::string, const Key*> m;
        for (const auto& [name, k] : table()) m[name] = &k;
        return m;
    }();
    auto it = index.find(key);
    if (it == index.end()) fail(key, "unknown key");
    return *it->second;
}

void apply_line(ExperimentConfig& c, std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error("config_error", where + ": expected key=value, got '" + std::string(line) + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error("config_error", where + ": empty key");
    lookup(key).set(c, key, value);
    c.explicit_keys.insert(key);
}

void finish(ExperimentConfig& c) {
    if (c.train.aug.crop_low > c.train.aug.crop_high) fail("aug.crop_low", "must not exceed aug.crop_high");
    c.train.beta_explicit = c.explicit_keys.count("loss.beta") > 0;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [name, k] : table()) out.push_back(name);
        return out;
    }();
    return keys;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides) {
    ExperimentConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        apply_line(c, line, "line " + std::to_string(line_no));
    }
    for (const auto& o : overrides) apply_line(c, o, "override '" + o + "'");
    finish(c);
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides);
}

std::string config_to_text(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [name, k] : table()) out += name + " = " + k.get(c) + "\n";
    return out;
}

void write_config_snapshot(const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / kConfigSnapshotName;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << config_to_text(config);
}

} // namespace weakclr
