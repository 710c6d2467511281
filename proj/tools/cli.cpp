#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "weakclr/checkpoint.hpp"
#include "weakclr/config.hpp"
#include "weakclr/error.hpp"
#include "weakclr/experiment.hpp"
#include "weakclr/log.hpp"
#include "weakclr/parallel.hpp"
#include "weakclr/synth.hpp"

namespace fs = std::filesystem;

namespace weakclr::cli {

namespace {

struct Options {
    std::string config_path;
    std::string out;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string methods;
    std::string sweep;
    std::string log_level = "info";
    std::vector<std::string> positional; // key=value overrides, or run dirs for report
};

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
    err << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
}

ExperimentConfig load_config(const Options& o, bool synth_seed) {
    std::vector<std::string> overrides = o.positional;
    if (o.seed) overrides.push_back((synth_seed ? "synth.seed=" : "train.seed=") + std::to_string(*o.seed));
    return o.config_path.empty() ? parse_config_text("", overrides) : parse_config(o.config_path, overrides);
}

void apply_runtime(const Options& o) {
    static const std::map<std::string, LogLevel> levels = {
        {"quiet", LogLevel::Quiet}, {"warn", LogLevel::Warn}, {"info", LogLevel::Info}, {"debug", LogLevel::Debug}};
    set_log_level(levels.at(o.log_level));
    if (o.jobs > 1) {
        const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        set_compute_threads(std::max(1, hw / o.jobs));
    }
}

fs::path require_out(const Options& o) {
    WEAKCLR_CHECK(!o.out.empty(), "usage_error", "--out is required");
    fs::create_directories(o.out);
    return o.out;
}

void emit(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

nlohmann::json report_summary(const AggregateReport& r, const fs::path& dir) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) rows.push_back(nlohmann::json::parse(report_to_json(row)));
    return {{"out", dir.string()}, {"rows", rows}};
}

int cmd_gen_synth(const Options& o, std::ostream& out) {
    const ExperimentConfig c = load_config(o, true);
    const fs::path dir = require_out(o);
    const SynthResult r = generate_synthetic_cohort(c.synth, dir);
    write_config_snapshot(c, dir);
    emit(out, {{"manifest", (dir / "manifest.jsonl").string()},
               {"n_patients", r.stats.n_patients},
               {"n_positive_histo", r.stats.n_positive_histo},
               {"n_positive_radio", r.stats.n_positive_radio},
               {"n_label_disagreements", r.stats.n_label_disagreements}});
    return 0;
}

int cmd_pretrain(const Options& o, std::ostream& out) {
    ExperimentConfig c = load_config(o, false);
    if (!o.methods.empty()) {
        const auto methods = parse_method_list(o.methods);
        WEAKCLR_CHECK(methods.size() == 1 && methods[0] != "none", "usage_error",
                      "pretrain takes exactly one pretraining method");
        c.train.loss.method = parse_loss_method(methods[0]);
    }
    const fs::path dir = require_out(o);
    IncompleteMarker marker(dir);
    const SliceDataset radio = load_radio_dataset(c);
    const ModelState<float> state = run_pretrain(c, radio, dir);
    marker.commit();
    emit(out, {{"checkpoint", (dir / kCheckpointName).string()}, {"provenance", state.meta.provenance}});
    return 0;
}

int cmd_finetune(const Options& o, std::ostream& out) {
    const ExperimentConfig c = load_config(o, false);
    const fs::path dir = require_out(o);
    IncompleteMarker marker(dir);
    write_config_snapshot(c, dir);
    std::optional<ModelState<float>> init;
    if (!c.init_checkpoint.empty()) init = load_checkpoint(c.init_checkpoint);
    const SliceDataset histo = load_histo_dataset(c);
    const auto all = make_folds(c, histo);
    write_folds_json(all, dir / "folds.json");
    const ProcedureReport r = run_finetune_cv(c, init ? "pretrained" : "none", init ? &*init : nullptr, histo,
                                              selected_folds(c, all), c.train.train_fraction, dir, o.jobs);
    marker.commit();
    out << report_to_json(r) << '\n';
    return 0;
}

int cmd_probe(const Options& o, std::ostream& out) {
    const ExperimentConfig c = load_config(o, false);
    WEAKCLR_CHECK(!c.init_checkpoint.empty(), "config_error", "probe needs model.init_checkpoint");
    const fs::path dir = require_out(o);
    IncompleteMarker marker(dir);
    const ModelState<float> state = load_checkpoint(c.init_checkpoint);
    const SliceDataset histo = load_histo_dataset(c);
    const auto all = make_folds(c, histo);
    write_folds_json(all, dir / "folds.json");
    const ProcedureReport r =
        run_probe_cv(c, "pretrained", state.params, histo, selected_folds(c, all), c.train.train_fraction, dir, o.jobs);
    marker.commit();
    out << report_to_json(r) << '\n';
    return 0;
}

int cmd_cv(const Options& o, std::ostream& out) {
    const ExperimentConfig c = load_config(o, false);
    const auto methods = o.methods.empty() ? all_methods() : parse_method_list(o.methods);
    const fs::path dir = require_out(o);
    emit(out, report_summary(run_cv(c, methods, dir, o.jobs), dir));
    return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
    WEAKCLR_CHECK(!o.sweep.empty(), "usage_error", "ablate needs --sweep");
    const ExperimentConfig c = load_config(o, false);
    const Sweep sweep = parse_sweep(o.sweep);
    const auto methods = o.methods.empty() ? std::vector<std::string>{"weak_simclr"} : parse_method_list(o.methods);
    WEAKCLR_CHECK(sweep.kind == SweepKind::Fraction || o.methods.empty(), "usage_error",
                  "the beta sweep always pretrains weak_simclr; drop --methods");
    const fs::path dir = require_out(o);
    emit(out, report_summary(run_ablation(c, sweep, methods, dir, o.jobs), dir));
    return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
    WEAKCLR_CHECK(!o.positional.empty(), "usage_error", "report needs at least one run directory");
    std::vector<fs::path> dirs(o.positional.begin(), o.positional.end());
    const AggregateReport r = merge_reports(dirs);
    const fs::path dir = require_out(o);
    write_report_csv(r, dir / "report.csv", "method");
    write_report_json(r, dir / "report.json");
    emit(out, report_summary(r, dir));
    return 0;
}

void add_common(CLI::App* sub, Options& o, bool overrides = true) {
    sub->add_option("--config", o.config_path, "experiment config file (key = value lines)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "parallel folds / settings")->check(CLI::Range(1, 256));
    sub->add_option("--seed", o.seed, "seed override");
    sub->add_option("--log-level", o.log_level, "quiet, warn, info or debug")
        ->check(CLI::IsMember({"quiet", "warn", "info", "debug"}));
    if (overrides) sub->add_option("overrides", o.positional, "key=value config overrides");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"weakclr: weakly-supervised contrastive pretraining experiments"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-synth", "write a synthetic phantom cohort");
    add_common(gen, o);
    auto* pre = app.add_subcommand("pretrain", "pretrain on the radiological cohort");
    add_common(pre, o);
    pre->add_option("--methods", o.methods, "pretraining method (overrides loss.method)");
    auto* fine = app.add_subcommand("finetune", "cross-validated fine-tuning on the histological cohort");
    add_common(fine, o);
    auto* probe = app.add_subcommand("probe", "cross-validated linear probe of a checkpoint");
    add_common(probe, o);
    auto* cv = app.add_subcommand("cv", "method comparison grid");
    add_common(cv, o);
    cv->add_option("--methods", o.methods, "comma-separated subset of none,weak,simclr,supcon,weak_simclr");
    auto* ablate = app.add_subcommand("ablate", "beta or training-fraction sweep");
    add_common(ablate, o);
    ablate->add_option("--sweep", o.sweep, "beta=v1,v2,... or fraction=v1,v2,...");
    ablate->add_option("--methods", o.methods, "methods for the fraction sweep (default weak_simclr)");
    auto* report = app.add_subcommand("report", "merge metrics.json files from run directories");
    report->add_option("--out", o.out, "output directory");
    report->add_option("run_dirs", o.positional, "run directories to merge")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage_error", e.what());
        return 2;
    }

    try {
        apply_runtime(o);
        if (gen->parsed()) return cmd_gen_synth(o, out);
        if (pre->parsed()) return cmd_pretrain(o, out);
        if (fine->parsed()) return cmd_finetune(o, out);
        if (probe->parsed()) return cmd_probe(o, out);
        if (cv->parsed()) return cmd_cv(o, out);
        if (ablate->parsed()) return cmd_ablate(o, out);
        if (report->parsed()) return cmd_report(o, out);
    } catch (const Error& e) {
        print_error(err, e.code(), e.what());
        return e.code() == "usage_error" ? 2 : 1;
    } catch (const std::exception& e) {
        print_error(err, "internal_error", e.what());
        return 1;
    }
    return 1;
}

} // namespace weakclr::cli
