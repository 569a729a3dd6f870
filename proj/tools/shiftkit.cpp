// shiftkit command-line tool: run experiments, check the reduction lemmas,
// preview generated samples, write synthetic datasets.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shiftkit/shiftkit.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kLemma = 3 };

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const shiftkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const shiftkit::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
}

shiftkit::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                       std::optional<std::size_t> jobs, const std::string& out) {
    auto cfg = shiftkit::ExperimentConfig::load(path);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shiftkit: calibration, quantification and accuracy prediction under dataset shift"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "output directory (overrides the config)");

    std::string dataset, classifier = "knn";
    std::uint64_t lemma_seed = 0;
    std::string lemma_out = ".";
    auto* lemma = app.add_subcommand("lemma-check", "verify the six reductions with label-peeking oracles");
    lemma->add_option("dataset", dataset, "labelled CSV")->required();
    lemma->add_option("--classifier", classifier, "lr | nb | knn")->capture_default_str();
    lemma->add_option("--seed", lemma_seed, "split seed")->capture_default_str();
    lemma->add_option("--out", lemma_out, "directory for lemma_report.json")->capture_default_str();

    auto* protocols = app.add_subcommand("protocols", "inspect sampling protocols");
    protocols->require_subcommand(1);
    auto* preview = protocols->add_subcommand("preview", "print the samples a config would generate");
    preview->add_option("--config", config_path, "experiment config (JSON)")->required();
    preview->add_option("--seed", seed, "override the config seed");

    std::size_t synth_n = 1000;
    double synth_prior = 0.5, synth_sep = 2.0;
    std::size_t synth_dim = 1;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a two-Gaussian labelled CSV");
    synth->add_option("--n", synth_n)->capture_default_str();
    synth->add_option("--prior", synth_prior)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    synth->add_option("--dim", synth_dim)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--separation", synth_sep)->capture_default_str();
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("--out", synth_out, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        return guarded([&] {
            const auto cfg = load_config(config_path, seed, jobs, out_dir);
            const auto records = shiftkit::run_experiment(cfg);
            std::cout << "wrote " << records.size() << " records to " << cfg.out_dir << '\n';
            return kOk;
        });
    }
    if (*lemma) {
        return guarded([&] {
            const auto kind = shiftkit::parse_model_kind(classifier);
            const auto r = shiftkit::lemma_check(dataset, kind, lemma_seed, lemma_out);
            std::cout << r.report.to_table();
            std::cout << (r.exit_code == 0 ? "all reductions hold\n" : "reduction check FAILED\n");
            return r.exit_code;
        });
    }
    if (*preview) {
        return guarded([&] {
            const auto cfg = load_config(config_path, seed, std::nullopt, "");
            shiftkit::write_protocol_preview(std::cout, cfg);
            return kOk;
        });
    }
    if (*synth) {
        return guarded([&] {
            const auto data = shiftkit::gaussian_classes(synth_n, synth_prior, synth_seed, synth_dim, synth_sep);
            std::ofstream out(synth_out);
            if (!out) throw shiftkit::DataError("cannot write " + synth_out);
            shiftkit::write_csv(out, data);
            return kOk;
        });
    }
    return kOk;
}
