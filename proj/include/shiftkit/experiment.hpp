#pragma once

// Batch experiment runner behind the command-line tool: configuration,
// method registry, shared sample generation and report writing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "shiftkit/bridges.hpp"
#include "shiftkit/calibrate.hpp"
#include "shiftkit/cap.hpp"
#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/eval.hpp"
#include "shiftkit/models.hpp"
#include "shiftkit/oracles.hpp"
#include "shiftkit/quantify.hpp"

namespace shiftkit {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Task { Calibration, Quantification, Accuracy };

inline std::string_view to_string(Task t) {
    switch (t) {
        case Task::Calibration: return "calibration";
        case Task::Quantification: return "quantification";
        case Task::Accuracy: return "accuracy";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    if (s == "calibration") return Task::Calibration;
    if (s == "quantification") return Task::Quantification;
    if (s == "accuracy") return Task::Accuracy;
    throw ConfigError("unknown task '" + std::string(s) + "' (expected calibration, quantification or accuracy)");
}

struct ExperimentConfig {
    Task task = Task::Quantification;
    ShiftKind shift = ShiftKind::LS;
    std::vector<std::string> datasets;  // LS: one path; CS: source, target
    std::string dataset_name;
    ModelKind classifier = ModelKind::LogisticRegression;
    Hyperparams hyperparams;
    std::vector<std::string> methods;
    std::size_t n_samples = 100;
    std::size_t sample_size = 250;
    SplitSpec split;
    std::uint64_t seed = 0;
    std::string out_dir = "results";
    std::size_t jobs = 1;
    BridgeConfig bridges;
    std::size_t hdy_bins = 8;
    std::size_t ece_bins = 15;
    double kde_bandwidth = 0.1;
    double threshold = 0.5;

    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::string& path);
    void validate() const;

    std::string name() const {
        if (!dataset_name.empty()) return dataset_name;
        std::string n;
        for (const auto& d : datasets) {
            if (!n.empty()) n += "->";
            n += std::filesystem::path(d).stem().string();
        }
        return n;
    }
};

// ---------------------------------------------------------------------------
// Method registry
// ---------------------------------------------------------------------------

/// Everything a method may look at for one test sample.
struct MethodInput {
    const ScoredSet& val;       // labelled validation scores
    const TestSubset& test;     // unlabelled test sample
    const ExperimentConfig& cfg;
};

using MethodFn = std::function<std::vector<double>(const MethodInput&)>;  // task-specific output

namespace registry_detail {

inline bool usable(const ScoredSet& val) { return !val.empty() && val.has_both_classes(); }

inline double val_prevalence(const ScoredSet& val) {
    if (val.empty()) return 0.5;
    const auto& y = val.labels();
    return static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
}

/// Sub-methods fall back when the data they are fitted on make them
/// undefined: quantifiers to the validation prevalence, calibrators to the
/// identity (or the constant validation prevalence for single-class data),
/// accuracy predictors to the validation accuracy.
inline QuantifierFactory guard(std::function<double(const ScoredSet&, std::span<const double>)> q) {
    return [q = std::move(q)](const ScoredSet& val, const TestSubset& test) {
        if (!usable(val)) return val_prevalence(val);
        try {
            return q(val, test.posteriors);
        } catch (const DegenerateError&) {
            return val_prevalence(val);
        }
    };
}

inline CalibratorFactory guard_cal(std::function<Calibrator(const ScoredSet&, std::span<const double>)> fit) {
    return [fit = std::move(fit)](const ScoredSet& val, const TestSubset& test) {
        if (val.empty()) return test.posteriors;
        if (!val.has_both_classes()) return std::vector<double>(test.size(), val_prevalence(val));
        try {
            return fit(val, test.posteriors).apply(std::span<const double>(test.posteriors));
        } catch (const DegenerateError&) {
            return test.posteriors;
        }
    };
}

inline AccuracyFactory guard_acc(std::function<double(const ScoredSet&, std::span<const double>, double)> pred) {
    return [pred = std::move(pred)](const ScoredSet& val, const TestSubset& test, double t) {
        if (val.empty()) return 0.5;
        try {
            return pred(val, test.posteriors, t);
        } catch (const DegenerateError&) {
            return crisp_accuracy(val.posteriors(), val.labels(), t);
        }
    };
}

inline QuantifierFactory quantifier(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "CC") return guard([&cfg](const ScoredSet&, std::span<const double> t) { return cc(t, cfg.threshold).p; });
    if (name == "PCC") return guard([](const ScoredSet&, std::span<const double> t) { return pcc(t).p; });
    if (name == "ACC")
        return guard([&cfg](const ScoredSet& v, std::span<const double> t) { return acc(v, t, cfg.threshold).p; });
    if (name == "PACC") return guard([](const ScoredSet& v, std::span<const double> t) { return pacc(v, t).p; });
    if (name == "EMQ")
        return guard([](const ScoredSet& v, std::span<const double> t) { return emq(t, val_prevalence(v)).estimate.p; });
    if (name == "HDy")
        return guard([&cfg](const ScoredSet& v, std::span<const double> t) { return hdy(v, t, cfg.hdy_bins).p; });
    if (name == "KDEy")
        return guard([&cfg](const ScoredSet& v, std::span<const double> t) { return kdey(v, t, cfg.kde_bandwidth).p; });
    throw ConfigError("unknown quantifier '" + name + "'");
}

inline CalibratorFactory calibrator(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "Platt") return guard_cal([](const ScoredSet& v, std::span<const double>) { return platt_fit(v); });
    if (name == "PacCal") return guard_cal([](const ScoredSet& v, std::span<const double> t) { return paccal_fit(v, t); });
    if (name == "DMCal")
        return guard_cal([&cfg](const ScoredSet& v, std::span<const double> t) { return dmcal_fit(v, t, cfg.hdy_bins); });
    if (name == "EMQ")
        return guard_cal([](const ScoredSet& v, std::span<const double> t) { return emq_fit(t, val_prevalence(v)); });
    throw ConfigError("unknown calibrator '" + name + "'");
}

inline SampleProtocol doc_protocol(const ExperimentConfig& cfg) {
    SampleProtocol p;
    p.kind = cfg.shift == ShiftKind::LS ? ProtocolKind::APP : ProtocolKind::UniformRandom;
    p.n_samples = 100;
    p.size = 250;
    p.seed = cfg.seed ^ 0xD0CULL;
    return p;
}

inline AccuracyFactory accuracy_predictor(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "Naive")
        return guard_acc([](const ScoredSet& v, std::span<const double>, double t) { return naive_acc(v, t).acc; });
    if (name == "ATC-MC" || name == "ATC")
        return guard_acc([](const ScoredSet& v, std::span<const double> x, double t) {
            return atc(v, x, ConfidenceScore::MaxConfidence, t).acc;
        });
    if (name == "ATC-NE")
        return guard_acc([](const ScoredSet& v, std::span<const double> x, double t) {
            return atc(v, x, ConfidenceScore::NegativeEntropy, t).acc;
        });
    if (name == "DoC")
        return guard_acc([&cfg](const ScoredSet& v, std::span<const double> x, double t) {
            auto proto = doc_protocol(cfg);
            // APP needs both classes in the pool it samples from
            if (proto.kind == ProtocolKind::APP && !v.has_both_classes()) proto.kind = ProtocolKind::UniformRandom;
            return doc_predict(doc_fit(v, proto, t), x).acc;
        });
    throw ConfigError("unknown accuracy predictor '" + name + "'");
}

inline std::pair<std::string, std::string> split_adaptation(const std::string& name) {
    const auto dash = name.rfind('-');
    if (dash == std::string::npos) return {name, ""};
    const std::string suffix = name.substr(dash + 1);
    if (suffix.size() > 2 && suffix.find('2') != std::string::npos) return {name.substr(0, dash), suffix};
    return {name, ""};
}

}  // namespace registry_detail

/// Method names accepted for a task.
inline std::vector<std::string> registered_methods(Task task) {
    switch (task) {
        case Task::Quantification:
            return {"CC",  "PCC", "ACC", "PACC", "EMQ", "HDy", "KDEy", "Platt-cal2quant", "PacCal-cal2quant",
                    "DMCal-cal2quant", "Naive-acc2quant", "ATC-acc2quant", "DoC-acc2quant"};
        case Task::Calibration:
            return {"Raw",           "Platt",          "PacCal",          "DMCal",         "EMQ",
                    "PCC-quant2cal", "PACC-quant2cal", "EMQ-quant2cal",   "KDEy-quant2cal", "HDy-quant2cal",
                    "ATC-acc2cal",   "DoC-acc2cal"};
        case Task::Accuracy:
            return {"Naive",          "ATC-MC",         "ATC-NE",          "DoC",           "PCC-quant2acc",
                    "PACC-quant2acc", "EMQ-quant2acc",  "KDEy-quant2acc",  "Platt-cal2acc", "PacCal-cal2acc",
                    "DMCal-cal2acc",  "EMQ-cal2acc"};
    }
    return {};
}

/// Quantification and accuracy methods return one value; calibration methods
/// return the calibrated test posteriors.
inline MethodFn make_method(Task task, const std::string& name, const ExperimentConfig& cfg) {
    using namespace registry_detail;
    const auto known = registered_methods(task);
    if (std::find(known.begin(), known.end(), name) == known.end()) {
        std::string list;
        for (const auto& m : known) list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("unknown method '" + name + "' for task " + std::string(to_string(task)) +
                          "; valid methods: " + list);
    }
    const auto [base, adaptation] = split_adaptation(name);
    const double t = cfg.threshold;

    switch (task) {
        case Task::Quantification: {
            if (adaptation.empty()) {
                auto q = quantifier(base, cfg);
                return [q](const MethodInput& in) { return std::vector<double>{q(in.val, in.test)}; };
            }
            if (adaptation == "cal2quant") {
                auto c = calibrator(base, cfg);
                return [c](const MethodInput& in) {
                    return std::vector<double>{cal_to_quant(c, in.val, in.test).p};
                };
            }
            auto a = accuracy_predictor(base, cfg);
            return [a, t](const MethodInput& in) {
                return std::vector<double>{acc_to_quant(a, in.val, in.test, t).p};
            };
        }
        case Task::Calibration: {
            if (base == "Raw") return [](const MethodInput& in) { return in.test.posteriors; };
            if (adaptation.empty()) {
                auto c = calibrator(base, cfg);
                return [c](const MethodInput& in) { return c(in.val, in.test); };
            }
            if (adaptation == "quant2cal") {
                auto q = quantifier(base, cfg);
                return [q](const MethodInput& in) {
                    const auto cal = quant_to_cal(q, in.val, in.test, in.cfg.bridges.bins_quant_to_cal);
                    return cal.apply(std::span<const double>(in.test.posteriors));
                };
            }
            auto a = accuracy_predictor(base, cfg);
            return [a, t](const MethodInput& in) {
                const auto cal = acc_to_cal(a, in.val, in.test, in.cfg.bridges.bins_acc_to_cal, t);
                return cal.apply(std::span<const double>(in.test.posteriors));
            };
        }
        case Task::Accuracy: {
            if (adaptation.empty()) {
                auto a = accuracy_predictor(base, cfg);
                return [a, t](const MethodInput& in) { return std::vector<double>{a(in.val, in.test, t)}; };
            }
            if (adaptation == "quant2acc") {
                auto q = quantifier(base, cfg);
                return [q, t](const MethodInput& in) {
                    return std::vector<double>{quant_to_acc(q, in.val, in.test, t).acc};
                };
            }
            auto c = calibrator(base, cfg);
            return [c, t](const MethodInput& in) {
                return std::vector<double>{cal_to_acc(c, in.val, in.test, t).acc};
            };
        }
    }
    throw ConfigError("unknown task");
}

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    try {
        c.task = parse_task(j.at("task").get<std::string>());
        c.shift = j.contains("shift") ? parse_shift_kind(j.at("shift").get<std::string>()) : ShiftKind::LS;
        for (const auto& d : j.at("datasets")) {
            std::filesystem::path p = d.get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            c.datasets.push_back(p.string());
        }
        c.dataset_name = j.value("dataset_name", std::string{});
        if (j.contains("classifier")) {
            const auto& cl = j.at("classifier");
            c.classifier = parse_model_kind(cl.value("kind", std::string("logistic-regression")));
            c.hyperparams.k = cl.value("k", c.hyperparams.k);
            c.hyperparams.max_iter = cl.value("max_iter", c.hyperparams.max_iter);
            c.hyperparams.l2 = cl.value("l2", c.hyperparams.l2);
        }
        c.methods = j.at("methods").get<std::vector<std::string>>();
        if (j.contains("protocol")) {
            c.n_samples = j.at("protocol").value("n_samples", c.n_samples);
            c.sample_size = j.at("protocol").value("size", c.sample_size);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.split.train_fraction = s.value("train", c.split.train_fraction);
            c.split.val_fraction = s.value("val", c.split.val_fraction);
            c.split.test_fraction = s.value("test", c.split.test_fraction);
        }
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out", c.out_dir);
        c.jobs = j.value("jobs", c.jobs);
        c.hdy_bins = j.value("hdy_bins", c.hdy_bins);
        c.ece_bins = j.value("ece_bins", c.ece_bins);
        c.kde_bandwidth = j.value("kde_bandwidth", c.kde_bandwidth);
        c.threshold = j.value("threshold", c.threshold);
        c.bridges.bins_quant_to_cal = j.value("bins_quant_to_cal", c.bridges.bins_quant_to_cal);
        c.bridges.bins_acc_to_cal = j.value("bins_acc_to_cal", c.bridges.bins_acc_to_cal);
        c.bridges.threshold = c.threshold;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DataError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
}

inline void ExperimentConfig::validate() const {
    if (shift == ShiftKind::LS && datasets.size() != 1) throw ConfigError("LS experiments take exactly one dataset");
    if (shift == ShiftKind::CS && datasets.size() != 2)
        throw ConfigError("CS experiments take two datasets (source, target)");
    if (methods.empty()) throw ConfigError("no methods configured");
    if (n_samples < 1 || sample_size < 1) throw ConfigError("protocol n_samples and size must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    try {
        split.validate();
        bridges.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    for (const auto& m : methods) make_method(task, m, *this);
}

// ---------------------------------------------------------------------------
// Records and reports
// ---------------------------------------------------------------------------

struct EstimateRecord {
    std::string method;
    std::string dataset;
    std::size_t sample_id = 0;
    double shift_intensity = 0.0;
    std::string metric;
    double value = 0.0;
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_results_csv(std::ostream& out, const std::vector<EstimateRecord>& records) {
    out << "method,dataset,sample_id,shift_intensity,metric,value\n";
    for (const auto& r : records)
        out << r.method << ',' << r.dataset << ',' << r.sample_id << ',' << format_number(r.shift_intensity) << ','
            << r.metric << ',' << format_number(r.value) << '\n';
}

/// Per (method, metric): mean value and mean rank among methods on each sample (1 = lowest error).
inline nlohmann::json summarize(const std::vector<EstimateRecord>& records) {
    std::map<std::pair<std::string, std::size_t>, std::vector<std::pair<std::string, double>>> by_sample;
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
    for (const auto& r : records) {
        by_sample[{r.metric, r.sample_id}].push_back({r.method, r.value});
        auto& s = sums[{r.method, r.metric}];
        s.first += r.value;
        ++s.second;
    }
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> ranks;
    for (auto& [key, entries] : by_sample) {
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second || (a.second == b.second && a.first < b.first); });
        for (std::size_t i = 0; i < entries.size();) {
            std::size_t j = i;
            while (j < entries.size() && entries[j].second == entries[i].second) ++j;
            const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
            for (std::size_t k = i; k < j; ++k) {
                auto& rk = ranks[{entries[k].first, key.first}];
                rk.first += avg;
                ++rk.second;
            }
            i = j;
        }
    }
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [key, s] : sums) {
        const auto& rk = ranks[key];
        methods[key.first][key.second] = {{"mean", s.first / static_cast<double>(s.second)},
                                          {"mean_rank", rk.first / static_cast<double>(rk.second)},
                                          {"samples", s.second}};
    }
    return methods;
}

/// Mean value per shift-intensity decile.
inline void write_by_shift_csv(std::ostream& out, const std::vector<EstimateRecord>& records) {
    std::map<std::tuple<std::string, std::string, int>, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
        const int d = std::clamp(static_cast<int>(std::floor(r.shift_intensity * 10.0)), 0, 9);
        auto& a = acc[{r.method, r.metric, d}];
        a.first += r.value;
        ++a.second;
    }
    out << "method,metric,shift_lo,shift_hi,count,mean_value\n";
    for (const auto& [key, a] : acc) {
        const auto& [method, metric, d] = key;
        out << method << ',' << metric << ',' << format_number(d / 10.0) << ',' << format_number((d + 1) / 10.0) << ','
            << a.second << ',' << format_number(a.first / static_cast<double>(a.second)) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Prepared experiment: data, model, validation scores and the shared samples
// ---------------------------------------------------------------------------

struct PreparedSample {
    std::size_t id = 0;  // 1-based
    TestSubset test;
    std::vector<Label> labels;
    double target = 0.0;  // APP prevalence draw or CS target fraction
    double shift_intensity = 0.0;
};

struct PreparedExperiment {
    ScoredSet val;
    double train_prevalence = 0.0;
    std::vector<PreparedSample> samples;
};

inline PreparedExperiment prepare(const ExperimentConfig& cfg) {
    PreparedExperiment px;
    SplitSpec split = cfg.split;
    split.seed = cfg.seed;

    SampleProtocol proto;
    proto.n_samples = cfg.n_samples;
    proto.size = cfg.sample_size;
    proto.seed = cfg.seed;

    const LabeledSet source = read_csv(cfg.datasets.at(0));
    const auto [train, val, test] = split_stratified(source, split);
    const ProbModel model = fit(cfg.classifier, train, cfg.hyperparams);
    px.val = model.score(val);
    px.train_prevalence = train.prevalence();

    auto add_sample = [&](std::vector<double> post, std::vector<Label> y, double target, double intensity) {
        PreparedSample s;
        s.id = px.samples.size() + 1;
        s.test = whole(post);
        s.labels = std::move(y);
        s.target = target;
        s.shift_intensity = intensity;
        px.samples.push_back(std::move(s));
    };

    if (cfg.shift == ShiftKind::LS) {
        proto.kind = ProtocolKind::APP;
        const auto pool = model.score(test);
        for (const auto& d : app_draws(test.labels(), proto)) {
            const auto s = pool.subset(d.rows);
            const double prev =
                static_cast<double>(std::count(s.labels().begin(), s.labels().end(), 1)) / static_cast<double>(s.size());
            add_sample(s.posteriors(), s.labels(), d.target, shift_intensity(ShiftKind::LS, px.train_prevalence, prev));
        }
    } else {
        proto.kind = ProtocolKind::CSMixture;
        const LabeledSet target_data = read_csv(cfg.datasets.at(1));
        if (target_data.dim() != source.dim()) throw DataError("source and target datasets differ in feature count");
        SplitSpec tsplit = split;
        tsplit.seed = cfg.seed + 1;
        const auto target_test = std::get<2>(split_stratified(target_data, tsplit));
        const auto pool_a = model.score(test);
        const auto pool_b = model.score(target_test);
        for (const auto& d : cs_mixture_draws(pool_a.size(), pool_b.size(), proto)) {
            const auto a = pool_a.subset(d.rows);
            const auto b = pool_b.subset(d.rows_b);
            std::vector<double> post = a.posteriors();
            post.insert(post.end(), b.posteriors().begin(), b.posteriors().end());
            std::vector<Label> y = a.labels();
            y.insert(y.end(), b.labels().begin(), b.labels().end());
            add_sample(std::move(post), std::move(y), d.target, shift_intensity(ShiftKind::CS, 0.0, d.target));
        }
    }
    return px;
}

/// Evaluates every configured method on every prepared sample. The result is
/// sorted by (method, sample_id, metric) and independent of `jobs`.
inline std::vector<EstimateRecord> evaluate(const ExperimentConfig& cfg, const PreparedExperiment& px,
                                            std::size_t jobs = 1) {
    std::vector<std::pair<std::string, MethodFn>> methods;
    for (const auto& m : cfg.methods) methods.emplace_back(m, make_method(cfg.task, m, cfg));
    const std::string dataset = cfg.name();

    std::vector<std::vector<EstimateRecord>> per_sample(px.samples.size());
    auto run_one = [&](std::size_t si) {
        const auto& s = px.samples[si];
        auto& out = per_sample[si];
        const MethodInput in{px.val, s.test, cfg};
        for (const auto& [name, fn] : methods) {
            const auto result = fn(in);
            auto rec = [&](std::string metric, double value) {
                out.push_back({name, dataset, s.id, s.shift_intensity, std::move(metric), value});
            };
            switch (cfg.task) {
                case Task::Quantification: {
                    const double truth = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 1)) /
                                         static_cast<double>(s.labels.size());
                    rec("AE-quant", ae(truth, result.at(0)));
                    break;
                }
                case Task::Accuracy:
                    rec("AE-acc", ae(crisp_accuracy(s.test.posteriors, s.labels, cfg.threshold), result.at(0)));
                    break;
                case Task::Calibration:
                    rec("ECE", 100.0 * ece_l2(result, s.labels, cfg.ece_bins));
                    rec("Brier", brier(result, s.labels));
                    break;
            }
        }
    };

    jobs = std::max<std::size_t>(1, std::min(jobs, px.samples.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < px.samples.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < px.samples.size(); i = next++) {
                    try {
                        run_one(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<EstimateRecord> records;
    for (auto& v : per_sample) records.insert(records.end(), v.begin(), v.end());
    std::stable_sort(records.begin(), records.end(), [](const EstimateRecord& a, const EstimateRecord& b) {
        return std::tie(a.method, a.sample_id, a.metric) < std::tie(b.method, b.sample_id, b.metric);
    });
    return records;
}

/// Runs the configured experiment and writes results.csv, summary.json and by_shift.csv to cfg.out_dir.
inline std::vector<EstimateRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto px = prepare(cfg);
    auto records = evaluate(cfg, px, cfg.jobs);

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "results.csv", std::ios::trunc);
        write_results_csv(out, records);
    }
    {
        nlohmann::json j;
        j["task"] = to_string(cfg.task);
        j["shift"] = cfg.shift == ShiftKind::LS ? "LS" : "CS";
        j["dataset"] = cfg.name();
        j["classifier"] = to_string(cfg.classifier);
        j["seed"] = cfg.seed;
        j["n_samples"] = px.samples.size();
        j["sample_size"] = cfg.sample_size;
        j["methods"] = summarize(records);
        std::ofstream out(dir / "summary.json", std::ios::trunc);
        out << j.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "by_shift.csv", std::ios::trunc);
        write_by_shift_csv(out, records);
    }
    return records;
}

/// Generated samples (drawn prevalence or mixture fraction, realised prevalence, shift intensity).
inline void write_protocol_preview(std::ostream& out, const ExperimentConfig& cfg) {
    const auto px = prepare(cfg);
    out << "sample_id,target,prevalence,shift_intensity\n";
    for (const auto& s : px.samples) {
        const double prev = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 1)) /
                            static_cast<double>(s.labels.size());
        out << s.id << ',' << format_number(s.target) << ',' << format_number(prev) << ','
            << format_number(s.shift_intensity) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Lemma check
// ---------------------------------------------------------------------------

struct LemmaCheckResult {
    LemmaReport report;
    int exit_code = 0;
};

/// Splits the dataset, fits the classifier on the training part and verifies
/// the reductions on the test part. Writes lemma_report.json when out_dir is set.
inline LemmaCheckResult lemma_check(const std::string& dataset_path, ModelKind classifier, std::uint64_t seed,
                                    const std::string& out_dir = {}, const Hyperparams& hp = {}) {
    const LabeledSet data = read_csv(dataset_path);
    SplitSpec split;
    split.seed = seed;
    const auto [train, val, test] = split_stratified(data, split);
    const ProbModel model = fit(classifier, train, hp);
    LemmaCheckResult r{verify_reductions(model, test), 0};
    r.exit_code = r.report.all_passed() ? 0 : 3;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(std::filesystem::path(out_dir) / "lemma_report.json", std::ios::trunc);
        out << r.report.to_json().dump(2) << '\n';
    }
    return r;
}

}  // namespace shiftkit
