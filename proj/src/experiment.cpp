#include "uatlab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uatlab/dds.hpp"

namespace uatlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_known_keys(const json& obj, const std::string& context,
                        std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool found = false;
        for (const char* key : known) {
            if (it.key() == key) {
                found = true;
                break;
            }
        }
        if (!found) {
            throw ConfigError("unknown config key '" + context + it.key() + "'");
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& context, const char* key, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + context + key + "' has the wrong type");
    }
}

TemperatureSpec parse_tau_field(const json& value, const std::string& context) {
    if (value.is_string()) {
        return TemperatureSpec::parse(value.get<std::string>());
    }
    if (value.is_number()) {
        return TemperatureSpec::temperature(value.get<double>());
    }
    throw ConfigError("config field '" + context + "' must be a number or \"uniform\"");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out << content;
    if (!out) {
        throw IoError("short write to '" + path.string() + "'");
    }
}

std::string checksum_label(const std::string& bytes) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

// Collects artifact checksums while writing files under one experiment root.
struct ArtifactSink {
    fs::path root;
    std::map<std::string, std::string> checksums;

    void write(const std::string& relative, const std::string& content) {
        write_file(root / relative, content);
        checksums[relative] = checksum_label(content);
    }

    void record_external(const std::string& relative) {
        checksums[relative] = checksum_label(read_file(root / relative));
    }
};

void ensure_fresh_dir(const fs::path& out_dir) {
    fs::create_directories(out_dir);
    if (fs::exists(out_dir / "manifest.json")) {
        throw ConfigError("output dir '" + out_dir.string() +
                          "' already holds a manifest; runs need a fresh directory");
    }
}

void write_manifest(const ExperimentConfig& config, const ArtifactSink& sink) {
    json manifest;
    manifest["config"] = experiment_config_to_json(config);
    manifest["seeds"] = config.seeds;
    manifest["artifacts"] = sink.checksums;
    write_file(sink.root / "manifest.json", manifest.dump(2) + "\n");
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string results_csv(const std::vector<std::string>& names, const std::vector<double>& bleu,
                        double macro) {
    std::string out = "corpus,bleu\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += names[i] + "," + format_double(bleu[i]) + "\n";
    }
    out += "MACRO," + format_double(macro) + "\n";
    return out;
}

std::string matrix_csv(const std::vector<std::string>& names, const std::vector<double>& matrix) {
    const std::size_t n = names.size();
    std::string out = "corpus";
    for (const auto& name : names) {
        out += "," + name;
    }
    out += "\n";
    for (std::size_t r = 0; r < n; ++r) {
        out += names[r];
        for (std::size_t c = 0; c < n; ++c) {
            out += "," + format_double(matrix[r * n + c]);
        }
        out += "\n";
    }
    return out;
}

bool is_dynamic_method(const std::string& method) {
    return method == "dds" || method == "multiuat";
}

// Runs one seed end to end and writes its artifacts under seed_<s>/.
SeedRunResult run_one_seed(const ExperimentConfig& config, const CorpusCollection& collection,
                           std::uint64_t seed, const TemperatureSpec& prior, ArtifactSink& sink,
                           const std::string& prefix, CosineMatrixLog* matrix_log) {
    const TrainConfig train_config = make_train_config(config, seed, prior, collection);
    const RewardProvider provider = make_reward_provider(config, matrix_log);
    TrainResult result = train_multicorpus(train_config, collection, provider);

    SeedRunResult run;
    run.seed = seed;
    run.final_distribution = result.final_distribution;
    run.trajectory_csv = result.trajectory.to_csv();

    for (std::size_t n = 0; n < collection.count(); ++n) {
        run.per_corpus_bleu.push_back(
            evaluate_corpus_bleu(result.params, result.vocab, collection.corpora[n].test,
                                 config.eval_limit)
                .value);
    }
    run.macro_bleu = macro_average(run.per_corpus_bleu);
    run.results_csv = results_csv(collection.names, run.per_corpus_bleu, run.macro_bleu);

    const std::string dir = prefix + "seed_" + std::to_string(seed) + "/";
    sink.write(dir + "trajectory.csv", run.trajectory_csv);
    sink.write(dir + "results.csv", run.results_csv);
    save_checkpoint(result.params, (sink.root / (dir + "checkpoint.bin")).string());
    sink.record_external(dir + "checkpoint.bin");
    return run;
}

TrainSummary summarize_runs(const CorpusCollection& collection,
                            std::vector<SeedRunResult> seed_runs) {
    TrainSummary summary;
    summary.corpus_names = collection.names;
    std::vector<double> macros;
    for (const auto& run : seed_runs) {
        macros.push_back(run.macro_bleu);
    }
    summary.median_macro_bleu = median(macros);
    for (std::size_t n = 0; n < collection.count(); ++n) {
        std::vector<double> bleu;
        std::vector<double> prob;
        for (const auto& run : seed_runs) {
            bleu.push_back(run.per_corpus_bleu[n]);
            prob.push_back(run.final_distribution[n]);
        }
        summary.median_per_corpus_bleu.push_back(median(bleu));
        summary.median_final_distribution.push_back(median(prob));
    }
    summary.seed_runs = std::move(seed_runs);
    return summary;
}

std::string summary_csv(const TrainSummary& summary) {
    std::string out = "corpus,median_bleu,median_final_probability\n";
    for (std::size_t n = 0; n < summary.corpus_names.size(); ++n) {
        out += summary.corpus_names[n] + "," + format_double(summary.median_per_corpus_bleu[n]) +
               "," + format_double(summary.median_final_distribution[n]) + "\n";
    }
    out += "MACRO," + format_double(summary.median_macro_bleu) + ",\n";
    return out;
}

}  // namespace

// ---------------------------------------------------------------- parsing

void ExperimentConfig::validate() const {
    const bool known_experiment = experiment == "train" || experiment == "sweep-priors" ||
                                  experiment == "transfer-matrix" || experiment == "cosine-matrix";
    if (!known_experiment) {
        throw ConfigError("experiment must be train|sweep-priors|transfer-matrix|cosine-matrix, got '" +
                          experiment + "'");
    }
    const bool known_method = method == "prop" || method == "temp" || method == "uniform" ||
                              method == "dds" || method == "multiuat";
    if (!known_method) {
        throw ConfigError("method must be prop|temp|uniform|dds|multiuat, got '" + method + "'");
    }
    if (method == "multiuat" && !has_measure) {
        throw ConfigError("method=multiuat requires a measure");
    }
    if (method == "temp" && !has_tau) {
        throw ConfigError("method=temp requires tau");
    }
    if (seeds.empty()) {
        throw ConfigError("seed list must not be empty");
    }
    if (corpora.empty()) {
        throw ConfigError("at least one corpus is required");
    }
    for (std::size_t i = 0; i < corpora.size(); ++i) {
        if (corpora[i].name.empty()) {
            throw ConfigError("corpus " + std::to_string(i) + " needs a name");
        }
        for (std::size_t j = i + 1; j < corpora.size(); ++j) {
            if (corpora[i].name == corpora[j].name) {
                throw ConfigError("duplicate corpus name '" + corpora[i].name + "'");
            }
        }
    }
    if (experiment == "sweep-priors") {
        if (priors.size() < 2) {
            throw ConfigError("sweep-priors needs at least 2 priors");
        }
        if (!is_dynamic_method(method)) {
            throw ConfigError("sweep-priors applies to dynamic methods (dds|multiuat)");
        }
    }
    if (experiment == "cosine-matrix" && method != "dds") {
        throw ConfigError("cosine-matrix runs the dds method");
    }
    train.validate();
}

ExperimentConfig parse_experiment_config(const json& root) {
    if (!root.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    require_known_keys(root, "",
                       {"experiment", "method", "measure", "tau", "priors", "seeds", "data_seed",
                        "split", "eval_limit", "model", "train", "corpora"});

    ExperimentConfig config;
    config.experiment = get_or<std::string>(root, "", "experiment", "train");
    config.method = get_or<std::string>(root, "", "method", "prop");
    if (root.contains("measure")) {
        config.measure = parse_measure(root.at("measure").get<std::string>());
        config.has_measure = true;
    }
    if (root.contains("tau")) {
        config.tau = parse_tau_field(root.at("tau"), "tau");
        config.has_tau = true;
    }
    if (root.contains("priors")) {
        for (const auto& entry : root.at("priors")) {
            config.priors.push_back(parse_tau_field(entry, "priors[]"));
        }
    }
    config.seeds = get_or<std::vector<std::uint64_t>>(root, "", "seeds", {1});
    config.data_seed = get_or<std::uint64_t>(root, "", "data_seed", 1234);
    if (root.contains("split")) {
        const auto fractions = root.at("split").get<std::vector<double>>();
        if (fractions.size() != 3) {
            throw ConfigError("split must be [train, dev, test]");
        }
        config.split_fractions = {fractions[0], fractions[1], fractions[2]};
    }
    config.eval_limit = get_or<std::size_t>(root, "", "eval_limit", 0);

    if (root.contains("model")) {
        const json& model = root.at("model");
        require_known_keys(model, "model.",
                           {"d_model", "n_layers", "n_heads", "d_ff", "dropout", "max_seq_len"});
        config.train.model.d_model = get_or<std::size_t>(model, "model.", "d_model", 64);
        config.train.model.n_layers = get_or<std::size_t>(model, "model.", "n_layers", 2);
        config.train.model.n_heads = get_or<std::size_t>(model, "model.", "n_heads", 2);
        config.train.model.d_ff = get_or<std::size_t>(model, "model.", "d_ff", 128);
        config.train.model.dropout_rate = get_or<double>(model, "model.", "dropout", 0.1);
        config.train.model.max_seq_len = get_or<std::size_t>(model, "model.", "max_seq_len", 16);
    }

    if (root.contains("train")) {
        const json& train = root.at("train");
        require_known_keys(train, "train.",
                           {"steps", "scorer_interval", "lr", "warmup", "batch_size",
                            "dev_batch_size", "mc_samples", "scorer_lr", "scorer_mean_baseline"});
        config.train.total_steps = get_or<std::size_t>(train, "train.", "steps", 3000);
        config.train.scorer_interval = get_or<std::size_t>(train, "train.", "scorer_interval", 100);
        config.train.learning_rate = get_or<double>(train, "train.", "lr", 1e-3);
        config.train.warmup_steps = get_or<std::size_t>(train, "train.", "warmup", 100);
        config.train.batch_size = get_or<std::size_t>(train, "train.", "batch_size", 8);
        config.train.dev_batch_size = get_or<std::size_t>(train, "train.", "dev_batch_size", 0);
        config.train.mc_samples = get_or<std::size_t>(train, "train.", "mc_samples", 30);
        config.train.scorer_lr = get_or<double>(train, "train.", "scorer_lr", 1e-4);
        config.train.scorer_mean_baseline =
            get_or<bool>(train, "train.", "scorer_mean_baseline", false);
    }

    if (!root.contains("corpora")) {
        throw ConfigError("config needs a 'corpora' list");
    }
    std::size_t index = 0;
    for (const auto& entry : root.at("corpora")) {
        const std::string context = "corpora[" + std::to_string(index) + "].";
        require_known_keys(entry, context,
                           {"name", "task", "size", "min_len", "max_len", "alphabet", "seed",
                            "shift", "template_pool", "tsv"});
        CorpusSpec spec;
        spec.name = get_or<std::string>(entry, context, "name", "");
        if (entry.contains("tsv")) {
            spec.is_tsv = true;
            spec.tsv_path = entry.at("tsv").get<std::string>();
        } else {
            if (!entry.contains("task") || !entry.contains("size")) {
                throw ConfigError(context + " needs 'task' and 'size' (or a 'tsv' path)");
            }
            spec.synthetic.task = parse_task(entry.at("task").get<std::string>());
            spec.synthetic.size = entry.at("size").get<std::size_t>();
            spec.synthetic.min_len = get_or<std::size_t>(entry, context, "min_len", 3);
            spec.synthetic.max_len = get_or<std::size_t>(entry, context, "max_len", 10);
            spec.synthetic.alphabet = alphabet_from_string(
                get_or<std::string>(entry, context, "alphabet", "abcdefghijklmnopqrstuvwxyz"));
            spec.synthetic.cipher_shift = get_or<std::size_t>(entry, context, "shift", 2);
            spec.synthetic.template_pool = get_or<std::size_t>(entry, context, "template_pool", 50);
            if (entry.contains("seed")) {
                spec.synthetic.seed = entry.at("seed").get<std::uint64_t>();
                spec.has_explicit_seed = true;
            }
        }
        config.corpora.push_back(std::move(spec));
        ++index;
    }

    config.validate();
    return config;
}

json experiment_config_to_json(const ExperimentConfig& config) {
    json root;
    root["experiment"] = config.experiment;
    root["method"] = config.method;
    if (config.has_measure) {
        root["measure"] = measure_name(config.measure);
    }
    if (config.has_tau) {
        root["tau"] = config.tau.to_string();
    }
    if (!config.priors.empty()) {
        json priors = json::array();
        for (const auto& prior : config.priors) {
            priors.push_back(prior.to_string());
        }
        root["priors"] = priors;
    }
    root["seeds"] = config.seeds;
    root["data_seed"] = config.data_seed;
    root["split"] = {config.split_fractions.train, config.split_fractions.dev,
                     config.split_fractions.test};
    root["eval_limit"] = config.eval_limit;

    json model;
    model["d_model"] = config.train.model.d_model;
    model["n_layers"] = config.train.model.n_layers;
    model["n_heads"] = config.train.model.n_heads;
    model["d_ff"] = config.train.model.d_ff;
    model["dropout"] = config.train.model.dropout_rate;
    model["max_seq_len"] = config.train.model.max_seq_len;
    root["model"] = model;

    json train;
    train["steps"] = config.train.total_steps;
    train["scorer_interval"] = config.train.scorer_interval;
    train["lr"] = config.train.learning_rate;
    train["warmup"] = config.train.warmup_steps;
    train["batch_size"] = config.train.batch_size;
    train["dev_batch_size"] = config.train.dev_batch_size;
    train["mc_samples"] = config.train.mc_samples;
    train["scorer_lr"] = config.train.scorer_lr;
    train["scorer_mean_baseline"] = config.train.scorer_mean_baseline;
    root["train"] = train;

    json corpora = json::array();
    for (const auto& spec : config.corpora) {
        json entry;
        entry["name"] = spec.name;
        if (spec.is_tsv) {
            entry["tsv"] = spec.tsv_path;
        } else {
            entry["task"] = task_name(spec.synthetic.task);
            entry["size"] = spec.synthetic.size;
            entry["min_len"] = spec.synthetic.min_len;
            entry["max_len"] = spec.synthetic.max_len;
            std::string alphabet;
            for (const auto& token : spec.synthetic.alphabet) {
                alphabet += token;
            }
            entry["alphabet"] = alphabet;
            entry["shift"] = spec.synthetic.cipher_shift;
            entry["template_pool"] = spec.synthetic.template_pool;
            if (spec.has_explicit_seed) {
                entry["seed"] = spec.synthetic.seed;
            }
        }
        corpora.push_back(entry);
    }
    root["corpora"] = corpora;
    return root;
}

json load_config_json(const std::string& path) {
    json parsed;
    try {
        parsed = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
    if (parsed.is_object() && parsed.contains("config") && parsed.contains("artifacts")) {
        return parsed.at("config");  // manifest: unwrap the echoed config
    }
    return parsed;
}

void apply_override(json& root, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like key.path=value, got '" + assignment + "'");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value_text = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(value_text);
    } catch (const json::exception&) {
        value = value_text;  // bare strings are allowed unquoted
    }

    json* cursor = &root;
    std::size_t begin = 0;
    for (;;) {
        const std::size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (key.empty()) {
            throw ConfigError("override path '" + path + "' has an empty segment");
        }
        if (dot == std::string::npos) {
            (*cursor)[key] = value;
            return;
        }
        cursor = &(*cursor)[key];
        begin = dot + 1;
    }
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw ContractError("median: empty input");
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[mid];
    }
    return 0.5 * (values[mid - 1] + values[mid]);
}

// ---------------------------------------------------------------- assembly

CorpusCollection build_collection(const ExperimentConfig& config) {
    CorpusCollection collection;
    for (std::size_t i = 0; i < config.corpora.size(); ++i) {
        const CorpusSpec& spec = config.corpora[i];
        ParallelCorpus corpus;
        if (spec.is_tsv) {
            corpus = load_tsv(spec.tsv_path);
        } else {
            SyntheticSpec synthetic = spec.synthetic;
            if (!spec.has_explicit_seed) {
                synthetic.seed = config.data_seed + 1000003ULL * (i + 1);
            }
            corpus = generate_synthetic_corpus(synthetic);
        }
        corpus.name = spec.name;
        collection.names.push_back(spec.name);
        collection.corpora.push_back(
            split(corpus, config.split_fractions, config.data_seed + 2000003ULL * (i + 1)));
    }
    collection.validate();
    return collection;
}

TrainConfig make_train_config(const ExperimentConfig& config, std::uint64_t seed,
                              const TemperatureSpec& prior, const CorpusCollection& collection) {
    TrainConfig train = config.train;
    train.root_seed = seed;
    train.measure = config.measure;
    train.initial_temperature = prior;
    train.static_distribution.reset();
    if (config.method == "prop") {
        train.static_distribution = proportional_distribution(collection.train_sizes());
    } else if (config.method == "temp") {
        train.static_distribution = temperature_distribution(collection.train_sizes(), config.tau);
    } else if (config.method == "uniform") {
        train.static_distribution = uniform_distribution(collection.count());
    }
    return train;
}

RewardProvider make_reward_provider(const ExperimentConfig& config, CosineMatrixLog* log) {
    if (config.method == "multiuat") {
        return make_uncertainty_provider(config.measure, config.train.mc_samples);
    }
    if (config.method == "dds") {
        return make_cosine_provider(log);
    }
    return RewardProvider();  // static methods never query rewards
}

// ---------------------------------------------------------------- runners

TrainSummary run_train(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    if (config.experiment != "train") {
        throw ConfigError("run_train: config.experiment is '" + config.experiment + "'");
    }
    ensure_fresh_dir(out_dir);
    ArtifactSink sink{out_dir, {}};

    const CorpusCollection collection = build_collection(config);
    const TemperatureSpec prior =
        config.has_tau ? config.tau : TemperatureSpec::temperature(1.0);

    std::vector<SeedRunResult> runs;
    for (std::uint64_t seed : config.seeds) {
        runs.push_back(run_one_seed(config, collection, seed, prior, sink, "", nullptr));
    }
    TrainSummary summary = summarize_runs(collection, std::move(runs));
    sink.write("summary.csv", summary_csv(summary));
    write_manifest(config, sink);
    return summary;
}

SweepSummary run_sweep_priors(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    if (config.experiment != "sweep-priors") {
        throw ConfigError("run_sweep_priors: config.experiment is '" + config.experiment + "'");
    }
    ensure_fresh_dir(out_dir);
    ArtifactSink sink{out_dir, {}};

    const CorpusCollection collection = build_collection(config);

    SweepSummary sweep;
    for (const TemperatureSpec& prior : config.priors) {
        const std::string label = prior.to_string();
        sweep.prior_labels.push_back(label);
        std::vector<SeedRunResult> runs;
        for (std::uint64_t seed : config.seeds) {
            runs.push_back(run_one_seed(config, collection, seed, prior, sink,
                                        "prior_" + label + "/", nullptr));
        }
        TrainSummary summary = summarize_runs(collection, std::move(runs));
        sink.write("prior_" + label + "/summary.csv", summary_csv(summary));
        sweep.per_prior.emplace(label, std::move(summary));
    }

    std::string tv_csv = "prior_a,prior_b,median_tv\n";
    for (std::size_t a = 0; a < sweep.prior_labels.size(); ++a) {
        for (std::size_t b = a + 1; b < sweep.prior_labels.size(); ++b) {
            const TrainSummary& sa = sweep.per_prior.at(sweep.prior_labels[a]);
            const TrainSummary& sb = sweep.per_prior.at(sweep.prior_labels[b]);
            std::vector<double> tvs;
            for (std::size_t s = 0; s < config.seeds.size(); ++s) {
                tvs.push_back(
                    total_variation(SamplingDistribution(sa.seed_runs[s].final_distribution),
                                    SamplingDistribution(sb.seed_runs[s].final_distribution)));
            }
            const double med = median(tvs);
            const std::string key = sweep.prior_labels[a] + "|" + sweep.prior_labels[b];
            sweep.median_pairwise_tv[key] = med;
            sweep.max_median_tv = std::max(sweep.max_median_tv, med);
            tv_csv += sweep.prior_labels[a] + "," + sweep.prior_labels[b] + "," +
                      format_double(med) + "\n";
        }
    }
    sink.write("tv_summary.csv", tv_csv);
    write_manifest(config, sink);
    return sweep;
}

ResultTable run_transfer_matrix(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    if (config.experiment != "transfer-matrix") {
        throw ConfigError("run_transfer_matrix: config.experiment is '" + config.experiment + "'");
    }
    ensure_fresh_dir(out_dir);
    ArtifactSink sink{out_dir, {}};

    const CorpusCollection collection = build_collection(config);
    TrainConfig train = config.train;
    train.root_seed = config.seeds.front();

    ResultTable table = transfer_matrix(collection, train, config.eval_limit);
    sink.write("results.csv", table.to_csv());
    sink.write("results.txt", table.to_text());
    write_manifest(config, sink);
    return table;
}

CosineMatrixSummary run_cosine_matrix(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    if (config.experiment != "cosine-matrix") {
        throw ConfigError("run_cosine_matrix: config.experiment is '" + config.experiment + "'");
    }
    ensure_fresh_dir(out_dir);
    ArtifactSink sink{out_dir, {}};

    const CorpusCollection collection = build_collection(config);
    const TemperatureSpec prior =
        config.has_tau ? config.tau : TemperatureSpec::temperature(1.0);

    CosineMatrixSummary summary;
    summary.corpus_names = collection.names;
    for (std::uint64_t seed : config.seeds) {
        CosineMatrixLog log(collection.count());
        summary.seed_runs.push_back(
            run_one_seed(config, collection, seed, prior, sink, "", &log));
        summary.per_seed_matrices.push_back(log.average());
        sink.write("seed_" + std::to_string(seed) + "/matrix.csv",
                   matrix_csv(collection.names, summary.per_seed_matrices.back()));
    }

    const std::size_t cells = collection.count() * collection.count();
    summary.median_matrix.resize(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        std::vector<double> values;
        for (const auto& matrix : summary.per_seed_matrices) {
            values.push_back(matrix[c]);
        }
        summary.median_matrix[c] = median(values);
    }
    sink.write("matrix.csv", matrix_csv(collection.names, summary.median_matrix));
    write_manifest(config, sink);
    return summary;
}

}  // namespace uatlab
