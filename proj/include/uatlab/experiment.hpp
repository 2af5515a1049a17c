#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "uatlab/evaluation.hpp"
#include "uatlab/scheduler.hpp"

namespace uatlab {

// One corpus source: a synthetic task or an external TSV file.
struct CorpusSpec {
    std::string name;
    bool is_tsv = false;
    std::string tsv_path;
    SyntheticSpec synthetic;
    bool has_explicit_seed = false;
};

// Full experiment description; parsed strictly (unknown keys are errors).
struct ExperimentConfig {
    std::string experiment;  // train | sweep-priors | transfer-matrix | cosine-matrix
    std::string method = "prop";  // prop | temp | uniform | dds | multiuat
    MeasureKind measure = MeasureKind::kEntEOS;
    bool has_measure = false;
    TemperatureSpec tau;  // static temperature for "temp", warm-start prior for dynamic methods
    bool has_tau = false;
    std::vector<TemperatureSpec> priors;  // sweep-priors only
    std::vector<std::uint64_t> seeds = {1};
    std::uint64_t data_seed = 1234;
    SplitFractions split_fractions;
    std::size_t eval_limit = 0;  // 0 evaluates the whole test split
    TrainConfig train;           // includes the model section; root seed filled per run
    std::vector<CorpusSpec> corpora;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& json);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

// Loads a config file, unwrapping a manifest ("config" + "artifacts" keys)
// so any run can be reproduced from its manifest.
nlohmann::json load_config_json(const std::string& path);

// Applies one "dot.path=value" override; values parse as JSON when possible.
void apply_override(nlohmann::json& json, const std::string& assignment);

std::uint64_t fnv1a64(const std::string& bytes);

// Builds the named corpora with their train/dev/test splits.
CorpusCollection build_collection(const ExperimentConfig& config);

// Train config for one seed: static distribution for prop/temp/uniform,
// dynamic warm start (the prior) for dds/multiuat.
TrainConfig make_train_config(const ExperimentConfig& config, std::uint64_t seed,
                              const TemperatureSpec& prior, const CorpusCollection& collection);

RewardProvider make_reward_provider(const ExperimentConfig& config, CosineMatrixLog* log);

double median(std::vector<double> values);

struct SeedRunResult {
    std::uint64_t seed = 0;
    std::vector<double> per_corpus_bleu;
    double macro_bleu = 0.0;
    std::vector<double> final_distribution;
    std::string trajectory_csv;
    std::string results_csv;
};

struct TrainSummary {
    std::vector<std::string> corpus_names;
    std::vector<SeedRunResult> seed_runs;
    double median_macro_bleu = 0.0;
    std::vector<double> median_per_corpus_bleu;
    std::vector<double> median_final_distribution;
};

struct SweepSummary {
    std::vector<std::string> prior_labels;
    std::map<std::string, TrainSummary> per_prior;
    // pairwise total-variation distances between final distributions,
    // median across seeds, keyed "priorA|priorB"
    std::map<std::string, double> median_pairwise_tv;
    double max_median_tv = 0.0;
};

struct CosineMatrixSummary {
    std::vector<std::string> corpus_names;
    std::vector<std::vector<double>> per_seed_matrices;  // row-major n x n
    std::vector<double> median_matrix;
    std::vector<SeedRunResult> seed_runs;
};

// Experiment runners. Each writes artifacts under out_dir (which must not
// already contain a manifest) plus a manifest.json with config echo, seeds,
// and artifact checksums; each also returns its results for in-process use.
TrainSummary run_train(const ExperimentConfig& config, const std::string& out_dir);
SweepSummary run_sweep_priors(const ExperimentConfig& config, const std::string& out_dir);
ResultTable run_transfer_matrix(const ExperimentConfig& config, const std::string& out_dir);
CosineMatrixSummary run_cosine_matrix(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace uatlab
