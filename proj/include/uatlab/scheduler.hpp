#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uatlab/corpus.hpp"
#include "uatlab/model.hpp"
#include "uatlab/optim.hpp"
#include "uatlab/uncertainty.hpp"

namespace uatlab {

// Probability vector over corpora; nonnegative and summing to 1 within 1e-12.
class SamplingDistribution {
public:
    explicit SamplingDistribution(std::vector<double> probabilities);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_.at(i); }
    const std::vector<double>& probs() const noexcept { return probs_; }

private:
    std::vector<double> probs_;
};

// Either a finite temperature >= 1 or the uniform limit.
struct TemperatureSpec {
    bool uniform = false;
    double tau = 1.0;

    static TemperatureSpec temperature(double tau);
    static TemperatureSpec uniform_limit();
    static TemperatureSpec parse(const std::string& text);  // "1", "5", "uniform"
    std::string to_string() const;
};

SamplingDistribution proportional_distribution(const std::vector<double>& sizes);
SamplingDistribution temperature_distribution(const std::vector<double>& sizes,
                                              const TemperatureSpec& spec);
SamplingDistribution uniform_distribution(std::size_t n);

double total_variation(const SamplingDistribution& a, const SamplingDistribution& b);

// Free logits over corpora; probabilities are their softmax. Updated by
// gradient ascent on sum_n R(n) * log p(n), so corpora whose reward share
// exceeds their current probability gain mass.
class SchedulerState {
public:
    SchedulerState(std::vector<double> logits, double learning_rate);

    std::size_t size() const noexcept { return logits_.size(); }
    const std::vector<double>& logits() const noexcept { return logits_; }
    const std::vector<double>& probabilities() const noexcept { return probs_; }
    double learning_rate() const noexcept { return lr_; }

    void update(const RewardVector& rewards);

private:
    void refresh_probs();

    std::vector<double> logits_;
    std::vector<double> probs_;
    double lr_;
};

SchedulerState init_scorer(const SamplingDistribution& initial, double learning_rate);
std::size_t sample_index(const std::vector<double>& probs, RngStream& rng);
std::size_t sample_corpus_index(const SchedulerState& state, RngStream& rng);
void update_scorer(SchedulerState& state, const RewardVector& rewards);

// The full hyperparameter surface of one training run.
struct TrainConfig {
    std::size_t total_steps = 3000;     // J
    std::size_t scorer_interval = 100;  // S
    double learning_rate = 1e-3;        // model lr (alpha)
    std::size_t warmup_steps = 100;
    std::size_t batch_size = 8;
    std::size_t dev_batch_size = 0;  // 0 -> batch_size
    std::size_t mc_samples = 30;     // K
    MeasureKind measure = MeasureKind::kEntEOS;
    TemperatureSpec initial_temperature;  // warm start, tau = 1 by default
    double scorer_lr = 1e-4;
    bool scorer_mean_baseline = false;  // subtract the mean reward before the update
    std::uint64_t root_seed = 1;
    ModelConfig model;
    // When set, the run is a static baseline: fixed distribution, no scorer.
    std::optional<SamplingDistribution> static_distribution;

    void validate() const;
};

struct TrajectoryRow {
    std::size_t iteration = 0;
    std::vector<double> probabilities;
    std::vector<double> rewards;     // zeros for static baselines
    std::vector<double> train_loss;  // latest summed batch NLL per corpus, NaN before first visit
};

struct TrajectoryLog {
    std::vector<std::string> corpus_names;
    std::vector<TrajectoryRow> rows;

    void validate() const;        // iteration indices strictly increasing
    std::string to_csv() const;   // header "idx,<name1>,...,<nameN>", probability columns
};

// Computes R(n) for every corpus given one dev and one train mini-batch per
// corpus over a read-only model snapshot.
using RewardProvider = std::function<RewardVector(
    const ModelParameters& params, const std::vector<Batch>& dev_batches,
    const std::vector<Batch>& trn_batches, RngStream& rng)>;

RewardProvider make_uncertainty_provider(MeasureKind kind, std::size_t mc_samples);
// Accumulates into `log` (optional) at every reward evaluation.
RewardProvider make_cosine_provider(struct CosineMatrixLog* log = nullptr);

struct TrainResult {
    ModelParameters params;
    Vocabulary vocab;
    TrajectoryLog trajectory;
    std::vector<double> final_distribution;
};

// The main training loop: sample a corpus, take one model step, and every
// scorer_interval steps draw one dev mini-batch per corpus, compute rewards
// and update the scorer (static baselines skip rewards and keep their fixed
// distribution). Bitwise reproducible from root_seed.
TrainResult train_multicorpus(const TrainConfig& config, const CorpusCollection& collection,
                              const RewardProvider& reward_provider);

// Same loop over an externally supplied (usually joint) vocabulary.
TrainResult train_multicorpus(const TrainConfig& config, const CorpusCollection& collection,
                              const RewardProvider& reward_provider, const Vocabulary& vocab);

}  // namespace uatlab
