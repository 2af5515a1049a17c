#include "uatlab/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "uatlab/dds.hpp"

namespace uatlab {

SamplingDistribution::SamplingDistribution(std::vector<double> probabilities)
    : probs_(std::move(probabilities)) {
    if (probs_.empty()) {
        throw ContractError("SamplingDistribution: empty");
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) {
            throw ContractError("SamplingDistribution: negative or NaN probability");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ContractError("SamplingDistribution: probabilities sum to " + std::to_string(sum));
    }
}

TemperatureSpec TemperatureSpec::temperature(double tau) {
    if (!(tau >= 1.0)) {
        throw ConfigError("temperature must be >= 1, got " + std::to_string(tau));
    }
    TemperatureSpec spec;
    spec.tau = tau;
    return spec;
}

TemperatureSpec TemperatureSpec::uniform_limit() {
    TemperatureSpec spec;
    spec.uniform = true;
    return spec;
}

TemperatureSpec TemperatureSpec::parse(const std::string& text) {
    if (text == "uniform" || text == "inf") {
        return uniform_limit();
    }
    std::size_t used = 0;
    double tau = 0.0;
    try {
        tau = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("cannot parse temperature '" + text + "'");
    }
    if (used != text.size()) {
        throw ConfigError("cannot parse temperature '" + text + "'");
    }
    return temperature(tau);
}

std::string TemperatureSpec::to_string() const {
    if (uniform) {
        return "uniform";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", tau);
    return buf;
}

namespace {

std::vector<double> normalized(const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        sum += w;
    }
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out[i] = weights[i] / sum;
    }
    return out;
}

}  // namespace

SamplingDistribution proportional_distribution(const std::vector<double>& sizes) {
    if (sizes.empty()) {
        throw ContractError("proportional_distribution: empty size list");
    }
    for (double s : sizes) {
        if (!(s > 0.0)) {
            throw ContractError("proportional_distribution: sizes must be positive");
        }
    }
    return SamplingDistribution(normalized(sizes));
}

SamplingDistribution temperature_distribution(const std::vector<double>& sizes,
                                              const TemperatureSpec& spec) {
    if (sizes.empty()) {
        throw ContractError("temperature_distribution: empty size list");
    }
    if (spec.uniform) {
        return uniform_distribution(sizes.size());
    }
    if (!(spec.tau >= 1.0)) {
        throw ConfigError("temperature_distribution: tau must be >= 1");
    }
    const std::vector<double> base = normalized(sizes);
    std::vector<double> powered(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (!(base[i] > 0.0)) {
            throw ContractError("temperature_distribution: sizes must be positive");
        }
        powered[i] = std::pow(base[i], 1.0 / spec.tau);
    }
    return SamplingDistribution(normalized(powered));
}

SamplingDistribution uniform_distribution(std::size_t n) {
    if (n == 0) {
        throw ContractError("uniform_distribution: n must be positive");
    }
    return SamplingDistribution(normalized(std::vector<double>(n, 1.0)));
}

double total_variation(const SamplingDistribution& a, const SamplingDistribution& b) {
    if (a.size() != b.size()) {
        throw DimensionError("total_variation: size mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(a[i] - b[i]);
    }
    return 0.5 * sum;
}

// ---------------------------------------------------------------- scorer

SchedulerState::SchedulerState(std::vector<double> logits, double learning_rate)
    : logits_(std::move(logits)), lr_(learning_rate) {
    if (logits_.empty()) {
        throw ContractError("SchedulerState: empty logits");
    }
    refresh_probs();
}

void SchedulerState::refresh_probs() {
    probs_ = logits_;
    detail::softmax_inplace(probs_.data(), probs_.size());
}

void SchedulerState::update(const RewardVector& rewards) {
    if (rewards.values.size() != logits_.size()) {
        throw ContractError("SchedulerState::update: reward count mismatch");
    }
    rewards.validate();
    double total = 0.0;
    for (double r : rewards.values) {
        total += r;
    }
    // ascent on sum_n R(n) log p(n): d/dlogit_j = R(j) - p_j * sum(R)
    for (std::size_t j = 0; j < logits_.size(); ++j) {
        logits_[j] += lr_ * (rewards.values[j] - probs_[j] * total);
    }
    refresh_probs();
}

SchedulerState init_scorer(const SamplingDistribution& initial, double learning_rate) {
    std::vector<double> logits(initial.size());
    for (std::size_t i = 0; i < initial.size(); ++i) {
        if (initial[i] <= 0.0) {
            throw ConfigError("init_scorer: warm-start probabilities must be strictly positive");
        }
        logits[i] = std::log(initial[i]);
    }
    return SchedulerState(std::move(logits), learning_rate);
}

std::size_t sample_index(const std::vector<double>& probs, RngStream& rng) {
    const double u = rng.next_unit();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cumulative += probs[i];
        if (u < cumulative) {
            return i;
        }
    }
    return probs.size() - 1;  // guard against rounding at the top end
}

std::size_t sample_corpus_index(const SchedulerState& state, RngStream& rng) {
    return sample_index(state.probabilities(), rng);
}

void update_scorer(SchedulerState& state, const RewardVector& rewards) { state.update(rewards); }

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
    if (total_steps < 1) {
        throw ConfigError("TrainConfig: total_steps must be >= 1");
    }
    if (scorer_interval < 1) {
        throw ConfigError("TrainConfig: scorer_interval must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("TrainConfig: batch_size must be >= 1");
    }
    if (mc_samples < 1) {
        throw ConfigError("TrainConfig: mc_samples must be >= 1");
    }
    if (!(learning_rate > 0.0) || !(scorer_lr > 0.0)) {
        throw ConfigError("TrainConfig: learning rates must be positive");
    }
    if (!initial_temperature.uniform && !(initial_temperature.tau >= 1.0)) {
        throw ConfigError("TrainConfig: initial temperature must be >= 1 or uniform");
    }
}

void TrajectoryLog::validate() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].iteration <= rows[i - 1].iteration) {
            throw ContractError("TrajectoryLog: iteration indices must be strictly increasing");
        }
    }
}

std::string TrajectoryLog::to_csv() const {
    validate();
    std::string out = "idx";
    for (const auto& name : corpus_names) {
        out += ",";
        out += name;
    }
    out += "\n";
    char buf[64];
    for (const auto& row : rows) {
        out += std::to_string(row.iteration);
        for (double p : row.probabilities) {
            std::snprintf(buf, sizeof(buf), ",%.12g", p);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

RewardProvider make_uncertainty_provider(MeasureKind kind, std::size_t mc_samples) {
    return [kind, mc_samples](const ModelParameters& params, const std::vector<Batch>& dev_batches,
                              const std::vector<Batch>& trn_batches, RngStream& rng) {
        (void)trn_batches;
        RewardVector rewards;
        rewards.kind = kind;
        rewards.mc_samples = mc_samples;
        rewards.values.resize(dev_batches.size());
        for (std::size_t n = 0; n < dev_batches.size(); ++n) {
            try {
                RngStream corpus_rng = rng.substream(n);
                rewards.values[n] =
                    corpus_reward(params, dev_batches[n], kind, mc_samples, corpus_rng);
            } catch (const Error& e) {
                throw Error("reward for corpus '" + dev_batches[n].corpus_name +
                            "' failed: " + e.what());
            }
        }
        return rewards;
    };
}

RewardProvider make_cosine_provider(CosineMatrixLog* log) {
    return [log](const ModelParameters& params, const std::vector<Batch>& dev_batches,
                 const std::vector<Batch>& trn_batches, RngStream& rng) {
        (void)rng;
        CosineRewards out = cosine_rewards(params, dev_batches, trn_batches);
        if (log != nullptr) {
            log->add(out.matrix);
        }
        return out.rewards;
    };
}

TrainResult train_multicorpus(const TrainConfig& config, const CorpusCollection& collection,
                              const RewardProvider& reward_provider) {
    return train_multicorpus(config, collection, reward_provider, build_vocab(collection));
}

TrainResult train_multicorpus(const TrainConfig& config, const CorpusCollection& collection,
                              const RewardProvider& reward_provider, const Vocabulary& shared_vocab) {
    config.validate();
    collection.validate();
    const std::size_t n_corpora = collection.count();
    const bool dynamic = !config.static_distribution.has_value();
    if (dynamic && !reward_provider) {
        throw ContractError("train_multicorpus: dynamic run needs a reward provider");
    }
    if (!dynamic && config.static_distribution->size() != n_corpora) {
        throw ContractError("train_multicorpus: static distribution size mismatch");
    }

    Vocabulary vocab = shared_vocab;
    ModelConfig model_config = config.model;
    model_config.vocab_size = vocab.size();

    RngStream init_rng(config.root_seed, RngStream::kModelInit);
    RngStream scheduler_rng(config.root_seed, RngStream::kScheduler);
    RngStream dropout_rng(config.root_seed, RngStream::kDropout);
    RngStream trn_batch_rng = RngStream(config.root_seed, RngStream::kBatchSampling).substream(0);
    RngStream dev_batch_rng = RngStream(config.root_seed, RngStream::kBatchSampling).substream(1);

    ModelParameters params = init_params(model_config, init_rng);
    OptimizerState optimizer = OptimizerState::create(params);

    SchedulerState scorer = init_scorer(
        dynamic ? temperature_distribution(collection.train_sizes(), config.initial_temperature)
                : *config.static_distribution,
        config.scorer_lr);

    const std::size_t dev_batch_size =
        config.dev_batch_size == 0 ? config.batch_size : config.dev_batch_size;

    TrainResult result;
    result.trajectory.corpus_names = collection.names;
    std::vector<double> last_loss(n_corpora, std::numeric_limits<double>::quiet_NaN());

    for (std::size_t step = 0; step < config.total_steps; ++step) {
        const std::size_t picked = dynamic
                                       ? sample_corpus_index(scorer, scheduler_rng)
                                       : sample_index(config.static_distribution->probs(),
                                                      scheduler_rng);
        Batch batch =
            sample_batch(collection.corpora[picked].train, config.batch_size, trn_batch_rng, vocab);
        batch.corpus_name = collection.names[picked];

        params.zero_grads();
        LossGraph loss = nll_loss(params, batch, dropout_rng, /*dropout_active=*/true);
        loss.graph.backward(loss.output);
        adam_step(params, optimizer, lr_at(step + 1, config.learning_rate, config.warmup_steps));
        last_loss[picked] = loss.value;

        if (step % config.scorer_interval != 0) {
            continue;
        }

        TrajectoryRow row;
        row.iteration = step;
        row.train_loss = last_loss;
        if (dynamic) {
            std::vector<Batch> dev_batches;
            std::vector<Batch> trn_batches;
            dev_batches.reserve(n_corpora);
            trn_batches.reserve(n_corpora);
            for (std::size_t n = 0; n < n_corpora; ++n) {
                dev_batches.push_back(sample_batch(collection.corpora[n].dev, dev_batch_size,
                                                   dev_batch_rng, vocab));
                dev_batches.back().corpus_name = collection.names[n];
                trn_batches.push_back(sample_batch(collection.corpora[n].train, config.batch_size,
                                                   trn_batch_rng, vocab));
                trn_batches.back().corpus_name = collection.names[n];
            }
            RngStream reward_rng = RngStream(config.root_seed, RngStream::kReward).substream(step);
            RewardVector rewards;
            try {
                rewards = reward_provider(params, dev_batches, trn_batches, reward_rng);
            } catch (const std::exception& e) {
                throw Error("train_multicorpus: scorer update at step " + std::to_string(step) +
                            " failed: " + e.what());
            }
            if (rewards.values.size() != n_corpora) {
                throw ContractError("train_multicorpus: reward provider returned " +
                                    std::to_string(rewards.values.size()) + " rewards for " +
                                    std::to_string(n_corpora) + " corpora");
            }
            row.rewards = rewards.values;
            if (config.scorer_mean_baseline) {
                double mean = 0.0;
                for (double r : rewards.values) {
                    mean += r;
                }
                mean /= static_cast<double>(n_corpora);
                for (double& r : rewards.values) {
                    r -= mean;
                }
            }
            scorer.update(rewards);
            row.probabilities = scorer.probabilities();
        } else {
            row.rewards.assign(n_corpora, 0.0);
            row.probabilities = config.static_distribution->probs();
        }
        result.trajectory.rows.push_back(std::move(row));
    }

    result.final_distribution =
        dynamic ? scorer.probabilities() : config.static_distribution->probs();
    result.params = std::move(params);
    result.vocab = std::move(vocab);
    result.trajectory.validate();
    return result;
}

}  // namespace uatlab
