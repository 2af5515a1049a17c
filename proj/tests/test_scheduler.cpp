#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uatlab/scheduler.hpp"

using namespace uatlab;

namespace {

double entropy_of(const SamplingDistribution& dist) {
    double h = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 0.0) {
            h -= dist[i] * std::log(dist[i]);
        }
    }
    return h;
}

CorpusCollection tiny_collection() {
    SyntheticSpec copy_spec;
    copy_spec.task = TaskKind::kCopy;
    copy_spec.size = 120;
    copy_spec.min_len = 3;
    copy_spec.max_len = 5;
    copy_spec.alphabet = alphabet_from_string("abcdef");
    copy_spec.seed = 11;

    SyntheticSpec rev_spec = copy_spec;
    rev_spec.task = TaskKind::kReverse;
    rev_spec.size = 60;

    CorpusCollection collection;
    collection.names = {"copy", "reverse"};
    collection.corpora = {split(generate_synthetic_corpus(copy_spec), {0.7, 0.15, 0.15}, 1),
                          split(generate_synthetic_corpus(rev_spec), {0.7, 0.15, 0.15}, 2)};
    return collection;
}

TrainConfig tiny_train_config() {
    TrainConfig config;
    config.total_steps = 12;
    config.scorer_interval = 5;
    config.learning_rate = 1e-3;
    config.warmup_steps = 4;
    config.batch_size = 4;
    config.mc_samples = 2;
    config.scorer_lr = 0.1;
    config.root_seed = 7;
    config.model.d_model = 16;
    config.model.n_layers = 1;
    config.model.n_heads = 2;
    config.model.d_ff = 32;
    config.model.dropout_rate = 0.1;
    config.model.max_seq_len = 8;
    return config;
}

}  // namespace

TEST_CASE("proportional distribution is definitional normalization") {
    SamplingDistribution d1 = proportional_distribution({3000, 1000});
    CHECK(d1[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(d1[1] == doctest::Approx(0.25).epsilon(1e-15));

    SamplingDistribution d2 = proportional_distribution({5});
    CHECK(d2[0] == 1.0);

    SamplingDistribution d3 = proportional_distribution({8000, 1500, 500});
    CHECK(d3[0] == doctest::Approx(0.80).epsilon(1e-15));
    CHECK(d3[1] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(d3[2] == doctest::Approx(0.05).epsilon(1e-15));

    CHECK_THROWS_AS(proportional_distribution({}), ContractError);
    CHECK_THROWS_AS(proportional_distribution({10, 0}), ContractError);
}

TEST_CASE("temperature reduces to proportional at tau=1 and to uniform at the limit") {
    RngStream rng(3, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.next_below(5);
        std::vector<double> sizes(n);
        for (auto& s : sizes) {
            s = 1.0 + static_cast<double>(rng.next_below(10000));
        }
        SamplingDistribution prop = proportional_distribution(sizes);
        SamplingDistribution tau1 = temperature_distribution(sizes, TemperatureSpec::temperature(1.0));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(prop[i] - tau1[i]) <= 1e-12);
        }
        SamplingDistribution uni = temperature_distribution(sizes, TemperatureSpec::uniform_limit());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(uni[i] == 1.0 / static_cast<double>(n));
        }
    }
}

TEST_CASE("temperature 5 on [0.8, 0.2] matches the scalar oracle") {
    // oracle: p_i = q_i^(1/5) / sum q^(1/5) computed directly
    const double a = std::pow(0.8, 0.2);
    const double b = std::pow(0.2, 0.2);
    SamplingDistribution dist = temperature_distribution({0.8, 0.2}, TemperatureSpec::temperature(5.0));
    CHECK(dist[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));
    CHECK(dist[1] == doctest::Approx(b / (a + b)).epsilon(1e-14));
    CHECK(dist[0] == doctest::Approx(0.56887).epsilon(1e-4));

    CHECK_THROWS_AS(TemperatureSpec::temperature(0.5), ConfigError);
    CHECK_THROWS_AS(TemperatureSpec::parse("warm"), ConfigError);
    CHECK(TemperatureSpec::parse("uniform").uniform);
    CHECK(TemperatureSpec::parse("5").tau == 5.0);
}

TEST_CASE("temperature entropy is non-decreasing in tau") {
    const std::vector<double> sizes = {8000, 1500, 500};
    double previous = -1.0;
    for (double tau : {1.0, 2.0, 5.0, 10.0, 100.0}) {
        const double h = entropy_of(temperature_distribution(sizes, TemperatureSpec::temperature(tau)));
        CHECK(h >= previous);
        previous = h;
    }
    CHECK(previous <= entropy_of(uniform_distribution(3)) + 1e-12);
}

TEST_CASE("scorer initialization round-trips the warm start") {
    SchedulerState uniform = init_scorer(uniform_distribution(4), 0.1);
    for (double logit : uniform.logits()) {
        CHECK(logit == doctest::Approx(uniform.logits()[0]).epsilon(1e-15));
    }

    SchedulerState skew = init_scorer(SamplingDistribution({0.8, 0.2}), 0.1);
    CHECK(skew.probabilities()[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(skew.probabilities()[1] == doctest::Approx(0.2).epsilon(1e-12));

    CHECK_THROWS_AS(init_scorer(SamplingDistribution({1.0, 0.0}), 0.1), ConfigError);
}

TEST_CASE("corpus sampling follows the distribution") {
    RngStream rng(5, RngStream::kScheduler);
    const std::vector<double> degenerate = {1.0, 0.0};
    for (int i = 0; i < 200; ++i) {
        CHECK(sample_index(degenerate, rng) == 0);
    }

    RngStream r1(9, RngStream::kScheduler);
    RngStream r2(9, RngStream::kScheduler);
    SchedulerState state = init_scorer(SamplingDistribution({0.7, 0.3}), 0.1);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_corpus_index(state, r1) == sample_corpus_index(state, r2));
    }

    RngStream r3(31, RngStream::kScheduler);
    std::size_t zero_count = 0;
    const std::size_t draws = 10000;
    for (std::size_t i = 0; i < draws; ++i) {
        zero_count += sample_corpus_index(state, r3) == 0 ? 1 : 0;
    }
    const double freq = static_cast<double>(zero_count) / static_cast<double>(draws);
    CHECK(freq > 0.68);
    CHECK(freq < 0.72);
}

TEST_CASE("scorer update law matches the symbolic softmax-gradient oracle") {
    SchedulerState state(std::vector<double>{0.0, 0.0}, 0.1);
    RewardVector rewards;
    rewards.values = {1.0, 0.0};
    state.update(rewards);
    CHECK(state.logits()[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(state.logits()[1] == doctest::Approx(-0.05).epsilon(1e-12));

    // oracle: softmax([0.05, -0.05])
    const double p0 = std::exp(0.05) / (std::exp(0.05) + std::exp(-0.05));
    CHECK(state.probabilities()[0] == doctest::Approx(p0).epsilon(1e-12));
    CHECK(state.probabilities()[0] == doctest::Approx(0.52498).epsilon(1e-5));
    CHECK(state.probabilities()[1] == doctest::Approx(0.47502).epsilon(1e-5));
}

TEST_CASE("scorer update fixed points and monotonicity") {
    // uniform probabilities and equal rewards: exact fixed point
    SchedulerState state(std::vector<double>{0.3, 0.3, 0.3}, 0.5);
    RewardVector equal;
    equal.values = {2.0, 2.0, 2.0};
    const std::vector<double> before = state.probabilities();
    state.update(equal);
    CHECK(state.probabilities() == before);

    // zero rewards change nothing
    RewardVector zeros;
    zeros.values = {0.0, 0.0, 0.0};
    state.update(zeros);
    CHECK(state.probabilities() == before);

    // from uniform, the argmax-reward corpus strictly gains, the argmin loses
    SchedulerState fresh(std::vector<double>{0.0, 0.0, 0.0}, 0.1);
    RewardVector distinct;
    distinct.values = {0.2, 0.9, 0.5};
    fresh.update(distinct);
    CHECK(fresh.probabilities()[1] > 1.0 / 3.0);
    CHECK(fresh.probabilities()[0] < 1.0 / 3.0);

    RewardVector bad;
    bad.values = {1.0, std::nan(""), 0.0};
    CHECK_THROWS_AS(fresh.update(bad), NumericError);
    RewardVector short_rewards;
    short_rewards.values = {1.0};
    CHECK_THROWS_AS(fresh.update(short_rewards), ContractError);
}

TEST_CASE("distributions stay normalized after every operation") {
    RngStream rng(13, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_below(6);
        std::vector<double> sizes(n);
        for (auto& s : sizes) {
            s = 1.0 + static_cast<double>(rng.next_below(100000));
        }
        for (const SamplingDistribution& dist :
             {proportional_distribution(sizes),
              temperature_distribution(sizes, TemperatureSpec::temperature(1.0 + rng.next_below(20))),
              uniform_distribution(n)}) {
            double sum = 0.0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                sum += dist[i];
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("degenerate schedule updates the scorer only at step 0") {
    TrainConfig config = tiny_train_config();
    config.total_steps = 4;
    config.scorer_interval = 50;  // S > J
    CorpusCollection collection = tiny_collection();

    TrainResult result = train_multicorpus(
        config, collection, make_uncertainty_provider(MeasureKind::kEntEOS, config.mc_samples));
    REQUIRE(result.trajectory.rows.size() == 1);
    CHECK(result.trajectory.rows[0].iteration == 0);
    // one update from the warm start moves probabilities only slightly
    SamplingDistribution warm =
        temperature_distribution(collection.train_sizes(), config.initial_temperature);
    for (std::size_t i = 0; i < warm.size(); ++i) {
        CHECK(std::abs(result.final_distribution[i] - warm[i]) < 0.2);
    }
}

TEST_CASE("constant rewards keep a uniform warm start uniform") {
    TrainConfig config = tiny_train_config();
    config.initial_temperature = TemperatureSpec::uniform_limit();
    CorpusCollection collection = tiny_collection();

    const RewardProvider constant_provider =
        [](const ModelParameters&, const std::vector<Batch>& dev, const std::vector<Batch>&,
           RngStream&) {
            RewardVector rewards;
            rewards.values.assign(dev.size(), 3.25);
            return rewards;
        };
    TrainResult result = train_multicorpus(config, collection, constant_provider);
    for (double p : result.final_distribution) {
        CHECK(p == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("training is bitwise reproducible from the root seed") {
    TrainConfig config = tiny_train_config();
    CorpusCollection collection = tiny_collection();
    const RewardProvider provider =
        make_uncertainty_provider(MeasureKind::kEntSent, config.mc_samples);

    TrainResult a = train_multicorpus(config, collection, provider);
    TrainResult b = train_multicorpus(config, collection, provider);
    CHECK(a.trajectory.to_csv() == b.trajectory.to_csv());
    CHECK(flatten_values(a.params) == flatten_values(b.params));
    CHECK(a.final_distribution == b.final_distribution);

    config.root_seed += 1;
    TrainResult c = train_multicorpus(config, collection, provider);
    CHECK(flatten_values(a.params) != flatten_values(c.params));
}

TEST_CASE("static baselines log constant probabilities and skip rewards") {
    TrainConfig config = tiny_train_config();
    CorpusCollection collection = tiny_collection();
    config.static_distribution = proportional_distribution(collection.train_sizes());

    bool provider_called = false;
    const RewardProvider spy = [&](const ModelParameters&, const std::vector<Batch>&,
                                   const std::vector<Batch>&, RngStream&) {
        provider_called = true;
        return RewardVector{};
    };
    TrainResult result = train_multicorpus(config, collection, spy);
    CHECK(!provider_called);
    REQUIRE(result.trajectory.rows.size() == 3);  // steps 0, 5, 10
    for (const auto& row : result.trajectory.rows) {
        CHECK(row.probabilities == config.static_distribution->probs());
        for (double r : row.rewards) {
            CHECK(r == 0.0);
        }
    }
}

TEST_CASE("reward provider failures carry step context") {
    TrainConfig config = tiny_train_config();
    CorpusCollection collection = tiny_collection();
    const RewardProvider broken = [](const ModelParameters&, const std::vector<Batch>&,
                                     const std::vector<Batch>&, RngStream&) -> RewardVector {
        throw NumericError("synthetic failure");
    };
    try {
        train_multicorpus(config, collection, broken);
        FAIL("expected Error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("step 0") != std::string::npos);
        CHECK(msg.find("synthetic failure") != std::string::npos);
    }
}

TEST_CASE("trajectory csv carries the corpus-name header and probability columns") {
    TrajectoryLog log;
    log.corpus_names = {"copy", "reverse"};
    log.rows.push_back({0, {0.8, 0.2}, {1.0, 2.0}, {0.0, 0.0}});
    log.rows.push_back({5, {0.7, 0.3}, {1.0, 2.0}, {0.0, 0.0}});
    const std::string csv = log.to_csv();
    CHECK(csv.rfind("idx,copy,reverse\n", 0) == 0);
    CHECK(csv.find("\n0,0.8,0.2\n") != std::string::npos);
    CHECK(csv.find("\n5,0.7,0.3\n") != std::string::npos);

    TrajectoryLog bad = log;
    bad.rows.push_back({5, {0.5, 0.5}, {}, {}});
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("train config validation rejects bad settings") {
    TrainConfig config = tiny_train_config();
    config.total_steps = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = tiny_train_config();
    config.scorer_interval = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = tiny_train_config();
    config.mc_samples = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = tiny_train_config();
    config.initial_temperature.tau = 0.25;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
