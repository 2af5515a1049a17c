#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uatlab/uncertainty.hpp"

using namespace uatlab;

namespace {

// Hand-built trace from explicit distribution rows; reference ends at EOS.
TeacherForcedTrace make_trace(std::vector<std::vector<double>> rows, bool eos_terminated = true) {
    TeacherForcedTrace trace;
    trace.length = rows.size();
    trace.distributions = std::move(rows);
    for (const auto& row : trace.distributions) {
        const auto it = std::max_element(row.begin(), row.end());
        trace.argmax_indices.push_back(static_cast<int>(it - row.begin()));
        trace.argmax_probs.push_back(*it);
        trace.reference_indices.push_back(0);
    }
    if (eos_terminated) {
        trace.reference_indices.back() = Vocabulary::kEos;
    }
    return trace;
}

TeacherForcedTrace trace_with_argmax(std::vector<double> argmax_probs) {
    // two-way rows realizing the requested argmax probabilities
    std::vector<std::vector<double>> rows;
    for (double p : argmax_probs) {
        rows.push_back(p >= 0.5 ? std::vector<double>{p, 1.0 - p}
                                : std::vector<double>{1.0 - p, p});
    }
    TeacherForcedTrace trace = make_trace(std::move(rows));
    trace.argmax_probs = std::move(argmax_probs);  // exact values, no float drift
    return trace;
}

ModelConfig tiny_config(std::size_t vocab) {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.dropout_rate = 0.2;
    cfg.max_seq_len = 10;
    cfg.vocab_size = vocab;
    return cfg;
}

Batch one_pair_batch(const SentencePair& pair) {
    Batch batch;
    batch.corpus_name = "t";
    batch.rows = 1;
    batch.source_cols = pair.source.size();
    batch.target_cols = pair.target.size();
    batch.source = pair.source;
    batch.target = pair.target;
    batch.source_mask.assign(pair.source.size(), 1);
    batch.target_mask.assign(pair.target.size(), 1);
    return batch;
}

}  // namespace

TEST_CASE("probability-based measures match hand arithmetic") {
    TeacherForcedTrace perfect = trace_with_argmax({1.0, 1.0, 1.0});
    CHECK(measure_pretp(perfect) == 0.0);
    CHECK(measure_exptp(perfect) == 0.0);

    TeacherForcedTrace half = trace_with_argmax({0.5, 0.5});
    CHECK(measure_pretp(half) == doctest::Approx(0.75).epsilon(1e-12));

    TeacherForcedTrace spread = trace_with_argmax({0.2, 0.8});
    CHECK(measure_exptp(spread) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(measure_vartp(spread) == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(measure_comev(spread) == doctest::Approx(0.18).epsilon(1e-12));

    TeacherForcedTrace constant = trace_with_argmax({0.5, 0.5, 0.5});
    CHECK(measure_vartp(constant) == 0.0);
    CHECK(measure_comev(constant) == 0.0);

    TeacherForcedTrace single = trace_with_argmax({0.7});
    CHECK(measure_vartp(single) == 0.0);            // one sample has no variance
    CHECK(measure_pretp(single) == measure_exptp(single));  // T=1 identity

    // uniform rows over V=4: argmax probability 0.25 everywhere
    TeacherForcedTrace uniform = make_trace({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
    CHECK(measure_exptp(uniform) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("entropy measures match the high-precision oracle") {
    TeacherForcedTrace onehot = make_trace({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
    CHECK(measure_entsent(onehot) == 0.0);
    CHECK(measure_enteos(onehot) == 0.0);

    TeacherForcedTrace uniform4 = make_trace({{0.25, 0.25, 0.25, 0.25}});
    CHECK(measure_entsent(uniform4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // oracle: -(0.7 ln 0.7 + 3 * 0.1 ln 0.1)
    const double expected = -(0.7 * std::log(0.7) + 3 * 0.1 * std::log(0.1));
    TeacherForcedTrace skew = make_trace({{0.7, 0.1, 0.1, 0.1}});
    CHECK(measure_entsent(skew) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(measure_entsent(skew) == doctest::Approx(0.940448).epsilon(1e-6));

    TeacherForcedTrace uniform2 = make_trace({{0.5, 0.5}});
    CHECK(measure_enteos(uniform2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const double eos_expected = -(0.9 * std::log(0.9) + 2 * 0.05 * std::log(0.05));
    TeacherForcedTrace eos = make_trace({{0.9, 0.05, 0.05}});
    CHECK(measure_enteos(eos) == doctest::Approx(eos_expected).epsilon(1e-12));
    CHECK(measure_enteos(eos) == doctest::Approx(0.394398).epsilon(1e-6));
}

TEST_CASE("entropy measures enforce their contracts") {
    TeacherForcedTrace bad = make_trace({{0.5, 0.4}});  // sums to 0.9
    CHECK_THROWS_AS(measure_entsent(bad), ContractError);

    TeacherForcedTrace no_eos = make_trace({{0.5, 0.5}}, /*eos_terminated=*/false);
    CHECK_THROWS_AS(measure_enteos(no_eos), ContractError);
}

TEST_CASE("measure bounds hold over 1000 random traces") {
    RngStream rng(123, 7);
    const std::size_t vocab = 6;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t t_len = 1 + rng.next_below(5);
        std::vector<std::vector<double>> rows(t_len);
        for (auto& row : rows) {
            row.resize(vocab);
            double sum = 0.0;
            for (auto& p : row) {
                p = -std::log(1.0 - rng.next_unit());
                sum += p;
            }
            for (auto& p : row) {
                p /= sum;
            }
        }
        TeacherForcedTrace trace = make_trace(std::move(rows));
        const double pretp = measure_pretp(trace);
        const double exptp = measure_exptp(trace);
        const double vartp = measure_vartp(trace);
        const double comev = measure_comev(trace);
        const double entsent = measure_entsent(trace);
        const double enteos = measure_enteos(trace);
        CHECK(pretp >= 0.0);
        CHECK(pretp < 1.0);
        CHECK(exptp >= 0.0);
        CHECK(exptp <= 1.0);
        CHECK(vartp >= 0.0);
        CHECK(vartp <= 0.25);
        CHECK(comev >= 0.0);
        CHECK(entsent >= 0.0);
        CHECK(entsent <= std::log(static_cast<double>(vocab)) + 1e-12);
        CHECK(enteos >= 0.0);
        CHECK(enteos <= std::log(static_cast<double>(vocab)) + 1e-12);
        if (trace.length == 1) {
            CHECK(pretp == doctest::Approx(exptp).epsilon(1e-12));
        }
    }
}

TEST_CASE("entropy reaches ln V exactly on uniform rows only") {
    TeacherForcedTrace uniform = make_trace({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
    CHECK(measure_entsent(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    TeacherForcedTrace tilted = make_trace({{0.26, 0.25, 0.25, 0.24}});
    CHECK(measure_entsent(tilted) < std::log(4.0) - 1e-9);
}

TEST_CASE("trace-set rewards are permutation invariant") {
    std::vector<TeacherForcedTrace> traces;
    traces.push_back(trace_with_argmax({0.4, 0.9}));
    traces.push_back(trace_with_argmax({0.7, 0.2}));
    traces.push_back(trace_with_argmax({0.55, 0.6}));
    const double forward = trace_set_reward(traces, MeasureKind::kPreTP);
    std::reverse(traces.begin(), traces.end());
    CHECK(trace_set_reward(traces, MeasureKind::kPreTP) == doctest::Approx(forward).epsilon(1e-15));
}

TEST_CASE("mc traces collapse without dropout and derive per-pass streams") {
    ModelConfig cfg = tiny_config(9);
    cfg.dropout_rate = 0.0;
    RngStream init(3, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    SentencePair pair{{4, 5, 6}, {6, 5}};

    RngStream rng(10, RngStream::kReward);
    const auto traces = mc_sample_traces(params, pair, 5, rng);
    REQUIRE(traces.size() == 5);
    for (const auto& trace : traces) {
        CHECK(trace.distributions == traces[0].distributions);
    }

    // with dropout, pass k reproduces teacher_forced_trace under substream(k)
    ModelConfig wet = tiny_config(9);
    RngStream init2(3, RngStream::kModelInit);
    ModelParameters params2 = init_params(wet, init2);
    RngStream rng2(10, RngStream::kReward);
    const auto sampled = mc_sample_traces(params2, pair, 3, rng2);
    for (std::size_t k = 0; k < 3; ++k) {
        RngStream pass = rng2.substream(k);
        TeacherForcedTrace direct = teacher_forced_trace(params2, pair, true, pass);
        CHECK(sampled[k].distributions == direct.distributions);
    }
    CHECK(sampled[0].distributions != sampled[1].distributions);

    CHECK_THROWS_AS(mc_sample_traces(params, pair, 0, rng), ContractError);
}

TEST_CASE("corpus reward: stub entropy, K-invariance, and the recomputation oracle") {
    ModelConfig cfg = tiny_config(9);
    cfg.dropout_rate = 0.0;
    ModelParameters stub = ModelParameters::structured(cfg);  // all-zero -> uniform rows
    Batch batch = one_pair_batch({{4, 5}, {5, 4, 6}});

    RngStream rng(1, RngStream::kReward);
    const double lnv = std::log(9.0);
    CHECK(corpus_reward(stub, batch, MeasureKind::kEntSent, 3, rng) ==
          doctest::Approx(lnv).epsilon(1e-12));

    // dropout 0: reward independent of K and rng
    RngStream r1(1, RngStream::kReward);
    RngStream r2(999, 555);
    const double k1 = corpus_reward(stub, batch, MeasureKind::kPreTP, 1, r1);
    const double k7 = corpus_reward(stub, batch, MeasureKind::kPreTP, 7, r2);
    CHECK(k1 == doctest::Approx(k7).epsilon(1e-15));

    // K=4 equals the explicit mean over the same derived streams
    ModelConfig wet = tiny_config(9);
    RngStream init(5, RngStream::kModelInit);
    ModelParameters params = init_params(wet, init);
    RngStream reward_rng(77, RngStream::kReward);
    const double reward = corpus_reward(params, batch, MeasureKind::kEntSent, 4, reward_rng);

    RngStream manual_rng(77, RngStream::kReward);
    RngStream sentence = manual_rng.substream(0);
    double manual = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        RngStream pass = sentence.substream(k);
        manual += measure_entsent(teacher_forced_trace(params, batch.pair(0), true, pass));
    }
    manual /= 4.0;
    CHECK(reward == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("measure debug dump emits one row per sentence per measure") {
    ModelConfig cfg = tiny_config(9);
    RngStream init(2, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    Batch batch = one_pair_batch({{4, 5}, {5, 4}});

    std::ostringstream out;
    RngStream rng(4, RngStream::kReward);
    write_measure_debug_csv(out, params, batch, 2, rng);
    const std::string text = out.str();
    CHECK(text.rfind("sentence_id,measure,value\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : text) {
        lines += c == '\n' ? 1 : 0;
    }
    CHECK(lines == 1 + 6);  // header + six measures for the single sentence
    CHECK(text.find("EntEOS") != std::string::npos);
}

TEST_CASE("measure names round trip") {
    for (MeasureKind kind : {MeasureKind::kPreTP, MeasureKind::kExpTP, MeasureKind::kVarTP,
                             MeasureKind::kComEV, MeasureKind::kEntSent, MeasureKind::kEntEOS}) {
        CHECK(parse_measure(measure_name(kind)) == kind);
    }
    CHECK_THROWS_AS(parse_measure("Entropy"), ConfigError);
}
