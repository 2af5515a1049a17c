#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "uatlab/gradcheck.hpp"
#include "uatlab/model.hpp"
#include "uatlab/optim.hpp"

using namespace uatlab;

namespace {

ModelConfig tiny_config(std::size_t vocab) {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.dropout_rate = 0.1;
    cfg.max_seq_len = 12;
    cfg.vocab_size = vocab;
    return cfg;
}

Batch batch_from_pairs(const std::vector<SentencePair>& pairs, const std::string& name = "test") {
    Batch batch;
    batch.corpus_name = name;
    batch.rows = pairs.size();
    for (const auto& p : pairs) {
        batch.source_cols = std::max(batch.source_cols, p.source.size());
        batch.target_cols = std::max(batch.target_cols, p.target.size());
    }
    batch.source.assign(batch.rows * batch.source_cols, Vocabulary::kPad);
    batch.target.assign(batch.rows * batch.target_cols, Vocabulary::kPad);
    batch.source_mask.assign(batch.rows * batch.source_cols, 0);
    batch.target_mask.assign(batch.rows * batch.target_cols, 0);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        for (std::size_t j = 0; j < pairs[r].source.size(); ++j) {
            batch.source[r * batch.source_cols + j] = pairs[r].source[j];
            batch.source_mask[r * batch.source_cols + j] = 1;
        }
        for (std::size_t j = 0; j < pairs[r].target.size(); ++j) {
            batch.target[r * batch.target_cols + j] = pairs[r].target[j];
            batch.target_mask[r * batch.target_cols + j] = 1;
        }
    }
    return batch;
}

ModelParameters zero_params(const ModelConfig& cfg) { return ModelParameters::structured(cfg); }

}  // namespace

TEST_CASE("init_params is seed-deterministic") {
    ModelConfig cfg = tiny_config(10);
    RngStream r1(11, RngStream::kModelInit);
    RngStream r2(11, RngStream::kModelInit);
    RngStream r3(12, RngStream::kModelInit);
    ModelParameters a = init_params(cfg, r1);
    ModelParameters b = init_params(cfg, r2);
    ModelParameters c = init_params(cfg, r3);
    CHECK(flatten_values(a) == flatten_values(b));
    CHECK(flatten_values(a) != flatten_values(c));
}

TEST_CASE("parameter count matches the closed-form formula") {
    // d=64, L=2, heads=2, ff=128, V=32: counted by hand from the layout
    ModelConfig cfg;
    cfg.d_model = 64;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 128;
    cfg.vocab_size = 32;
    cfg.max_seq_len = 16;
    RngStream rng(1, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, rng);

    const std::size_t d = 64, L = 2, ff = 128, v = 32;
    const std::size_t attn = 4 * d * d + 3 * d;  // q/k/v/o weights, biases on q/v/o only
    const std::size_t ln = 2 * d;
    const std::size_t ffn = d * ff + ff + ff * d + d;
    const std::size_t expected = v * d                        // embedding
                                 + L * (attn + 2 * ln + ffn)  // encoder layers
                                 + ln                         // final encoder norm
                                 + L * (2 * attn + 3 * ln + ffn)  // decoder layers
                                 + ln                         // final decoder norm
                                 + d * v + v;                 // output projection
    CHECK(params.total_parameters() == expected);
}

TEST_CASE("teacher-forced trace is deterministic without dropout") {
    ModelConfig cfg = tiny_config(9);
    RngStream init(5, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    SentencePair pair{{4, 5, 6}, {6, 5, 4}};

    RngStream r1(1, RngStream::kDropout);
    RngStream r2(999, RngStream::kDropout);
    TeacherForcedTrace t1 = teacher_forced_trace(params, pair, false, r1);
    TeacherForcedTrace t2 = teacher_forced_trace(params, pair, false, r2);
    CHECK(t1.distributions == t2.distributions);  // rng must not matter with dropout off
    CHECK(t1.argmax_indices == t2.argmax_indices);

    CHECK(t1.length == pair.target.size() + 1);
    CHECK(t1.reference_indices.back() == Vocabulary::kEos);
    for (std::size_t t = 0; t < t1.length; ++t) {
        double sum = 0.0;
        for (double p : t1.distributions[t]) {
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(t1.argmax_probs[t] ==
              *std::max_element(t1.distributions[t].begin(), t1.distributions[t].end()));
    }
}

TEST_CASE("zero-parameter stub produces uniform rows") {
    ModelConfig cfg = tiny_config(9);
    ModelParameters params = zero_params(cfg);
    RngStream rng(1, RngStream::kDropout);
    TeacherForcedTrace trace = teacher_forced_trace(params, {{4, 5}, {5, 4, 6}}, false, rng);
    for (const auto& row : trace.distributions) {
        for (double p : row) {
            CHECK(p == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("trace rows equal independent per-position recomputation") {
    ModelConfig cfg = tiny_config(11);
    RngStream init(3, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    SentencePair pair{{4, 7, 9, 5}, {5, 9, 7, 4}};
    RngStream rng(1, RngStream::kDropout);
    TeacherForcedTrace full = teacher_forced_trace(params, pair, false, rng);

    for (std::size_t t = 0; t < full.length; ++t) {
        SentencePair truncated{pair.source,
                               std::vector<int>(pair.target.begin(),
                                                pair.target.begin() + static_cast<long>(t))};
        TeacherForcedTrace partial = teacher_forced_trace(params, truncated, false, rng);
        REQUIRE(partial.length == t + 1);
        for (std::size_t v = 0; v < full.distributions[t].size(); ++v) {
            CHECK(full.distributions[t][v] ==
                  doctest::Approx(partial.distributions[t][v]).epsilon(1e-12));
        }
    }
}

TEST_CASE("trace rejects over-length sequences") {
    ModelConfig cfg = tiny_config(9);
    ModelParameters params = zero_params(cfg);
    RngStream rng(1, RngStream::kDropout);
    std::vector<int> too_long(cfg.max_seq_len + 1, 4);
    CHECK_THROWS_AS(teacher_forced_trace(params, {too_long, {4}}, false, rng), InputError);
    std::vector<int> long_target(cfg.max_seq_len, 4);
    CHECK_THROWS_AS(teacher_forced_trace(params, {{4}, long_target}, false, rng), InputError);
    CHECK_THROWS_AS(teacher_forced_trace(params, {{}, {4}}, false, rng), InputError);
}

TEST_CASE("uniform stub loss equals T * ln V and losses stay nonnegative") {
    ModelConfig cfg = tiny_config(9);
    ModelParameters params = zero_params(cfg);
    RngStream rng(1, RngStream::kDropout);
    Batch batch = batch_from_pairs({{{4, 5, 6}, {6, 5}}});  // T = 3 including EOS
    LossGraph loss = nll_loss(params, batch, rng, false);
    CHECK(loss.value == doctest::Approx(3.0 * std::log(9.0)).epsilon(1e-12));

    RngStream init(2, RngStream::kModelInit);
    ModelParameters trained = init_params(cfg, init);
    LossGraph loss2 = nll_loss(trained, batch, rng, false);
    CHECK(loss2.value >= 0.0);
}

TEST_CASE("batch loss is the sum of single-pair losses with dropout off") {
    ModelConfig cfg = tiny_config(10);
    RngStream init(8, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    SentencePair p1{{4, 5}, {5, 4}};
    SentencePair p2{{6, 7, 8}, {8, 7, 6}};

    RngStream rng(1, RngStream::kDropout);
    const double joint = nll_loss(params, batch_from_pairs({p1, p2}), rng, false).value;
    const double solo1 = nll_loss(params, batch_from_pairs({p1}), rng, false).value;
    const double solo2 = nll_loss(params, batch_from_pairs({p2}), rng, false).value;
    CHECK(joint == doctest::Approx(solo1 + solo2).epsilon(1e-9));

    Batch empty;
    CHECK_THROWS_AS(nll_loss(params, empty, rng, false), ContractError);
}

TEST_CASE("full-model gradient matches finite differences on a tiny config") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.dropout_rate = 0.0;
    cfg.max_seq_len = 8;
    cfg.vocab_size = 9;
    RngStream init(4, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);
    Batch batch = batch_from_pairs({{{4, 5, 6}, {6, 5}}, {{7, 8}, {8, 7, 4}}});

    std::vector<Tensor*> tensors;
    for (auto& [name, tensor] : params.items()) {
        tensors.push_back(&tensor);
    }
    auto loss_fn = [&](bool with_grads) {
        RngStream rng(1, RngStream::kDropout);
        LossGraph loss = nll_loss(params, batch, rng, false);
        if (with_grads) {
            loss.graph.backward(loss.output);
        }
        return loss.value;
    };
    params.zero_grads();
    const double err = finite_difference_check(loss_fn, tensors, 1e-5);
    CHECK(err < 1e-3);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    ModelParameters params;
    params.items().emplace_back("w", Tensor({3}, {1.0, -2.0, 0.5}));
    params.items()[0].second.set_requires_grad(true);
    params.items()[0].second.ensure_grad();  // zeros
    OptimizerState state = OptimizerState::create(params);
    adam_step(params, state, 0.1);
    CHECK(params.items()[0].second.values() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam first step moves a scalar by about lr") {
    // bias-corrected first step: m_hat = g, v_hat = g^2, so delta = lr/(1+eps)
    ModelParameters params;
    params.items().emplace_back("w", Tensor({1}, {0.7}));
    Tensor& w = params.items()[0].second;
    w.set_requires_grad(true);
    w.ensure_grad()[0] = 1.0;
    OptimizerState state = OptimizerState::create(params);
    adam_step(params, state, 0.1);
    CHECK(w.values()[0] == doctest::Approx(0.7 - 0.1).epsilon(1e-7));
    CHECK(state.step == 1);
}

TEST_CASE("adam trajectories are reproducible and reject non-finite grads") {
    auto run = [] {
        ModelParameters params;
        params.items().emplace_back("w", Tensor({2}, {1.0, -1.0}));
        Tensor& w = params.items()[0].second;
        w.set_requires_grad(true);
        OptimizerState state = OptimizerState::create(params);
        for (int i = 0; i < 5; ++i) {
            w.ensure_grad();
            w.grad()[0] = 0.3 * (i + 1);
            w.grad()[1] = -0.1;
            adam_step(params, state, 0.01);
        }
        return w.values();
    };
    CHECK(run() == run());

    ModelParameters params;
    params.items().emplace_back("bad", Tensor({1}, {0.0}));
    Tensor& w = params.items()[0].second;
    w.set_requires_grad(true);
    w.ensure_grad()[0] = std::nan("");
    OptimizerState state = OptimizerState::create(params);
    try {
        adam_step(params, state, 0.1);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
}

TEST_CASE("learning-rate schedule warms up then decays") {
    CHECK(lr_at(1, 1.0, 100) == doctest::Approx(0.01));
    CHECK(lr_at(100, 1.0, 100) == doctest::Approx(1.0));
    CHECK(lr_at(400, 1.0, 100) == doctest::Approx(0.5));  // sqrt(100/400)
    CHECK_THROWS_AS(lr_at(0, 1.0, 100), ContractError);
}

TEST_CASE("gradient flattening order, norm, and round trip") {
    ModelConfig cfg = tiny_config(9);
    ModelParameters params = zero_params(cfg);
    params.zero_grads();
    for (auto& [name, tensor] : params.items()) {
        tensor.ensure_grad();
    }
    std::vector<double> flat = flatten_gradients(params);
    CHECK(flat.size() == params.total_parameters());
    for (double v : flat) {
        CHECK(v == 0.0);
    }

    // probe: a marked gradient lands at its registration offset
    std::size_t offset = 0;
    for (auto& [name, tensor] : params.items()) {
        if (name == "enc.0.attn.wq") {
            break;
        }
        offset += tensor.size();
    }
    params.tensor("enc.0.attn.wq").grad()[3] = 42.0;
    flat = flatten_gradients(params);
    CHECK(flat[offset + 3] == 42.0);

    // norm identity against per-tensor norms
    RngStream rng(6, 1);
    double sq = 0.0;
    for (auto& [name, tensor] : params.items()) {
        for (auto& g : tensor.grad()) {
            g = rng.next_gaussian();
        }
        double tensor_sq = 0.0;
        for (double g : tensor.grad()) {
            tensor_sq += g * g;
        }
        sq += tensor_sq;
    }
    flat = flatten_gradients(params);
    double flat_sq = 0.0;
    for (double v : flat) {
        flat_sq += v * v;
    }
    CHECK(std::sqrt(flat_sq) == doctest::Approx(std::sqrt(sq)).epsilon(1e-9));

    // missing grad is a contract violation
    params.drop_grads();
    CHECK_THROWS_AS(flatten_gradients(params), ContractError);

    // value flatten/assign is an identity
    RngStream init(9, RngStream::kModelInit);
    ModelParameters filled = init_params(cfg, init);
    const std::vector<double> values = flatten_values(filled);
    ModelParameters copy = zero_params(cfg);
    assign_values(copy, values);
    CHECK(flatten_values(copy) == values);
}

TEST_CASE("greedy decode on an EOS-peaked stub is empty and deterministic") {
    ModelConfig cfg = tiny_config(9);
    ModelParameters params = zero_params(cfg);
    params.tensor("out.b").at(Vocabulary::kEos) = 10.0;
    const std::vector<int> out = greedy_decode(params, {4, 5, 6}, 8);
    CHECK(out.empty());

    RngStream init(10, RngStream::kModelInit);
    ModelParameters random = init_params(cfg, init);
    const std::vector<int> a = greedy_decode(random, {4, 5, 6}, 8);
    const std::vector<int> b = greedy_decode(random, {4, 5, 6}, 8);
    CHECK(a == b);
    CHECK(a.size() <= 8);
    for (int tok : a) {
        CHECK(tok != Vocabulary::kEos);
    }

    CHECK_THROWS_AS(greedy_decode(params, {}, 8), ContractError);
}

TEST_CASE("a micro model trained on copy reproduces its input") {
    ModelConfig cfg;
    cfg.d_model = 32;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 64;
    cfg.dropout_rate = 0.1;
    cfg.max_seq_len = 10;

    SyntheticSpec spec;
    spec.task = TaskKind::kCopy;
    spec.size = 400;
    spec.min_len = 3;
    spec.max_len = 5;
    spec.alphabet = alphabet_from_string("abcdefgh");
    spec.seed = 42;
    ParallelCorpus corpus = generate_synthetic_corpus(spec);
    CorpusCollection collection;
    collection.names = {"copy"};
    collection.corpora = {split(corpus, {0.8, 0.1, 0.1}, 1)};
    Vocabulary vocab = build_vocab(collection);
    cfg.vocab_size = vocab.size();

    RngStream init(1, RngStream::kModelInit);
    RngStream batches(1, RngStream::kBatchSampling);
    RngStream drops(1, RngStream::kDropout);
    ModelParameters params = init_params(cfg, init);
    OptimizerState state = OptimizerState::create(params);

    for (std::size_t step = 1; step <= 420; ++step) {
        Batch batch = sample_batch(collection.corpora[0].train, 8, batches, vocab);
        params.zero_grads();
        LossGraph loss = nll_loss(params, batch, drops, true);
        loss.graph.backward(loss.output);
        adam_step(params, state, lr_at(step, 3e-3, 50));
    }

    const std::vector<int> source = vocab.encode({"a", "b", "c"});
    CHECK(greedy_decode(params, source, 8) == source);
}

TEST_CASE("checkpoints round trip bit-exactly") {
    ModelConfig cfg = tiny_config(9);
    RngStream init(14, RngStream::kModelInit);
    ModelParameters params = init_params(cfg, init);

    const std::string path = "uatlab_test_ckpt.bin";
    save_checkpoint(params, path);
    ModelParameters loaded = load_checkpoint(path);
    CHECK(flatten_values(loaded) == flatten_values(params));
    CHECK(loaded.config().d_model == cfg.d_model);
    CHECK(loaded.config().vocab_size == cfg.vocab_size);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_checkpoint("missing_ckpt.bin"), IoError);
}
