#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uatlab/corpus.hpp"
#include "uatlab/graph.hpp"

namespace uatlab {

// Micro encoder-decoder with pre-norm residual blocks, sinusoidal positions
// and a shared token embedding. Sized for CPU-minutes training runs.
struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_layers = 2;  // encoder layers == decoder layers
    std::size_t n_heads = 2;
    std::size_t d_ff = 128;
    double dropout_rate = 0.1;
    std::size_t max_seq_len = 16;
    std::size_t vocab_size = 0;

    std::size_t head_dim() const { return d_model / n_heads; }
    void validate() const;
};

// Named trainable tensors in a fixed registration order; the order defines
// the flattening layout used by gradients and checkpoints.
class ModelParameters {
public:
    ModelParameters() = default;

    // Builds the full named-tensor layout for a config, all zeros.
    static ModelParameters structured(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }

    Tensor& tensor(const std::string& name);
    const Tensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>>& items() noexcept { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const noexcept { return items_; }

    std::size_t total_parameters() const;
    void zero_grads() const;
    void drop_grads() const;

    // Sinusoidal position table (max_seq_len x d_model); not trainable, not
    // part of the flattened vector or the checkpoint.
    const Tensor& positional() const noexcept { return positional_; }

private:
    ModelConfig config_;
    std::vector<std::pair<std::string, Tensor>> items_;
    Tensor positional_;
};

ModelParameters init_params(const ModelConfig& config, RngStream& rng);

// Per-position predictive state for one sentence pair under teacher forcing.
// Row t conditions on the gold prefix; the final reference index is EOS.
struct TeacherForcedTrace {
    std::size_t length = 0;                          // target positions incl. terminal EOS
    std::vector<std::vector<double>> distributions;  // length rows, vocab_size entries each
    std::vector<int> argmax_indices;
    std::vector<double> argmax_probs;
    std::vector<int> reference_indices;
};

TeacherForcedTrace teacher_forced_trace(const ModelParameters& params, const SentencePair& pair,
                                        bool dropout_active, RngStream& rng);

struct LossGraph {
    Graph graph;
    NodeId output = -1;
    double value = 0.0;
};

// Summed token negative log-likelihood over all pairs and positions of a
// batch (padding excluded). Call graph.backward(output) to populate grads.
LossGraph nll_loss(const ModelParameters& params, const Batch& batch, RngStream& rng,
                   bool dropout_active = true);

// Deterministic concatenation in registration order.
std::vector<double> flatten_gradients(const ModelParameters& params);
std::vector<double> flatten_values(const ModelParameters& params);
void assign_values(ModelParameters& params, const std::vector<double>& flat);

// Argmax decoding until EOS or max_len; ties break toward the lowest token
// index; dropout disabled.
std::vector<int> greedy_decode(const ModelParameters& params, const std::vector<int>& source,
                               std::size_t max_len);

// Named-tensor binary checkpoint with a plain-text header; see README for
// the exact layout.
void save_checkpoint(const ModelParameters& params, const std::string& path);
ModelParameters load_checkpoint(const std::string& path);

}  // namespace uatlab
