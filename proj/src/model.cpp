#include "uatlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uatlab {

void ModelConfig::validate() const {
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0) {
        throw ConfigError("ModelConfig: all dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("ModelConfig: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("ModelConfig: dropout_rate must lie in [0,1)");
    }
    if (max_seq_len < 2) {
        throw ConfigError("ModelConfig: max_seq_len must be >= 2");
    }
    if (vocab_size < Vocabulary::kReservedCount + 1) {
        throw ConfigError("ModelConfig: vocab_size must cover the reserved tokens");
    }
}

namespace {

Tensor sinusoidal_table(const ModelConfig& config) {
    Tensor table({config.max_seq_len, config.d_model});
    for (std::size_t t = 0; t < config.max_seq_len; ++t) {
        for (std::size_t i = 0; i < config.d_model; i += 2) {
            const double angle = static_cast<double>(t) /
                                 std::pow(10000.0, static_cast<double>(i) /
                                                       static_cast<double>(config.d_model));
            table.at(t, i) = std::sin(angle);
            if (i + 1 < config.d_model) {
                table.at(t, i + 1) = std::cos(angle);
            }
        }
    }
    return table;
}

void add_attention_tensors(ModelParameters& p, const std::string& prefix, std::size_t d) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        p.items().emplace_back(prefix + "." + w, Tensor({d, d}));
    }
    // no key bias: it shifts every score in a row equally, so softmax ignores it
    for (const char* b : {"bq", "bv", "bo"}) {
        p.items().emplace_back(prefix + "." + b, Tensor({d}));
    }
}

void add_layer_norm_tensors(ModelParameters& p, const std::string& prefix, std::size_t d) {
    p.items().emplace_back(prefix + ".g", Tensor({d}));
    p.items().emplace_back(prefix + ".b", Tensor({d}));
}

void add_ffn_tensors(ModelParameters& p, const std::string& prefix, std::size_t d, std::size_t ff) {
    p.items().emplace_back(prefix + ".w1", Tensor({d, ff}));
    p.items().emplace_back(prefix + ".b1", Tensor({ff}));
    p.items().emplace_back(prefix + ".w2", Tensor({ff, d}));
    p.items().emplace_back(prefix + ".b2", Tensor({d}));
}

}  // namespace

ModelParameters ModelParameters::structured(const ModelConfig& config) {
    config.validate();
    ModelParameters p;
    p.config_ = config;
    const std::size_t d = config.d_model;
    const std::size_t ff = config.d_ff;
    const std::size_t v = config.vocab_size;

    p.items_.emplace_back("embed", Tensor({v, d}));
    for (std::size_t i = 0; i < config.n_layers; ++i) {
        const std::string layer = "enc." + std::to_string(i);
        add_layer_norm_tensors(p, layer + ".ln1", d);
        add_attention_tensors(p, layer + ".attn", d);
        add_layer_norm_tensors(p, layer + ".ln2", d);
        add_ffn_tensors(p, layer + ".ffn", d, ff);
    }
    add_layer_norm_tensors(p, "enc.ln", d);
    for (std::size_t i = 0; i < config.n_layers; ++i) {
        const std::string layer = "dec." + std::to_string(i);
        add_layer_norm_tensors(p, layer + ".ln1", d);
        add_attention_tensors(p, layer + ".self", d);
        add_layer_norm_tensors(p, layer + ".ln2", d);
        add_attention_tensors(p, layer + ".cross", d);
        add_layer_norm_tensors(p, layer + ".ln3", d);
        add_ffn_tensors(p, layer + ".ffn", d, ff);
    }
    add_layer_norm_tensors(p, "dec.ln", d);
    p.items_.emplace_back("out.w", Tensor({d, v}));
    p.items_.emplace_back("out.b", Tensor({v}));

    for (auto& [name, tensor] : p.items_) {
        tensor.set_requires_grad(true);
    }
    p.positional_ = sinusoidal_table(config);
    return p;
}

Tensor& ModelParameters::tensor(const std::string& name) {
    for (auto& [key, value] : items_) {
        if (key == name) {
            return value;
        }
    }
    throw ContractError("ModelParameters: no tensor named '" + name + "'");
}

const Tensor& ModelParameters::tensor(const std::string& name) const {
    for (const auto& [key, value] : items_) {
        if (key == name) {
            return value;
        }
    }
    throw ContractError("ModelParameters: no tensor named '" + name + "'");
}

bool ModelParameters::has_tensor(const std::string& name) const {
    for (const auto& [key, value] : items_) {
        if (key == name) {
            return true;
        }
    }
    return false;
}

std::size_t ModelParameters::total_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, tensor] : items_) {
        n += tensor.size();
    }
    return n;
}

void ModelParameters::zero_grads() const {
    for (const auto& [name, tensor] : items_) {
        tensor.zero_grad();
    }
}

void ModelParameters::drop_grads() const {
    for (const auto& [name, tensor] : items_) {
        tensor.drop_grad();
    }
}

ModelParameters init_params(const ModelConfig& config, RngStream& rng) {
    ModelParameters p = ModelParameters::structured(config);
    for (auto& [name, tensor] : p.items()) {
        const bool is_gain = name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0;
        const bool is_bias = !is_gain && (name.find(".b") != std::string::npos);
        if (is_gain) {
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                tensor.data()[i] = 1.0;
            }
        } else if (is_bias || tensor.rank() == 1) {
            // biases start at zero
        } else {
            const double fan_in = static_cast<double>(tensor.shape()[0]);
            const double fan_out = static_cast<double>(tensor.shape()[1]);
            const double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                tensor.data()[i] = rng.next_gaussian() * std_dev;
            }
        }
    }
    return p;
}

// ---------------------------------------------------------------- forward

namespace {

struct ForwardContext {
    Graph& g;
    const ModelParameters& p;
    bool dropout_active;
    RngStream& rng;

    NodeId weight(const std::string& name) { return g.leaf(p.tensor(name)); }

    NodeId drop(NodeId x) {
        const double rate = p.config().dropout_rate;
        return dropout_active && rate > 0.0 ? g.dropout(x, rate, rng) : x;
    }

    NodeId norm(const std::string& prefix, NodeId x) {
        return g.layer_norm(x, weight(prefix + ".g"), weight(prefix + ".b"));
    }

    NodeId linear(NodeId x, const std::string& w, const std::string& b) {
        return g.add_row(g.matmul(x, weight(w)), weight(b));
    }
};

NodeId embed_tokens(ForwardContext& ctx, const std::vector<int>& tokens) {
    const ModelConfig& cfg = ctx.p.config();
    Graph& g = ctx.g;
    NodeId e = g.rows_select(g.leaf(ctx.p.tensor("embed")), tokens);
    e = g.scale(e, std::sqrt(static_cast<double>(cfg.d_model)));
    std::vector<int> positions(tokens.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = static_cast<int>(i);
    }
    e = g.add(e, g.rows_select(g.leaf(ctx.p.positional()), positions));
    return ctx.drop(e);
}

NodeId attention(ForwardContext& ctx, const std::string& prefix, NodeId query_in, NodeId kv_in,
                 bool causal) {
    const ModelConfig& cfg = ctx.p.config();
    Graph& g = ctx.g;
    const std::size_t dh = cfg.head_dim();

    const NodeId q = ctx.linear(query_in, prefix + ".wq", prefix + ".bq");
    const NodeId k = g.matmul(kv_in, ctx.weight(prefix + ".wk"));
    const NodeId v = ctx.linear(kv_in, prefix + ".wv", prefix + ".bv");

    std::vector<NodeId> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::size_t c0 = h * dh;
        const std::size_t c1 = c0 + dh;
        const NodeId qh = g.slice_cols(q, c0, c1);
        const NodeId kh = g.slice_cols(k, c0, c1);
        const NodeId vh = g.slice_cols(v, c0, c1);
        NodeId scores = g.scale(g.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        scores = causal ? g.causal_softmax(scores) : g.softmax(scores, 1);
        heads.push_back(g.matmul(scores, vh));
    }
    const NodeId merged = cfg.n_heads == 1 ? heads[0] : g.concat_cols(heads);
    return ctx.linear(merged, prefix + ".wo", prefix + ".bo");
}

NodeId feed_forward(ForwardContext& ctx, const std::string& prefix, NodeId x) {
    Graph& g = ctx.g;
    NodeId h = g.relu(ctx.linear(x, prefix + ".w1", prefix + ".b1"));
    return ctx.linear(h, prefix + ".w2", prefix + ".b2");
}

NodeId encode(ForwardContext& ctx, const std::vector<int>& source) {
    Graph& g = ctx.g;
    NodeId x = embed_tokens(ctx, source);
    for (std::size_t i = 0; i < ctx.p.config().n_layers; ++i) {
        const std::string layer = "enc." + std::to_string(i);
        {
            const NodeId h = ctx.norm(layer + ".ln1", x);
            x = g.add(x, ctx.drop(attention(ctx, layer + ".attn", h, h, false)));
        }
        x = g.add(x, ctx.drop(feed_forward(ctx, layer + ".ffn", ctx.norm(layer + ".ln2", x))));
    }
    return ctx.norm("enc.ln", x);
}

NodeId decode_logits(ForwardContext& ctx, NodeId encoder_out, const std::vector<int>& dec_input) {
    Graph& g = ctx.g;
    NodeId x = embed_tokens(ctx, dec_input);
    for (std::size_t i = 0; i < ctx.p.config().n_layers; ++i) {
        const std::string layer = "dec." + std::to_string(i);
        {
            const NodeId h = ctx.norm(layer + ".ln1", x);
            x = g.add(x, ctx.drop(attention(ctx, layer + ".self", h, h, true)));
        }
        x = g.add(x, ctx.drop(attention(ctx, layer + ".cross", ctx.norm(layer + ".ln2", x),
                                        encoder_out, false)));
        x = g.add(x, ctx.drop(feed_forward(ctx, layer + ".ffn", ctx.norm(layer + ".ln3", x))));
    }
    x = ctx.norm("dec.ln", x);
    return ctx.linear(x, "out.w", "out.b");
}

void check_pair_lengths(const ModelConfig& cfg, const SentencePair& pair) {
    if (pair.source.empty()) {
        throw InputError("model: empty source sequence");
    }
    if (pair.source.size() > cfg.max_seq_len) {
        throw InputError("model: source length " + std::to_string(pair.source.size()) +
                         " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    if (pair.target.size() + 1 > cfg.max_seq_len) {
        throw InputError("model: target length " + std::to_string(pair.target.size()) +
                         " exceeds max_seq_len " + std::to_string(cfg.max_seq_len) +
                         " (one slot is reserved for BOS)");
    }
}

std::vector<int> decoder_input_for(const std::vector<int>& target) {
    std::vector<int> input;
    input.reserve(target.size() + 1);
    input.push_back(Vocabulary::kBos);
    input.insert(input.end(), target.begin(), target.end());
    return input;
}

std::size_t argmax_lowest(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (row[j] > row[best]) {
            best = j;
        }
    }
    return best;
}

}  // namespace

TeacherForcedTrace teacher_forced_trace(const ModelParameters& params, const SentencePair& pair,
                                        bool dropout_active, RngStream& rng) {
    const ModelConfig& cfg = params.config();
    check_pair_lengths(cfg, pair);

    Graph g;
    ForwardContext ctx{g, params, dropout_active, rng};
    const NodeId enc = encode(ctx, pair.source);
    const NodeId logits = decode_logits(ctx, enc, decoder_input_for(pair.target));

    const Tensor& rows = g.value(logits);
    const std::size_t t_len = rows.shape()[0];
    const std::size_t v = rows.shape()[1];

    TeacherForcedTrace trace;
    trace.length = t_len;
    trace.distributions.resize(t_len);
    trace.argmax_indices.resize(t_len);
    trace.argmax_probs.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        std::vector<double> dist(rows.data() + t * v, rows.data() + (t + 1) * v);
        detail::softmax_inplace(dist.data(), v);
        const std::size_t best = argmax_lowest(dist.data(), v);
        trace.argmax_indices[t] = static_cast<int>(best);
        trace.argmax_probs[t] = dist[best];
        trace.distributions[t] = std::move(dist);
    }
    trace.reference_indices = pair.target;
    trace.reference_indices.push_back(Vocabulary::kEos);
    return trace;
}

LossGraph nll_loss(const ModelParameters& params, const Batch& batch, RngStream& rng,
                   bool dropout_active) {
    if (batch.size() == 0) {
        throw ContractError("nll_loss: empty batch");
    }
    LossGraph loss;
    ForwardContext ctx{loss.graph, params, dropout_active, rng};
    NodeId total = -1;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const SentencePair pair = batch.pair(r);
        check_pair_lengths(params.config(), pair);
        const NodeId enc = encode(ctx, pair.source);
        const NodeId logits = decode_logits(ctx, enc, decoder_input_for(pair.target));
        std::vector<int> refs = pair.target;
        refs.push_back(Vocabulary::kEos);
        const NodeId pair_loss = loss.graph.cross_entropy_rows(logits, refs);
        total = total < 0 ? pair_loss : loss.graph.add(total, pair_loss);
    }
    loss.output = total;
    loss.value = loss.graph.value(total).at(0);
    return loss;
}

std::vector<double> flatten_gradients(const ModelParameters& params) {
    std::vector<double> flat;
    flat.reserve(params.total_parameters());
    for (const auto& [name, tensor] : params.items()) {
        if (!tensor.has_grad()) {
            throw ContractError("flatten_gradients: tensor '" + name + "' has no gradient");
        }
        const std::vector<double>& g = tensor.grad();
        flat.insert(flat.end(), g.begin(), g.end());
    }
    return flat;
}

std::vector<double> flatten_values(const ModelParameters& params) {
    std::vector<double> flat;
    flat.reserve(params.total_parameters());
    for (const auto& [name, tensor] : params.items()) {
        flat.insert(flat.end(), tensor.values().begin(), tensor.values().end());
    }
    return flat;
}

void assign_values(ModelParameters& params, const std::vector<double>& flat) {
    if (flat.size() != params.total_parameters()) {
        throw DimensionError("assign_values: expected " +
                             std::to_string(params.total_parameters()) + " values, got " +
                             std::to_string(flat.size()));
    }
    std::size_t offset = 0;
    for (auto& [name, tensor] : params.items()) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + tensor.size()),
                  tensor.data());
        offset += tensor.size();
    }
}

std::vector<int> greedy_decode(const ModelParameters& params, const std::vector<int>& source,
                               std::size_t max_len) {
    if (source.empty()) {
        throw ContractError("greedy_decode: empty source");
    }
    const ModelConfig& cfg = params.config();
    if (source.size() > cfg.max_seq_len) {
        throw InputError("greedy_decode: source length exceeds max_seq_len");
    }

    RngStream unused(0, 0);
    Graph g;
    ForwardContext ctx{g, params, /*dropout_active=*/false, unused};
    const NodeId enc = encode(ctx, source);

    std::vector<int> generated;
    const std::size_t cap = std::min(max_len, cfg.max_seq_len - 1);
    while (generated.size() < cap) {
        const NodeId logits = decode_logits(ctx, enc, decoder_input_for(generated));
        const Tensor& rows = g.value(logits);
        const std::size_t v = rows.shape()[1];
        const double* last = rows.data() + (rows.shape()[0] - 1) * v;
        const int next = static_cast<int>(argmax_lowest(last, v));
        if (next == Vocabulary::kEos) {
            break;
        }
        generated.push_back(next);
    }
    return generated;
}

// ---------------------------------------------------------------- checkpoint

void save_checkpoint(const ModelParameters& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("save_checkpoint: cannot write '" + path + "'");
    }
    const ModelConfig& cfg = params.config();
    char buf[64];
    out << "uatlab checkpoint v1\n";
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.dropout_rate);
    out << "config " << cfg.d_model << ' ' << cfg.n_layers << ' ' << cfg.n_heads << ' ' << cfg.d_ff
        << ' ' << buf << ' ' << cfg.max_seq_len << ' ' << cfg.vocab_size << '\n';
    out << "tensors " << params.items().size() << '\n';
    std::size_t offset = 0;
    for (const auto& [name, tensor] : params.items()) {
        out << name << ' ' << tensor.rank();
        for (std::size_t e : tensor.shape()) {
            out << ' ' << e;
        }
        out << ' ' << offset << ' ' << tensor.size() << '\n';
        offset += tensor.size();
    }
    out << "data\n";
    for (const auto& [name, tensor] : params.items()) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) {
        throw IoError("save_checkpoint: short write to '" + path + "'");
    }
}

ModelParameters load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_checkpoint: cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != "uatlab checkpoint v1") {
        throw InputError("load_checkpoint: '" + path + "' is not a v1 checkpoint");
    }

    ModelConfig cfg;
    std::string tag;
    if (!std::getline(in, line)) {
        throw InputError("load_checkpoint: truncated header");
    }
    {
        std::istringstream fields(line);
        fields >> tag >> cfg.d_model >> cfg.n_layers >> cfg.n_heads >> cfg.d_ff >>
            cfg.dropout_rate >> cfg.max_seq_len >> cfg.vocab_size;
        if (!fields || tag != "config") {
            throw InputError("load_checkpoint: malformed config line");
        }
    }

    std::size_t tensor_count = 0;
    if (!std::getline(in, line)) {
        throw InputError("load_checkpoint: truncated header");
    }
    {
        std::istringstream fields(line);
        fields >> tag >> tensor_count;
        if (!fields || tag != "tensors") {
            throw InputError("load_checkpoint: malformed tensor-count line");
        }
    }

    ModelParameters params = ModelParameters::structured(cfg);
    if (tensor_count != params.items().size()) {
        throw InputError("load_checkpoint: tensor count mismatch");
    }

    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset;
        std::size_t count;
    };
    std::vector<Entry> entries(tensor_count);
    for (auto& entry : entries) {
        if (!std::getline(in, line)) {
            throw InputError("load_checkpoint: truncated tensor table");
        }
        std::istringstream fields(line);
        std::size_t rank = 0;
        fields >> entry.name >> rank;
        entry.shape.resize(rank);
        for (auto& e : entry.shape) {
            fields >> e;
        }
        fields >> entry.offset >> entry.count;
        if (!fields) {
            throw InputError("load_checkpoint: malformed tensor line for '" + entry.name + "'");
        }
    }
    if (!std::getline(in, line) || line != "data") {
        throw InputError("load_checkpoint: missing data marker");
    }

    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor& tensor = params.items()[i].second;
        const Entry& entry = entries[i];
        if (entry.name != params.items()[i].first || entry.shape != tensor.shape()) {
            throw InputError("load_checkpoint: tensor '" + entry.name +
                             "' does not match the layout for this config");
        }
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(tensor.size() * sizeof(double)));
        if (!in) {
            throw InputError("load_checkpoint: truncated data for '" + entry.name + "'");
        }
    }
    return params;
}

}  // namespace uatlab
