#include "uatlab/uncertainty.hpp"

#include <cmath>
#include <ostream>

namespace uatlab {

MeasureKind parse_measure(const std::string& name) {
    if (name == "PreTP") return MeasureKind::kPreTP;
    if (name == "ExpTP") return MeasureKind::kExpTP;
    if (name == "VarTP") return MeasureKind::kVarTP;
    if (name == "ComEV") return MeasureKind::kComEV;
    if (name == "EntSent") return MeasureKind::kEntSent;
    if (name == "EntEOS") return MeasureKind::kEntEOS;
    throw ConfigError("unknown measure '" + name +
                      "' (expected PreTP|ExpTP|VarTP|ComEV|EntSent|EntEOS)");
}

std::string measure_name(MeasureKind kind) {
    switch (kind) {
        case MeasureKind::kPreTP: return "PreTP";
        case MeasureKind::kExpTP: return "ExpTP";
        case MeasureKind::kVarTP: return "VarTP";
        case MeasureKind::kComEV: return "ComEV";
        case MeasureKind::kEntSent: return "EntSent";
        case MeasureKind::kEntEOS: return "EntEOS";
    }
    throw ContractError("measure_name: invalid enum value");
}

void RewardVector::validate() const {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("RewardVector: non-finite reward");
        }
    }
}

std::vector<TeacherForcedTrace> mc_sample_traces(const ModelParameters& params,
                                                 const SentencePair& pair, std::size_t k,
                                                 RngStream& rng) {
    if (k < 1) {
        throw ContractError("mc_sample_traces: k must be >= 1");
    }
    std::vector<TeacherForcedTrace> traces;
    traces.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        RngStream pass = rng.substream(i);
        traces.push_back(teacher_forced_trace(params, pair, /*dropout_active=*/true, pass));
    }
    return traces;
}

namespace {

void require_positions(const TeacherForcedTrace& trace) {
    if (trace.length < 1 || trace.argmax_probs.size() != trace.length) {
        throw ContractError("measure: trace has no positions");
    }
}

double mean_argmax(const TeacherForcedTrace& trace) {
    double sum = 0.0;
    for (double p : trace.argmax_probs) {
        sum += p;
    }
    return sum / static_cast<double>(trace.length);
}

double var_argmax(const TeacherForcedTrace& trace) {
    const double mean = mean_argmax(trace);
    double sq = 0.0;
    for (double p : trace.argmax_probs) {
        const double d = p - mean;
        sq += d * d;
    }
    return sq / static_cast<double>(trace.length);  // population variance
}

// Nonnegative Shannon entropy with 0 * log 0 = 0.
double row_entropy(const std::vector<double>& row) {
    double sum = 0.0;
    double entropy = 0.0;
    for (double p : row) {
        sum += p;
        if (p > 0.0) {
            entropy -= p * std::log(p);
        }
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ContractError("entropy measure: distribution row does not sum to 1");
    }
    return entropy;
}

}  // namespace

double measure_pretp(const TeacherForcedTrace& trace) {
    require_positions(trace);
    double prod = 1.0;
    for (double p : trace.argmax_probs) {
        prod *= p;
    }
    return 1.0 - prod;
}

double measure_exptp(const TeacherForcedTrace& trace) {
    require_positions(trace);
    return 1.0 - mean_argmax(trace);
}

double measure_vartp(const TeacherForcedTrace& trace) {
    require_positions(trace);
    return var_argmax(trace);
}

double measure_comev(const TeacherForcedTrace& trace) {
    require_positions(trace);
    const double mean = mean_argmax(trace);
    return var_argmax(trace) / std::max(mean, 1e-12);
}

double measure_entsent(const TeacherForcedTrace& trace) {
    require_positions(trace);
    double total = 0.0;
    for (const auto& row : trace.distributions) {
        total += row_entropy(row);
    }
    return total / static_cast<double>(trace.length);
}

double measure_enteos(const TeacherForcedTrace& trace) {
    require_positions(trace);
    if (trace.reference_indices.empty() || trace.reference_indices.back() != Vocabulary::kEos) {
        throw ContractError("measure_enteos: trace does not end at EOS");
    }
    return row_entropy(trace.distributions.back());
}

double measure(MeasureKind kind, const TeacherForcedTrace& trace) {
    switch (kind) {
        case MeasureKind::kPreTP: return measure_pretp(trace);
        case MeasureKind::kExpTP: return measure_exptp(trace);
        case MeasureKind::kVarTP: return measure_vartp(trace);
        case MeasureKind::kComEV: return measure_comev(trace);
        case MeasureKind::kEntSent: return measure_entsent(trace);
        case MeasureKind::kEntEOS: return measure_enteos(trace);
    }
    throw ContractError("measure: invalid enum value");
}

double trace_set_reward(const std::vector<TeacherForcedTrace>& traces, MeasureKind kind) {
    if (traces.empty()) {
        throw ContractError("trace_set_reward: no traces");
    }
    double sum = 0.0;
    for (const auto& trace : traces) {
        sum += measure(kind, trace);
    }
    return sum / static_cast<double>(traces.size());
}

double corpus_reward(const ModelParameters& params, const Batch& dev_batch, MeasureKind kind,
                     std::size_t k, RngStream& rng) {
    if (dev_batch.size() == 0) {
        throw ContractError("corpus_reward: empty dev batch");
    }
    double sum = 0.0;
    for (std::size_t r = 0; r < dev_batch.size(); ++r) {
        RngStream sentence_rng = rng.substream(r);
        const std::vector<TeacherForcedTrace> traces =
            mc_sample_traces(params, dev_batch.pair(r), k, sentence_rng);
        sum += trace_set_reward(traces, kind);
    }
    return sum / static_cast<double>(dev_batch.size());
}

void write_measure_debug_csv(std::ostream& out, const ModelParameters& params, const Batch& batch,
                             std::size_t k, RngStream& rng) {
    out << "sentence_id,measure,value\n";
    char buf[64];
    for (std::size_t r = 0; r < batch.size(); ++r) {
        RngStream sentence_rng = rng.substream(r);
        const std::vector<TeacherForcedTrace> traces =
            mc_sample_traces(params, batch.pair(r), k, sentence_rng);
        for (MeasureKind kind : {MeasureKind::kPreTP, MeasureKind::kExpTP, MeasureKind::kVarTP,
                                 MeasureKind::kComEV, MeasureKind::kEntSent, MeasureKind::kEntEOS}) {
            std::snprintf(buf, sizeof(buf), "%.12g", trace_set_reward(traces, kind));
            out << r << ',' << measure_name(kind) << ',' << buf << '\n';
        }
    }
}

}  // namespace uatlab
