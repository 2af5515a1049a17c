#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uatlab/model.hpp"

namespace uatlab {

// The six per-sentence uncertainty measures. The probability-based group
// works off the per-position argmax probabilities; the entropy-based group
// off the full predictive rows.
enum class MeasureKind { kPreTP, kExpTP, kVarTP, kComEV, kEntSent, kEntEOS };

MeasureKind parse_measure(const std::string& name);
std::string measure_name(MeasureKind kind);

// Per-corpus rewards for one scorer update.
struct RewardVector {
    std::vector<double> values;
    MeasureKind kind = MeasureKind::kEntEOS;
    std::size_t mc_samples = 0;

    void validate() const;  // finite entries only
};

// K stochastic forward passes with dropout active; pass k draws its masks
// from rng.substream(k), so the set is independent of evaluation order.
std::vector<TeacherForcedTrace> mc_sample_traces(const ModelParameters& params,
                                                 const SentencePair& pair, std::size_t k,
                                                 RngStream& rng);

double measure_pretp(const TeacherForcedTrace& trace);    // 1 - prod argmax_probs
double measure_exptp(const TeacherForcedTrace& trace);    // 1 - mean argmax_probs
double measure_vartp(const TeacherForcedTrace& trace);    // population variance
double measure_comev(const TeacherForcedTrace& trace);    // variance / mean
double measure_entsent(const TeacherForcedTrace& trace);  // mean per-position entropy
double measure_enteos(const TeacherForcedTrace& trace);   // entropy at the EOS position

double measure(MeasureKind kind, const TeacherForcedTrace& trace);

// Mean of a measure over a set of traces (the K MC samples).
double trace_set_reward(const std::vector<TeacherForcedTrace>& traces, MeasureKind kind);

// Reward for one corpus: MC-averaged measure per sentence, then averaged
// over the dev mini-batch.
double corpus_reward(const ModelParameters& params, const Batch& dev_batch, MeasureKind kind,
                     std::size_t k, RngStream& rng);

// Debug dump: one "sentence_id,measure,value" row per sentence per measure.
void write_measure_debug_csv(std::ostream& out, const ModelParameters& params, const Batch& batch,
                             std::size_t k, RngStream& rng);

}  // namespace uatlab
