#pragma once

#include <limits>
#include <utility>

#include "mmfuse/checkpoint.hpp"
#include "mmfuse/config.hpp"
#include "mmfuse/metrics.hpp"
#include "mmfuse/model.hpp"
#include "mmfuse/modulation.hpp"
#include "mmfuse/synthetic.hpp"

namespace mmfuse {

// A training step produced NaN/Inf; dump describes the offending batch (CLI exit 3).
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(const std::string& msg, std::string dump)
        : std::runtime_error(msg), dump_(std::move(dump)) {}
    const std::string& dump() const { return dump_; }

private:
    std::string dump_;
};

struct PipelineOut {
    Tensor logits;
    Tensor fused;        // post-attention fused features
    FusionResult fusion; // pre-attention pieces (zeta, operands, layout)
    Tensor feat_v;       // encoder outputs, the gate/probe features
    Tensor feat_a;
    double r_used = 0.0;
};

// Encoders -> fusion -> optional attention -> classifier. With training=true
// the correlation proxy state is updated (batch >= 2); otherwise last_r is
// reused and the model is left untouched.
PipelineOut pipeline_forward(Model& m, const BoundParams& bp, const Tensor& xv,
                             const Tensor& xa, const ExperimentConfig& cfg, bool training);

// Per-modality logits for the decoupled ratio: classifier applied to each
// modality's superposition share with the bias split evenly. Defined for
// summation and concatenation kinds; detached from the graph.
std::pair<Tensor, Tensor> decoupled_logits(const Model& m, const FusionResult& fr,
                                           const BoundParams& bp);

struct EvalResult {
    double top1 = 0.0;
    double map = 0.0;
    double loss = 0.0;
};

EvalResult evaluate_model(Model& m, const Dataset& ds, Dataset::Split split,
                          const ExperimentConfig& cfg);

struct TrainOutput {
    std::vector<MetricsRow> metrics;  // per-epoch train/val rows, then one test row
    std::vector<ModulationRecord> mod_records;
    std::vector<double> rho_free_series;  // aligned per step when both schemes logged
    std::vector<double> rho_dec_series;
    Checkpoint best;
    int best_epoch = 0;
    MetricsRow test_row;
    Model model;  // final (last-epoch) model
};

TrainOutput train(const ExperimentConfig& cfg);
TrainOutput train_on(const ExperimentConfig& cfg, const Dataset& ds);

std::string modulation_csv_header();
std::string modulation_csv(const std::vector<ModulationRecord>& records);

// Minimal trainer wired directly from tensor ops: encoders, inline fusion
// arithmetic, classifier. Supports the gate-free kinds (summation-fixed,
// film, concatenation) with scheme=none and simam2=false, and must reproduce
// train() bit-exactly on those configurations.
TrainOutput train_plain(const ExperimentConfig& cfg);

// Finite-difference check of the full pipeline loss against every parameter.
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    bool ok = false;
    std::vector<std::pair<std::string, double>> per_param;
};
GradCheckReport end_to_end_gradcheck(const ExperimentConfig& cfg, int batch, double step,
                                     double tolerance);

// ---- sweep ------------------------------------------------------------------

struct SweepCell {
    std::string treatment;
    std::string fusion_family;  // summation, film, concatenation
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double test_top1 = 0.0;
    double test_map = 0.0;
    double val_top1 = 0.0;
    int best_epoch = 0;
    double ratio_pearson = std::numeric_limits<double>::quiet_NaN();
    double ratio_spearman = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::string csv() const;
    std::string summary_csv() const;
    std::string table_text() const;
};

const std::vector<std::string>& sweep_treatments();
ExperimentConfig sweep_cell_config(const ExperimentConfig& base, const std::string& treatment,
                                   const std::string& fusion_family, uint64_t seed);
SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::string>& treatments,
                      const std::vector<std::string>& fusion_families,
                      const std::vector<uint64_t>& seeds, bool parallel_cells);

}  // namespace mmfuse
