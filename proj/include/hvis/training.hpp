#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hvis/checkpoint.hpp"
#include "hvis/config.hpp"
#include "hvis/critic.hpp"
#include "hvis/encoder.hpp"
#include "hvis/generator.hpp"
#include "hvis/refine.hpp"

namespace hvis::train {

// Ablation variants: each removes one component, everything else identical.
enum class Variant {
    Full,
    NoHvm,  // plain normalized-adjacency graph layers instead of the
            // factored + multiscale encoder
    NoTrn,  // recurrent-only generator, no causal conv summarizer
    NoDln,  // no hard-joint refinement stage
};

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

// The full model: encoder, adversarially trained generator and critic, and
// the optional hard-joint refiner built after stage one.
struct Pipeline {
    data::SkeletonSpec skeleton;
    cli::TrainConfig cfg;
    Variant variant = Variant::Full;
    enc::MotionEncoder encoder;
    gen::Generator generator;
    gen::Critic critic;
    dln::RefineNet refiner;
    bool has_refiner = false;
    dln::DeliberateMap map;

    static Pipeline create(const data::SkeletonSpec& skeleton, const cli::TrainConfig& cfg,
                           Variant variant, ad::Rng& rng);

    // Builds the refiner for the current map; requires map.m >= 1.
    void ensure_refiner(ad::Rng& rng);

    ad::ParamSet generator_params() const;  // encoder + generator
    ad::ParamSet critic_params() const;
    ad::ParamSet all_params() const;  // checkpoint order

    // Frozen-parameter predictions for one window, [3N x F], same root
    // alignment as the window.
    ad::TensorPtr predict_base(const data::WindowPair& w) const;
    ad::TensorPtr predict_final(const data::WindowPair& w) const;  // refined when enabled
};

// Reshapes a [3N x F] prediction (rows j*3+c) into [F x N x 3] for the
// error metrics.
ad::TensorPtr prediction_frames(const ad::TensorPtr& pred);

// Sequence-level train/validation split: the trailing share of the corpus
// becomes validation, then both sides are cut into sliding windows.
struct SplitResult {
    std::vector<data::WindowPair> train;
    std::vector<data::WindowPair> val;
    std::uint64_t split_hash = 0;
};

SplitResult split_corpus(const std::vector<data::MotionSequence>& corpus,
                         const cli::TrainConfig& cfg, int root_joint);

struct EpochRow {
    int epoch = 0;
    double generator_loss = 0;
    double critic_objective = 0;  // E D(real) - E D(fake), last batch
    double val_mpjpe = 0;         // probe over a fixed validation subset
};

struct TrainCurve {
    std::vector<EpochRow> rows;
};

// Stage one: alternating critic/generator updates with weight clipping.
// Throws TrainingError when the loss diverges.
TrainCurve adversarial_train(Pipeline& p, const SplitResult& split, ad::Rng& rng);

// Stage two: measure per-joint validation errors of the frozen stage-one
// predictor, select the worst joints, and fit the refiner to them. Returns
// empty stats when the variant disables refinement.
dln::DlnTrainStats refine_stage(Pipeline& p, const SplitResult& split, ad::Rng& rng);

// Per-horizon errors of the three predictors on the given windows.
struct EvalRow {
    std::string predictor;  // zero-velocity | base | refined
    int horizon_ms = 0;
    int horizon_frame = 0;
    double mpjpe = 0;
};

std::vector<EvalRow> evaluate(const Pipeline& p, const std::vector<data::WindowPair>& windows);

// One trained variant inside an ablation run. Every error column uses the
// configured evaluation horizons; the selected columns restrict them to the
// hard joints picked by the full model.
struct AblationEntry {
    std::string variant;
    std::vector<double> mpjpe_by_horizon;  // final predictor
    double selected_err_base = 0;   // hard joints, stage-one predictor
    double selected_err_final = 0;  // same joints, final predictor
    std::uint64_t split_hash = 0;
};

struct AblationReport {
    std::vector<int> horizons_ms;
    std::vector<AblationEntry> entries;
};

// Trains the full model plus each requested variant under one seed, config
// and split, and evaluates all of them on the shared validation windows.
AblationReport run_ablation(const data::SkeletonSpec& skeleton,
                            const std::vector<data::MotionSequence>& corpus,
                            const cli::TrainConfig& cfg, const std::vector<Variant>& variants);

// Plot-ready writers.
std::string curve_csv(const TrainCurve& curve);
std::string eval_csv(const std::vector<EvalRow>& rows);
std::string eval_table(const std::vector<EvalRow>& rows);
std::string ablation_csv(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

// Checkpoint plumbing: parameters in registration order plus config,
// skeleton, joint map and corpus fingerprint.
cli::CheckpointBundle make_bundle(const Pipeline& p, std::uint64_t corpus_hash);
Pipeline pipeline_from_bundle(const cli::CheckpointBundle& bundle);

}  // namespace hvis::train
