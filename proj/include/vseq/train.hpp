#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vseq/detector.hpp"
#include "vseq/model.hpp"
#include "vseq/phantom.hpp"
#include "vseq/representation.hpp"

namespace vseq {

struct TrainConfig {
    double lr = 1e-5;  // reference recipe; desk_scale() overrides to 1e-4
    int batch = 16;    // even, half positive / half negative
    int epochs = 2000;
    int iters = 150;  // batches per epoch
    uint64_t seed = 0;
    bool augment = true;

    // compact schedule tuned on phantoms for laptop-class runs (tuning AUC
    // saturates around epoch 6 at this rate)
    static TrainConfig desk_scale() {
        TrainConfig c;
        c.lr = 1e-4;
        c.epochs = 8;
        c.iters = 40;
        return c;
    }

    void validate() const;
};

// one series ready for the model: patches + per-patch and per-series labels
struct SeriesData {
    PatchSequence seq;
    std::vector<double> y_seq;
    double y_agg = 0.0;
    int series_id = 0;
};

enum class CordSource { truth, detector };

// volume file -> windowed sagittal -> patch sequence (+ labels from the
// truth sidecar when `entry` is given)
SeriesData build_series_data(const std::string& volume_path, const ManifestEntry* entry,
                             const TileConfig& tile, const WindowSpec& window,
                             CordSource cord_source = CordSource::truth,
                             DetectorNet* detector = nullptr);

// ---------------------------------------------------------------------------
// augmentation: series-consistent flips (p = 0.5 each, within the sagittal
// patch plane) and one rotation angle uniform in [-20, +20] degrees
// ---------------------------------------------------------------------------
void flip_patches(PatchSequence& seq, bool horizontal, bool vertical);
void rotate_patches(PatchSequence& seq, double angle_deg);
PatchSequence augment(const PatchSequence& seq, Rng& rng);

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------
struct Metrics {
    std::vector<std::pair<double, double>> roc;  // (FPR, TPR), (0,0) .. (1,1)
    double auc = 0.0;
    double sensitivity = 0.0;  // at threshold 0.5 (score >= 0.5 is positive)
    double specificity = 0.0;
    std::vector<double> scores;
    std::vector<int> labels;
};

// Trapezoidal AUC over the threshold-swept ROC; tied scores traverse a
// diagonal segment so the area equals the Mann-Whitney statistic exactly.
Metrics roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------
struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double best_auc = -1.0;
    int best_epoch = -1;
    std::vector<double> epoch_aucs;
};

// the batch draw used by train(): indices into the training set, first
// batch/2 positive, rest negative, sampled with replacement per class
std::vector<size_t> draw_balanced_batch(const std::vector<size_t>& pos_idx,
                                        const std::vector<size_t>& neg_idx, int batch, Rng& rng);

// Mini-batch Adam on the composite loss with exact class-balanced batches
// (with replacement). After every epoch the tuning partition is scored and
// the best checkpoint retained. Deterministic for a fixed seed and thread
// count.
TrainResult train(VcfModel<float>& model, const std::vector<SeriesData>& train_set,
                  const std::vector<SeriesData>& tune_set, const TrainConfig& cfg);

// convenience: manifest -> representations -> train -> checkpoint file
TrainResult train_from_manifest(VcfModel<float>& model, const DatasetManifest& manifest,
                                const TrainConfig& cfg, const TileConfig& tile,
                                const WindowSpec& window, const std::string& checkpoint_path);

std::vector<SeriesData> build_partition(const DatasetManifest& manifest, const std::string& part,
                                        const TileConfig& tile, const WindowSpec& window,
                                        CordSource cord_source = CordSource::truth,
                                        DetectorNet* detector = nullptr);

struct EvalResult {
    Metrics metrics;
    double mean_infer_s = 0.0;
};

EvalResult evaluate(const std::vector<SeriesData>& series, std::vector<VcfModel<float>>& models,
                    const std::vector<Tta>& ttas);

// ---------------------------------------------------------------------------
// the three-way aggregation comparison (max, max+location, BiLSTM)
// ---------------------------------------------------------------------------
struct VariantResult {
    std::string name;
    double tune_auc = 0.0;
    std::vector<std::pair<double, double>> roc;
};

struct ExperimentReport {
    std::vector<VariantResult> variants;
    static constexpr double kReferenceTuningAuc = 0.961;
};

ExperimentReport run_aggregation_experiment(const DatasetManifest& manifest,
                                            const ModelConfig& base, const TrainConfig& tcfg,
                                            const TileConfig& tile, const WindowSpec& window,
                                            const std::string& out_dir);

void save_experiment_report(const ExperimentReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// ensemble selection: exhaustive sweep over a small candidate pool
// ---------------------------------------------------------------------------
struct EnsembleCandidate {
    std::string name;
    ModelConfig config;
    TrainConfig schedule;
};

struct SelectedEnsemble {
    std::vector<std::string> names;      // chosen candidates, best first
    std::vector<double> tune_aucs;       // their tuning AUCs
    std::vector<VcfModel<float>> models;
};

// Trains every candidate (pool capped at 8) and keeps the ensemble_size
// best by tuning AUC.
SelectedEnsemble select_ensemble(const std::vector<EnsembleCandidate>& pool,
                                 const std::vector<SeriesData>& train_set,
                                 const std::vector<SeriesData>& tune_set, int ensemble_size);

// mid-sagittal 8-bit PGM with the localization box burned in (255, 1 px)
void render_overlay(const Volume& volume, const WindowSpec& window,
                    const SeriesPrediction& prediction, const std::string& path);

}  // namespace vseq
