#include "vseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vseq {

void TrainConfig::validate() const {
    if (batch < 2 || batch % 2 != 0)
        throw std::invalid_argument("train config: batch size must be even and >= 2");
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
    if (epochs < 1 || iters < 1)
        throw std::invalid_argument("train config: epochs and iters must be >= 1");
}

SeriesData build_series_data(const std::string& volume_path, const ManifestEntry* entry,
                             const TileConfig& tile, const WindowSpec& window,
                             CordSource cord_source, DetectorNet* detector) {
    const Volume vol = load_volume(volume_path);
    CordTrack track;
    SeriesTruth truth;
    bool have_truth = false;
    if (cord_source == CordSource::truth) {
        truth = load_truth(volume_path + ".truth");
        have_truth = true;
        track = cord_track_from_truth(truth, vol.nz);
    } else {
        if (!detector) throw std::invalid_argument("build_series_data: detector required");
        track = detect_cord_track(vol, *detector, window);
    }
    const SagittalVolume sag = reconstruct_sagittal(vol, window);

    SeriesData data;
    data.seq = tile_patches(sag, track, tile);
    const size_t k = data.seq.k();
    data.y_seq.assign(k, 0.0);
    if (entry) {
        data.series_id = entry->series;
        data.y_agg = entry->positive ? 1.0 : 0.0;
        if (!have_truth) truth = load_truth(volume_path + ".truth");
        // a patch is positive when at least half of a fractured vertebra's
        // extent falls inside its source interval
        const double mm_per_row = sag.row_mm();
        for (const auto& v : truth.vertebrae) {
            if (!v.fractured) continue;
            const double v0 = v.z0_mm / mm_per_row, v1 = v.z1_mm / mm_per_row;
            for (size_t i = 0; i < k; ++i) {
                const auto& m = data.seq.meta[i];
                const double ov = std::min(v1, static_cast<double>(m.z1)) -
                                  std::max(v0, static_cast<double>(m.z0));
                if (ov >= 0.5 * (v1 - v0)) data.y_seq[i] = 1.0;
            }
        }
    }
    return data;
}

std::vector<SeriesData> build_partition(const DatasetManifest& manifest, const std::string& part,
                                        const TileConfig& tile, const WindowSpec& window,
                                        CordSource cord_source, DetectorNet* detector) {
    const auto entries = manifest.partition(part);
    std::vector<SeriesData> out(entries.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(entries.size()); ++i)
        out[static_cast<size_t>(i)] =
            build_series_data(manifest.volume_path(*entries[static_cast<size_t>(i)]),
                              entries[static_cast<size_t>(i)], tile, window, cord_source, detector);
    return out;
}

void flip_patches(PatchSequence& seq, bool horizontal, bool vertical) {
    if (!horizontal && !vertical) return;
    for (auto& p : seq.patches) {
        const int ph = p.shape[0], pw = p.shape[1], pz = p.shape[2];
        Tensor<float> out(p.shape);
        for (int a = 0; a < ph; ++a) {
            const int sa = vertical ? ph - 1 - a : a;
            for (int b = 0; b < pw; ++b) {
                const int sb = horizontal ? pw - 1 - b : b;
                for (int c = 0; c < pz; ++c)
                    out[(static_cast<int64_t>(a) * pw + b) * pz + c] =
                        p[(static_cast<int64_t>(sa) * pw + sb) * pz + c];
            }
        }
        p = std::move(out);
    }
}

void rotate_patches(PatchSequence& seq, double angle_deg) {
    if (angle_deg == 0.0) return;
    const double ang = angle_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(ang), sa = std::sin(ang);
    for (auto& p : seq.patches) {
        const int ph = p.shape[0], pw = p.shape[1], pz = p.shape[2];
        const double c_a = (ph - 1) / 2.0, c_b = (pw - 1) / 2.0;
        Tensor<float> out(p.shape);
        for (int a = 0; a < ph; ++a)
            for (int b = 0; b < pw; ++b) {
                // inverse rotation of the output grid point, edge replication
                const double da = a - c_a, db = b - c_b;
                double srow = ca * da + sa * db + c_a;
                double scol = -sa * da + ca * db + c_b;
                srow = std::clamp(srow, 0.0, static_cast<double>(ph - 1));
                scol = std::clamp(scol, 0.0, static_cast<double>(pw - 1));
                const int r0 = static_cast<int>(srow), c0 = static_cast<int>(scol);
                const int r1 = std::min(r0 + 1, ph - 1), c1 = std::min(c0 + 1, pw - 1);
                const double fr = srow - r0, fc = scol - c0;
                for (int c = 0; c < pz; ++c) {
                    const auto atp = [&](int rr, int cc) {
                        return static_cast<double>(
                            p[(static_cast<int64_t>(rr) * pw + cc) * pz + c]);
                    };
                    const double v = (1 - fr) * ((1 - fc) * atp(r0, c0) + fc * atp(r0, c1)) +
                                     fr * ((1 - fc) * atp(r1, c0) + fc * atp(r1, c1));
                    out[(static_cast<int64_t>(a) * pw + b) * pz + c] = static_cast<float>(v);
                }
            }
        p = std::move(out);
    }
}

PatchSequence augment(const PatchSequence& seq, Rng& rng) {
    PatchSequence out = seq;
    const bool h = rng.bernoulli(0.5);
    const bool v = rng.bernoulli(0.5);
    const double angle = rng.uniform(-20.0, 20.0);
    flip_patches(out, h, v);
    rotate_patches(out, angle);
    return out;
}

Metrics roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("roc_auc: scores/labels mismatch");
    int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_auc: need at least one positive and one negative");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    Metrics m;
    m.scores = scores;
    m.labels = labels;
    m.roc.emplace_back(0.0, 0.0);
    double tp = 0.0, fp = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        int64_t gp = 0, gn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? gp : gn)++;
            ++j;
        }
        // tied group: walk the diagonal one sample at a time so the curve
        // has one point per series and the trapezoid equals Mann-Whitney
        const auto g = static_cast<double>(j - i);
        for (size_t s = 1; s <= j - i; ++s) {
            const double t = static_cast<double>(s) / g;
            m.roc.emplace_back((fp + gn * t) / static_cast<double>(n_neg),
                               (tp + gp * t) / static_cast<double>(n_pos));
        }
        tp += gp;
        fp += gn;
        i = j;
    }

    double auc = 0.0;
    for (size_t q = 1; q < m.roc.size(); ++q)
        auc += (m.roc[q].first - m.roc[q - 1].first) * (m.roc[q].second + m.roc[q - 1].second) / 2.0;
    m.auc = auc;

    int64_t tp5 = 0, fn5 = 0, tn5 = 0, fp5 = 0;
    for (size_t q = 0; q < scores.size(); ++q) {
        const bool pred = scores[q] >= 0.5;
        if (labels[q])
            (pred ? tp5 : fn5)++;
        else
            (pred ? fp5 : tn5)++;
    }
    m.sensitivity = static_cast<double>(tp5) / static_cast<double>(tp5 + fn5);
    m.specificity = static_cast<double>(tn5) / static_cast<double>(tn5 + fp5);
    return m;
}

namespace {

void copy_params(VcfModel<float>& dst, VcfModel<float>& src) {
    auto d = dst.named_params();
    auto s = src.named_params();
    for (size_t i = 0; i < d.size(); ++i) d[i].second->data = s[i].second->data;
    dst.mark_params_changed();
}

std::vector<double> score_set(std::vector<SeriesData> const& set, VcfModel<float>& model) {
    std::vector<double> scores(set.size());
    std::vector<VcfModel<float>> workers;
#ifdef _OPENMP
    const int nthreads = std::min(omp_get_max_threads(), 8);
#else
    const int nthreads = 1;
#endif
    for (int t = 0; t < nthreads; ++t) {
        workers.emplace_back(model.cfg);
        copy_params(workers.back(), model);
    }
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (int64_t i = 0; i < static_cast<int64_t>(set.size()); ++i) {
#ifdef _OPENMP
        VcfModel<float>& worker = workers[static_cast<size_t>(omp_get_thread_num())];
#else
        VcfModel<float>& worker = workers[0];
#endif
        scores[static_cast<size_t>(i)] =
            predict_series(set[static_cast<size_t>(i)].seq, worker).score;
    }
    return scores;
}

}  // namespace

std::vector<size_t> draw_balanced_batch(const std::vector<size_t>& pos_idx,
                                        const std::vector<size_t>& neg_idx, int batch, Rng& rng) {
    std::vector<size_t> out(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const auto& pool = b < batch / 2 ? pos_idx : neg_idx;
        out[static_cast<size_t>(b)] = pool[rng.uniform_index(pool.size())];
    }
    return out;
}

TrainResult train(VcfModel<float>& model, const std::vector<SeriesData>& train_set,
                  const std::vector<SeriesData>& tune_set, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<size_t> pos_idx, neg_idx;
    for (size_t i = 0; i < train_set.size(); ++i)
        (train_set[i].y_agg > 0.5 ? pos_idx : neg_idx).push_back(i);
    if (pos_idx.empty() || neg_idx.empty())
        throw std::invalid_argument("train: training set must contain both classes");

    Adam<float> adam;
    adam.lr = cfg.lr;
    adam.init(model.params());

    Rng rng(derive_seed(cfg.seed, 0x76736571ULL));

#ifdef _OPENMP
    const int nthreads = std::min(omp_get_max_threads(), cfg.batch);
#else
    const int nthreads = 1;
#endif
    std::vector<VcfModel<float>> workers;
    for (int t = 0; t < nthreads; ++t) {
        workers.emplace_back(model.cfg);
        copy_params(workers[static_cast<size_t>(t)], model);
    }

    TrainResult result;
    std::vector<Tensor<float>> best_params;
    std::vector<double> item_loss(static_cast<size_t>(cfg.batch));
    std::vector<const SeriesData*> batch_src(static_cast<size_t>(cfg.batch));
    std::vector<PatchSequence> batch_seq(static_cast<size_t>(cfg.batch));

    bool first_batch = true;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.iters; ++it) {
            // class-balanced draw + augmentation parameters, all serial
            const std::vector<size_t> picks =
                draw_balanced_batch(pos_idx, neg_idx, cfg.batch, rng);
            for (int b = 0; b < cfg.batch; ++b) {
                const SeriesData& chosen = train_set[picks[static_cast<size_t>(b)]];
                batch_src[static_cast<size_t>(b)] = &chosen;
                batch_seq[static_cast<size_t>(b)] =
                    cfg.augment ? augment(chosen.seq, rng) : chosen.seq;
            }
#pragma omp parallel for schedule(static) num_threads(nthreads)
            for (int b = 0; b < cfg.batch; ++b) {
#ifdef _OPENMP
                VcfModel<float>& worker = workers[static_cast<size_t>(omp_get_thread_num())];
#else
                VcfModel<float>& worker = workers[0];
#endif
                const SeriesData& src = *batch_src[static_cast<size_t>(b)];
                item_loss[static_cast<size_t>(b)] =
                    worker.train_item(batch_seq[static_cast<size_t>(b)].patches,
                                      batch_seq[static_cast<size_t>(b)].locations, src.y_agg,
                                      src.y_seq);
            }
            const double batch_loss =
                std::accumulate(item_loss.begin(), item_loss.end(), 0.0) / cfg.batch;
            if (first_batch) {
                result.initial_loss = batch_loss;
                first_batch = false;
            }
            result.final_loss = batch_loss;
            epoch_loss += batch_loss;

            // fold worker gradients in fixed order and take one Adam step
            model.zero_grad();
            auto mg = model.grads();
            const float inv = 1.0f / static_cast<float>(cfg.batch);
            for (int t = 0; t < nthreads; ++t) {
                auto wg = workers[static_cast<size_t>(t)].grads();
                for (size_t gi = 0; gi < mg.size(); ++gi)
                    for (int64_t q = 0; q < mg[gi]->size(); ++q)
                        (*mg[gi])[q] += (*wg[gi])[q] * inv;
                workers[static_cast<size_t>(t)].zero_grad();
            }
            std::vector<const Tensor<float>*> gptrs(mg.begin(), mg.end());
            adam.step(model.params(), gptrs);
            model.mark_params_changed();
            for (int t = 0; t < nthreads; ++t) copy_params(workers[static_cast<size_t>(t)], model);
        }
        (void)epoch_loss;

        if (!tune_set.empty()) {
            std::vector<double> scores = score_set(tune_set, model);
            std::vector<int> labels;
            for (const auto& s : tune_set) labels.push_back(s.y_agg > 0.5 ? 1 : 0);
            const double auc = roc_auc(scores, labels).auc;
            result.epoch_aucs.push_back(auc);
            if (auc > result.best_auc) {
                result.best_auc = auc;
                result.best_epoch = epoch;
                best_params.clear();
                for (auto& [n, p] : model.named_params()) best_params.push_back(*p);
            }
        }
    }

    if (!best_params.empty()) {
        auto named = model.named_params();
        for (size_t i = 0; i < named.size(); ++i) *named[i].second = best_params[i];
        model.mark_params_changed();
    }
    return result;
}

TrainResult train_from_manifest(VcfModel<float>& model, const DatasetManifest& manifest,
                                const TrainConfig& cfg, const TileConfig& tile,
                                const WindowSpec& window, const std::string& checkpoint_path) {
    const auto train_set = build_partition(manifest, "train", tile, window);
    const auto tune_set = build_partition(manifest, "tune", tile, window);
    TrainResult result = train(model, train_set, tune_set, cfg);
    if (!checkpoint_path.empty()) {
        TrainMeta meta;
        meta.seed = cfg.seed;
        meta.epochs = cfg.epochs;
        meta.best_auc = result.best_auc;
        save_model(model, meta, checkpoint_path);
    }
    return result;
}

EvalResult evaluate(const std::vector<SeriesData>& series, std::vector<VcfModel<float>>& models,
                    const std::vector<Tta>& ttas) {
    if (series.empty()) throw std::invalid_argument("evaluate: empty series set");
    EvalResult out;
    std::vector<double> scores(series.size());
    std::vector<int> labels(series.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (size_t i = 0; i < series.size(); ++i) {
        scores[i] = ensemble_predict(series[i].seq, models, ttas);
        labels[i] = series[i].y_agg > 0.5 ? 1 : 0;
    }
    const auto t1 = std::chrono::steady_clock::now();
    out.mean_infer_s = std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(series.size());
    out.metrics = roc_auc(scores, labels);
    return out;
}

ExperimentReport run_aggregation_experiment(const DatasetManifest& manifest,
                                            const ModelConfig& base, const TrainConfig& tcfg,
                                            const TileConfig& tile, const WindowSpec& window,
                                            const std::string& out_dir) {
    const auto train_set = build_partition(manifest, "train", tile, window);
    const auto tune_set = build_partition(manifest, "tune", tile, window);
    if (tune_set.empty()) throw std::invalid_argument("experiment: tuning partition is empty");

    const SeqVariant variants[] = {SeqVariant::max_prob, SeqVariant::max_prob_loc,
                                   SeqVariant::bilstm};
    ExperimentReport report;
    for (SeqVariant v : variants) {
        ModelConfig cfg = base;
        cfg.variant = v;
        VcfModel<float> model(cfg);
        model.init_params();
        train(model, train_set, tune_set, tcfg);

        std::vector<double> scores;
        std::vector<int> labels;
        std::vector<VcfModel<float>> single;
        single.push_back(std::move(model));
        for (const auto& s : tune_set) {
            scores.push_back(predict_series(s.seq, single[0]).score);
            labels.push_back(s.y_agg > 0.5 ? 1 : 0);
        }
        const Metrics m = roc_auc(scores, labels);
        VariantResult vr;
        vr.name = variant_name(v);
        vr.tune_auc = m.auc;
        vr.roc = m.roc;
        report.variants.push_back(std::move(vr));

        if (!out_dir.empty()) {
            TrainMeta meta;
            meta.seed = tcfg.seed;
            meta.epochs = tcfg.epochs;
            meta.best_auc = m.auc;
            save_model(single[0], meta, out_dir + "/variant_" + variant_name(v) + ".ckpt");
        }
    }
    if (!out_dir.empty()) save_experiment_report(report, out_dir + "/report.txt");
    return report;
}

void save_experiment_report(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("experiment report: cannot write: " + path);
    out << "# aggregation experiment v1\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "reference_tuning_auc=%.3f\n",
                  ExperimentReport::kReferenceTuningAuc);
    out << buf;
    for (const auto& v : report.variants) {
        std::snprintf(buf, sizeof(buf), "variant=%s auc=%.6f points=%zu\n", v.name.c_str(),
                      v.tune_auc, v.roc.size());
        out << buf;
        out << "roc=" << v.name;
        for (const auto& [fpr, tpr] : v.roc) {
            std::snprintf(buf, sizeof(buf), " %.6f:%.6f", fpr, tpr);
            out << buf;
        }
        out << "\n";
    }
}

SelectedEnsemble select_ensemble(const std::vector<EnsembleCandidate>& pool,
                                 const std::vector<SeriesData>& train_set,
                                 const std::vector<SeriesData>& tune_set, int ensemble_size) {
    if (pool.empty()) throw std::invalid_argument("select_ensemble: empty candidate pool");
    if (pool.size() > 8) throw std::invalid_argument("select_ensemble: pool is capped at 8");
    if (ensemble_size < 1 || ensemble_size > static_cast<int>(pool.size()))
        throw std::invalid_argument("select_ensemble: bad ensemble size");
    if (tune_set.empty()) throw std::invalid_argument("select_ensemble: empty tuning set");

    struct Entry {
        size_t pool_index;
        double auc;
    };
    std::vector<Entry> ranked;
    std::vector<VcfModel<float>> trained;
    for (size_t i = 0; i < pool.size(); ++i) {
        VcfModel<float> model(pool[i].config);
        model.init_params();
        const TrainResult res = train(model, train_set, tune_set, pool[i].schedule);
        ranked.push_back({i, res.best_auc});
        trained.push_back(std::move(model));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Entry& a, const Entry& b) { return a.auc > b.auc; });

    SelectedEnsemble out;
    for (int q = 0; q < ensemble_size; ++q) {
        const Entry& e = ranked[static_cast<size_t>(q)];
        out.names.push_back(pool[e.pool_index].name);
        out.tune_aucs.push_back(e.auc);
        out.models.push_back(std::move(trained[e.pool_index]));
    }
    return out;
}

void render_overlay(const Volume& volume, const WindowSpec& window,
                    const SeriesPrediction& prediction, const std::string& path) {
    const SagittalVolume sag = reconstruct_sagittal(volume, window);
    const int mid = sag.n_slices / 2;
    const int h = sag.rows, w = sag.cols;
    std::vector<uint8_t> img(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img[static_cast<size_t>(r) * w + c] =
                static_cast<uint8_t>(std::lround(std::clamp(sag.at(mid, r, c), 0.0f, 1.0f) * 255.0f));

    const auto& box = prediction.box;
    const int r0 = std::clamp(box.z0, 0, h - 1), r1 = std::clamp(box.z1 - 1, 0, h - 1);
    const int c0 = std::clamp(box.y0, 0, w - 1), c1 = std::clamp(box.y1 - 1, 0, w - 1);
    for (int c = c0; c <= c1; ++c) {
        img[static_cast<size_t>(r0) * w + c] = 255;
        img[static_cast<size_t>(r1) * w + c] = 255;
    }
    for (int r = r0; r <= r1; ++r) {
        img[static_cast<size_t>(r) * w + c0] = 255;
        img[static_cast<size_t>(r) * w + c1] = 255;
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("overlay: cannot write: " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!out) throw std::runtime_error("overlay: write failed: " + path);
}

}  // namespace vseq
