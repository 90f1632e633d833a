// vseq: spine phantom generation, cord-detector and series-model training,
// evaluation, prediction and overlay rendering.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vseq/detector.hpp"
#include "vseq/model.hpp"
#include "vseq/phantom.hpp"
#include "vseq/train.hpp"

using namespace vseq;

namespace {

struct CommonOpts {
    double window_center = 370.0;
    double window_width = 840.0;
    std::string patch = "32,32,16";
    uint64_t seed = 0;
};

void add_window_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--window-center", o.window_center, "HU window center");
    cmd->add_option("--window-width", o.window_width, "HU window width");
}

WindowSpec window_of(const CommonOpts& o) { return WindowSpec{o.window_center, o.window_width}; }

TileConfig tile_of(const CommonOpts& o) {
    TileConfig t;
    if (std::sscanf(o.patch.c_str(), "%d,%d,%d", &t.ph, &t.pw, &t.pz) != 3)
        throw CLI::ValidationError("--patch", "expected H,W,Z");
    return t;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<VcfModel<float>> load_ensemble(const std::string& list) {
    std::vector<VcfModel<float>> models;
    for (const auto& path : split_list(list)) models.push_back(load_model(path));
    if (models.empty()) throw std::runtime_error("no checkpoints given");
    return models;
}

std::vector<Tta> parse_ttas(const std::string& list) {
    std::vector<Tta> out;
    for (const auto& name : split_list(list)) out.push_back(tta_from_name(name));
    return out;
}

PatchSequence representation_of(const std::string& volume_path, const CommonOpts& common,
                                const std::string& detector_path) {
    const TileConfig tile = tile_of(common);
    const WindowSpec window = window_of(common);
    if (!detector_path.empty()) {
        DetectorNet det = load_detector(detector_path);
        return build_series_data(volume_path, nullptr, tile, window, CordSource::detector, &det)
            .seq;
    }
    return build_series_data(volume_path, nullptr, tile, window, CordSource::truth).seq;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vertebral fracture sequence pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--seed", common.seed, "master seed");

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a phantom dataset");
    std::string gen_out = "dataset";
    int gen_n = 100;
    double gen_pos = 0.33;
    int gen_vertebrae = 17;
    double gen_noise = 20.0;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n", gen_n, "number of series");
    gen->add_option("--pos", gen_pos, "positive fraction");
    gen->add_option("--vertebrae", gen_vertebrae, "vertebrae per phantom");
    gen->add_option("--noise", gen_noise, "noise sigma in HU");

    // ---- train-detector ----
    auto* tdet = app.add_subcommand("train-detector", "train the cord detector");
    std::string tdet_manifest, tdet_out = "detector.ckpt";
    int tdet_slices = 300, tdet_epochs = 60;
    double tdet_lr = 1e-3;
    tdet->add_option("--manifest", tdet_manifest, "dataset manifest")->required();
    tdet->add_option("--out", tdet_out, "output checkpoint");
    tdet->add_option("--slices", tdet_slices, "training slices");
    tdet->add_option("--epochs", tdet_epochs, "epochs");
    tdet->add_option("--lr", tdet_lr, "learning rate");
    add_window_flags(tdet, common);

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train a series model");
    std::string tr_manifest, tr_out = "model.ckpt", tr_variant = "max";
    TrainConfig tr_cfg = TrainConfig::desk_scale();
    double tr_lambda = 1.0;
    int tr_smooth = 3, tr_feature_dim = 64, tr_base = 8;
    bool tr_use_location = false;
    tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
    tr->add_option("--out", tr_out, "output checkpoint");
    tr->add_option("--variant", tr_variant, "max|maxloc|lstm|bilstm");
    tr->add_option("--lr", tr_cfg.lr, "learning rate");
    tr->add_option("--batch", tr_cfg.batch, "batch size (even)");
    tr->add_option("--epochs", tr_cfg.epochs, "epochs");
    tr->add_option("--iters", tr_cfg.iters, "iterations per epoch");
    tr->add_option("--lambda", tr_lambda, "sequence loss weight");
    tr->add_option("--smooth-width", tr_smooth, "aggregation smoothing width (odd)");
    tr->add_option("--patch", common.patch, "patch size H,W,Z");
    tr->add_option("--feature-dim", tr_feature_dim, "representation feature dim");
    tr->add_option("--base-filters", tr_base, "first-block conv filters");
    tr->add_flag("--use-location", tr_use_location, "append the location scalar");
    tr->add_flag("--no-augment", "disable training augmentation");
    add_window_flags(tr, common);

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "evaluate checkpoints on a partition");
    std::string ev_manifest, ev_ensemble, ev_tta = "id", ev_part = "test", ev_detector;
    ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    ev->add_option("--ensemble", ev_ensemble, "comma-separated checkpoints")->required();
    ev->add_option("--tta", ev_tta, "comma-separated TTAs (id|flip), one per model");
    ev->add_option("--part", ev_part, "partition: train|tune|test");
    ev->add_option("--detector", ev_detector, "cord detector checkpoint (default: truth track)");
    add_window_flags(ev, common);

    // ---- predict ----
    auto* pr = app.add_subcommand("predict", "score one volume");
    std::string pr_volume, pr_ensemble, pr_tta = "id", pr_detector;
    pr->add_option("--volume", pr_volume, "volume file")->required();
    pr->add_option("--ensemble", pr_ensemble, "comma-separated checkpoints")->required();
    pr->add_option("--tta", pr_tta, "comma-separated TTAs (id|flip)");
    pr->add_option("--detector", pr_detector, "cord detector checkpoint (default: truth track)");
    add_window_flags(pr, common);

    // ---- experiment ----
    auto* ex = app.add_subcommand("experiment", "three-way aggregation comparison");
    std::string ex_manifest, ex_out = "experiment";
    TrainConfig ex_cfg = TrainConfig::desk_scale();
    double ex_lambda = 1.0;
    int ex_feature_dim = 64, ex_base = 8;
    ex->add_option("--manifest", ex_manifest, "dataset manifest")->required();
    ex->add_option("--out", ex_out, "report directory");
    ex->add_option("--lr", ex_cfg.lr, "learning rate");
    ex->add_option("--batch", ex_cfg.batch, "batch size");
    ex->add_option("--epochs", ex_cfg.epochs, "epochs");
    ex->add_option("--iters", ex_cfg.iters, "iterations per epoch");
    ex->add_option("--lambda", ex_lambda, "sequence loss weight");
    ex->add_option("--feature-dim", ex_feature_dim, "representation feature dim");
    ex->add_option("--base-filters", ex_base, "first-block conv filters");
    ex->add_option("--patch", common.patch, "patch size H,W,Z");
    add_window_flags(ex, common);

    // ---- render ----
    auto* rd = app.add_subcommand("render", "render the mid-sagittal overlay");
    std::string rd_volume, rd_ckpt, rd_out = "overlay.pgm", rd_detector;
    rd->add_option("--volume", rd_volume, "volume file")->required();
    rd->add_option("--checkpoint", rd_ckpt, "model checkpoint")->required();
    rd->add_option("--out", rd_out, "output PGM path");
    rd->add_option("--detector", rd_detector, "cord detector checkpoint (default: truth track)");
    add_window_flags(rd, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            PhantomSpec spec;
            spec.n_vertebrae = gen_vertebrae;
            spec.noise_sigma_hu = gen_noise;
            const DatasetManifest m = make_dataset(gen_out, gen_n, gen_pos, spec, common.seed);
            int pos = 0;
            for (const auto& e : m.entries) pos += e.positive ? 1 : 0;
            std::printf("wrote %zu series (%d positive) to %s\n", m.entries.size(), pos,
                        gen_out.c_str());
        } else if (tdet->parsed()) {
            const DatasetManifest m = load_manifest(tdet_manifest);
            const auto examples =
                sample_detector_examples(m, "train", tdet_slices, window_of(common), common.seed);
            DetectorConfig dcfg;
            dcfg.seed = common.seed;
            DetectorNet net(dcfg);
            net.init_params();
            DetectorTrainConfig tcfg;
            tcfg.epochs = tdet_epochs;
            tcfg.lr = tdet_lr;
            tcfg.seed = common.seed;
            const DetectorTrainResult res = train_detector(net, examples, tcfg);
            save_detector(net, tdet_out);
            std::printf("detector loss %.6f -> %.6f, saved %s\n", res.initial_loss, res.final_loss,
                        tdet_out.c_str());
        } else if (tr->parsed()) {
            const DatasetManifest m = load_manifest(tr_manifest);
            const TileConfig tile = tile_of(common);
            ModelConfig mcfg;
            mcfg.ph = tile.ph;
            mcfg.pw = tile.pw;
            mcfg.pz = tile.pz;
            mcfg.variant = variant_from_name(tr_variant);
            mcfg.lambda_seq = tr_lambda;
            mcfg.smooth_width = tr_smooth;
            mcfg.feature_dim = tr_feature_dim;
            mcfg.base_filters = tr_base;
            mcfg.use_location = tr_use_location;
            mcfg.seed = common.seed;
            tr_cfg.seed = common.seed;
            tr_cfg.augment = tr->count("--no-augment") == 0;
            VcfModel<float> model(mcfg);
            model.init_params();
            const TrainResult res =
                train_from_manifest(model, m, tr_cfg, tile, window_of(common), tr_out);
            std::printf("loss %.4f -> %.4f  best tune auc %.4f (epoch %d)  saved %s\n",
                        res.initial_loss, res.final_loss, res.best_auc, res.best_epoch,
                        tr_out.c_str());
        } else if (ev->parsed()) {
            const DatasetManifest m = load_manifest(ev_manifest);
            auto models = load_ensemble(ev_ensemble);
            const auto ttas = parse_ttas(ev_tta);
            TileConfig tile;
            tile.ph = models[0].cfg.ph;
            tile.pw = models[0].cfg.pw;
            tile.pz = models[0].cfg.pz;
            DetectorNet det(DetectorConfig{});
            DetectorNet* det_ptr = nullptr;
            if (!ev_detector.empty()) {
                det = load_detector(ev_detector);
                det_ptr = &det;
            }
            const auto series =
                build_partition(m, ev_part, tile, window_of(common),
                                det_ptr ? CordSource::detector : CordSource::truth, det_ptr);
            const EvalResult res = evaluate(series, models, ttas);
            std::printf("auc=%.6f\n", res.metrics.auc);
            std::printf("sens@0.5=%.6f\n", res.metrics.sensitivity);
            std::printf("spec@0.5=%.6f\n", res.metrics.specificity);
            std::printf("mean_infer_s=%.6f\n", res.mean_infer_s);
        } else if (pr->parsed()) {
            auto models = load_ensemble(pr_ensemble);
            common.patch = std::to_string(models[0].cfg.ph) + "," +
                           std::to_string(models[0].cfg.pw) + "," +
                           std::to_string(models[0].cfg.pz);
            const PatchSequence seq = representation_of(pr_volume, common, pr_detector);
            const double score = ensemble_predict(seq, models, parse_ttas(pr_tta));
            std::printf("%.6f\n", score);
        } else if (ex->parsed()) {
            const DatasetManifest m = load_manifest(ex_manifest);
            const TileConfig tile = tile_of(common);
            ModelConfig base;
            base.ph = tile.ph;
            base.pw = tile.pw;
            base.pz = tile.pz;
            base.lambda_seq = ex_lambda;
            base.feature_dim = ex_feature_dim;
            base.base_filters = ex_base;
            base.seed = common.seed;
            ex_cfg.seed = common.seed;
            std::filesystem::create_directories(ex_out);
            const ExperimentReport rep =
                run_aggregation_experiment(m, base, ex_cfg, tile, window_of(common), ex_out);
            for (const auto& v : rep.variants)
                std::printf("variant=%s auc=%.6f\n", v.name.c_str(), v.tune_auc);
            std::printf("report: %s/report.txt\n", ex_out.c_str());
        } else if (rd->parsed()) {
            auto model = load_model(rd_ckpt);
            common.patch = std::to_string(model.cfg.ph) + "," + std::to_string(model.cfg.pw) + "," +
                           std::to_string(model.cfg.pz);
            const PatchSequence seq = representation_of(rd_volume, common, rd_detector);
            const SeriesPrediction pred = predict_series(seq, model);
            const Volume vol = load_volume(rd_volume);
            render_overlay(vol, window_of(common), pred, rd_out);
            std::printf("score %.6f, overlay %s\n", pred.score, rd_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
