// Regenerates the golden files under tests/golden/. Run from anywhere:
//   make_goldens <golden-dir>
// The outputs are committed; the golden tests rebuild the same artifacts
// and compare bytes.

#include <cstdio>
#include <filesystem>
#include <string>

#include "vseq/model.hpp"
#include "vseq/phantom.hpp"
#include "vseq/train.hpp"

using namespace vseq;

namespace {

PhantomSpec tiny_spec() {
    PhantomSpec spec;
    spec.n_vertebrae = 4;
    spec.nx = 24;
    spec.ny = 24;
    spec.seed = 2024;
    return spec;
}

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.ph = 8;
    cfg.pw = 8;
    cfg.pz = 8;
    cfg.feature_dim = 4;
    cfg.base_filters = 2;
    cfg.seed = 0;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: make_goldens <golden-dir>\n");
        return 2;
    }
    const std::string dir = argv[1];
    std::filesystem::create_directories(dir);

    // 1. small phantom volume, fractured, with noise
    auto [vol, label] = generate_series(tiny_spec(), {{1, Grade::moderate}});
    save_volume(vol, dir + "/tiny_phantom.vsq");
    SeriesTruth truth{label.per_vertebra, label.canal_centerline, tiny_spec().canal_radius_mm};
    save_truth(truth, dir + "/tiny_phantom.vsq.truth");

    // 2. manifest for the default spec, seed 42
    const std::string scratch = dir + "/.scratch_dataset";
    make_dataset(scratch, 10, 0.33, PhantomSpec{}, 42);
    std::filesystem::copy_file(scratch + "/manifest.txt", dir + "/manifest_seed42.txt",
                               std::filesystem::copy_options::overwrite_existing);
    std::filesystem::remove_all(scratch);

    // 3. zero-seed tiny model checkpoint
    VcfModel<float> model(tiny_model_config());
    model.init_params();
    save_model(model, TrainMeta{}, dir + "/tiny_model.ckpt");

    // 4. overlay of the tiny model's prediction on the tiny phantom
    TileConfig tile;
    tile.ph = 8;
    tile.pw = 8;
    tile.pz = 8;
    const WindowSpec window{};
    const SeriesData data =
        build_series_data(dir + "/tiny_phantom.vsq", nullptr, tile, window, CordSource::truth);
    const SeriesPrediction pred = predict_series(data.seq, model);
    render_overlay(vol, window, pred, dir + "/overlay_tiny.pgm");

    std::printf("golden files written to %s\n", dir.c_str());
    return 0;
}
