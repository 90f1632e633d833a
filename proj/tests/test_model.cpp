#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vseq/model.hpp"
#include "vseq/phantom.hpp"

using namespace vseq;

namespace {

ModelConfig tiny_config(SeqVariant v = SeqVariant::max_prob) {
    ModelConfig c;
    c.ph = 8;
    c.pw = 8;
    c.pz = 8;
    c.feature_dim = 6;
    c.base_filters = 2;
    c.lstm_hidden = 4;
    c.variant = v;
    c.seed = 0;
    return c;
}

template <typename T>
std::vector<Tensor<T>> random_patches(int k, const ModelConfig& cfg, Rng& rng) {
    std::vector<Tensor<T>> out(static_cast<size_t>(k), Tensor<T>({cfg.ph, cfg.pw, cfg.pz}));
    for (auto& p : out) p.fill_uniform(rng, 0.0, 1.0);
    return out;
}

std::vector<double> uniform_locations(int k) {
    std::vector<double> locs;
    for (int i = 0; i < k; ++i) locs.push_back((i + 0.5) / k);
    return locs;
}

}  // namespace

TEST_CASE("f_rep channel progression doubles from the base and pools to the stated shape") {
    ModelConfig cfg;  // defaults: base 8, patch 32x32x16
    VcfModel<float> model(cfg);
    CHECK(model.rep.c1a.cout == 8);
    CHECK(model.rep.c1b.cout == 8);
    CHECK(model.rep.c2a.cout == 16);
    CHECK(model.rep.c2b.cout == 16);
    CHECK(model.rep.c3a.cout == 32);
    CHECK(model.rep.c3b.cout == 32);
    // (32,32,16) -> three 2x pools -> (4,4,2); flattened length 32*4*4*2
    CHECK(model.rep.proj.in == 32 * 4 * 4 * 2);
    CHECK(model.rep.proj.out == 64);
}

TEST_CASE("zero weights give identical features for every patch") {
    auto cfg = tiny_config();
    VcfModel<float> model(cfg);  // all parameters zero
    Rng rng(5);
    const auto patches = random_patches<float>(3, cfg, rng);
    VcfModel<float>::SeriesCache cache;
    model.forward_series(patches, uniform_locations(3), cache, false);
    for (int i = 1; i < 3; ++i)
        for (int d = 0; d < cfg.feature_dim; ++d)
            CHECK(cache.feats[static_cast<size_t>(i)][d] == cache.feats[0][d]);
    // all-equal probabilities and a first-patch argmax
    CHECK(cache.probs[0] == 0.5f);
    CHECK(cache.agg_argmax == 0);
    CHECK(cache.score == 0.5f);
}

TEST_CASE("f_seq: k=1 reduces every variant to the per-item head score") {
    for (SeqVariant v : {SeqVariant::max_prob, SeqVariant::max_prob_loc, SeqVariant::lstm,
                         SeqVariant::bilstm}) {
        auto cfg = tiny_config(v);
        cfg.seed = 11;
        VcfModel<float> model(cfg);
        model.init_params();
        Rng rng(6);
        const auto patches = random_patches<float>(1, cfg, rng);
        VcfModel<float>::SeriesCache cache;
        model.forward_series(patches, {0.5}, cache, false);
        REQUIRE(cache.probs.size() == 1);
        CHECK(cache.score == cache.probs[0]);  // smoothing of one item
        CHECK(cache.probs[0] > 0.0f);
        CHECK(cache.probs[0] < 1.0f);
    }
}

TEST_CASE("max variant slides a window-3 max over the item scores") {
    const std::vector<float> scores = {0.1f, 0.9f, 0.2f, 0.3f};
    std::vector<int> src;
    const auto P = sliding_max(scores, 3, &src);
    CHECK(P == std::vector<float>{0.9f, 0.9f, 0.9f, 0.3f});
    CHECK(src == std::vector<int>{1, 1, 1, 3});
}

TEST_CASE("lstm variant with severed recurrence depends only on the item itself") {
    auto cfg = tiny_config(SeqVariant::lstm);
    cfg.seed = 3;
    VcfModel<float> model(cfg);
    model.init_params();
    // cut the recurrence fully: hidden feedback and the cell carry (the
    // forget gate would otherwise leak c_{t-1} even with zero recurrent
    // weights)
    model.lstm_f.r.zero();
    for (int u = 0; u < cfg.lstm_hidden; ++u) model.lstm_f.b[cfg.lstm_hidden + u] = -40.0f;
    Rng rng(14);
    const auto patches = random_patches<float>(4, cfg, rng);
    const auto locs = uniform_locations(4);
    VcfModel<float>::SeriesCache full;
    model.forward_series(patches, locs, full, false);
    // each item alone produces the same per-item probability
    for (int i = 0; i < 4; ++i) {
        VcfModel<float>::SeriesCache single;
        model.forward_series({patches[static_cast<size_t>(i)]}, {locs[static_cast<size_t>(i)]},
                             single, false);
        CHECK(single.probs[0] ==
              doctest::Approx(full.probs[static_cast<size_t>(i)]).epsilon(1e-6));
    }
}

TEST_CASE("f_agg: smoothing then max with edge renormalization") {
    SUBCASE("width 1 is a plain max") {
        const auto [score, idx] = smoothed_max(std::vector<double>{0.2, 0.7, 0.4}, 1);
        CHECK(score == doctest::Approx(0.7));
        CHECK(idx == 1);
    }
    SUBCASE("impulse (0,1,0) with width 3") {
        const auto sm = smooth_probs(std::vector<double>{0.0, 1.0, 0.0}, 3);
        CHECK(sm[0] == doctest::Approx(0.5));
        CHECK(sm[1] == doctest::Approx(1.0 / 3.0));
        CHECK(sm[2] == doctest::Approx(0.5));
        const auto [score, idx] = smoothed_max(std::vector<double>{0.0, 1.0, 0.0}, 3);
        CHECK(score == doctest::Approx(0.5));
        CHECK(idx == 0);  // first of the tied maxima
    }
    SUBCASE("constants are fixed points for any width") {
        for (int w : {1, 3, 5, 7}) {
            const auto [score, idx] = smoothed_max(std::vector<double>(6, 0.37), w);
            CHECK(score == doctest::Approx(0.37));
            CHECK(idx >= 0);
        }
    }
}

TEST_CASE("f_agg bounds and monotonicity") {
    Rng rng(25);
    for (int rep = 0; rep < 300; ++rep) {
        const int k = 1 + static_cast<int>(rng.uniform_index(9));
        const int w = 1 + 2 * static_cast<int>(rng.uniform_index(3));
        std::vector<double> p(static_cast<size_t>(k));
        for (auto& v : p) v = rng.uniform();
        const auto [score, idx] = smoothed_max(p, w);
        const double mx = *std::max_element(p.begin(), p.end());
        const double mn = *std::min_element(p.begin(), p.end());
        CHECK(score <= mx + 1e-12);
        CHECK(score >= mn - 1e-12);
        // raising one probability never lowers the score
        std::vector<double> q = p;
        const size_t j = rng.uniform_index(static_cast<uint64_t>(k));
        q[j] = std::min(1.0, q[j] + rng.uniform());
        const auto [score2, idx2] = smoothed_max(q, w);
        CHECK(score2 >= score - 1e-12);
    }
}

TEST_CASE("total loss: lambda 0 keeps only the aggregate term; perfect predictions vanish") {
    auto cfg = tiny_config();
    VcfModel<float> model(cfg);
    VcfModel<float>::SeriesCache cache;
    cache.k = 2;
    cache.probs = {0.75f, 0.25f};
    cache.score = 0.75f;
    model.cfg.lambda_seq = 0.0;
    auto lv = model.loss_of(cache, 1.0, {1.0, 0.0});
    CHECK(lv.total == doctest::Approx(-std::log(0.75)).epsilon(1e-6));

    model.cfg.lambda_seq = 1.0;
    cache.probs = {1.0f, 0.0f};
    cache.score = 1.0f;
    lv = model.loss_of(cache, 1.0, {1.0, 0.0});
    CHECK(lv.total <= 2.0 * (-std::log(1.0 - kBceEps)) + 1e-12);
}

TEST_CASE("end-to-end gradients pass the finite-difference check (both F_seq families)") {
    for (SeqVariant variant : {SeqVariant::max_prob, SeqVariant::lstm}) {
        auto cfg = tiny_config(variant);
        cfg.seed = 31;
        VcfModel<double> model(cfg);
        model.init_params();
        Rng rng(41);
        const int k = 3;
        const auto patches = random_patches<double>(k, cfg, rng);
        const auto locs = uniform_locations(k);
        const std::vector<double> y_seq = {0.0, 1.0, 0.0};
        const double y_agg = 1.0;

        model.zero_grad();
        model.train_item(patches, locs, y_agg, y_seq);
        const auto grads = model.grads();
        std::vector<const Tensor<double>*> gptr(grads.begin(), grads.end());

        auto loss = [&]() {
            VcfModel<double> probe(cfg);
            auto dst = probe.named_params();
            auto src = model.named_params();
            for (size_t i = 0; i < dst.size(); ++i) dst[i].second->data = src[i].second->data;
            VcfModel<double>::SeriesCache cache;
            probe.forward_series(patches, locs, cache, false);
            return probe.loss_of(cache, y_agg, y_seq).total;
        };
        Rng probe_rng(51);
        const auto res = grad_check<double>(loss, model.params(), gptr, 60, probe_rng);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("prediction: zero-weight model ties break to patch 0 and scores stay put") {
    auto cfg = tiny_config();
    VcfModel<float> model(cfg);
    PatchSequence seq;
    Rng rng(61);
    for (int i = 0; i < 4; ++i) {
        Tensor<float> p({cfg.ph, cfg.pw, cfg.pz});
        p.fill_uniform(rng, 0.0, 1.0);
        seq.patches.push_back(std::move(p));
        seq.locations.push_back((i + 0.5) / 4.0);
        PatchMeta m;
        m.z0 = i * cfg.ph;
        m.z1 = (i + 1) * cfg.ph;
        seq.meta.push_back(m);
    }
    const SeriesPrediction pred = predict_series(seq, model);
    CHECK(pred.argmax_patch == 0);
    CHECK(pred.score == doctest::Approx(0.5));
    CHECK(pred.box.z0 == 0);
    for (double p : pred.per_patch) CHECK(p == doctest::Approx(0.5));
}

TEST_CASE("max-variant scores are invariant under sequence permutation") {
    auto cfg = tiny_config(SeqVariant::max_prob);
    cfg.smooth_width = 1;  // pure max aggregation
    cfg.seed = 71;
    VcfModel<float> model(cfg);
    model.init_params();
    Rng rng(72);
    const auto patches = random_patches<float>(5, cfg, rng);
    const auto locs = uniform_locations(5);
    VcfModel<float>::SeriesCache cache;
    model.forward_series(patches, locs, cache, false);

    std::vector<Tensor<float>> rev(patches.rbegin(), patches.rend());
    VcfModel<float>::SeriesCache cache_rev;
    model.forward_series(rev, locs, cache_rev, false);
    CHECK(cache_rev.score == doctest::Approx(cache.score).epsilon(1e-6));
}

TEST_CASE("ensemble: copies agree with the single model, means average, bounds hold") {
    auto cfg = tiny_config();
    cfg.seed = 81;
    VcfModel<float> model(cfg);
    model.init_params();
    PatchSequence seq;
    Rng rng(82);
    for (int i = 0; i < 3; ++i) {
        Tensor<float> p({cfg.ph, cfg.pw, cfg.pz});
        p.fill_uniform(rng, 0.0, 1.0);
        seq.patches.push_back(std::move(p));
        seq.locations.push_back((i + 0.5) / 3.0);
    }
    const double solo = predict_series(seq, model).score;
    std::vector<VcfModel<float>> copies;
    for (int i = 0; i < 3; ++i) {
        copies.emplace_back(cfg);
        auto dst = copies.back().named_params();
        auto src = model.named_params();
        for (size_t q = 0; q < dst.size(); ++q) dst[q].second->data = src[q].second->data;
    }
    CHECK(ensemble_predict(seq, copies, {Tta::identity, Tta::identity, Tta::identity}) ==
          doctest::Approx(solo).epsilon(1e-12));

    std::vector<VcfModel<float>> empty;
    CHECK_THROWS_AS(ensemble_predict(seq, empty, {}), std::invalid_argument);

    // two distinct models: the ensemble is their arithmetic mean and stays
    // inside [min member, max member]
    std::vector<VcfModel<float>> two;
    for (uint64_t s : {91ull, 92ull}) {
        ModelConfig c2 = cfg;
        c2.seed = s;
        two.emplace_back(c2);
        two.back().init_params();
    }
    const double s0 = predict_series(seq, two[0]).score;
    const double s1 = predict_series(seq, two[1]).score;
    const double mean = ensemble_predict(seq, two, {Tta::identity, Tta::identity});
    CHECK(mean == doctest::Approx((s0 + s1) / 2.0).epsilon(1e-12));
    CHECK(mean >= std::min(s0, s1) - 1e-12);
    CHECK(mean <= std::max(s0, s1) + 1e-12);
}

TEST_CASE("flip TTA equals identity on mirror-symmetric input") {
    auto cfg = tiny_config();
    cfg.seed = 91;
    VcfModel<float> model(cfg);
    model.init_params();
    PatchSequence seq;
    Rng rng(92);
    for (int i = 0; i < 2; ++i) {
        Tensor<float> p({cfg.ph, cfg.pw, cfg.pz});
        // symmetric along the across-slice axis
        for (int a = 0; a < cfg.ph; ++a)
            for (int b = 0; b < cfg.pw; ++b)
                for (int c = 0; c < cfg.pz / 2; ++c) {
                    const auto v = static_cast<float>(rng.uniform());
                    p[(static_cast<int64_t>(a) * cfg.pw + b) * cfg.pz + c] = v;
                    p[(static_cast<int64_t>(a) * cfg.pw + b) * cfg.pz + (cfg.pz - 1 - c)] = v;
                }
        seq.patches.push_back(std::move(p));
        seq.locations.push_back((i + 0.5) / 2.0);
    }
    std::vector<VcfModel<float>> one;
    one.emplace_back(cfg);
    auto dst = one.back().named_params();
    auto src = model.named_params();
    for (size_t q = 0; q < dst.size(); ++q) dst[q].second->data = src[q].second->data;
    const double ident = ensemble_predict(seq, one, {Tta::identity});
    const double flipped = ensemble_predict(seq, one, {Tta::flip_lr});
    CHECK(std::abs(ident - flipped) < 1e-6);

    // and the two-model mean is the arithmetic mean
    const PatchSequence asym = [&] {
        PatchSequence s = seq;
        s.patches[0][3] = 0.99f;
        return s;
    }();
    (void)asym;
}

TEST_CASE("checkpoints round-trip bitwise") {
    auto cfg = tiny_config(SeqVariant::bilstm);
    cfg.seed = 101;
    VcfModel<float> model(cfg);
    model.init_params();
    TrainMeta meta;
    meta.seed = 7;
    meta.epochs = 12;
    meta.best_auc = 0.875;
    const std::string path = "tmp_model.ckpt";
    save_model(model, meta, path);
    TrainMeta rmeta;
    VcfModel<float> loaded = load_model(path, &rmeta);
    CHECK(rmeta.seed == 7);
    CHECK(rmeta.epochs == 12);
    CHECK(rmeta.best_auc == 0.875);
    CHECK(loaded.cfg.variant == SeqVariant::bilstm);
    auto a = model.named_params();
    auto b = loaded.named_params();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second->data == b[i].second->data);

    // identical predictions bitwise
    Rng rng(102);
    PatchSequence seq;
    for (int i = 0; i < 3; ++i) {
        Tensor<float> p({cfg.ph, cfg.pw, cfg.pz});
        p.fill_uniform(rng, 0.0, 1.0);
        seq.patches.push_back(std::move(p));
        seq.locations.push_back((i + 0.5) / 3.0);
    }
    CHECK(predict_series(seq, model).score == predict_series(seq, loaded).score);

    // save -> load -> save is byte-identical
    const std::string path2 = "tmp_model2.ckpt";
    save_model(loaded, rmeta, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("model config invariants are enforced") {
    ModelConfig c = tiny_config();
    c.smooth_width = 2;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config();
    c.lambda_seq = -0.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config();
    c.ph = 12;  // not divisible by 8
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    // patch shape mismatch at prediction time
    VcfModel<float> model(tiny_config());
    PatchSequence seq;
    seq.patches.emplace_back(std::vector<int>{16, 8, 8});
    seq.locations.push_back(0.5);
    CHECK_THROWS_AS(predict_series(seq, model), std::invalid_argument);
}
