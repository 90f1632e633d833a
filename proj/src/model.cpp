#include "vseq/model.hpp"

#include <cstdio>
#include <stdexcept>

namespace vseq {

const char* variant_name(SeqVariant v) {
    switch (v) {
        case SeqVariant::max_prob: return "max";
        case SeqVariant::max_prob_loc: return "maxloc";
        case SeqVariant::lstm: return "lstm";
        case SeqVariant::bilstm: return "bilstm";
    }
    return "max";
}

SeqVariant variant_from_name(const std::string& s) {
    if (s == "max") return SeqVariant::max_prob;
    if (s == "maxloc") return SeqVariant::max_prob_loc;
    if (s == "lstm") return SeqVariant::lstm;
    if (s == "bilstm") return SeqVariant::bilstm;
    throw std::invalid_argument("unknown sequence variant: " + s +
                                " (expected max|maxloc|lstm|bilstm)");
}

void ModelConfig::validate() const {
    if (feature_dim < 1) throw std::invalid_argument("model config: feature_dim must be >= 1");
    if (base_filters < 1) throw std::invalid_argument("model config: base_filters must be >= 1");
    if (smooth_width < 1 || smooth_width % 2 == 0)
        throw std::invalid_argument("model config: smooth_width must be odd and >= 1");
    if (lambda_seq < 0.0) throw std::invalid_argument("model config: lambda must be >= 0");
    if (lstm_hidden < 1) throw std::invalid_argument("model config: lstm_hidden must be >= 1");
    if (ph < 8 || pw < 8 || pz < 8 || ph % 8 || pw % 8 || pz % 8)
        throw std::invalid_argument("model config: patch dims must be multiples of 8 (3 pools)");
}

SeriesPrediction predict_series(const PatchSequence& seq, VcfModel<float>& model) {
    if (seq.patches.empty()) throw std::invalid_argument("predict_series: empty patch sequence");
    VcfModel<float>::SeriesCache cache;
    model.forward_series(seq.patches, seq.locations, cache, false);
    SeriesPrediction pred;
    pred.per_patch.assign(cache.probs.begin(), cache.probs.end());
    pred.score = static_cast<double>(cache.score);
    pred.argmax_patch = cache.agg_argmax;
    if (!seq.meta.empty()) pred.box = seq.meta[static_cast<size_t>(cache.agg_argmax)];
    return pred;
}

Tta tta_from_name(const std::string& s) {
    if (s == "id" || s == "identity") return Tta::identity;
    if (s == "flip" || s == "flip_lr") return Tta::flip_lr;
    throw std::invalid_argument("unknown TTA: " + s + " (expected id|flip)");
}

PatchSequence apply_tta(const PatchSequence& seq, Tta tta) {
    if (tta == Tta::identity) return seq;
    PatchSequence out = seq;
    for (auto& p : out.patches) {
        const int ph = p.shape[0], pw = p.shape[1], pz = p.shape[2];
        Tensor<float> flipped(p.shape);
        for (int a = 0; a < ph; ++a)
            for (int b = 0; b < pw; ++b)
                for (int c = 0; c < pz; ++c)
                    flipped[(static_cast<int64_t>(a) * pw + b) * pz + c] =
                        p[(static_cast<int64_t>(a) * pw + b) * pz + (pz - 1 - c)];
        p = std::move(flipped);
    }
    return out;
}

double ensemble_predict(const PatchSequence& seq, std::vector<VcfModel<float>>& models,
                        const std::vector<Tta>& ttas) {
    if (models.empty()) throw std::invalid_argument("ensemble_predict: no models");
    std::vector<Tta> use = ttas;
    if (use.empty()) use.assign(models.size(), Tta::identity);
    if (use.size() == 1 && models.size() > 1) use.assign(models.size(), ttas.front());
    if (use.size() != models.size())
        throw std::invalid_argument("ensemble_predict: need one TTA per model");
    double sum = 0.0;
    for (size_t i = 0; i < models.size(); ++i) {
        const PatchSequence transformed = apply_tta(seq, use[i]);
        sum += predict_series(transformed, models[i]).score;
    }
    return sum / static_cast<double>(models.size());
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_model(VcfModel<float>& model, const TrainMeta& meta, const std::string& path) {
    CheckpointData ckpt;
    const ModelConfig& c = model.cfg;
    ckpt.meta["kind"] = "vcf";
    ckpt.meta["format"] = "1";
    ckpt.meta["ph"] = std::to_string(c.ph);
    ckpt.meta["pw"] = std::to_string(c.pw);
    ckpt.meta["pz"] = std::to_string(c.pz);
    ckpt.meta["feature_dim"] = std::to_string(c.feature_dim);
    ckpt.meta["base_filters"] = std::to_string(c.base_filters);
    ckpt.meta["variant"] = variant_name(c.variant);
    ckpt.meta["smooth_width"] = std::to_string(c.smooth_width);
    ckpt.meta["lambda"] = fmt_double(c.lambda_seq);
    ckpt.meta["use_location"] = c.use_location ? "1" : "0";
    ckpt.meta["lstm_hidden"] = std::to_string(c.lstm_hidden);
    ckpt.meta["config_seed"] = std::to_string(c.seed);
    ckpt.meta["train_seed"] = std::to_string(meta.seed);
    ckpt.meta["epochs"] = std::to_string(meta.epochs);
    ckpt.meta["best_auc"] = fmt_double(meta.best_auc);
    for (auto& [name, t] : model.named_params()) ckpt.tensors.emplace_back(name, *t);
    save_checkpoint(ckpt, path);
}

VcfModel<float> load_model(const std::string& path, TrainMeta* meta) {
    CheckpointData ckpt = load_checkpoint(path);
    if (ckpt.meta.at("kind") != "vcf")
        throw std::runtime_error("load_model: checkpoint is not a series model: " + path);
    ModelConfig c;
    c.ph = std::stoi(ckpt.meta.at("ph"));
    c.pw = std::stoi(ckpt.meta.at("pw"));
    c.pz = std::stoi(ckpt.meta.at("pz"));
    c.feature_dim = std::stoi(ckpt.meta.at("feature_dim"));
    c.base_filters = std::stoi(ckpt.meta.at("base_filters"));
    c.variant = variant_from_name(ckpt.meta.at("variant"));
    c.smooth_width = std::stoi(ckpt.meta.at("smooth_width"));
    c.lambda_seq = std::stod(ckpt.meta.at("lambda"));
    c.use_location = ckpt.meta.at("use_location") == "1";
    c.lstm_hidden = std::stoi(ckpt.meta.at("lstm_hidden"));
    c.seed = std::stoull(ckpt.meta.at("config_seed"));
    VcfModel<float> model(c);
    for (auto& [name, t] : model.named_params()) {
        const Tensor<float>& stored = ckpt.tensor(name);
        if (stored.shape != t->shape)
            throw std::runtime_error("load_model: tensor shape mismatch for " + name + ": " + path);
        *t = stored;
    }
    if (meta) {
        meta->seed = std::stoull(ckpt.meta.at("train_seed"));
        meta->epochs = std::stoi(ckpt.meta.at("epochs"));
        meta->best_auc = std::stod(ckpt.meta.at("best_auc"));
    }
    return model;
}

}  // namespace vseq
