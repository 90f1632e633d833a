#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vseq/checkpoint.hpp"
#include "vseq/nn.hpp"
#include "vseq/phantom.hpp"
#include "vseq/volume.hpp"

namespace vseq {

struct BoxDetection {
    double cx = 0.0, cy = 0.0;  // center, voxels of the source slice
    double w = 0.0, h = 0.0;    // size, voxels
    double confidence = 0.0;
    int slice_index = 0;
};

// Per-slice cord centers covering every axial slice; entries between
// detections are linear interpolations, ends extend the nearest detection.
struct CordTrack {
    std::vector<std::array<double, 2>> center;  // (cx, cy) per slice
    std::vector<bool> detected;

    size_t size() const { return center.size(); }
};

// detections must be sorted by slice index, at least one entry
CordTrack interpolate_track(const std::vector<BoxDetection>& detections, int nz);

// detector sampling stride in slices for a 30 mm spacing
int detection_stride(double sz_mm);

double box_iou(double cx0, double cy0, double w0, double h0, double cx1, double cy1, double w1,
               double h1);

struct DetectorConfig {
    int input_size = 56;   // slice is resized to input_size x input_size
    int grid = 7;          // SxS cells, one predictor each: (tx,ty,tw,th,conf)
    double anchor_px = 6.0;
    uint64_t seed = 0;
};

// Small single-class grid detector: 4 conv layers (8,16,32,32 filters,
// 2x2 pooling after the first three) and a 1x1 head with 5 output maps.
// 2D slices ride through the 3D kernels with a unit z extent.
struct DetectorNet {
    DetectorConfig cfg;
    Conv3d<float> c1, c2, c3, c4, head;
    ReLU<float> r1, r2, r3, r4;
    MaxPool3d<float> p1, p2, p3;

    explicit DetectorNet(const DetectorConfig& cfg_);

    Tensor<float> forward(const Tensor<float>& input);      // (1,S,S,1) -> (5,g,g,1)
    void backward(const Tensor<float>& d_out);
    std::vector<Tensor<float>*> params();
    std::vector<Tensor<float>*> grads();
    void zero_grad();
    void init_params();
};

// raw cell prediction <-> box in input-image pixels
struct CellPrediction {
    int gy = 0, gx = 0;
    double tx = 0, ty = 0, tw = 0, th = 0;
};
BoxDetection decode_cell(const CellPrediction& p, const DetectorConfig& cfg, double confidence);
CellPrediction encode_box(double cx, double cy, double w, double h, const DetectorConfig& cfg);

// Windowed 2D slice (shape {h,w}) -> highest-confidence box in slice
// coordinates. Ties break to the first cell in row-major order.
BoxDetection detect_slice(const Tensor<float>& slice, DetectorNet& net);

// full-volume track: detect every `stride` slices, then interpolate
CordTrack detect_cord_track(const Volume& volume, DetectorNet& net, const WindowSpec& window);

CordTrack cord_track_from_truth(const SeriesTruth& truth, int nz);

struct DetectorExample {
    Tensor<float> slice;  // windowed, shape {h, w}
    double cx = 0, cy = 0, w = 0, h = 0;  // ground-truth box, slice voxels
};

struct DetectorTrainConfig {
    int epochs = 60;
    int batch = 16;
    double lr = 1e-3;
    uint64_t seed = 1;
    double coord_weight = 5.0;
    double noobj_weight = 0.5;
};

struct DetectorTrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

DetectorTrainResult train_detector(DetectorNet& net, const std::vector<DetectorExample>& dataset,
                                   const DetectorTrainConfig& cfg);

// draw windowed axial slices + truth boxes from a manifest partition
std::vector<DetectorExample> sample_detector_examples(const DatasetManifest& manifest,
                                                      const std::string& part, int n_slices,
                                                      const WindowSpec& window, uint64_t seed);

void save_detector(const DetectorNet& net, const std::string& path);
DetectorNet load_detector(const std::string& path);

Tensor<float> resize_bilinear_2d(const Tensor<float>& img, int oh, int ow);

}  // namespace vseq
