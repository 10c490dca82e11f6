#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/features.hpp"

namespace duotok::simvq {

using duotok::Route;

// Frozen codebook C with a learnable linear basis W; the effective codebook
// is C*W and is recomputed from scratch whenever it is needed.
struct Codebook {
    Matrix c;  // K x d, frozen after init
    Matrix w;  // d x d, learnable
    std::uint64_t seed = 0;

    std::int64_t size() const { return c.rows; }
    std::int64_t dim() const { return c.cols; }
};

// W starts at the identity so the effective codebook equals C at step 0.
Codebook init_codebook(std::uint64_t seed, std::int64_t k, std::int64_t d);

// Independent vocal and accompaniment codebooks sharing (K, d).
struct DualCodebookBank {
    Codebook vocal;
    Codebook accomp;

    Codebook &branch(Route r) { return r == Route::Vocal ? vocal : accomp; }
    const Codebook &branch(Route r) const { return r == Route::Vocal ? vocal : accomp; }
    std::int64_t size() const { return vocal.size(); }
    std::int64_t dim() const { return vocal.dim(); }
};

DualCodebookBank init_bank(std::uint64_t seed, std::int64_t k, std::int64_t d);

Matrix effective_codebook(const Codebook &cb);
Matrix effective_codebook_serial(const Codebook &cb);

struct QuantizeResult {
    std::vector<std::uint32_t> indices;  // per frame
    Matrix quantized;                    // U x d, row t copied from effective codebook
    double codebook_term = 0.0;          // mean_t ||e_t - q_t||^2, gradient flows to W
    double commitment_term = 0.0;        // same value; gradient role differs (stop-gradient on q)
};

// Nearest-neighbor quantization in the effective codebook of the routed
// branch, ties to the lowest index.
QuantizeResult quantize(const FeatureSequence &e, const DualCodebookBank &bank, Route route,
                        double beta);
QuantizeResult quantize_serial(const FeatureSequence &e, const DualCodebookBank &bank, Route route,
                               double beta);

// Same operation against one codebook (the routed branch already picked).
QuantizeResult quantize(const FeatureSequence &e, const Codebook &cb, double beta);
QuantizeResult quantize_serial(const FeatureSequence &e, const Codebook &cb, double beta);

// codebook_term + beta * commitment_term.
double vq_loss(const QuantizeResult &res, double beta);

// Gradient of mean_t ||e_t - C_{k_t} W||^2 with respect to W at frozen
// assignments: (-2/U) sum_t C_{k_t}^T (e_t - q_t). The commitment term
// contributes nothing (its q is stop-gradiented).
Matrix vq_grad_w(const FeatureSequence &e, const Codebook &cb,
                 const std::vector<std::uint32_t> &assignments);
Matrix vq_grad_w_serial(const FeatureSequence &e, const Codebook &cb,
                        const std::vector<std::uint32_t> &assignments);

struct AdamWParams {
    double beta1 = 0.9;
    double beta2 = 0.96;
    double weight_decay = 0.1;
    double eps = 1e-8;
};

struct AdamWState {
    Matrix m;  // first moment, d x d
    Matrix v;  // second moment, d x d
    std::int64_t step = 0;
};

AdamWState init_adamw_state(std::int64_t d);

// Decoupled weight decay with bias correction; increments the step counter.
void adamw_step(Codebook &cb, const Matrix &grad, AdamWState &state, double lr,
                const AdamWParams &params = {});

// Warmup-cosine schedule: linear ramp 0 -> peak over warmup_steps, then
// periodic cosine cycles peak*0.5*(1 + cos(2*pi*((step-warmup) mod cycle)/cycle)).
struct ScheduleConfig {
    double peak_lr = 1e-4;
    std::int64_t warmup_steps = 3000;
    std::int64_t cycle_steps = 30000;
};

double lr_at(std::int64_t step, const ScheduleConfig &sch);

struct CodebookStats {
    double utilization = 0.0;  // distinct / K
    double entropy = 0.0;      // nats
};

CodebookStats codebook_stats(const std::vector<std::uint32_t> &indices, std::int64_t k);

struct TrainRecord {
    std::int64_t step = 0;
    Route route = Route::Vocal;
    double lr = 0.0;
    double vq_loss = 0.0;
    double utilization = 0.0;
    double entropy = 0.0;
};

struct Batch {
    FeatureSequence features;
    Route route = Route::Vocal;
};

struct TrainOptions {
    double beta = 0.25;
    ScheduleConfig schedule;
    AdamWParams optimizer;
    std::int64_t steps = 0;
};

// Optimizes only W (C stays frozen), cycling through the batches in order.
// Each step updates exactly the branch named by its batch's route.
std::vector<TrainRecord> train_w(const std::vector<Batch> &batches, DualCodebookBank &bank,
                                 const TrainOptions &opts);

// DTCB container (one codebook per file): magic "DTCB", version u16, K u32,
// d u32, then C rows, then W rows as little-endian f64.
void write_codebook(const std::string &path, const Codebook &cb);
Codebook read_codebook(const std::string &path);

}  // namespace duotok::simvq
