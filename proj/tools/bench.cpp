// Timing harness comparing the OpenMP kernels against their serial reference
// implementations. Every pair is also checked for bit-identical output, so
// this doubles as a quick consistency run on larger shapes than the tests use.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "duotok/bestrq.hpp"
#include "duotok/dsp.hpp"
#include "duotok/features.hpp"
#include "duotok/rng.hpp"
#include "duotok/simvq.hpp"

using namespace duotok;

namespace {

double time_best_of(const std::function<void()> &fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double max_abs_diff(const Matrix &a, const Matrix &b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

void report(const char *name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-22s %10.2f ms %10.2f ms %8.2fx   max|diff| %.3g\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms, diff);
}

FeatureSequence random_features(std::uint64_t seed, std::int64_t frames, std::int64_t dim) {
    FeatureSequence fs;
    fs.frame_rate = 100.0;
    fs.values = Matrix(frames, dim);
    rng::SplitMix64 g(seed);
    for (double &v : fs.values.data) v = rng::gaussian(g);
    return fs;
}

}  // namespace

int main() {
    const int reps = 3;
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        dsp::Waveform w;
        w.sample_rate = 24000.0;
        w.samples.resize(24000 * 30);
        rng::SplitMix64 g(1);
        for (double &s : w.samples) s = 0.25 * rng::gaussian(g);
        dsp::StftConfig cfg;

        dsp::ComplexSpectrogram serial_out, parallel_out;
        double ts = time_best_of([&] { serial_out = dsp::stft_serial(w, cfg); }, reps);
        double tp = time_best_of([&] { parallel_out = dsp::stft(w, cfg); }, reps);
        double diff = 0.0;
        for (std::size_t i = 0; i < serial_out.values.values.size(); ++i)
            diff = std::max(diff, std::abs(serial_out.values.values[i] - parallel_out.values.values[i]));
        report("stft (30 s @ 24 kHz)", ts, tp, diff);

        Matrix fb = dsp::mel_filterbank(24000.0, 1024, 128, 0.0, 12000.0);
        Matrix ms, mp;
        ts = time_best_of([&] { ms = dsp::log_mel_serial(serial_out, fb, 1e-5); }, reps);
        tp = time_best_of([&] { mp = dsp::log_mel(serial_out, fb, 1e-5); }, reps);
        report("log_mel (128 bands)", ts, tp, max_abs_diff(ms, mp));
    }

    {
        FeatureSequence fs = random_features(2, 4096, 64);
        auto rq = bestrq::init_random_quantizer(7, 64, 16, 1024);
        std::vector<std::uint32_t> as, ap;
        double ts = time_best_of([&] { as = bestrq::assign_targets_serial(fs, rq); }, reps);
        double tp = time_best_of([&] { ap = bestrq::assign_targets(fs, rq); }, reps);
        double diff = 0.0;
        for (std::size_t i = 0; i < as.size(); ++i)
            diff = std::max(diff, std::abs(double(as[i]) - double(ap[i])));
        report("bestrq targets", ts, tp, diff);
    }

    {
        auto cb = simvq::init_codebook(3, 4096, 64);
        Matrix es, ep;
        double ts = time_best_of([&] { es = simvq::effective_codebook_serial(cb); }, reps);
        double tp = time_best_of([&] { ep = simvq::effective_codebook(cb); }, reps);
        report("effective codebook", ts, tp, max_abs_diff(es, ep));

        FeatureSequence fs = random_features(4, 4096, 64);
        simvq::QuantizeResult qs, qp;
        ts = time_best_of([&] { qs = simvq::quantize_serial(fs, cb, 0.25); }, reps);
        tp = time_best_of([&] { qp = simvq::quantize(fs, cb, 0.25); }, reps);
        double diff = max_abs_diff(qs.quantized, qp.quantized);
        report("quantize (K=4096)", ts, tp, diff);

        Matrix gs, gp;
        ts = time_best_of([&] { gs = simvq::vq_grad_w_serial(fs, cb, qs.indices); }, reps);
        tp = time_best_of([&] { gp = simvq::vq_grad_w(fs, cb, qp.indices); }, reps);
        report("vq_grad_w", ts, tp, max_abs_diff(gs, gp));
    }

    return 0;
}
