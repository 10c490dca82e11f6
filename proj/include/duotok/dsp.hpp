#pragma once

#include <cstdint>
#include <vector>

#include "duotok/core.hpp"

namespace duotok::dsp {

// Mono waveform, samples nominally in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    double sample_rate = 0.0;  // Hz
};

void validate(const Waveform &w);

// Analysis settings. The window is a periodic Hann; fft_size must be a power
// of two and hop must satisfy 0 < hop <= fft_size.
struct StftConfig {
    std::int64_t fft_size = 1024;
    std::int64_t hop = 240;
    bool center_pad = true;  // reflect-pad by fft_size/2 on both sides
};

void validate(const StftConfig &cfg);

// One-sided complex spectrogram, frames x (fft_size/2 + 1) bins.
struct ComplexSpectrogram {
    CMatrix values;           // U x F
    double frame_rate = 0.0;  // Hz = sample_rate / hop
    double bin_hz = 0.0;      // Hz per bin = sample_rate / fft_size
};

// Chromagram: frames x 12, each row L2-normalized or exactly zero.
struct Chromagram {
    Matrix values;  // U x 12
    double frame_rate = 0.0;
};

// With center padding U = floor(len/hop) + 1; without it the signal must be
// at least one window long and U = floor((len - fft_size)/hop) + 1.
ComplexSpectrogram stft(const Waveform &w, const StftConfig &cfg);
ComplexSpectrogram stft_serial(const Waveform &w, const StftConfig &cfg);

// Triangular mel filterbank on the Slaney mel scale, n_mels x F, peak weight
// 1 per triangle. Throws if the band is too narrow to give every filter a
// nonzero weight at the FFT bin centres.
Matrix mel_filterbank(double sample_rate, std::int64_t fft_size, std::int64_t n_mels,
                      double fmin, double fmax);

// log(fb . |X| + eps), frames x n_mels.
Matrix log_mel(const ComplexSpectrogram &spec, const Matrix &fb, double eps);
Matrix log_mel_serial(const ComplexSpectrogram &spec, const Matrix &fb, double eps);

// Folds per-bin energy (|X|^2) into 12 pitch classes by rounded semitone
// distance from ref_freq (A4). Class indices follow the C=0 convention, so
// ref_freq lands in class 9 (A). Silent frames stay exactly zero.
Chromagram chroma(const ComplexSpectrogram &spec, double ref_freq = 440.0);

// Mean absolute difference between two equally shaped log-mel matrices.
double mel_l1(const Matrix &a, const Matrix &b);

// Default analysis settings: 24 kHz mono, fft 1024, hop 240 (100 Hz frames),
// 128 Slaney mel bands over the full band, eps 1e-5.
inline constexpr double kDefaultSampleRate = 24000.0;
inline constexpr std::int64_t kDefaultNMels = 128;
inline constexpr double kDefaultLogEps = 1e-5;

}  // namespace duotok::dsp
