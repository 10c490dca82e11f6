#include "duotok/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace duotok::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

using cd = std::complex<double>;

// In-place iterative radix-2 FFT. Sizes are powers of two by StftConfig
// contract, which keeps this self-contained and bit-reproducible.
void fft_inplace(cd *a, std::int64_t n, const std::vector<cd> &twiddle) {
    for (std::int64_t i = 1, j = 0; i < n; ++i) {
        std::int64_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::int64_t len = 2; len <= n; len <<= 1) {
        std::int64_t stride = n / len;
        for (std::int64_t i = 0; i < n; i += len) {
            for (std::int64_t k = 0; k < len / 2; ++k) {
                cd w = twiddle[static_cast<std::size_t>(k * stride)];
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

std::vector<cd> make_twiddles(std::int64_t n) {
    std::vector<cd> tw(static_cast<std::size_t>(n / 2));
    for (std::int64_t k = 0; k < n / 2; ++k) {
        double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
        tw[static_cast<std::size_t>(k)] = cd(std::cos(ang), std::sin(ang));
    }
    return tw;
}

std::vector<double> hann_window(std::int64_t n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

// Sample with reflection at both ends (no edge repetition).
double sample_reflected(const std::vector<double> &x, std::int64_t i) {
    std::int64_t n = static_cast<std::int64_t>(x.size());
    if (n == 1) return x[0];
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return x[static_cast<std::size_t>(i)];
}

std::int64_t frame_count(std::int64_t len, const StftConfig &cfg) {
    if (cfg.center_pad) return len / cfg.hop + 1;
    require(len >= cfg.fft_size, "waveform shorter than one analysis window");
    return (len - cfg.fft_size) / cfg.hop + 1;
}

void fill_frame(const Waveform &w, const StftConfig &cfg, const std::vector<double> &window,
                const std::vector<cd> &twiddle, std::int64_t t, cd *buf, ComplexSpectrogram &out) {
    std::int64_t n = cfg.fft_size;
    std::int64_t start = cfg.center_pad ? t * cfg.hop - n / 2 : t * cfg.hop;
    for (std::int64_t i = 0; i < n; ++i) {
        double s = cfg.center_pad ? sample_reflected(w.samples, start + i)
                                  : w.samples[static_cast<std::size_t>(start + i)];
        buf[i] = cd(s * window[static_cast<std::size_t>(i)], 0.0);
    }
    fft_inplace(buf, n, twiddle);
    std::int64_t bins = n / 2 + 1;
    for (std::int64_t k = 0; k < bins; ++k) out.values(t, k) = buf[k];
}

template <bool Parallel>
ComplexSpectrogram stft_impl(const Waveform &w, const StftConfig &cfg) {
    validate(w);
    validate(cfg);
    std::int64_t frames = frame_count(static_cast<std::int64_t>(w.samples.size()), cfg);
    std::int64_t bins = cfg.fft_size / 2 + 1;
    ComplexSpectrogram out;
    out.values = CMatrix(frames, bins);
    out.frame_rate = w.sample_rate / static_cast<double>(cfg.hop);
    out.bin_hz = w.sample_rate / static_cast<double>(cfg.fft_size);
    const std::vector<double> window = hann_window(cfg.fft_size);
    const std::vector<cd> twiddle = make_twiddles(cfg.fft_size);

    if constexpr (Parallel) {
#pragma omp parallel
        {
            std::vector<cd> buf(static_cast<std::size_t>(cfg.fft_size));
#pragma omp for schedule(static)
            for (std::int64_t t = 0; t < frames; ++t)
                fill_frame(w, cfg, window, twiddle, t, buf.data(), out);
        }
    } else {
        std::vector<cd> buf(static_cast<std::size_t>(cfg.fft_size));
        for (std::int64_t t = 0; t < frames; ++t)
            fill_frame(w, cfg, window, twiddle, t, buf.data(), out);
    }
    return out;
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

void log_mel_row(const ComplexSpectrogram &spec, const Matrix &fb, double eps,
                 std::int64_t t, std::vector<double> &mag, Matrix &out) {
    for (std::int64_t k = 0; k < fb.cols; ++k)
        mag[static_cast<std::size_t>(k)] = std::abs(spec.values(t, k));
    for (std::int64_t m = 0; m < fb.rows; ++m) {
        double acc = 0.0;
        const double *weights = fb.row(m);
        for (std::int64_t k = 0; k < fb.cols; ++k)
            acc += weights[k] * mag[static_cast<std::size_t>(k)];
        out(t, m) = std::log(acc + eps);
    }
}

}  // namespace

void validate(const Waveform &w) {
    require(!w.samples.empty(), "waveform is empty");
    require(w.sample_rate > 0.0, "sample rate must be positive");
    for (double s : w.samples)
        require(std::isfinite(s), "waveform contains non-finite samples");
}

void validate(const StftConfig &cfg) {
    require(cfg.fft_size > 0 && (cfg.fft_size & (cfg.fft_size - 1)) == 0,
            "fft_size must be a power of two");
    require(cfg.hop > 0 && cfg.hop <= cfg.fft_size, "hop must satisfy 0 < hop <= fft_size");
}

ComplexSpectrogram stft(const Waveform &w, const StftConfig &cfg) {
    return stft_impl<true>(w, cfg);
}

ComplexSpectrogram stft_serial(const Waveform &w, const StftConfig &cfg) {
    return stft_impl<false>(w, cfg);
}

Matrix mel_filterbank(double sample_rate, std::int64_t fft_size, std::int64_t n_mels,
                      double fmin, double fmax) {
    require(sample_rate > 0.0, "sample rate must be positive");
    require(fft_size > 0 && (fft_size & (fft_size - 1)) == 0, "fft_size must be a power of two");
    require(n_mels > 0, "n_mels must be positive");
    require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
            "need 0 <= fmin < fmax <= nyquist");

    std::int64_t bins = fft_size / 2 + 1;
    double mel_lo = hz_to_mel(fmin);
    double mel_hi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
    for (std::int64_t i = 0; i < n_mels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    Matrix fb(n_mels, bins);
    for (std::int64_t m = 0; m < n_mels; ++m) {
        double lo = edges[static_cast<std::size_t>(m)];
        double mid = edges[static_cast<std::size_t>(m + 1)];
        double hi = edges[static_cast<std::size_t>(m + 2)];
        bool any = false;
        for (std::int64_t k = 0; k < bins; ++k) {
            double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
            double up = (f - lo) / (mid - lo);
            double down = (hi - f) / (hi - mid);
            double v = std::max(0.0, std::min(up, down));
            fb(m, k) = v;
            any = any || v > 0.0;
        }
        if (!any)
            throw std::invalid_argument("mel_filterbank: band too narrow, filter " +
                                        std::to_string(m) + " has no nonzero weight");
    }
    return fb;
}

Matrix log_mel(const ComplexSpectrogram &spec, const Matrix &fb, double eps) {
    require(eps > 0.0, "eps must be positive");
    require(fb.cols == spec.values.cols, "filterbank column count must equal bin count");
    Matrix out(spec.values.rows, fb.rows);
#pragma omp parallel
    {
        std::vector<double> mag(static_cast<std::size_t>(fb.cols));
#pragma omp for schedule(static)
        for (std::int64_t t = 0; t < spec.values.rows; ++t) log_mel_row(spec, fb, eps, t, mag, out);
    }
    return out;
}

Matrix log_mel_serial(const ComplexSpectrogram &spec, const Matrix &fb, double eps) {
    require(eps > 0.0, "eps must be positive");
    require(fb.cols == spec.values.cols, "filterbank column count must equal bin count");
    Matrix out(spec.values.rows, fb.rows);
    std::vector<double> mag(static_cast<std::size_t>(fb.cols));
    for (std::int64_t t = 0; t < spec.values.rows; ++t) log_mel_row(spec, fb, eps, t, mag, out);
    return out;
}

Chromagram chroma(const ComplexSpectrogram &spec, double ref_freq) {
    require(ref_freq > 0.0, "reference frequency must be positive");
    require(spec.bin_hz > 0.0, "spectrogram lacks bin spacing metadata");
    std::int64_t frames = spec.values.rows;
    std::int64_t bins = spec.values.cols;
    double df = spec.bin_hz;

    Chromagram out;
    out.values = Matrix(frames, 12);
    out.frame_rate = spec.frame_rate;

#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < frames; ++t) {
        double *row = out.values.row(t);
        for (std::int64_t k = 1; k < bins; ++k) {
            double mag = std::abs(spec.values(t, k));
            if (mag == 0.0) continue;
            double f = static_cast<double>(k) * df;
            double st = std::round(12.0 * std::log2(f / ref_freq));
            std::int64_t cls = static_cast<std::int64_t>(st) % 12;
            cls = ((cls + 12) % 12 + 9) % 12;  // ref_freq -> class 9 (A)
            row[cls] += mag * mag;
        }
        double norm = 0.0;
        for (int c = 0; c < 12; ++c) norm += row[c] * row[c];
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (int c = 0; c < 12; ++c) row[c] /= norm;
    }
    return out;
}

double mel_l1(const Matrix &a, const Matrix &b) {
    require(a.same_shape(b), "mel_l1: shape mismatch");
    require(a.rows > 0 && a.cols > 0, "mel_l1: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
    return acc / static_cast<double>(a.data.size());
}

}  // namespace duotok::dsp
