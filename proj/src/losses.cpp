#include "duotok/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace duotok::losses {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double log_sum_exp(double a, double b, double c) {
    return log_sum_exp(log_sum_exp(a, b), c);
}

void check_ctc_inputs(const Matrix &log_probs, const std::vector<std::int64_t> &target,
                      const CtcVocab &vocab) {
    require(vocab.size >= 1, "vocabulary must have at least one token");
    require(log_probs.cols == vocab.size + 1, "log-prob rows must have V+1 columns");
    require(!target.empty(), "target must be non-empty");
    require(log_probs.rows >= 1, "need at least one frame");
    for (std::int64_t y : target)
        require(y >= 0 && y < vocab.size, "target token id out of range");
    for (std::int64_t t = 0; t < log_probs.rows; ++t) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < log_probs.cols; ++j) sum += std::exp(log_probs(t, j));
        require(std::abs(sum - 1.0) <= 1e-6, "frame distribution is not normalized");
    }
}

std::int64_t min_frames_for(const std::vector<std::int64_t> &target) {
    std::int64_t needed = static_cast<std::int64_t>(target.size());
    for (std::size_t i = 1; i < target.size(); ++i)
        if (target[i] == target[i - 1]) ++needed;  // a blank must split the repeat
    return needed;
}

void check_vectors(const std::vector<double> &a, const std::vector<double> &b, const char *what) {
    require(a.size() == b.size(), std::string(what) + ": length mismatch");
    require(!a.empty(), std::string(what) + ": empty input");
}

}  // namespace

double ctc_loss(const Matrix &log_probs, const std::vector<std::int64_t> &target,
                const CtcVocab &vocab) {
    check_ctc_inputs(log_probs, target, vocab);
    std::int64_t frames = log_probs.rows;
    if (frames < min_frames_for(target)) return kInf;

    // Blank-interleaved label sequence l' of length 2L+1.
    std::int64_t len = static_cast<std::int64_t>(target.size());
    std::int64_t s_len = 2 * len + 1;
    auto label_at = [&](std::int64_t s) {
        return (s % 2 == 0) ? vocab.blank() : target[static_cast<std::size_t>(s / 2)];
    };

    std::vector<double> alpha(static_cast<std::size_t>(s_len), -kInf);
    std::vector<double> next(static_cast<std::size_t>(s_len), -kInf);
    alpha[0] = log_probs(0, label_at(0));
    if (s_len > 1) alpha[1] = log_probs(0, label_at(1));

    for (std::int64_t t = 1; t < frames; ++t) {
        for (std::int64_t s = 0; s < s_len; ++s) {
            double stay = alpha[static_cast<std::size_t>(s)];
            double step = s >= 1 ? alpha[static_cast<std::size_t>(s - 1)] : -kInf;
            double skip = -kInf;
            if (s >= 2 && label_at(s) != vocab.blank() && label_at(s) != label_at(s - 2))
                skip = alpha[static_cast<std::size_t>(s - 2)];
            next[static_cast<std::size_t>(s)] =
                log_probs(t, label_at(s)) + log_sum_exp(stay, step, skip);
        }
        std::swap(alpha, next);
    }

    double total = log_sum_exp(alpha[static_cast<std::size_t>(s_len - 1)],
                               s_len >= 2 ? alpha[static_cast<std::size_t>(s_len - 2)] : -kInf);
    return total == -kInf ? kInf : -total;
}

double ctc_brute_force(const Matrix &log_probs, const std::vector<std::int64_t> &target,
                       const CtcVocab &vocab) {
    check_ctc_inputs(log_probs, target, vocab);
    std::int64_t frames = log_probs.rows;
    std::int64_t classes = vocab.size + 1;
    require(frames <= 8, "brute-force guard: too many frames");
    double paths = std::pow(static_cast<double>(classes), static_cast<double>(frames));
    require(paths <= 1e7, "brute-force guard: too many paths");

    std::vector<std::int64_t> path(static_cast<std::size_t>(frames), 0);
    std::vector<std::int64_t> collapsed;
    double total = 0.0;
    while (true) {
        double logp = 0.0;
        for (std::int64_t t = 0; t < frames; ++t) logp += log_probs(t, path[static_cast<std::size_t>(t)]);

        collapsed.clear();
        std::int64_t prev = -1;
        for (std::int64_t c : path) {
            if (c != prev) collapsed.push_back(c);
            prev = c;
        }
        std::erase(collapsed, vocab.blank());
        if (collapsed == target) total += std::exp(logp);

        // odometer increment
        std::int64_t pos = frames - 1;
        while (pos >= 0) {
            if (++path[static_cast<std::size_t>(pos)] < classes) break;
            path[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return total > 0.0 ? -std::log(total) : kInf;
}

double spectral_convergence(const Matrix &s_hat, const Matrix &s) {
    require(s_hat.same_shape(s), "spectral_convergence: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        double diff = s_hat.data[i] - s.data[i];
        num += diff * diff;
        den += s.data[i] * s.data[i];
    }
    require(den > 0.0, "spectral_convergence: zero reference norm");
    return std::sqrt(num) / std::sqrt(den);
}

double log_magnitude_loss(const Matrix &s_hat, const Matrix &s, double eps, Reduction reduction) {
    require(s_hat.same_shape(s), "log_magnitude_loss: shape mismatch");
    require(eps > 0.0, "eps must be positive");
    require(!s.data.empty(), "empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        require(s_hat.data[i] >= 0.0 && s.data[i] >= 0.0, "entries must be nonnegative");
        acc += std::abs(std::log(s_hat.data[i] + eps) - std::log(s.data[i] + eps));
    }
    if (reduction == Reduction::Mean) acc /= static_cast<double>(s.data.size());
    return acc;
}

double mss_mask_loss(const std::vector<CMatrix> &m_hat, const std::vector<CMatrix> &m,
                     double kappa) {
    require(kappa > 0.0, "kappa must be positive");
    require(m_hat.size() == m.size() && !m.empty(), "stem count mismatch or empty");
    double acc = 0.0;
    for (std::size_t s = 0; s < m.size(); ++s) {
        require(m_hat[s].same_shape(m[s]), "mss_mask_loss: stem shape mismatch");
        for (std::size_t i = 0; i < m[s].values.size(); ++i) {
            std::complex<double> diff = m_hat[s].values[i] - m[s].values[i];
            acc += std::abs(diff.real()) + std::abs(diff.imag());
        }
    }
    return kappa * acc;
}

dsp::ComplexSpectrogram apply_mask(const CMatrix &mask, const dsp::ComplexSpectrogram &mixture) {
    require(mask.same_shape(mixture.values), "apply_mask: shape mismatch");
    dsp::ComplexSpectrogram stem = mixture;
    for (std::size_t i = 0; i < mask.values.size(); ++i) stem.values.values[i] *= mask.values[i];
    return stem;
}

double si_snr(const std::vector<double> &estimate, const std::vector<double> &reference) {
    check_vectors(estimate, reference, "si_snr");
    double ref_energy = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ref_energy += reference[i] * reference[i];
        dot += estimate[i] * reference[i];
    }
    require(ref_energy > 0.0, "si_snr: zero reference");
    double scale = dot / ref_energy;
    double proj_energy = 0.0, residual_energy = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        double proj = scale * reference[i];
        double res = estimate[i] - proj;
        proj_energy += proj * proj;
        residual_energy += res * res;
    }
    if (residual_energy == 0.0) return kSiSnrCapDb;
    if (proj_energy == 0.0) return -kSiSnrCapDb;
    double db = 10.0 * std::log10(proj_energy / residual_energy);
    return std::clamp(db, -kSiSnrCapDb, kSiSnrCapDb);
}

void validate(const DiffusionSchedule &sch, bool variance_preserving) {
    require(sch.alpha.size() == sch.sigma.size() && !sch.alpha.empty(),
            "schedule must have matching non-empty alpha/sigma");
    for (std::size_t i = 0; i < sch.alpha.size(); ++i) {
        require(std::isfinite(sch.alpha[i]) && std::isfinite(sch.sigma[i]),
                "schedule entries must be finite");
        require(sch.alpha[i] >= 0.0 && sch.sigma[i] >= 0.0, "schedule entries must be nonnegative");
        if (variance_preserving) {
            double sq = sch.alpha[i] * sch.alpha[i] + sch.sigma[i] * sch.sigma[i];
            require(std::abs(sq - 1.0) <= 1e-9, "schedule is not variance-preserving");
        }
    }
}

DiffusionSchedule make_vp_cosine_schedule(std::int64_t timesteps) {
    require(timesteps >= 1, "need at least one timestep");
    DiffusionSchedule sch;
    sch.alpha.resize(static_cast<std::size_t>(timesteps));
    sch.sigma.resize(static_cast<std::size_t>(timesteps));
    for (std::int64_t t = 1; t <= timesteps; ++t) {
        double phase = kPi * static_cast<double>(t) / (2.0 * static_cast<double>(timesteps));
        sch.alpha[static_cast<std::size_t>(t - 1)] = std::cos(phase);
        sch.sigma[static_cast<std::size_t>(t - 1)] = std::sin(phase);
    }
    return sch;
}

static void check_timestep(std::int64_t t, const DiffusionSchedule &sch) {
    require(t >= 1 && t <= sch.timesteps(), "timestep out of range");
}

std::vector<double> noise_latent(const std::vector<double> &y, const std::vector<double> &eps,
                                 std::int64_t t, const DiffusionSchedule &sch) {
    check_vectors(y, eps, "noise_latent");
    check_timestep(t, sch);
    double a = sch.alpha_at(t), s = sch.sigma_at(t);
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = a * y[i] + s * eps[i];
    return z;
}

std::vector<double> denoised_estimate(const std::vector<double> &z_t, const std::vector<double> &pred,
                                      std::int64_t t, const DiffusionSchedule &sch,
                                      DenoiseConvention convention) {
    check_vectors(z_t, pred, "denoised_estimate");
    check_timestep(t, sch);
    double a = sch.alpha_at(t), s = sch.sigma_at(t);
    std::vector<double> y_hat(z_t.size());
    if (convention == DenoiseConvention::AsWritten) {
        for (std::size_t i = 0; i < z_t.size(); ++i) y_hat[i] = a * z_t[i] - s * pred[i];
    } else {
        require(a > 0.0, "epsilon inversion needs alpha_t > 0");
        for (std::size_t i = 0; i < z_t.size(); ++i) y_hat[i] = (z_t[i] - s * pred[i]) / a;
    }
    return y_hat;
}

double eps_loss(const std::vector<double> &pred, const std::vector<double> &eps) {
    check_vectors(pred, eps, "eps_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        double diff = pred[i] - eps[i];
        acc += diff * diff;
    }
    return acc / static_cast<double>(eps.size());
}

double si_improvement_loss(const std::vector<double> &y_hat, const std::vector<double> &z_t,
                           const std::vector<double> &y) {
    return -(si_snr(y_hat, y) - si_snr(z_t, y));
}

void validate(const StageWeights &w) {
    for (double v : {w.lambda_ctc, w.lambda_mel, w.lambda_chr, w.lambda_mss, w.lambda_vq, w.lambda_si})
        require(std::isfinite(v) && v >= 0.0, "stage weights must be finite and nonnegative");
}

double stage2_objective(double ctc, double mel_sc, double mel_mag, double chr_sc, double chr_mag,
                        double mss, const StageWeights &w) {
    validate(w);
    for (double v : {ctc, mel_sc, mel_mag, chr_sc, chr_mag, mss})
        require(std::isfinite(v) && v >= 0.0, "loss components must be finite and nonnegative");
    return w.lambda_ctc * ctc + w.lambda_mel * (mel_sc + mel_mag) +
           w.lambda_chr * (chr_sc + chr_mag) + w.lambda_mss * mss;
}

double stage3_objective(double mel_sc, double mel_mag, double chr_sc, double chr_mag, double vq,
                        const StageWeights &w) {
    validate(w);
    for (double v : {mel_sc, mel_mag, chr_sc, chr_mag, vq})
        require(std::isfinite(v) && v >= 0.0, "loss components must be finite and nonnegative");
    return w.lambda_mel * (mel_sc + mel_mag) + w.lambda_chr * (chr_sc + chr_mag) +
           w.lambda_vq * vq;
}

double diffusion_loss(double eps_l, double si_l, double lambda_si) {
    require(std::isfinite(eps_l) && std::isfinite(si_l) && std::isfinite(lambda_si),
            "diffusion loss components must be finite");
    return eps_l + lambda_si * si_l;
}

}  // namespace duotok::losses
