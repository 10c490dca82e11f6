#pragma once

#include <cstdint>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/dsp.hpp"

namespace duotok::losses {

// ---------------------------------------------------------------------------
// CTC

// Token alphabet of size V; the blank id is V (the last class), so frame
// distributions have V+1 columns. Collapse = merge adjacent repeats, then
// delete blanks.
struct CtcVocab {
    std::int64_t size = 0;  // V, excluding blank

    std::int64_t blank() const { return size; }
};

// -log of the total probability over all alignments that collapse to y,
// computed with the log-space forward recursion. Returns +infinity when no
// alignment fits into the given frame count.
double ctc_loss(const Matrix &log_probs, const std::vector<std::int64_t> &target,
                const CtcVocab &vocab);

// Oracle form: enumerates every (V+1)^U path and sums the ones that collapse
// to y. Guarded to U <= 8 and (V+1)^U <= 1e7.
double ctc_brute_force(const Matrix &log_probs, const std::vector<std::int64_t> &target,
                       const CtcVocab &vocab);

// ---------------------------------------------------------------------------
// Spectral reconstruction

// ||S_hat - S||_F / ||S||_F.
double spectral_convergence(const Matrix &s_hat, const Matrix &s);

enum class Reduction { Mean, Sum };

// L1 between log(S_hat + eps) and log(S + eps); entries must be nonnegative.
// Mean normalization by default, Sum for the raw norm.
double log_magnitude_loss(const Matrix &s_hat, const Matrix &s, double eps,
                          Reduction reduction = Reduction::Mean);

// Complex-L1 over all stems: kappa * sum |Re(M_hat-M)| + |Im(M_hat-M)|.
double mss_mask_loss(const std::vector<CMatrix> &m_hat, const std::vector<CMatrix> &m,
                     double kappa);

// Element-wise complex mask application: stem = mask .* mixture.
dsp::ComplexSpectrogram apply_mask(const CMatrix &mask, const dsp::ComplexSpectrogram &mixture);

// ---------------------------------------------------------------------------
// SI-SNR and the diffusion objective

// SI-SNR values are clamped to +/-100 dB; a zero residual reports the +100 dB
// cap instead of infinity.
inline constexpr double kSiSnrCapDb = 100.0;

double si_snr(const std::vector<double> &estimate, const std::vector<double> &reference);

// Per-timestep (alpha_t, sigma_t) pairs, t in 1..T.
struct DiffusionSchedule {
    std::vector<double> alpha;
    std::vector<double> sigma;

    std::int64_t timesteps() const { return static_cast<std::int64_t>(alpha.size()); }
    double alpha_at(std::int64_t t) const { return alpha[static_cast<std::size_t>(t - 1)]; }
    double sigma_at(std::int64_t t) const { return sigma[static_cast<std::size_t>(t - 1)]; }
};

// Checks finiteness and, when variance_preserving, alpha^2 + sigma^2 = 1
// within 1e-9 at every timestep.
void validate(const DiffusionSchedule &sch, bool variance_preserving);

// alpha_t = cos(pi*t/(2T)), sigma_t = sin(pi*t/(2T)): variance-preserving.
DiffusionSchedule make_vp_cosine_schedule(std::int64_t timesteps);

// z_t = alpha_t * y + sigma_t * eps.
std::vector<double> noise_latent(const std::vector<double> &y, const std::vector<double> &eps,
                                 std::int64_t t, const DiffusionSchedule &sch);

// What the network output means when turning z_t back into a clean estimate.
// AsWritten applies alpha_t*z_t - sigma_t*pred, which recovers y exactly when
// pred is the v-target alpha_t*eps - sigma_t*y (variance-preserving case).
// EpsilonInversion treats pred as the noise itself: (z_t - sigma_t*pred)/alpha_t.
enum class DenoiseConvention { AsWritten, EpsilonInversion };

std::vector<double> denoised_estimate(const std::vector<double> &z_t, const std::vector<double> &pred,
                                      std::int64_t t, const DiffusionSchedule &sch,
                                      DenoiseConvention convention = DenoiseConvention::AsWritten);

// Mean squared error between predicted and true noise.
double eps_loss(const std::vector<double> &pred, const std::vector<double> &eps);

// -(si_snr(y_hat, y) - si_snr(z_t, y)): negative when the estimate beats the
// noisy input.
double si_improvement_loss(const std::vector<double> &y_hat, const std::vector<double> &z_t,
                           const std::vector<double> &y);

// ---------------------------------------------------------------------------
// Stage combinators

struct StageWeights {
    double lambda_ctc = 0.5;
    double lambda_mel = 1.0;
    double lambda_chr = 1.0;
    double lambda_mss = 1.0;
    double lambda_vq = 1.0;
    double lambda_si = 1.0;
};

void validate(const StageWeights &w);

// lambda_ctc*ctc + lambda_mel*(mel_sc+mel_mag) + lambda_chr*(chr_sc+chr_mag)
// + lambda_mss*mss.
double stage2_objective(double ctc, double mel_sc, double mel_mag, double chr_sc, double chr_mag,
                        double mss, const StageWeights &w);

// lambda_mel*(mel_sc+mel_mag) + lambda_chr*(chr_sc+chr_mag) + lambda_vq*vq.
double stage3_objective(double mel_sc, double mel_mag, double chr_sc, double chr_mag, double vq,
                        const StageWeights &w);

// eps + lambda_si * si.
double diffusion_loss(double eps_l, double si_l, double lambda_si);

}  // namespace duotok::losses
