#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stylepad/combinator.hpp"
#include "stylepad/dataio.hpp"
#include "stylepad/nn.hpp"
#include "stylepad/optim.hpp"
#include "stylepad/rng.hpp"
#include "stylepad/styles.hpp"
#include "stylepad/tensor.hpp"

namespace stylepad {

// beta_1..beta_T with derived quantities. Index t runs 1..T; alpha_bar(0) == 1.
struct NoiseSchedule {
    int64_t T = 0;
    std::vector<double> beta;           // [T]
    std::vector<double> alpha;          // [T]
    std::vector<double> alpha_bar;      // [T]
    std::vector<double> posterior_var;  // [T], beta_t * (1 - abar_{t-1}) / (1 - abar_t)

    double beta_at(int64_t t) const { return beta[static_cast<size_t>(t - 1)]; }
    double alpha_at(int64_t t) const { return alpha[static_cast<size_t>(t - 1)]; }
    double alpha_bar_at(int64_t t) const {
        return t == 0 ? 1.0 : alpha_bar[static_cast<size_t>(t - 1)];
    }
    double posterior_var_at(int64_t t) const { return posterior_var[static_cast<size_t>(t - 1)]; }
    void require_valid_t(int64_t t) const;
};

// Linear beta interpolation from beta_1 to beta_T.
NoiseSchedule make_schedule(int64_t T, double beta_1, double beta_T);

// Closed-form q(x_t | x_0): sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor forward_diffuse(const Tensor& x0, int64_t t, const Tensor& eps,
                       const NoiseSchedule& schedule);

struct GuidanceConfig {
    double omega = 1.2;
    double condition_drop_prob = 0.5;
    void validate() const;
};

struct UNetConfig {
    int64_t k_channels = 3;   // data channels
    int64_t length = 64;      // window length; must divide by 2^(levels-1)
    int64_t style_dim = 64;   // H
    int64_t base_channels = 16;
    std::vector<int64_t> channel_mults = {1, 2};
    int64_t time_sinusoid_dim = 32;
    int64_t time_emb_dim = 256;   // both linear layers of the timestep MLP
    int64_t style_hidden = 100;   // first style linear
    int64_t style_emb_dim = 64;   // second style linear
    bool attention = false;       // optional per-block attention, off by default
};

// Anything that can predict the noise for a batch of samples under a style
// condition. A zero style row encodes the unconditional case. Guidance and
// sampling are written against this interface so tests can swap in analytic
// predictors with known composed distributions.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Tensor epsilon(const Tensor& x, const std::vector<int64_t>& t,
                           const Tensor& style) const = 0;
    virtual int64_t k_channels() const = 0;
    virtual int64_t length() const = 0;
    virtual int64_t style_dim() const = 0;
};

// 1D UNet noise predictor: init conv, downsampling stages of two residual
// blocks (conv k=3), one middle residual block, mirrored upsampling stages
// with skip connections (transposed conv k=3). Timestep and style embeddings
// are concatenated and injected into every residual block as a per-channel
// bias. The unconditional case is encoded by an all-zero style vector.
class DenoiserModel : public NoisePredictor {
public:
    DenoiserModel(const UNetConfig& cfg, uint64_t init_seed);

    // x [B,K,L], t per sample (1..T), style [B,H] (zero rows = unconditional)
    Tensor forward(const Tensor& x, const std::vector<int64_t>& t, const Tensor& style) const;
    Tensor epsilon(const Tensor& x, const std::vector<int64_t>& t,
                   const Tensor& style) const override {
        return forward(x, t, style);
    }
    int64_t k_channels() const override { return cfg_.k_channels; }
    int64_t length() const override { return cfg_.length; }
    int64_t style_dim() const override { return cfg_.style_dim; }

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const UNetConfig& config() const { return cfg_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    struct ResBlock {
        GroupNorm gn1, gn2;
        Conv1d conv1, conv2;
        Linear cond;          // cond vector -> per-channel bias
        Conv1d skip;          // 1x1 when channel counts differ
        bool has_skip = false;
    };
    struct AttnBlock {
        Conv1d q, k, v, proj;  // 1x1 convs
    };

    Tensor res_forward(const ResBlock& b, const Tensor& x, const Tensor& cond) const;
    Tensor attn_forward(const AttnBlock& a, const Tensor& x) const;

    UNetConfig cfg_;
    ParameterSet params_;
    Conv1d init_conv_;
    Linear time_fc1_, time_fc2_;
    Linear style_fc1_, style_fc2_;
    struct DownStage {
        ResBlock r1, r2;
        AttnBlock attn;
        Conv1d down;  // stride-2, absent on the last stage
        bool has_down = false;
    };
    struct UpStage {
        ResBlock r1, r2;
        AttnBlock attn;
        ConvTranspose1d up;
        bool has_up = false;
    };
    std::vector<DownStage> down_;
    ResBlock mid_;
    AttnBlock mid_attn_;
    std::vector<UpStage> up_;
    GroupNorm final_gn_;
    Conv1d final_conv_;
};

// One optimization step of Eq.-style conditional training: per-sample
// t ~ U{1..T}, eps ~ N(0,I), condition dropped (style zeroed) with
// probability `guidance.condition_drop_prob`; loss = mean ||eps - eps_theta||^2.
double diffusion_training_step(const std::vector<const TimeSeriesInstance*>& batch,
                               const std::vector<const StyleVector*>& styles,
                               DenoiserModel& model, AdamState& adam,
                               const GuidanceConfig& guidance, const NoiseSchedule& schedule,
                               RngStream& rng);

// Classifier-free guidance: eps_uncond + omega * (eps_cond - eps_uncond).
Tensor cfg_epsilon(const Tensor& x_t, int64_t t, const StyleVector& s,
                   const NoisePredictor& model, double omega);

// Style-fused guidance: eps_uncond + omega * sum_s (eps_s - eps_uncond).
// Exactly |D_j| + 1 denoiser evaluations; the singleton case reproduces
// cfg_epsilon bit for bit.
Tensor fused_epsilon(const Tensor& x_t, int64_t t, const StyleCombination& d,
                     const NoisePredictor& model, double omega);

// One ancestral step: mu = (x_t - beta_t/sqrt(1-abar_t) * eps_hat)/sqrt(alpha_t);
// adds sigma_t * z for t > 1 and is deterministic at t = 1.
Tensor reverse_step(const Tensor& x_t, int64_t t, const Tensor& eps_hat,
                    const NoiseSchedule& schedule, RngStream& rng);

struct SampleOptions {
    double omega = 1.2;
    double clip = 6.0;  // |x_t| clamp during sampling; 0 disables
};

// Full reverse chain from x_T ~ N(0, I) under one style combination.
TimeSeriesInstance sample(const StyleCombination& d, const NoisePredictor& model,
                          const NoiseSchedule& schedule, const SampleOptions& opts,
                          RngStream& rng);

// Batched chains; per-chain RNG streams are keyed by combination_id, so
// results are independent of batch partitioning and identical to sample().
std::vector<TimeSeriesInstance> sample_batch(const std::vector<StyleCombination>& conditions,
                                             const NoisePredictor& model,
                                             const NoiseSchedule& schedule,
                                             const SampleOptions& opts, const RngStream& chain_rng,
                                             std::function<void(int64_t, int64_t)> progress = {});

// round(kappa * n_original) class-balanced samples, written to out_dir as a
// dataio container (data.bin + labels.csv, origin 0). Re-running with the same
// seed overwrites the files with identical bytes.
std::vector<TimeSeriesInstance> generate_dataset(
    const StyleStore& store, const GenerationBudget& budget, const NoisePredictor& model,
    const NoiseSchedule& schedule, const SampleOptions& opts, RngStream& rng,
    const std::map<int64_t, int64_t>& original_class_counts, const std::string& out_dir,
    std::function<void(int64_t, int64_t)> progress = {});

}  // namespace stylepad
