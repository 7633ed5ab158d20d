#include "stylepad/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "stylepad/checkpoint.hpp"

namespace stylepad {

void NoiseSchedule::require_valid_t(int64_t t) const {
    if (t < 1 || t > T)
        throw std::out_of_range("diffusion: timestep " + std::to_string(t) + " outside [1," +
                                std::to_string(T) + "]");
}

NoiseSchedule make_schedule(int64_t T, double beta_1, double beta_T) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_1 > 0.0) || !(beta_1 <= beta_T) || !(beta_T < 1.0))
        throw std::invalid_argument("make_schedule: need 0 < beta_1 <= beta_T < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    s.posterior_var.resize(static_cast<size_t>(T));
    double abar = 1.0;
    for (int64_t t = 1; t <= T; ++t) {
        double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        double beta = beta_1 + (beta_T - beta_1) * frac;
        double abar_prev = abar;
        abar *= 1.0 - beta;
        s.beta[static_cast<size_t>(t - 1)] = beta;
        s.alpha[static_cast<size_t>(t - 1)] = 1.0 - beta;
        s.alpha_bar[static_cast<size_t>(t - 1)] = abar;
        s.posterior_var[static_cast<size_t>(t - 1)] = beta * (1.0 - abar_prev) / (1.0 - abar);
    }
    return s;
}

Tensor forward_diffuse(const Tensor& x0, int64_t t, const Tensor& eps,
                       const NoiseSchedule& schedule) {
    schedule.require_valid_t(t);
    if (x0.shape() != eps.shape())
        throw std::invalid_argument("forward_diffuse: eps shape " + shape_str(eps.shape()) +
                                    " does not match x0 " + shape_str(x0.shape()));
    double abar = schedule.alpha_bar_at(t);
    return add(scale(x0, std::sqrt(abar)), scale(eps, std::sqrt(1.0 - abar)));
}

void GuidanceConfig::validate() const {
    if (condition_drop_prob < 0.0 || condition_drop_prob > 1.0)
        throw std::invalid_argument("GuidanceConfig: condition_drop_prob must be in [0,1]");
}

// ---------------------------------------------------------------------------
// DenoiserModel
// ---------------------------------------------------------------------------

namespace {

int64_t cond_dim(const UNetConfig& cfg) { return cfg.time_emb_dim + cfg.style_emb_dim; }

}  // namespace

DenoiserModel::DenoiserModel(const UNetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg_.channel_mults.empty())
        throw std::invalid_argument("DenoiserModel: channel_mults must not be empty");
    int64_t levels = static_cast<int64_t>(cfg_.channel_mults.size());
    int64_t down_factor = int64_t{1} << (levels - 1);
    if (cfg_.length % down_factor != 0)
        throw std::invalid_argument("DenoiserModel: length " + std::to_string(cfg_.length) +
                                    " not divisible by " + std::to_string(down_factor));
    if (cfg_.time_sinusoid_dim % 2 != 0)
        throw std::invalid_argument("DenoiserModel: time_sinusoid_dim must be even");
    RngStream rng("denoiser_init", init_seed);

    auto make_res = [&](const std::string& name, int64_t cin, int64_t cout) {
        ResBlock b;
        b.gn1 = GroupNorm(params_, name + ".gn1", cin);
        b.conv1 = Conv1d(params_, name + ".conv1", cin, cout, 3, 1, 1, rng);
        b.cond = Linear(params_, name + ".cond", cond_dim(cfg_), cout, rng);
        b.gn2 = GroupNorm(params_, name + ".gn2", cout);
        b.conv2 = Conv1d(params_, name + ".conv2", cout, cout, 3, 1, 1, rng);
        b.has_skip = cin != cout;
        if (b.has_skip) b.skip = Conv1d(params_, name + ".skip", cin, cout, 1, 1, 0, rng);
        return b;
    };
    auto make_attn = [&](const std::string& name, int64_t ch) {
        AttnBlock a;
        a.q = Conv1d(params_, name + ".q", ch, ch, 1, 1, 0, rng);
        a.k = Conv1d(params_, name + ".k", ch, ch, 1, 1, 0, rng);
        a.v = Conv1d(params_, name + ".v", ch, ch, 1, 1, 0, rng);
        a.proj = Conv1d(params_, name + ".proj", ch, ch, 1, 1, 0, rng);
        return a;
    };

    init_conv_ = Conv1d(params_, "init", cfg_.k_channels, cfg_.base_channels, 3, 1, 1, rng);
    time_fc1_ = Linear(params_, "time.fc1", cfg_.time_sinusoid_dim, cfg_.time_emb_dim, rng);
    time_fc2_ = Linear(params_, "time.fc2", cfg_.time_emb_dim, cfg_.time_emb_dim, rng);
    style_fc1_ = Linear(params_, "style.fc1", cfg_.style_dim, cfg_.style_hidden, rng);
    style_fc2_ = Linear(params_, "style.fc2", cfg_.style_hidden, cfg_.style_emb_dim, rng);

    int64_t prev = cfg_.base_channels;
    std::vector<int64_t> outs;
    for (int64_t i = 0; i < levels; ++i) {
        int64_t out = cfg_.base_channels * cfg_.channel_mults[static_cast<size_t>(i)];
        DownStage st;
        std::string name = "down" + std::to_string(i);
        st.r1 = make_res(name + ".r1", prev, out);
        st.r2 = make_res(name + ".r2", out, out);
        if (cfg_.attention) st.attn = make_attn(name + ".attn", out);
        st.has_down = i + 1 < levels;
        if (st.has_down) st.down = Conv1d(params_, name + ".down", out, out, 3, 2, 1, rng);
        down_.push_back(std::move(st));
        outs.push_back(out);
        prev = out;
    }
    mid_ = make_res("mid.r", prev, prev);
    if (cfg_.attention) mid_attn_ = make_attn("mid.attn", prev);
    for (int64_t i = levels - 1; i >= 0; --i) {
        int64_t out = outs[static_cast<size_t>(i)];
        int64_t in = i == 0 ? cfg_.base_channels : outs[static_cast<size_t>(i - 1)];
        UpStage st;
        std::string name = "up" + std::to_string(i);
        st.r1 = make_res(name + ".r1", 2 * out, in);
        st.r2 = make_res(name + ".r2", in, in);
        if (cfg_.attention) st.attn = make_attn(name + ".attn", in);
        st.has_up = i > 0;
        if (st.has_up)
            st.up = ConvTranspose1d(params_, name + ".up", out, out, 3, 2, 1, 1, rng);
        up_.push_back(std::move(st));
    }
    final_gn_ = GroupNorm(params_, "final.gn", cfg_.base_channels);
    final_conv_ = Conv1d(params_, "final.conv", cfg_.base_channels, cfg_.k_channels, 3, 1, 1, rng);
}

Tensor DenoiserModel::res_forward(const ResBlock& b, const Tensor& x, const Tensor& cond) const {
    Tensor h = b.conv1.forward(relu(b.gn1.forward(x)));
    h = add_cond_bias(h, b.cond.forward(cond));
    h = b.conv2.forward(relu(b.gn2.forward(h)));
    Tensor s = b.has_skip ? b.skip.forward(x) : x;
    return add(h, s);
}

Tensor DenoiserModel::attn_forward(const AttnBlock& a, const Tensor& x) const {
    int64_t C = x.dim(1);
    Tensor q = transpose_12(a.q.forward(x));  // [B, L, C]
    Tensor k = transpose_12(a.k.forward(x));
    Tensor v = transpose_12(a.v.forward(x));
    Tensor att = softmax_lastdim(scale(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(C))));
    Tensor ctx = transpose_12(bmm(att, v));  // [B, C, L]
    return add(x, a.proj.forward(ctx));
}

Tensor DenoiserModel::forward(const Tensor& x, const std::vector<int64_t>& t,
                              const Tensor& style) const {
    if (x.rank() != 3 || x.dim(1) != cfg_.k_channels || x.dim(2) != cfg_.length)
        throw std::invalid_argument("DenoiserModel: input shape " + shape_str(x.shape()) +
                                    " does not match configured [B," +
                                    std::to_string(cfg_.k_channels) + "," +
                                    std::to_string(cfg_.length) + "]");
    int64_t B = x.dim(0);
    if (static_cast<int64_t>(t.size()) != B)
        throw std::invalid_argument("DenoiserModel: timestep count mismatch");
    if (style.rank() != 2 || style.dim(0) != B || style.dim(1) != cfg_.style_dim)
        throw std::invalid_argument("DenoiserModel: style shape " + shape_str(style.shape()) +
                                    " does not match embedding input [B," +
                                    std::to_string(cfg_.style_dim) + "]");

    std::vector<double> sin_data;
    sin_data.reserve(static_cast<size_t>(B * cfg_.time_sinusoid_dim));
    for (int64_t b = 0; b < B; ++b) {
        auto emb = sinusoidal_timestep_embedding(t[static_cast<size_t>(b)], cfg_.time_sinusoid_dim);
        sin_data.insert(sin_data.end(), emb.begin(), emb.end());
    }
    Tensor sin_emb = Tensor::from_data({B, cfg_.time_sinusoid_dim}, std::move(sin_data));
    Tensor t_emb = time_fc2_.forward(relu(time_fc1_.forward(sin_emb)));
    Tensor s_emb = style_fc2_.forward(relu(style_fc1_.forward(style)));
    // concatenated along the feature dimension, shared by every block
    Tensor cond = reshape(concat_channels(reshape(t_emb, {B, cfg_.time_emb_dim, 1}),
                                          reshape(s_emb, {B, cfg_.style_emb_dim, 1})),
                          {B, cond_dim(cfg_)});

    Tensor h = init_conv_.forward(x);
    std::vector<Tensor> skips;
    for (const auto& st : down_) {
        h = res_forward(st.r1, h, cond);
        h = res_forward(st.r2, h, cond);
        if (cfg_.attention) h = attn_forward(st.attn, h);
        skips.push_back(h);
        if (st.has_down) h = st.down.forward(h);
    }
    h = res_forward(mid_, h, cond);
    if (cfg_.attention) h = attn_forward(mid_attn_, h);
    for (const auto& st : up_) {
        h = concat_channels(h, skips.back());
        skips.pop_back();
        h = res_forward(st.r1, h, cond);
        h = res_forward(st.r2, h, cond);
        if (cfg_.attention) h = attn_forward(st.attn, h);
        if (st.has_up) h = st.up.forward(h);
    }
    return final_conv_.forward(relu(final_gn_.forward(h)));
}

void DenoiserModel::save(const std::string& path) const { save_checkpoint(path, params_); }
void DenoiserModel::load(const std::string& path) { load_checkpoint(path, params_); }

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

double diffusion_training_step(const std::vector<const TimeSeriesInstance*>& batch,
                               const std::vector<const StyleVector*>& styles,
                               DenoiserModel& model, AdamState& adam,
                               const GuidanceConfig& guidance, const NoiseSchedule& schedule,
                               RngStream& rng) {
    guidance.validate();
    if (batch.empty()) throw std::invalid_argument("diffusion_training_step: empty batch");
    if (styles.size() != batch.size())
        throw std::invalid_argument("diffusion_training_step: style/instance count mismatch");
    const UNetConfig& cfg = model.config();
    int64_t B = static_cast<int64_t>(batch.size());
    int64_t K = cfg.k_channels, L = cfg.length, H = cfg.style_dim;

    std::vector<int64_t> t(static_cast<size_t>(B));
    for (auto& ti : t) ti = rng.uniform_int(1, schedule.T);
    std::vector<bool> drop(static_cast<size_t>(B));
    for (size_t i = 0; i < drop.size(); ++i)
        drop[i] = rng.uniform() < guidance.condition_drop_prob;

    std::vector<double> eps(static_cast<size_t>(B * K * L));
    rng.fill_normal(eps);

    std::vector<double> xt(static_cast<size_t>(B * K * L));
    std::vector<double> style_rows(static_cast<size_t>(B * H), 0.0);
    for (int64_t b = 0; b < B; ++b) {
        const TimeSeriesInstance& inst = *batch[static_cast<size_t>(b)];
        if (inst.k_channels != K || inst.length != L)
            throw std::invalid_argument("diffusion_training_step: instance shape mismatch");
        const StyleVector& s = *styles[static_cast<size_t>(b)];
        if (static_cast<int64_t>(s.values.size()) != H)
            throw std::invalid_argument("diffusion_training_step: style length " +
                                        std::to_string(s.values.size()) +
                                        " does not match embedding input H=" +
                                        std::to_string(H));
        double abar = schedule.alpha_bar_at(t[static_cast<size_t>(b)]);
        double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
        for (int64_t i = 0; i < K * L; ++i) {
            size_t idx = static_cast<size_t>(b * K * L + i);
            xt[idx] = sa * inst.values[static_cast<size_t>(i)] + sb * eps[idx];
        }
        if (!drop[static_cast<size_t>(b)])
            for (int64_t i = 0; i < H; ++i)
                style_rows[static_cast<size_t>(b * H + i)] = s.values[static_cast<size_t>(i)];
    }

    Tensor x_t = Tensor::from_data({B, K, L}, std::move(xt));
    Tensor style_t = Tensor::from_data({B, H}, std::move(style_rows));
    Tensor eps_t = Tensor::from_data({B, K, L}, std::move(eps));
    Tensor pred = model.forward(x_t, t, style_t);
    Tensor loss = mse_loss(pred, eps_t);
    double loss_v = loss.item();
    if (!std::isfinite(loss_v))
        throw std::runtime_error("diffusion_training_step: non-finite loss");
    zero_grads(model.params());
    reverse_gradient(loss, model.params());
    adam_step(model.params(), adam);
    return loss_v;
}

// ---------------------------------------------------------------------------
// guidance
// ---------------------------------------------------------------------------

namespace {

Tensor style_row(const NoisePredictor& model, const StyleVector* s) {
    std::vector<double> row(static_cast<size_t>(model.style_dim()), 0.0);
    if (s) {
        if (static_cast<int64_t>(s->values.size()) != model.style_dim())
            throw std::invalid_argument("guidance: style length " +
                                        std::to_string(s->values.size()) + " != H=" +
                                        std::to_string(model.style_dim()));
        std::copy(s->values.begin(), s->values.end(), row.begin());
    }
    return Tensor::from_data({1, model.style_dim()}, std::move(row));
}

Tensor as_batch1(const Tensor& x, const NoisePredictor& model) {
    if (x.rank() == 2 && x.dim(0) == model.k_channels() && x.dim(1) == model.length())
        return reshape(x, {1, model.k_channels(), model.length()});
    if (x.rank() == 3 && x.dim(0) == 1) return x;
    throw std::invalid_argument("guidance: x_t shape " + shape_str(x.shape()) +
                                " is not a single [K,L] sample");
}

}  // namespace

Tensor fused_epsilon(const Tensor& x_t, int64_t t, const StyleCombination& d,
                     const NoisePredictor& model, double omega) {
    if (d.members.empty()) throw std::invalid_argument("fused_epsilon: empty style combination");
    NoGradGuard ng;
    Tensor xb = as_batch1(x_t, model);
    std::vector<int64_t> tv = {t};
    Tensor eps_uncond = model.epsilon(xb, tv, style_row(model, nullptr));
    std::vector<double> out = eps_uncond.data();
    for (const StyleVector& s : d.members) {
        Tensor eps_s = model.epsilon(xb, tv, style_row(model, &s));
        const auto& es = eps_s.data();
        const auto& eu = eps_uncond.data();
        for (size_t i = 0; i < out.size(); ++i) out[i] += omega * (es[i] - eu[i]);
    }
    return Tensor::from_data(x_t.shape(), std::move(out));
}

Tensor cfg_epsilon(const Tensor& x_t, int64_t t, const StyleVector& s,
                   const NoisePredictor& model, double omega) {
    StyleCombination d;
    d.class_label = s.class_label;
    d.members = {s};
    return fused_epsilon(x_t, t, d, model, omega);
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

Tensor reverse_step(const Tensor& x_t, int64_t t, const Tensor& eps_hat,
                    const NoiseSchedule& schedule, RngStream& rng) {
    schedule.require_valid_t(t);
    if (x_t.shape() != eps_hat.shape())
        throw std::invalid_argument("reverse_step: eps_hat shape mismatch");
    double beta = schedule.beta_at(t);
    double abar = schedule.alpha_bar_at(t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(t));
    double coef = beta / std::sqrt(1.0 - abar);
    double sigma = t > 1 ? std::sqrt(schedule.posterior_var_at(t)) : 0.0;
    std::vector<double> out(x_t.data().size());
    const auto& xv = x_t.data();
    const auto& ev = eps_hat.data();
    for (size_t i = 0; i < out.size(); ++i) {
        double mu = inv_sqrt_alpha * (xv[i] - coef * ev[i]);
        out[i] = t > 1 ? mu + sigma * rng.normal() : mu;
    }
    return Tensor::from_data(x_t.shape(), std::move(out));
}

namespace {

std::vector<TimeSeriesInstance> sample_chains(const std::vector<StyleCombination>& conditions,
                                              const NoisePredictor& model,
                                              const NoiseSchedule& schedule,
                                              const SampleOptions& opts,
                                              std::vector<RngStream>& streams,
                                              const std::function<void(int64_t, int64_t)>& progress) {
    NoGradGuard ng;
    int64_t N = static_cast<int64_t>(conditions.size());
    int64_t K = model.k_channels(), L = model.length(), H = model.style_dim();
    int64_t kl = K * L;
    for (const auto& d : conditions)
        if (d.members.empty())
            throw std::invalid_argument("sample: empty style combination");

    // x_T ~ N(0, I), one chain at a time so results do not depend on batching
    std::vector<double> x(static_cast<size_t>(N * kl));
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < kl; ++j)
            x[static_cast<size_t>(i * kl + j)] = streams[static_cast<size_t>(i)].normal();

    int64_t total_members = 0;
    for (const auto& d : conditions) total_members += static_cast<int64_t>(d.members.size());
    std::vector<double> cond_styles(static_cast<size_t>(total_members * H));
    std::vector<int64_t> owner(static_cast<size_t>(total_members));
    {
        int64_t row = 0;
        for (int64_t i = 0; i < N; ++i)
            for (const auto& s : conditions[static_cast<size_t>(i)].members) {
                if (static_cast<int64_t>(s.values.size()) != H)
                    throw std::invalid_argument("sample: style length mismatch");
                std::copy(s.values.begin(), s.values.end(),
                          cond_styles.begin() + row * H);
                owner[static_cast<size_t>(row)] = i;
                ++row;
            }
    }

    for (int64_t t = schedule.T; t >= 1; --t) {
        Tensor x_unc = Tensor::from_data({N, K, L}, x);
        std::vector<int64_t> tv(static_cast<size_t>(N), t);
        Tensor eps_unc = model.epsilon(x_unc, tv, Tensor::zeros({N, H}));

        std::vector<double> xc(static_cast<size_t>(total_members * kl));
        for (int64_t r = 0; r < total_members; ++r)
            std::copy(x.begin() + owner[static_cast<size_t>(r)] * kl,
                      x.begin() + (owner[static_cast<size_t>(r)] + 1) * kl,
                      xc.begin() + r * kl);
        Tensor x_cond = Tensor::from_data({total_members, K, L}, std::move(xc));
        std::vector<int64_t> tvc(static_cast<size_t>(total_members), t);
        Tensor style_t = Tensor::from_data({total_members, H}, cond_styles);
        Tensor eps_cond = model.epsilon(x_cond, tvc, style_t);

        // fused eps per chain, then the ancestral update
        const auto& eu = eps_unc.data();
        const auto& ec = eps_cond.data();
        std::vector<double> ehat(eu);
        for (int64_t r = 0; r < total_members; ++r) {
            int64_t i = owner[static_cast<size_t>(r)];
            for (int64_t j = 0; j < kl; ++j)
                ehat[static_cast<size_t>(i * kl + j)] +=
                    opts.omega * (ec[static_cast<size_t>(r * kl + j)] -
                                  eu[static_cast<size_t>(i * kl + j)]);
        }
        double beta = schedule.beta_at(t);
        double abar = schedule.alpha_bar_at(t);
        double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(t));
        double coef = beta / std::sqrt(1.0 - abar);
        double sigma = t > 1 ? std::sqrt(schedule.posterior_var_at(t)) : 0.0;
        for (int64_t i = 0; i < N; ++i) {
            RngStream& rs = streams[static_cast<size_t>(i)];
            for (int64_t j = 0; j < kl; ++j) {
                size_t idx = static_cast<size_t>(i * kl + j);
                double mu = inv_sqrt_alpha * (x[idx] - coef * ehat[idx]);
                double v = t > 1 ? mu + sigma * rs.normal() : mu;
                if (opts.clip > 0.0) v = std::clamp(v, -opts.clip, opts.clip);
                if (!std::isfinite(v))
                    throw std::runtime_error("sample: non-finite value at step t=" +
                                             std::to_string(t));
                x[idx] = v;
            }
        }
        if (progress) progress(schedule.T - t + 1, schedule.T);
    }

    std::vector<TimeSeriesInstance> out(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) {
        TimeSeriesInstance& inst = out[static_cast<size_t>(i)];
        inst.k_channels = K;
        inst.length = L;
        inst.class_label = conditions[static_cast<size_t>(i)].class_label;
        inst.domain_tag = "synthetic";
        inst.origin_flag = 0;
        inst.instance_id = "synth_" + std::to_string(conditions[static_cast<size_t>(i)].combination_id);
        inst.values.assign(x.begin() + i * kl, x.begin() + (i + 1) * kl);
    }
    return out;
}

}  // namespace

TimeSeriesInstance sample(const StyleCombination& d, const NoisePredictor& model,
                          const NoiseSchedule& schedule, const SampleOptions& opts,
                          RngStream& rng) {
    std::vector<RngStream> streams = {rng};
    auto out = sample_chains({d}, model, schedule, opts, streams, {});
    rng = streams[0];
    return out[0];
}

std::vector<TimeSeriesInstance> sample_batch(const std::vector<StyleCombination>& conditions,
                                             const NoisePredictor& model,
                                             const NoiseSchedule& schedule,
                                             const SampleOptions& opts, const RngStream& chain_rng,
                                             std::function<void(int64_t, int64_t)> progress) {
    std::vector<RngStream> streams;
    streams.reserve(conditions.size());
    for (const auto& d : conditions) streams.push_back(chain_rng.sub(d.combination_id));
    return sample_chains(conditions, model, schedule, opts, streams, progress);
}

std::vector<TimeSeriesInstance> generate_dataset(
    const StyleStore& store, const GenerationBudget& budget, const NoisePredictor& model,
    const NoiseSchedule& schedule, const SampleOptions& opts, RngStream& rng,
    const std::map<int64_t, int64_t>& original_class_counts, const std::string& out_dir,
    std::function<void(int64_t, int64_t)> progress) {
    if (store.total_count() == 0) throw std::invalid_argument("generate_dataset: empty store");
    auto conditions = assemble_batch_conditions(store, original_class_counts, budget, rng);
    RngStream chain_rng = rng.sub("chains");

    std::vector<TimeSeriesInstance> out;
    out.reserve(conditions.size());
    const int64_t chunk = 64;
    int64_t n = static_cast<int64_t>(conditions.size());
    for (int64_t start = 0; start < n; start += chunk) {
        int64_t end = std::min(start + chunk, n);
        std::vector<StyleCombination> part(conditions.begin() + start, conditions.begin() + end);
        auto samples = sample_batch(part, model, schedule, opts, chain_rng, {});
        out.insert(out.end(), samples.begin(), samples.end());
        if (progress) progress(end, n);
    }
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_instances((fs::path(out_dir) / "data.bin").string(),
                   (fs::path(out_dir) / "labels.csv").string(), out);
    return out;
}

}  // namespace stylepad
