// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance_test            run every criterion
//   acceptance_test 3 7        run only the listed criteria
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lfm/checkpoint.hpp"
#include "lfm/errors.hpp"
#include "lfm/eval.hpp"
#include "lfm/metrics.hpp"
#include "lfm/model.hpp"
#include "lfm/npr.hpp"
#include "lfm/ops.hpp"
#include "lfm/ppm.hpp"
#include "lfm/snet.hpp"
#include "lfm/synth.hpp"
#include "lfm/tkp.hpp"
#include "lfm/train.hpp"
#include "test_support.hpp"

using namespace lfm;
using lfm::testing::dot;
using lfm::testing::max_fd_error;
using lfm::testing::random_away_from_zero;
using lfm::testing::random_distinct;
using lfm::testing::random_tensor;
using lfm::testing::relative_error;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr double kStep = 1e-3;
constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 20;

// 1. Gradient suite -----------------------------------------------------------

double check_conv(Rng& rng) {
  const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3);
  const std::size_t k = 1 + rng.below(3), stride = 1 + rng.below(2), pad = rng.below(2);
  const std::size_t h = k + 2 + rng.below(4), w = k + 2 + rng.below(4);
  Tensor x = random_tensor({cin, h, w}, rng);
  Tensor wt = random_tensor({cout, cin, k, k}, rng);
  Tensor b = random_tensor({cout}, rng);
  const Tensor probe = random_tensor(conv2d(x, wt, b, stride, pad).shape(), rng);
  const auto f = [&] { return dot(conv2d(x, wt, b, stride, pad).data(), probe.data()); };
  const Conv2dGrads g = conv2d_backward(x, wt, true, probe, stride, pad, true);
  return std::max({max_fd_error(x.values(), g.input.data(), kStep, f),
                   max_fd_error(wt.values(), g.weight.data(), kStep, f),
                   max_fd_error(b.values(), g.bias.data(), kStep, f)});
}

double check_maxpool(Rng& rng) {
  const std::size_t window = 2 + rng.below(2);
  const std::size_t stride = 1 + rng.below(window);
  Tensor x = random_distinct({1 + rng.below(3), window + rng.below(5), window + rng.below(5)}, rng);
  const MaxPoolResult fwd = maxpool2d(x, window, stride);
  const Tensor probe = random_tensor(fwd.output.shape(), rng);
  const auto f = [&] { return dot(maxpool2d(x, window, stride).output.data(), probe.data()); };
  const Tensor g = maxpool2d_backward(fwd, probe);
  return max_fd_error(x.values(), g.data(), kStep, f);
}

double check_linear(Rng& rng) {
  const std::size_t n = 1 + rng.below(40);
  Tensor x = random_tensor({n}, rng);
  Tensor w = random_tensor({1, n}, rng);
  Tensor b = random_tensor({1}, rng);
  const double r = rng.normal();
  const auto f = [&] { return r * linear(x, w, b)[0]; };
  const LinearGrads g = linear_backward(x, w, r);
  return std::max({max_fd_error(x.values(), g.input.data(), kStep, f),
                   max_fd_error(w.values(), g.weight.data(), kStep, f),
                   max_fd_error(b.values(), g.bias.data(), kStep, f)});
}

double check_elementwise(Rng& rng, int which) {
  const Shape shape{2 + rng.below(3), 3, 3};
  Tensor x = which == 0 ? random_tensor(shape, rng, 3.0) : random_away_from_zero(shape, rng, 0.01);
  const Tensor probe = random_tensor(shape, rng);
  std::function<double()> f;
  Tensor g;
  if (which == 0) {
    f = [&] { return dot(sigmoid(x).data(), probe.data()); };
    g = sigmoid_backward(sigmoid(x), probe);
  } else if (which == 1) {
    f = [&] { return dot(lfm::abs(x).data(), probe.data()); };
    g = abs_backward(x, probe);
  } else {
    f = [&] { return dot(relu(x).data(), probe.data()); };
    g = relu_backward(x, probe);
  }
  return max_fd_error(x.values(), g.data(), kStep, f);
}

double check_npr(Rng& rng) {
  NprConfig cfg;
  cfg.window = 2 + rng.below(2);
  cfg.anchor_index = rng.below(cfg.window * cfg.window);
  cfg.take_abs = rng.uniform() < 0.75;
  Tensor x = random_distinct({3, cfg.window * (1 + rng.below(3)), cfg.window * (1 + rng.below(3))}, rng);
  const Tensor probe = random_tensor(x.shape(), rng);
  const auto f = [&] { return dot(npr_extract(x, cfg).data(), probe.data()); };
  return max_fd_error(x.values(), npr_grad(x, cfg, probe).data(), kStep, f);
}

double check_tkp(Rng& rng) {
  const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
  const std::size_t choices[] = {1, std::min<std::size_t>(4, h * w), h * w};
  TkpConfig cfg;
  cfg.k = choices[rng.below(3)];
  Tensor maps = random_distinct({1 + rng.below(8), h, w}, rng);
  const PooledVectors fwd = tkp_forward(maps, cfg);
  std::vector<double> probe(fwd.vector.size());
  for (double& v : probe) v = rng.normal();
  const auto f = [&] { return dot(tkp_forward(maps, cfg).vector, probe); };
  return max_fd_error(maps.values(), tkp_backward(fwd, probe, {}).data(), kStep, f);
}

double check_bce(Rng& rng) {
  std::vector<double> p{0.1 + 0.8 * rng.uniform()};
  const double y = static_cast<double>(rng.below(2));
  const auto f = [&] { return bce_loss(p[0], y); };
  const double g = bce_grad(p[0], y);
  return max_fd_error(p, std::span<const double>(&g, 1), kStep, f);
}

// Signature of every piecewise choice along the chain; equal signatures at
// x - h, x and x + h mean the difference quotient stays on one smooth piece.
std::vector<std::int64_t> chain_signature(const Tensor& image, const LfmModel& model) {
  const ModelConfig& cfg = model.config;
  std::vector<std::int64_t> sig;
  NprConfig raw = cfg.npr;
  raw.take_abs = false;
  const Tensor signed_residual = npr_extract(image, raw);
  for (double v : signed_residual.data()) sig.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
  const SNetTrace trace = snet_forward_trace(npr_extract(image, cfg.npr), model.snet, cfg.snet);
  for (std::size_t l = 0; l + 1 < trace.activations.size(); ++l) {
    for (double v : trace.activations[l].data()) sig.push_back(v > 0 ? 1 : 0);
  }
  for (const auto& pool : trace.pools) {
    if (pool) sig.insert(sig.end(), pool->argmax.begin(), pool->argmax.end());
  }
  const PooledVectors pooled = tkp_forward(trace.output, cfg.tkp);
  sig.insert(sig.end(), pooled.selected_indices.begin(), pooled.selected_indices.end());
  return sig;
}

double chain_loss(const Tensor& image, int label, const LfmModel& model) {
  const ModelConfig& cfg = model.config;
  const Tensor maps = snet_forward(npr_extract(image, cfg.npr), model.snet, cfg.snet);
  const PooledVectors pooled = tkp_forward(maps, cfg.tkp);
  const double z = dot_affine(pooled.vector, model.fc_weight.data(), model.fc_bias[0]);
  return bce_loss(sigmoid(z), static_cast<double>(label));
}

std::vector<double> chain_input_grad(const Tensor& image, int label, const LfmModel& model) {
  const ModelConfig& cfg = model.config;
  const Tensor residual = npr_extract(image, cfg.npr);
  const SNetTrace trace = snet_forward_trace(residual, model.snet, cfg.snet);
  const PooledVectors pooled = tkp_forward(trace.output, cfg.tkp);
  const double z = dot_affine(pooled.vector, model.fc_weight.data(), model.fc_bias[0]);
  const double p = sigmoid(z);
  const double dz = bce_grad(p, label) * p * (1.0 - p);
  std::vector<double> up(pooled.vector.size());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = dz * model.fc_weight[i];
  const Tensor grad_maps = tkp_backward(pooled, up, {});
  const SNetGrads g = snet_backward(trace, model.snet, cfg.snet, grad_maps, true);
  return npr_grad(image, cfg.npr, g.input).values();
}

struct ChainResult {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

void check_chain(Rng& rng, ChainResult& out) {
  ModelConfig cfg;
  cfg.tkp.k = 4;
  Rng init = rng.substream(1);
  LfmModel model(cfg, init);
  Tensor image(Shape{3, 32, 32});
  for (double& v : image.values()) v = rng.uniform();
  const int label = static_cast<int>(rng.below(2));
  const std::span<const Tensor> images(&image, 1);
  const std::span<const int> labels(&label, 1);

  // Parameters, through the library's batched backward pass.
  const TrainForward analytic = forward_deterministic(images, labels, model);
  std::vector<Tensor*> params = model.parameters();
  std::size_t total = 0;
  for (const Tensor* p : params) total += p->numel();
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t flat = rng.below(total), which = 0;
    while (flat >= params[which]->numel()) flat -= params[which]->numel(), ++which;
    std::vector<double>& values = params[which]->values();
    const double saved = values[flat];
    values[flat] = saved + kStep;
    const auto sig_plus = chain_signature(image, model);
    const double plus = chain_loss(image, label, model);
    values[flat] = saved - kStep;
    const auto sig_minus = chain_signature(image, model);
    const double minus = chain_loss(image, label, model);
    values[flat] = saved;
    if (sig_plus != sig_minus || sig_plus != chain_signature(image, model)) {
      ++out.skipped;
      continue;
    }
    ++out.checked;
    out.worst = std::max(out.worst, relative_error(analytic.grads[which][flat],
                                                   (plus - minus) / (2.0 * kStep)));
  }

  // Image pixels, composing every op's backward by hand.
  const std::vector<double> grad_image = chain_input_grad(image, label, model);
  const auto base_sig = chain_signature(image, model);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = rng.below(image.numel());
    const double saved = image[i];
    image[i] = saved + kStep;
    const auto sig_plus = chain_signature(image, model);
    const double plus = chain_loss(image, label, model);
    image[i] = saved - kStep;
    const auto sig_minus = chain_signature(image, model);
    const double minus = chain_loss(image, label, model);
    image[i] = saved;
    if (sig_plus != sig_minus || sig_plus != base_sig) {
      ++out.skipped;
      continue;
    }
    ++out.checked;
    out.worst = std::max(out.worst, relative_error(grad_image[i], (plus - minus) / (2.0 * kStep)));
  }
}

Outcome criterion_gradients() {
  const auto start = std::chrono::steady_clock::now();
  Rng root(101);
  std::map<std::string, std::function<double(Rng&)>> ops{
      {"conv2d", check_conv},
      {"maxpool2d", check_maxpool},
      {"linear", check_linear},
      {"sigmoid", [](Rng& r) { return check_elementwise(r, 0); }},
      {"abs", [](Rng& r) { return check_elementwise(r, 1); }},
      {"relu", [](Rng& r) { return check_elementwise(r, 2); }},
      {"npr_extract", check_npr},
      {"tkp", check_tkp},
      {"bce", check_bce},
  };
  bool pass = true;
  std::ostringstream detail;
  std::uint64_t stream = 0;
  for (auto& [name, fn] : ops) {
    double worst = 0.0;
    for (int i = 0; i < kGradInstances; ++i) {
      Rng rng = root.substream({stream, static_cast<std::uint64_t>(i)});
      worst = std::max(worst, fn(rng));
    }
    ++stream;
    pass = pass && worst < kGradTol;
    detail << name << "=" << fmt("%.1e", worst) << " ";
  }
  ChainResult chain;
  for (int i = 0; i < kGradInstances; ++i) {
    Rng rng = root.substream({stream, static_cast<std::uint64_t>(i)});
    check_chain(rng, chain);
  }
  // Every instance must contribute checks away from the kinks.
  pass = pass && chain.worst < kGradTol && chain.checked >= 20u * kGradInstances;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  pass = pass && secs < 60.0;
  detail << "chain=" << fmt("%.1e", chain.worst) << " (" << chain.checked << " coords, "
         << chain.skipped << " on kinks skipped) tol=1e-4, " << kGradInstances
         << " instances each, " << fmt("%.1f", secs) << "s";
  return {pass, detail.str()};
}

// 2. TKP oracle ---------------------------------------------------------------

Outcome criterion_tkp_oracle() {
  Rng root(202);
  std::size_t mismatches = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    Rng rng = root.substream(static_cast<std::uint64_t>(t));
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6), hw = h * w;
    std::vector<std::size_t> ks{1, hw};
    if (hw >= 4) ks.push_back(4);
    TkpConfig cfg;
    cfg.k = ks[rng.below(ks.size())];
    Tensor maps(Shape{64, h, w});
    // Coarse levels force plenty of ties.
    const std::uint64_t levels = 1 + rng.below(6);
    for (double& v : maps.values()) v = static_cast<double>(rng.below(levels)) - 2.0;
    const PooledVectors got = tkp_forward(maps, cfg);
    bool same = got.vector.size() == 64 * cfg.k && !got.vector_star;
    for (std::size_t c = 0; same && c < 64; ++c) {
      std::vector<std::pair<double, std::uint32_t>> all;
      for (std::size_t i = 0; i < hw; ++i) all.emplace_back(maps[c * hw + i], static_cast<std::uint32_t>(i));
      std::sort(all.begin(), all.end());
      for (std::size_t j = 0; j < cfg.k; ++j) {
        const auto& want = all[hw - cfg.k + j];
        same = same && got.vector[c * cfg.k + j] == want.first &&
               got.selected_indices[c * cfg.k + j] == want.second;
      }
    }
    if (!same) ++mismatches;
  }
  return {mismatches == 0, std::to_string(trials - mismatches) + "/" + std::to_string(trials) +
                               " random 64-channel maps match the full-sort oracle exactly"};
}

// 3. RBLD schedule ------------------------------------------------------------

Outcome criterion_rbld() {
  TkpConfig cfg;
  cfg.k = 16;
  cfg.p_min = 0.1;
  cfg.p_max = 0.3;
  cfg.training = true;
  cfg.rks_enabled = false;
  const int trials = 20000;
  Rng maps_rng(303);
  const Tensor maps = random_distinct({1, 6, 6}, maps_rng);
  Rng root(304);
  std::vector<int> drops(16, 0);
  for (int t = 0; t < trials; ++t) {
    const PooledVectors pooled = tkp_forward(maps, cfg, root.substream(static_cast<std::uint64_t>(t)));
    for (std::size_t i = 0; i < 16; ++i) drops[i] += pooled.dropped[i];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double expected = 0.1 + 0.2 * static_cast<double>(i) / 15.0;
    worst = std::max(worst, std::abs(drops[i] / double(trials) - expected));
  }
  return {worst <= 0.015, "max |rate - p_i| = " + fmt("%.4f", worst) + " over 16 ranks (rank1 " +
                              fmt("%.4f", drops[0] / double(trials)) + ", rank16 " +
                              fmt("%.4f", drops[15] / double(trials)) + "), tol 0.015"};
}

// 4. RKS uniformity -----------------------------------------------------------

Outcome criterion_rks() {
  TkpConfig cfg;
  cfg.k = 16;
  cfg.training = true;
  cfg.rbld_enabled = false;
  const std::size_t positions = 36;
  const int trials = 20000;
  Rng maps_rng(401);
  const Tensor maps = random_tensor({1, 6, 6}, maps_rng);
  Rng root(402);
  std::vector<int> hits(positions, 0);
  bool distinct = true;
  for (int t = 0; t < trials; ++t) {
    const PooledVectors pooled = tkp_forward(maps, cfg, root.substream(static_cast<std::uint64_t>(t)));
    std::set<std::uint32_t> seen(pooled.star_indices.begin(), pooled.star_indices.end());
    distinct = distinct && seen.size() == cfg.k;
    for (std::uint32_t idx : pooled.star_indices) ++hits[idx];
  }
  const double expected = 16.0 / 36.0;
  double worst = 0.0;
  for (int h : hits) worst = std::max(worst, std::abs(h / double(trials) - expected));
  return {distinct && worst <= 0.015,
          "max |freq - k/HW| = " + fmt("%.4f", worst) + " (k/HW = " + fmt("%.4f", expected) +
              "), tol 0.015" + (distinct ? "" : ", repeated positions drawn")};
}

// 5. Loss composition ---------------------------------------------------------

Outcome criterion_loss() {
  ModelConfig cfg;
  cfg.tkp.k = 4;
  Rng init(501);
  const LfmModel model(cfg, init);
  Rng root(502);
  double worst_total = 0.0, worst_parts = 0.0;
  for (int b = 0; b < 100; ++b) {
    Rng rng = root.substream(static_cast<std::uint64_t>(b));
    const std::size_t n = 1 + rng.below(4);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor img(Shape{3, 32, 32});
      for (double& v : img.values()) v = rng.uniform();
      images.push_back(std::move(img));
      labels.push_back(static_cast<int>(rng.below(2)));
    }
    const TrainForward out = forward_train(images, labels, model, rng.substream(9));
    std::vector<double> y(labels.begin(), labels.end());
    const double a = bce_loss(out.scores, y);
    const double bl = bce_loss(out.aux_scores, y);
    worst_total = std::max(worst_total, std::abs(out.loss.total - (out.loss.loss_a + 0.1 * out.loss.loss_b)));
    worst_parts = std::max({worst_parts, std::abs(a - out.loss.loss_a), std::abs(bl - out.loss.loss_b)});
  }
  return {worst_total <= 1e-12 && worst_parts <= 1e-12,
          "max |total - (A + 0.1 B)| = " + fmt("%.1e", worst_total) +
              ", max |A,B - recomputed BCE| = " + fmt("%.1e", worst_parts) + " over 100 batches, tol 1e-12"};
}

// 6. Metrics ------------------------------------------------------------------

double oracle_accuracy(const std::vector<ScoredLabel>& s, double threshold) {
  std::size_t ok = 0;
  for (const auto& x : s) {
    const int predicted = x.score >= threshold ? 1 : 0;
    if (predicted == x.label) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

// Sweep every distinct threshold from the top, counting from scratch each time.
double oracle_ap(const std::vector<ScoredLabel>& s) {
  std::set<double, std::greater<>> thresholds;
  std::size_t positives = 0;
  for (const auto& x : s) {
    thresholds.insert(x.score);
    positives += x.label;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& x : s) {
      if (x.score >= t) (x.label == 1 ? tp : fp) += 1;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    ap += (recall - prev_recall) * (static_cast<double>(tp) / static_cast<double>(tp + fp));
    prev_recall = recall;
  }
  return ap;
}

Outcome criterion_metrics() {
  Rng root(601);
  int bad_acc = 0, bad_ap = 0, bad_monotone = 0;
  const int lists = 1000;
  for (int t = 0; t < lists; ++t) {
    Rng rng = root.substream(static_cast<std::uint64_t>(t));
    const std::size_t n = 1 + rng.below(60);
    // Scores on a coarse grid so ties are common and transforms stay injective.
    const std::uint64_t levels = 2 + rng.below(50);
    std::vector<ScoredLabel> s(n);
    for (auto& x : s) {
      x.score = static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1);
      x.label = static_cast<int>(rng.below(2));
    }
    s[rng.below(n)].label = 1;
    const double threshold = rng.uniform();
    if (accuracy(s, threshold) != oracle_accuracy(s, threshold)) ++bad_acc;
    const double ap = average_precision(s);
    if (ap != oracle_ap(s)) ++bad_ap;
    std::vector<ScoredLabel> cubic = s, logistic = s;
    for (auto& x : cubic) x.score = x.score * x.score * x.score + 2.0 * x.score - 7.0;
    for (auto& x : logistic) x.score = 1.0 / (1.0 + std::exp(-4.0 * (x.score - 0.3)));
    if (average_precision(cubic) != ap || average_precision(logistic) != ap) ++bad_monotone;
  }
  return {bad_acc == 0 && bad_ap == 0 && bad_monotone == 0,
          std::to_string(lists) + " lists: accuracy mismatches " + std::to_string(bad_acc) +
              ", AP mismatches " + std::to_string(bad_ap) + ", AP changed by monotone transform " +
              std::to_string(bad_monotone)};
}

// 7. Synthetic experiment -----------------------------------------------------

constexpr std::size_t kExperimentEpochs = 10;
constexpr double kMinAcc = 0.95;
constexpr double kMinAp = 0.98;

Outcome criterion_experiment() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<SampleRecord> train_set = gen_paired(1000, 64, Rng(7001));
  const std::vector<SampleRecord> test_set = gen_paired(250, 64, Rng(7002));
  TrainConfig tc;
  tc.lr = 1e-4;
  tc.batch_size = 32;
  tc.epochs = kExperimentEpochs;
  tc.seed = 7003;
  std::map<Pooling, EvalReport> reports;
  for (Pooling pooling : {Pooling::tkp, Pooling::gap}) {
    ModelConfig mc;
    mc.pooling = pooling;
    mc.tkp.k = 16;
    const TrainResult run = train(init_model(mc, tc.seed), train_set, tc);
    reports[pooling] = evaluate(run.final_model, test_set);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const EvalReport& tkp = reports[Pooling::tkp];
  const EvalReport& gap = reports[Pooling::gap];
  const bool pass = tkp.acc >= kMinAcc && tkp.ap >= kMinAp && tkp.acc >= gap.acc;
  return {pass, "tkp acc " + fmt("%.4f", tkp.acc) + " ap " + fmt("%.4f", tkp.ap) + " | gap acc " +
                    fmt("%.4f", gap.acc) + " ap " + fmt("%.4f", gap.ap) + " | need acc>=0.95 ap>=0.98 " +
                    "tkp>=gap, " + std::to_string(kExperimentEpochs) + " epochs, " +
                    fmt("%.0f", secs) + "s"};
}

// 8. Zero-parameter pooling ---------------------------------------------------

Outcome criterion_params() {
  ModelConfig tkp;
  tkp.tkp.k = 1;
  ModelConfig gmp = tkp;
  gmp.pooling = Pooling::gmp;
  ModelConfig wide;
  Rng rng(801);
  const LfmModel built(wide, rng);
  std::size_t counted = 0;
  for (const Tensor* p : built.parameters()) counted += p->numel();
  const bool pass = tkp_param_count() == 0 && total_param_count(tkp) == total_param_count(gmp) &&
                    counted == total_param_count(built) &&
                    total_param_count(wide) - total_param_count(gmp) == kMapChannels * 15;
  return {pass, "tkp module params " + std::to_string(tkp_param_count()) + ", tkp(k=1) total " +
                    std::to_string(total_param_count(tkp)) + " vs gmp total " +
                    std::to_string(total_param_count(gmp)) + ", k=16 total " +
                    std::to_string(total_param_count(wide)) + " (head only grows)"};
}

// 9. Determinism --------------------------------------------------------------

Outcome criterion_determinism() {
  const std::vector<SampleRecord> data = gen_paired(64, 32, Rng(901));
  const std::vector<SampleRecord> test = gen_paired(16, 32, Rng(902));
  ModelConfig mc;
  mc.tkp.k = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 903;
  const TrainResult a = train(init_model(mc, tc.seed), data, tc);
  const TrainResult b = train(init_model(mc, tc.seed), data, tc);
  const bool ckpt = encode_checkpoint(a.final_model) == encode_checkpoint(b.final_model) &&
                    encode_checkpoint(a.best_model) == encode_checkpoint(b.best_model);
  const bool report = to_json(evaluate(a.final_model, test)) == to_json(evaluate(b.final_model, test, 1));

  std::vector<Tensor> images;
  for (const auto& s : test) images.push_back(s.image);
  LfmModel plain = a.final_model;
  plain.config.tkp.rbld_enabled = false;
  plain.config.tkp.rks_enabled = false;
  LfmModel training_flag = a.final_model;
  training_flag.config.tkp.training = true;
  bool infer_same = true, flags_same = true;
  for (const Tensor& img : images) {
    const double p = infer(img, a.final_model).probability;
    infer_same = infer_same && p == infer(img, b.final_model).probability;
    flags_same = flags_same && p == infer(img, plain).probability &&
                 p == infer(img, training_flag).probability;
  }
  const bool pass = ckpt && report && infer_same && flags_same;
  return {pass, std::string("checkpoints ") + (ckpt ? "identical" : "DIFFER") + ", eval json " +
                    (report ? "identical" : "DIFFERS") + ", inference " +
                    (infer_same ? "identical" : "DIFFERS") + ", rbld/rks/training flags " +
                    (flags_same ? "no effect" : "CHANGE inference")};
}

// 10. Serialization -----------------------------------------------------------

bool throws_parse(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const ParseError& e) {
    if (message) *message = e.what();
    return std::string(e.what()).find("offset") != std::string::npos;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome criterion_serialization() {
  Rng rng(1001);
  ModelConfig mc;
  mc.tkp.k = 8;
  mc.snet.bias = false;
  const LfmModel model(mc, rng);
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model);
  lfm::testing::TempDir dir("accept");
  save_checkpoint(model, dir.path() / "m.ckpt");
  const bool ckpt_rt = encode_checkpoint(decode_checkpoint(bytes)) == bytes &&
                       read_file_bytes(dir.path() / "m.ckpt") == bytes &&
                       encode_checkpoint(load_checkpoint(dir.path() / "m.ckpt")) == bytes;

  double ppm_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    Tensor img(Shape{3, 1 + rng.below(20), 1 + rng.below(20)});
    for (double& v : img.values()) v = rng.uniform();
    const Tensor back = decode_ppm(encode_ppm(img));
    for (std::size_t i = 0; i < img.numel(); ++i) ppm_err = std::max(ppm_err, std::abs(back[i] - img[i]));
  }
  const bool ppm_rt = ppm_err <= 0.5 / 255.0 + 1e-12;

  std::size_t ckpt_caught = 0, ckpt_cases = 0;
  for (int t = 0; t < 300; ++t, ++ckpt_cases) {
    std::vector<std::uint8_t> bad = bytes;
    bad[rng.below(bad.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    if (throws_parse([&] { decode_checkpoint(bad); })) ++ckpt_caught;
  }
  for (int t = 0; t < 100; ++t, ++ckpt_cases) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + rng.below(bytes.size()));
    if (throws_parse([&] { decode_checkpoint(cut); })) ++ckpt_caught;
  }
  {
    std::vector<std::uint8_t> extra = bytes;
    extra.push_back(0);
    ++ckpt_cases;
    if (throws_parse([&] { decode_checkpoint(extra); })) ++ckpt_caught;
  }

  Tensor small(Shape{3, 2, 2}, 0.5);
  const std::vector<std::uint8_t> good = encode_ppm(small);
  const std::string header(good.begin(), good.begin() + 11);  // "P6\n2 2\n255\n"
  const std::string payload(good.begin() + 11, good.end());
  const std::vector<std::string> bad_ppm{
      "P5\n2 2\n255\n" + payload,
      "P6\n2 2\n65535\n" + payload + payload,
      "P6\n0 2\n255\n",
      "P6\n2 -2\n255\n" + payload,
      "P6\n2 2\n255" + payload,
      "P6\n2 2\n255\n" + payload.substr(0, 7),
      "P6\n2 2\n255\n" + payload + "x",
      "P6\n2",
      "",
      "P6\n2 2 # trailing\n",
  };
  std::size_t ppm_caught = 0;
  for (const std::string& text : bad_ppm) {
    const std::vector<std::uint8_t> raw(text.begin(), text.end());
    if (throws_parse([&] { decode_ppm(raw); })) ++ppm_caught;
  }
  const bool ppm_header_ok = header == "P6\n2 2\n255\n";

  const bool pass = ckpt_rt && ppm_rt && ppm_header_ok && ckpt_caught == ckpt_cases &&
                    ppm_caught == bad_ppm.size();
  return {pass, std::string("checkpoint round-trip ") + (ckpt_rt ? "byte-identical" : "DIFFERS") +
                    ", ppm max err " + fmt("%.2e", ppm_err) + " (half step " +
                    fmt("%.2e", 0.5 / 255.0) + "), corrupted checkpoints diagnosed " +
                    std::to_string(ckpt_caught) + "/" + std::to_string(ckpt_cases) +
                    ", malformed ppm diagnosed " + std::to_string(ppm_caught) + "/" +
                    std::to_string(bad_ppm.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", criterion_gradients},
      {"tkp oracle equivalence", criterion_tkp_oracle},
      {"rbld schedule", criterion_rbld},
      {"rks uniformity", criterion_rks},
      {"loss composition", criterion_loss},
      {"metric oracles", criterion_metrics},
      {"synthetic experiment", criterion_experiment},
      {"zero-parameter pooling", criterion_params},
      {"determinism", criterion_determinism},
      {"serialization", criterion_serialization},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::printf("[%s] %2zu %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
