/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadaudit/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "roadaudit/metrics.hpp"
#include "roadaudit/rng.hpp"

namespace roadaudit {

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.batch_size = 14;
  c.input_width = 1024;
  c.input_height = 512;
  return c;
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    fail(ErrorKind::kConfig, "learning rate must be finite and non-negative");
  }
  if (c.batch_size < 1) fail(ErrorKind::kConfig, "batch size must be >= 1");
  if (c.input_width <= 0 || c.input_height <= 0 || c.input_width % kDownsampleFactor != 0 ||
      c.input_height % kDownsampleFactor != 0) {
    fail(ErrorKind::kConfig, "input size " + std::to_string(c.input_width) + "x" +
                                 std::to_string(c.input_height) +
                                 " must be positive multiples of 8");
  }
  if (c.max_epochs_road < 0 || c.max_epochs_joint < 0) {
    fail(ErrorKind::kConfig, "epoch limits must be non-negative");
  }
  if (c.road_phase_target < 0.0 || c.road_phase_target > 1.0) {
    fail(ErrorKind::kConfig, "road_phase_target must lie in [0, 1]");
  }
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["input_width"] = c.input_width;
  j["input_height"] = c.input_height;
  j["road_phase_target"] = c.road_phase_target;
  j["max_epochs_road"] = c.max_epochs_road;
  j["max_epochs_joint"] = c.max_epochs_joint;
  j["schedule"] = c.schedule == TrainSchedule::kTwoStep ? "two_step" : "joint";
  j["class_weights"] = c.inverse_frequency_weights ? "inverse_frequency" : "none";
  j["target_train_miou"] = c.target_train_miou;
  j["track_train_miou"] = c.track_train_miou;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("learning_rate", c.learning_rate);
    read("batch_size", c.batch_size);
    read("input_width", c.input_width);
    read("input_height", c.input_height);
    read("road_phase_target", c.road_phase_target);
    read("max_epochs_road", c.max_epochs_road);
    read("max_epochs_joint", c.max_epochs_joint);
    read("target_train_miou", c.target_train_miou);
    read("track_train_miou", c.track_train_miou);
    read("checkpoint_every", c.checkpoint_every);
    read("seed", c.seed);
    read("beta1", c.beta1);
    read("beta2", c.beta2);
    read("epsilon", c.epsilon);
    if (j.contains("schedule")) {
      const auto s = j.at("schedule").get<std::string>();
      if (s == "two_step") {
        c.schedule = TrainSchedule::kTwoStep;
      } else if (s == "joint") {
        c.schedule = TrainSchedule::kJoint;
      } else {
        fail(ErrorKind::kConfig, "unknown schedule '" + s + "'");
      }
    }
    if (j.contains("class_weights")) {
      const auto s = j.at("class_weights").get<std::string>();
      if (s != "none" && s != "inverse_frequency") {
        fail(ErrorKind::kConfig, "unknown class_weights '" + s + "'");
      }
      c.inverse_frequency_weights = s == "inverse_frequency";
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed training config: ") + e.what());
  }
  validate_train_config(c);
  return c;
}

Mask road_ground_truth(const Mask& class_mask) {
  validate_class_mask(class_mask);
  Mask out(class_mask.height(), class_mask.width());
  auto src = class_mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != kVoidId ? 1 : 0;
  return out;
}

template <typename T>
LossResult<T> masked_cross_entropy(const Tensor<T>& logits, std::span<const Mask* const> targets,
                                   std::optional<int> ignore_label,
                                   std::span<const double> class_weights) {
  if (logits.rank() != 4 || logits.dim(0) != static_cast<int>(targets.size())) {
    fail(ErrorKind::kShape, "cross entropy: logits " + logits.shape_string() + " vs " +
                                std::to_string(targets.size()) + " targets");
  }
  const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  if (!class_weights.empty() && static_cast<int>(class_weights.size()) != k) {
    fail(ErrorKind::kConfig, "class weight count must equal logit count");
  }
  for (const T v : logits.values()) {
    if (!std::isfinite(static_cast<double>(v))) {
      fail(ErrorKind::kNumerical, "cross entropy: non-finite logit");
    }
  }
  LossResult<T> r;
  r.grad = Tensor<T>(logits.shape());
  double total = 0.0;
  double weight_sum = 0.0;
  std::vector<double> p(k);
  for (int s = 0; s < n; ++s) {
    const Mask& target = *targets[s];
    if (target.height() != h || target.width() != w) {
      fail(ErrorKind::kShape, "cross entropy: target size differs from logits");
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int t = target(y, x);
        if (ignore_label && t == *ignore_label) continue;
        if (t >= k) fail(ErrorKind::kInvalidLabel, "cross entropy: target " + std::to_string(t));
        double mx = logits.at(s, 0, y, x);
        for (int c = 1; c < k; ++c) mx = std::max(mx, static_cast<double>(logits.at(s, c, y, x)));
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
          p[c] = std::exp(static_cast<double>(logits.at(s, c, y, x)) - mx);
          sum += p[c];
        }
        const double wt = class_weights.empty() ? 1.0 : class_weights[t];
        total += wt * (std::log(sum) - (static_cast<double>(logits.at(s, t, y, x)) - mx));
        weight_sum += wt;
        for (int c = 0; c < k; ++c) {
          r.grad.at(s, c, y, x) = static_cast<T>(wt * (p[c] / sum - (c == t ? 1.0 : 0.0)));
        }
        ++r.counted;
      }
    }
  }
  if (r.counted == 0 || weight_sum <= 0.0) {
    r.all_ignored = true;
    r.grad.fill(T(0));
    return r;
  }
  const T scale = static_cast<T>(1.0 / weight_sum);
  for (auto& g : r.grad.values()) g *= scale;
  r.loss = static_cast<T>(total / weight_sum);
  return r;
}

template LossResult<float> masked_cross_entropy(const Tensor<float>&, std::span<const Mask* const>,
                                                std::optional<int>, std::span<const double>);
template LossResult<double> masked_cross_entropy(const Tensor<double>&,
                                                 std::span<const Mask* const>, std::optional<int>,
                                                 std::span<const double>);

// ---------------------------------------------------------------------------

template <typename T>
Adam<T>::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

template <typename T>
void Adam<T>::step(const nn::ParamList<T>& params) {
  for (auto* p : params) {
    auto& st = state_[p];
    if (st.m.empty()) {
      st.m.assign(p->value.size(), 0.0);
      st.v.assign(p->value.size(), 0.0);
    }
    ++st.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
    T* value = p->value.data();
    const T* grad = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = grad[i];
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g;
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g * g;
      const double update = lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
      value[i] -= static_cast<T>(update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

// ---------------------------------------------------------------------------

std::optional<int> TrainHistory::first_epoch_reaching(double threshold) const {
  for (const auto& e : epochs) {
    if (e.train_defect_miou && *e.train_defect_miou >= threshold) return e.epoch;
  }
  return std::nullopt;
}

std::optional<double> TrainHistory::final_train_defect_miou() const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it) {
    if (it->train_defect_miou) return it->train_defect_miou;
  }
  return std::nullopt;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,step,road_loss,defect_loss,val_road_miou,val_defect_miou,train_defect_miou,"
         "seconds\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.step << ',' << e.road_loss << ',' << e.defect_loss << ',';
    opt(e.val_road_miou);
    out << ',';
    opt(e.val_defect_miou);
    out << ',';
    opt(e.train_defect_miou);
    out << ',' << e.seconds << '\n';
  }
  return out.str();
}

namespace {

struct Prepared {
  std::vector<Tensor<float>> images;  // 1 x 3 x H x W each
  std::vector<Mask> classes;
  std::vector<Mask> road;
};

Prepared prepare(const std::vector<const Frame*>& frames, int h, int w) {
  Prepared p;
  for (const Frame* f : frames) {
    p.images.push_back(images_to_tensor({&f->image}, h, w));
    p.classes.push_back(resize_mask_nearest(f->mask, h, w));
    p.road.push_back(road_ground_truth(p.classes.back()));
  }
  return p;
}

Tensor<float> stack(const Prepared& p, std::span<const int> idx) {
  const auto& first = p.images[idx[0]];
  Tensor<float> batch = Tensor<float>::nchw(static_cast<int>(idx.size()), 3, first.dim(2), first.dim(3));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& src = p.images[idx[i]];
    std::copy(src.data(), src.data() + src.size(), batch.sample(static_cast<int>(i)));
  }
  return batch;
}

QuickScores score_prepared(SegModel<float>& model, const Prepared& p, int batch_size) {
  ConfusionMatrix road_cm(2, std::nullopt);
  ConfusionMatrix class_cm = ConfusionMatrix::for_level(HierarchyLevel::kClassFull);
  const int n = static_cast<int>(p.images.size());
  for (int start = 0; start < n; start += batch_size) {
    std::vector<int> idx;
    for (int i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const auto out = model.forward(stack(p, idx), false);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int s = static_cast<int>(i);
      class_cm.accumulate(decode_prediction<float>(out, s, model.is_cascade()), p.classes[idx[i]]);
      if (model.is_cascade()) {
        Mask road_pred(p.road[idx[i]].height(), p.road[idx[i]].width());
        for (int y = 0; y < road_pred.height(); ++y) {
          for (int x = 0; x < road_pred.width(); ++x) {
            road_pred(y, x) = out.road_prob.at(s, 0, y, x) >= 0.5f ? 1 : 0;
          }
        }
        road_cm.accumulate(road_pred, p.road[idx[i]]);
      }
    }
  }
  QuickScores s;
  const int road_ids[] = {0, 1};
  if (model.is_cascade() && road_cm.total() > 0) s.road_miou = mean_iou(road_cm, road_ids);
  try {
    s.defect_miou = mean_iou(class_cm, evaluated_ids(HierarchyLevel::kClassFull));
  } catch (const Error&) {
  }
  return s;
}

std::optional<double> road_miou_only(SegModel<float>& model, const Prepared& p, int batch_size) {
  ConfusionMatrix cm(2, std::nullopt);
  const int n = static_cast<int>(p.images.size());
  for (int start = 0; start < n; start += batch_size) {
    std::vector<int> idx;
    for (int i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const auto logits = model.forward_road(stack(p, idx), false);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Mask& gt = p.road[idx[i]];
      Mask pred(gt.height(), gt.width());
      for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
          pred(y, x) = logits.at(static_cast<int>(i), 1, y, x) > logits.at(static_cast<int>(i), 0, y, x);
        }
      }
      cm.accumulate(pred, gt);
    }
  }
  const int ids[] = {0, 1};
  if (cm.total() == 0) return std::nullopt;
  return mean_iou(cm, ids);
}

std::vector<double> inverse_frequency(const Prepared& p) {
  std::vector<double> counts(kNumClasses, 0.0);
  for (const auto& m : p.classes) {
    for (auto v : m.values()) counts[v] += 1.0;
  }
  double total = 0.0;
  int present = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    total += counts[c];
    present += counts[c] > 0;
  }
  std::vector<double> w(kNumClasses, 0.0);
  for (int c = 1; c < kNumClasses; ++c) {
    if (counts[c] > 0) w[c] = total / (present * counts[c]);
  }
  return w;
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    fail(ErrorKind::kNumerical, "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
  }
}

}  // namespace

QuickScores score_frames(SegModel<float>& model, const std::vector<const Frame*>& frames,
                         int input_height, int input_width) {
  return score_prepared(model, prepare(frames, input_height, input_width), 4);
}

TrainHistory train_model(SegModel<float>& model, const TrainData& data, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  validate_train_config(config);
  if (data.train.empty()) fail(ErrorKind::kData, "training set is empty");
  if (data.val.empty()) fail(ErrorKind::kData, "validation set is empty");
  const int h = config.input_height, w = config.input_width;
  const Prepared train = prepare(data.train, h, w);
  const Prepared val = prepare(data.val, h, w);
  const std::vector<double> weights =
      config.inverse_frequency_weights ? inverse_frequency(train) : std::vector<double>{};

  Adam<float> adam(config.learning_rate, config.beta1, config.beta2, config.epsilon);
  const auto road_params = model.road_parameters();
  const auto all_params = model.parameters();
  Rng order_rng(mix_seed(config.seed, 0x7261696eULL));
  const int n = static_cast<int>(train.images.size());
  const int eval_batch = std::max(1, config.batch_size);

  TrainHistory history;
  int epoch = 0;
  using Clock = std::chrono::steady_clock;

  auto batches = [&]() {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    order_rng.shuffle(order);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < n; start += config.batch_size) {
      out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + config.batch_size));
    }
    return out;
  };

  if (model.is_cascade() && config.schedule == TrainSchedule::kTwoStep) {
    for (int e = 0; e < config.max_epochs_road; ++e) {
      const auto t0 = Clock::now();
      ++epoch;
      EpochRecord rec;
      rec.epoch = epoch;
      rec.step = 1;
      double loss_sum = 0.0;
      int batches_run = 0;
      for (const auto& idx : batches()) {
        model.zero_grad();
        const auto logits = model.forward_road(stack(train, idx), true);
        std::vector<const Mask*> targets;
        for (int i : idx) targets.push_back(&train.road[i]);
        const auto loss = masked_cross_entropy<float>(logits, targets, std::nullopt);
        check_finite(loss.loss, epoch);
        model.backward_road(loss.grad);
        adam.step(road_params);
        loss_sum += loss.loss;
        ++batches_run;
      }
      rec.road_loss = loss_sum / batches_run;
      rec.val_road_miou = road_miou_only(model, val, eval_batch);
      rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      history.epochs.push_back(rec);
      history.road_epochs = epoch;
      if (on_epoch) on_epoch(rec, model);
      if (rec.val_road_miou && *rec.val_road_miou >= config.road_phase_target) {
        history.road_target_reached = true;
        break;
      }
    }
    if (!history.road_target_reached) {
      history.warnings.push_back("road step ended after " + std::to_string(history.road_epochs) +
                                 " epochs below the road_phase_target of " +
                                 std::to_string(config.road_phase_target));
    }
  }

  for (int e = 0; e < config.max_epochs_joint; ++e) {
    const auto t0 = Clock::now();
    ++epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = 2;
    double road_sum = 0.0, defect_sum = 0.0;
    int batches_run = 0;
    for (const auto& idx : batches()) {
      model.zero_grad();
      const auto out = model.forward(stack(train, idx), true);
      std::vector<const Mask*> class_targets, road_targets;
      for (int i : idx) {
        class_targets.push_back(&train.classes[i]);
        road_targets.push_back(&train.road[i]);
      }
      const auto defect = masked_cross_entropy<float>(out.defect_logits, class_targets, kVoidId, weights);
      check_finite(defect.loss, epoch);
      Tensor<float> road_grad;
      if (model.is_cascade()) {
        const auto road = masked_cross_entropy<float>(out.road_logits, road_targets, std::nullopt);
        check_finite(road.loss, epoch);
        road_sum += road.loss;
        road_grad = road.grad;
      }
      model.backward(road_grad, defect.grad);
      adam.step(all_params);
      defect_sum += defect.loss;
      ++batches_run;
    }
    rec.road_loss = road_sum / batches_run;
    rec.defect_loss = defect_sum / batches_run;
    const auto v = score_prepared(model, val, eval_batch);
    rec.val_road_miou = v.road_miou;
    rec.val_defect_miou = v.defect_miou;
    if (config.track_train_miou) rec.train_defect_miou = score_prepared(model, train, eval_batch).defect_miou;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, model);
    if (config.target_train_miou > 0.0 && rec.train_defect_miou &&
        *rec.train_defect_miou >= config.target_train_miou) {
      break;
    }
  }
  return history;
}

}  // namespace roadaudit
