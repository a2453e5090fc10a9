#include "capfuse/prosody.hpp"

#include <algorithm>
#include <cmath>

namespace capfuse {

std::optional<ToneDecision> classify_tone(const ProsodyZ& z, const ToneRules& r) {
  const char* label = nullptr;
  if (z.energy > r.excited_energy && z.f0_var > r.excited_f0var) {
    label = "excited";
  } else if (z.energy > r.urgent_energy && z.rate > r.urgent_rate) {
    label = "urgent";
  } else if (z.energy < r.calm_energy && z.rate < r.calm_rate) {
    label = "calm";
  } else if (z.f0_var > r.concerned_f0var && z.energy <= r.concerned_energy_max) {
    label = "concerned";
  }
  if (label == nullptr) return std::nullopt;

  const double peak = std::max({std::abs(z.energy), std::abs(z.f0_mean), std::abs(z.f0_var), std::abs(z.rate)});
  return ToneDecision{validate_label(CueKind::tone, label), std::min(1.0, peak / 3.0)};
}

void RunningStats::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::stddev() const {
  if (n_ < 2) return 0.0;
  return std::sqrt(m2_ / static_cast<double>(n_ - 1));
}

double RunningStats::z(double x) const {
  const double sd = stddev();
  if (!(sd > 1e-12)) return 0.0;
  return (x - mean_) / sd;
}

ToneDetector::ToneDetector(ToneRules rules) : rules_(rules) { window_.reserve(rules_.window_frames); }

std::optional<CueEvent> ToneDetector::push(const ProsodyFrame& frame) {
  if (!session_start_) session_start_ = frame.t;
  window_.push_back(frame);
  if (window_.size() < rules_.window_frames) return std::nullopt;

  std::array<double, 4> means{};
  for (const auto& f : window_) {
    means[0] += f.rms_energy;
    means[1] += f.f0_mean;
    means[2] += f.f0_var;
    means[3] += f.rate;
  }
  for (auto& m : means) m /= static_cast<double>(window_.size());

  const Timestamp t_start = window_.front().t;
  const Timestamp t_end = window_.back().t + rules_.frame_hop_ms;
  const bool have_baseline = t_start - *session_start_ >= rules_.baseline_ms;

  std::optional<CueEvent> cue;
  if (have_baseline) {
    const ProsodyZ z{stats_[0].z(means[0]), stats_[1].z(means[1]), stats_[2].z(means[2]), stats_[3].z(means[3])};
    if (auto decision = classify_tone(z, rules_)) {
      CueEvent ev;
      ev.source_seq = next_seq_++;
      ev.kind = CueKind::tone;
      ev.label = decision->label;
      ev.t_start = t_start;
      ev.t_end = t_end;
      ev.confidence = decision->confidence;
      ev.source_id = "prosody";
      cue = std::move(ev);
    }
  }

  for (const auto& f : window_) {
    stats_[0].add(f.rms_energy);
    stats_[1].add(f.f0_mean);
    stats_[2].add(f.f0_var);
    stats_[3].add(f.rate);
  }
  window_.clear();
  next_window_start_ = t_end;
  return cue;
}

}  // namespace capfuse
