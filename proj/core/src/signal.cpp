#include "xsei/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "xsei/common.hpp"

namespace xsei::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(message);
}

double triangle(double phase) { return (2.0 / std::numbers::pi) * std::asin(std::sin(phase)); }

std::size_t ms_to_samples(double ms, double period_ms) {
  return static_cast<std::size_t>(std::llround(ms / period_ms));
}

std::vector<Span> draw_arc_spans(const LoadProfile& p, std::size_t duration, std::uint64_t seed) {
  std::vector<Span> spans;
  if (p.arc_fraction <= 0.0) return spans;
  if (p.arc_fraction >= 1.0) {
    spans.push_back({0, duration});
    return spans;
  }
  std::mt19937_64 rng(derive_seed(seed, "arc-spans"));
  const double min_len = std::max(1.0, p.arc_episode_min_ms / p.sample_period_ms);
  const double max_len = std::max(min_len, p.arc_episode_max_ms / p.sample_period_ms);
  const double mean_len = 0.5 * (min_len + max_len);
  const double mean_gap = mean_len * (1.0 - p.arc_fraction) / p.arc_fraction;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t pos = 0;
  while (pos < duration) {
    const auto gap = static_cast<std::size_t>(std::llround(2.0 * mean_gap * unit(rng)));
    const auto len =
        static_cast<std::size_t>(std::llround(min_len + (max_len - min_len) * unit(rng)));
    const std::size_t begin = pos + gap;
    if (begin >= duration) break;
    const std::size_t end = std::min(duration, begin + std::max<std::size_t>(len, 1));
    spans.push_back({begin, end});
    pos = end;
  }
  return spans;
}

std::pair<Waveform, ArcMask> render(const LoadProfile& p, std::size_t duration, std::uint64_t seed,
                                    std::span<const Span> spans) {
  Waveform w;
  w.sample_period_ms = p.sample_period_ms;
  w.load = p.name;
  w.samples.assign(duration, 0.0);
  ArcMask mask;
  mask.flags.assign(duration, 0);
  for (const Span& s : spans) {
    require(s.begin <= s.end && s.end <= duration, "arc span outside the recording");
    std::fill(mask.flags.begin() + static_cast<std::ptrdiff_t>(s.begin),
              mask.flags.begin() + static_cast<std::ptrdiff_t>(s.end), 1);
  }

  std::mt19937_64 base_rng(derive_seed(seed, "base"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double amplitude = p.amplitude * (1.0 + p.amplitude_jitter * (2.0 * unit(base_rng) - 1.0));
  const double phase0 = p.random_phase ? kTwoPi * unit(base_rng) : 0.0;
  const double ripple_phase = kTwoPi * unit(base_rng);
  const double omega = kTwoPi * p.fundamental_hz / 1000.0;  // rad per ms
  const double ripple_omega = kTwoPi * p.ripple_frequency_hz / 1000.0;
  const ArcSignature& arc = p.arc;
  const double clip = 1.0 - arc.peak_clip;

  for (std::size_t i = 0; i < duration; ++i) {
    const double t = static_cast<double>(i) * p.sample_period_ms;
    const double theta = omega * t + phase0;
    double shape = std::sin(theta);
    for (const Harmonic& h : p.harmonics) {
      shape += h.relative_amplitude * std::sin(h.order * theta + h.phase_rad);
    }
    if (mask.flags[i]) {
      shape = (1.0 - arc.triangle_mix) * shape + arc.triangle_mix * triangle(theta);
      if (std::abs(std::sin(theta)) < arc.shoulder) shape = 0.0;
      shape = std::clamp(shape, -clip, clip);
      if (shape < 0.0) shape *= 1.0 - arc.half_wave_asymmetry;
    }
    double value = amplitude * shape;
    if (p.ripple_amplitude != 0.0) {
      value += amplitude * p.ripple_amplitude * std::sin(ripple_omega * t + ripple_phase);
    }
    // Drawn for every sample; the arc-free twin shares it.
    const double noise = gauss(base_rng);
    value += amplitude * p.measurement_noise * noise;
    w.samples[i] = value;
  }

  if (arc.spike_rate > 0.0 && arc.spike_amplitude > 0.0) {
    std::mt19937_64 spike_rng(derive_seed(seed, "spikes"));
    const double cycle_samples = 1000.0 / (p.fundamental_hz * p.sample_period_ms);
    const double decay = arc.spike_decay_ms;
    const double spike_omega = kTwoPi * arc.spike_frequency_hz / 1000.0;
    const std::size_t tail = ms_to_samples(5.0 * decay, p.sample_period_ms);
    for (const Span& s : spans) {
      const double expected = arc.spike_rate * static_cast<double>(s.length()) / cycle_samples;
      std::poisson_distribution<int> count_dist(expected);
      const int count = expected > 0.0 ? count_dist(spike_rng) : 0;
      for (int k = 0; k < count; ++k) {
        const auto at = s.begin + static_cast<std::size_t>(unit(spike_rng) *
                                                          static_cast<double>(s.length()));
        const double sign = unit(spike_rng) < 0.5 ? -1.0 : 1.0;
        const double a = sign * amplitude * arc.spike_amplitude * (0.5 + 0.5 * unit(spike_rng));
        const std::size_t stop = std::min(s.end, at + tail + 1);
        for (std::size_t i = at; i < stop; ++i) {
          const double tau = static_cast<double>(i - at) * p.sample_period_ms;
          w.samples[i] += a * std::exp(-tau / decay) * std::sin(spike_omega * tau);
        }
      }
    }
  }
  return {std::move(w), std::move(mask)};
}

}  // namespace

void Waveform::validate() const {
  require(sample_period_ms > 0.0, "waveform sample_period must be positive");
  require(!samples.empty(), "waveform is empty");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(std::isfinite(samples[i]), "waveform sample " + std::to_string(i) + " is not finite");
  }
}

std::size_t ArcMask::count() const {
  return static_cast<std::size_t>(std::count_if(flags.begin(), flags.end(),
                                                [](std::uint8_t f) { return f != 0; }));
}

void LoadProfile::validate() const {
  const std::string where = "load profile '" + name + "': ";
  require(amplitude >= 0.0, where + "amplitude must be nonnegative");
  require(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0, where + "amplitude_jitter must be in [0,1)");
  require(fundamental_hz > 0.0, where + "fundamental_hz must be positive");
  require(ripple_amplitude >= 0.0, where + "ripple_amplitude must be nonnegative");
  require(ripple_frequency_hz >= 0.0, where + "ripple_frequency_hz must be nonnegative");
  require(measurement_noise >= 0.0, where + "measurement_noise must be nonnegative");
  require(sample_period_ms > 0.0, where + "sample_period_ms must be positive");
  require(arc_fraction >= 0.0 && arc_fraction <= 1.0, where + "arc_fraction must be in [0,1]");
  require(arc_episode_min_ms > 0.0 && arc_episode_max_ms >= arc_episode_min_ms,
          where + "arc episode duration range is invalid");
  for (const Harmonic& h : harmonics) {
    require(h.order >= 2, where + "harmonic order must be >= 2");
    require(h.relative_amplitude >= 0.0, where + "harmonic amplitude must be nonnegative");
  }
  require(arc.shoulder >= 0.0 && arc.shoulder < 1.0, where + "arc shoulder must be in [0,1)");
  require(arc.peak_clip >= 0.0 && arc.peak_clip < 1.0, where + "arc peak_clip must be in [0,1)");
  require(arc.triangle_mix >= 0.0 && arc.triangle_mix <= 1.0, where + "arc triangle_mix must be in [0,1]");
  require(arc.half_wave_asymmetry >= 0.0 && arc.half_wave_asymmetry <= 1.0,
          where + "arc half_wave_asymmetry must be in [0,1]");
  require(arc.spike_rate >= 0.0, where + "arc spike_rate must be nonnegative");
  require(arc.spike_amplitude >= 0.0, where + "arc spike_amplitude must be nonnegative");
  require(arc.spike_frequency_hz > 0.0 && arc.spike_decay_ms > 0.0,
          where + "arc spike frequency and decay must be positive");
}

std::size_t samples_per_cycle(const LoadProfile& profile) {
  return static_cast<std::size_t>(
      std::ceil(1000.0 / (kMainsHz * profile.sample_period_ms) - 1e-9));
}

std::pair<Waveform, ArcMask> synthesize(const LoadProfile& profile, std::size_t duration,
                                        std::uint64_t seed) {
  profile.validate();
  require(duration >= samples_per_cycle(profile),
          "synthesis duration must cover at least one 50 Hz cycle");
  const auto spans = draw_arc_spans(profile, duration, seed);
  return render(profile, duration, seed, spans);
}

std::pair<Waveform, ArcMask> synthesize_with_arcs(const LoadProfile& profile,
                                                  std::size_t duration, std::uint64_t seed,
                                                  std::span<const Span> arc_spans) {
  profile.validate();
  require(duration >= samples_per_cycle(profile),
          "synthesis duration must cover at least one 50 Hz cycle");
  return render(profile, duration, seed, arc_spans);
}

int label_for_mask(std::span<const std::uint8_t> mask, const WindowOptions& options) {
  const auto arc = static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](std::uint8_t f) { return f != 0; }));
  if (arc == 0) return kNormalClass;
  const double fraction = static_cast<double>(arc) / static_cast<double>(mask.size());
  if (fraction >= options.min_arc_fraction) return kArcClass;
  return options.discard_ambiguous ? -1 : kNormalClass;
}

std::vector<SignalWindow> window(const Waveform& w, const ArcMask& mask, std::size_t width,
                                 std::size_t step, const WindowOptions& options,
                                 std::uint32_t first_id) {
  require(step >= 1, "window step must be >= 1");
  require(width >= 1, "window width must be >= 1");
  require(width <= w.samples.size(), "window width exceeds waveform length");
  require(mask.size() == w.samples.size(), "arc mask length differs from waveform length");
  const std::size_t count = (w.samples.size() - width) / step + 1;
  std::vector<SignalWindow> out;
  out.reserve(count);
  std::uint32_t id = first_id;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * step;
    const auto first = static_cast<std::ptrdiff_t>(start);
    const auto last = static_cast<std::ptrdiff_t>(start + width);
    std::span<const std::uint8_t> flags(mask.flags.data() + start, width);
    const int label = label_for_mask(flags, options);
    if (label < 0) continue;
    SignalWindow win;
    win.id = id++;
    win.samples.assign(w.samples.begin() + first, w.samples.begin() + last);
    win.sample_period_ms = w.sample_period_ms;
    win.label = label;
    win.mask.flags.assign(mask.flags.begin() + first, mask.flags.begin() + last);
    win.load = w.load;
    win.start = start;
    out.push_back(std::move(win));
  }
  return out;
}

SignalWindow downsample(const SignalWindow& win, std::size_t factor, bool prefilter) {
  require(factor >= 1, "downsample factor must be >= 1");
  require(win.mask.size() == win.samples.size(), "window mask length differs from sample count");
  SignalWindow out;
  out.id = win.id;
  out.label = win.label;
  out.load = win.load;
  out.start = win.start;
  out.sample_period_ms = win.sample_period_ms * static_cast<double>(factor);
  const std::size_t n = win.samples.size();
  out.samples.reserve((n + factor - 1) / factor);
  out.mask.flags.reserve((n + factor - 1) / factor);
  for (std::size_t i = 0; i < n; i += factor) {
    double v = win.samples[i];
    if (prefilter && factor > 1) {
      const std::size_t stop = std::min(n, i + factor);
      double sum = 0.0;
      for (std::size_t j = i; j < stop; ++j) sum += win.samples[j];
      v = sum / static_cast<double>(stop - i);
    }
    out.samples.push_back(v);
    out.mask.flags.push_back(win.mask.flags[i]);
  }
  return out;
}

double mean_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (double v : samples) sum += v * v;
  return sum / static_cast<double>(samples.size());
}

SignalWindow add_noise(const SignalWindow& win, double snr_db, std::uint64_t seed) {
  require(!win.samples.empty(), "cannot add noise to an empty window");
  const double signal_power = mean_power(win.samples);
  require(signal_power > 0.0, "window " + std::to_string(win.id) +
                                  " has zero signal power; SNR is undefined");
  const double noise_std = std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
  SignalWindow out = win;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : out.samples) v += noise_std * gauss(rng);
  return out;
}

namespace {
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Spectrum fft_magnitude(std::span<const double> samples, double sample_period_ms) {
  require(samples.size() >= 2, "fft needs at least two samples");
  require(sample_period_ms > 0.0, "fft sample period must be positive");
  const int n = static_cast<int>(samples.size());
  const int bins = n / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(bins));
  fftw_plan plan;
  {
    // Only fftw_execute is thread-safe; planning is serialized.
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  std::copy(samples.begin(), samples.end(), in);
  fftw_execute(plan);
  Spectrum s;
  s.magnitudes.resize(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) s.magnitudes[k] = std::hypot(out[k][0], out[k][1]);
  s.bin_width_hz = 1000.0 / (static_cast<double>(n) * sample_period_ms);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return s;
}

Spectrum fft_magnitude(const SignalWindow& win) {
  return fft_magnitude(win.samples, win.sample_period_ms);
}

}  // namespace xsei::signal
