#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace xsei::signal {

/// Sampling period of the reference recordings, in milliseconds.
inline constexpr double kBaseSamplePeriodMs = 5e-3;
inline constexpr double kMainsHz = 50.0;

inline constexpr int kNormalClass = 0;
inline constexpr int kArcClass = 1;

/// Decimation factors of the sample-time sweep (5e-3 ms ... 1e-1 ms).
inline constexpr std::size_t kDefaultDownsampleFactors[] = {1, 2, 5, 10, 20};

/// Raw current trace. Amperes, one value per sample.
struct Waveform {
  std::vector<double> samples;
  double sample_period_ms = kBaseSamplePeriodMs;
  std::string load;

  void validate() const;
};

/// One flag per sample; nonzero means the sample lies inside an injected arc event.
struct ArcMask {
  std::vector<std::uint8_t> flags;

  std::size_t size() const { return flags.size(); }
  std::size_t count() const;
  bool any() const { return count() > 0; }
};

/// Half-open sample span [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SignalWindow {
  std::uint32_t id = 0;
  std::vector<double> samples;
  double sample_period_ms = kBaseSamplePeriodMs;
  int label = kNormalClass;
  ArcMask mask;
  std::string load;
  std::size_t start = 0;  // offset in the source waveform, in source samples

  std::size_t size() const { return samples.size(); }
};

struct Spectrum {
  std::vector<double> magnitudes;
  double bin_width_hz = 0.0;
};

/// Shape of the distortion applied while an arc burns.
struct ArcSignature {
  double shoulder = 0.0;         // |sin(phase)| below which current collapses toward zero
  double peak_clip = 0.0;        // fraction by which the peak is flattened
  double triangle_mix = 0.0;     // blend of the fundamental toward a triangle wave
  double half_wave_asymmetry = 0.0;  // attenuation of the negative half-wave
  double spike_rate = 0.0;       // transient bursts per mains cycle
  double spike_amplitude = 0.0;  // relative to the load amplitude
  double spike_frequency_hz = 20000.0;
  double spike_decay_ms = 0.05;
};

struct Harmonic {
  int order = 3;
  double relative_amplitude = 0.0;
  double phase_rad = 0.0;
};

/// Phenomenological load model. Amplitudes are peak amperes or fractions of it.
struct LoadProfile {
  std::string name = "load";
  double amplitude = 10.0;
  double amplitude_jitter = 0.0;  // uniform +/- fraction, drawn once per recording
  double fundamental_hz = kMainsHz;
  bool random_phase = true;
  std::vector<Harmonic> harmonics;
  double ripple_amplitude = 0.0;  // switch-mode ripple, relative to amplitude
  double ripple_frequency_hz = 0.0;
  double measurement_noise = 0.0;  // gaussian std, relative to amplitude
  double sample_period_ms = kBaseSamplePeriodMs;

  double arc_fraction = 0.0;  // expected fraction of samples inside arc events
  double arc_episode_min_ms = 10.0;
  double arc_episode_max_ms = 60.0;
  ArcSignature arc;

  void validate() const;
};

/// Synthesizes a recording of `duration` samples. Arc events start at random
/// times and cover about `arc_fraction` of the recording. Deterministic in
/// (profile, duration, seed).
std::pair<Waveform, ArcMask> synthesize(const LoadProfile& profile, std::size_t duration,
                                        std::uint64_t seed);

/// Same base waveform as synthesize() with the same seed, but arc events are
/// placed exactly on `arc_spans` instead of being drawn at random. An empty
/// span list yields the arc-free twin of the recording.
std::pair<Waveform, ArcMask> synthesize_with_arcs(const LoadProfile& profile,
                                                  std::size_t duration, std::uint64_t seed,
                                                  std::span<const Span> arc_spans);

/// Samples per mains cycle at the profile's sampling rate.
std::size_t samples_per_cycle(const LoadProfile& profile);

struct WindowOptions {
  /// Windows whose arc coverage is at least this fraction are labeled arc.
  /// Zero means any arc sample makes the window an arc window.
  double min_arc_fraction = 0.1;
  /// Windows with some arc coverage below the threshold are dropped. When
  /// false they are kept and labeled normal.
  bool discard_ambiguous = true;
};

/// Label a window would receive under `options`, or -1 if it is discarded.
int label_for_mask(std::span<const std::uint8_t> mask, const WindowOptions& options);

/// Cuts `w` into windows of `width` samples every `step` samples. Windows get
/// ids `first_id`, `first_id + 1`, ... in start order over the kept windows.
std::vector<SignalWindow> window(const Waveform& w, const ArcMask& mask, std::size_t width,
                                 std::size_t step, const WindowOptions& options = {},
                                 std::uint32_t first_id = 0);

/// Keeps every `factor`-th sample starting at index 0. With `prefilter` a
/// boxcar of width `factor` is applied first.
SignalWindow downsample(const SignalWindow& win, std::size_t factor, bool prefilter = false);

/// Adds white gaussian noise with power mean(x^2) / 10^(snr_db/10). The unit
/// noise sequence depends only on `seed`.
SignalWindow add_noise(const SignalWindow& win, double snr_db, std::uint64_t seed);

/// Unnormalized real FFT magnitude, floor(N/2)+1 bins.
Spectrum fft_magnitude(std::span<const double> samples, double sample_period_ms);
Spectrum fft_magnitude(const SignalWindow& win);

double mean_power(std::span<const double> samples);

}  // namespace xsei::signal
