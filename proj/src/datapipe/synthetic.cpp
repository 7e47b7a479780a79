#include "tsf/datapipe/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "tsf/datapipe/filters.hpp"

namespace tsf::datapipe {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::mt19937_64 stream_rng(std::uint64_t seed, int subject, int cls, int trial, int stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(subject), static_cast<std::uint32_t>(cls),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}
}  // namespace

void SyntheticSpec::validate() const {
  if (classes.empty()) throw SpecError("synthetic spec: no classes");
  if (subjects < 1 || trials_per_subject < 1) throw SpecError("synthetic spec: counts must be positive");
  if (!(sample_rate_hz > 0.0)) throw SpecError("synthetic spec: sample rate must be positive");
  if (window == 0 || overlap >= window || windows_per_trial == 0 || imu_count == 0) {
    throw SpecError("synthetic spec: invalid window layout");
  }
  if (gravimeter_noise < 0.0 || gyro_noise < 0.0) throw SpecError("synthetic spec: negative noise");
  const double nyquist = sample_rate_hz / 2.0;
  for (const ClassSpec& c : classes) {
    if (!(c.freq_lo_hz > 0.0) || c.freq_hi_hz < c.freq_lo_hz) {
      throw SpecError("synthetic spec: class '" + c.name + "' has an invalid band");
    }
    // The 2f harmonic, scaled by up to 10% per subject, must stay below Nyquist.
    if (c.freq_hi_hz * 1.1 * 2.0 >= nyquist || c.sway_hz >= nyquist) {
      throw SpecError("synthetic spec: class '" + c.name + "' frequency reaches Nyquist");
    }
  }
}

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.classes = {
      {"still_upright", 0.4, 0.9, 0.6, 0.0, 0.0, 0.08, 0.15},
      {"walk_upright", 1.6, 2.4, 1.8, 0.0, 0.0, 0.12, 0.3},
      {"run_leaning", 3.5, 5.0, 3.0, 0.0, 0.6, 0.15, 0.5},
      {"still_lying", 0.4, 0.9, 0.6, 1.2, 0.0, 0.08, 0.15},
  };
  return s;
}

std::array<double, 3> gravity_from_angles(double roll, double pitch, double g) {
  return {-g * std::sin(pitch), g * std::cos(pitch) * std::sin(roll),
          g * std::cos(pitch) * std::cos(roll)};
}

std::vector<RawRecording> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.trial_length();
  const double fs = spec.sample_rate_hz;
  std::vector<RawRecording> out;
  for (int subj = 0; subj < spec.subjects; ++subj) {
    auto subj_rng = stream_rng(seed, subj, -1, -1, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nrm(0.0, 1.0);
    const double freq_scale = 0.9 + 0.2 * u(subj_rng);
    const double amp_scale = 0.8 + 0.4 * u(subj_rng);
    const double roll_off = 0.08 * nrm(subj_rng);
    const double pitch_off = 0.08 * nrm(subj_rng);
    for (int cls = 0; cls < static_cast<int>(spec.classes.size()); ++cls) {
      const ClassSpec& c = spec.classes[static_cast<std::size_t>(cls)];
      for (int trial = 0; trial < spec.trials_per_subject; ++trial) {
        auto rng = stream_rng(seed, subj, cls, trial, 1);
        RawRecording rec;
        rec.subject_id = subj;
        rec.trial_id = trial;
        rec.activity_label = cls;
        rec.sample_rate_hz = fs;
        const double f = (c.freq_lo_hz + (c.freq_hi_hz - c.freq_lo_hz) * u(rng)) * freq_scale;
        for (std::size_t p = 0; p < spec.imu_count; ++p) {
          const double mount_roll = p == 0 ? 0.0 : 0.3 * nrm(rng);
          const double mount_pitch = p == 0 ? 0.0 : 0.3 * nrm(rng);
          const double imu_amp = c.amplitude * amp_scale * (p == 0 ? 1.0 : 0.6 + 0.8 * u(rng));
          const double sway_f = c.sway_hz * (0.8 + 0.4 * u(rng));
          const double sway_phase = kTwoPi * u(rng);
          std::array<double, 3> dir{nrm(rng), nrm(rng), nrm(rng) + 1.5};
          const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
          for (double& d : dir) d /= dn;
          const double phase1 = kTwoPi * u(rng);
          const double phase2 = kTwoPi * u(rng);

          ImuStream s;
          s.accel = make_axes(n);
          s.gyro = make_axes(n);
          Axes grav = make_axes(n);
          const double roll0 = c.roll_rad + roll_off + mount_roll;
          const double pitch0 = c.pitch_rad + pitch_off + mount_pitch;
          const double w = kTwoPi * sway_f;
          for (std::size_t t = 0; t < n; ++t) {
            const double ts = static_cast<double>(t) / fs;
            const double roll = roll0 + c.sway_rad * std::sin(w * ts + sway_phase);
            const double pitch = pitch0 + 0.7 * c.sway_rad * std::cos(w * ts + sway_phase);
            const auto g = gravity_from_angles(roll, pitch, spec.gravity);
            const double osc = std::sin(kTwoPi * f * ts + phase1) +
                               0.3 * std::sin(kTwoPi * 2.0 * f * ts + phase2);
            for (std::size_t a = 0; a < 3; ++a) {
              grav[a][t] = g[a];
              s.accel[a][t] = g[a] + imu_amp * dir[a] * osc;
            }
            s.gyro[0][t] = c.sway_rad * w * std::cos(w * ts + sway_phase);
            s.gyro[1][t] = -0.7 * c.sway_rad * w * std::sin(w * ts + sway_phase);
            s.gyro[2][t] = 0.0;
          }
          for (std::size_t a = 0; a < 3; ++a) {
            auto hf_rng = stream_rng(seed, subj, cls, trial, 100 + static_cast<int>(p * 3 + a));
            auto lf_rng = stream_rng(seed, subj, cls, trial, 200 + static_cast<int>(p * 3 + a));
            const auto hf = high_frequency_noise(n, fs, spec.gravimeter_noise, hf_rng);
            const auto lf = low_frequency_noise(n, fs, spec.gyro_noise, lf_rng);
            for (std::size_t t = 0; t < n; ++t) {
              s.accel[a][t] += hf[t];
              s.gyro[a][t] += lf[t];
            }
          }
          if (spec.emit_gravimeter) s.gravity = std::move(grav);
          rec.imus.push_back(std::move(s));
        }
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

}  // namespace tsf::datapipe
