#include <cmath>
#include <numbers>

#include "afglab/dataset.hpp"
#include "afglab/error.hpp"
#include "afglab/prng.hpp"

namespace afg {

namespace {
constexpr double kPi = std::numbers::pi;

const std::vector<std::string> kClassNames = {
    "c0_hgrating", "c1_vgrating", "c2_dgrating", "c3_checker", "c4_disk",
    "c5_ring",     "c6_cross",    "c7_corners",  "c8_lowfreq", "c9_star"};
}  // namespace

const std::vector<std::string>& synth_class_names() { return kClassNames; }

// One parametric pattern per class, with per-sample jitter in frequency,
// phase, position and amplitude plus Gaussian pixel noise, so the classes
// are learnable but not separated by huge margins.
Tensor synth_image(int cls, const SynthOptions& opt, std::uint64_t rng_seed) {
  if (cls < 0 || cls >= static_cast<int>(kClassNames.size()))
    fail(ErrorKind::Validation, "synth class out of range");
  SplitMix64 rng(rng_seed);
  const int n = opt.size;
  Tensor img({n, n, opt.channels});

  double freq = rng.uniform(2.5, 4.5);
  double phase = rng.uniform(0.0, 2.0 * kPi);
  double phase2 = rng.uniform(0.0, 2.0 * kPi);
  double cx = 0.5 + rng.uniform(-0.12, 0.12);
  double cy = 0.5 + rng.uniform(-0.12, 0.12);
  double radius = rng.uniform(0.22, 0.36);
  double width = rng.uniform(0.06, 0.11);
  double amp = rng.uniform(0.45, 0.85);
  double theta = rng.uniform(0.0, 2.0 * kPi);
  double low_freq = rng.uniform(0.8, 1.4);
  int spokes = 6 + static_cast<int>(rng.bounded(3));
  std::vector<double> tint(static_cast<std::size_t>(opt.channels), 1.0);
  for (double& t : tint) t = rng.uniform(0.55, 1.0);

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double u = static_cast<double>(x) / (n - 1);
      double v = static_cast<double>(y) / (n - 1);
      double du = u - cx, dv = v - cy;
      double r = std::sqrt(du * du + dv * dv);
      double base = 0.0;
      switch (cls) {
        case 0: base = std::sin(2.0 * kPi * freq * v + phase); break;
        case 1: base = std::sin(2.0 * kPi * freq * u + phase); break;
        case 2:
          base = std::sin(2.0 * kPi * freq * (u + v) / std::numbers::sqrt2 +
                          phase);
          break;
        case 3:
          base = std::sin(2.0 * kPi * freq * u + phase) *
                 std::sin(2.0 * kPi * freq * v + phase2);
          break;
        case 4: base = std::tanh((radius - r) * 14.0); break;
        case 5: {
          double g = std::exp(-((r - radius) * (r - radius)) / (width * width));
          base = 2.0 * g - 1.0;
          break;
        }
        case 6: {
          double gx = std::exp(-(du * du) / (width * width));
          double gy = std::exp(-(dv * dv) / (width * width));
          base = 2.0 * std::max(gx, gy) - 1.0;
          break;
        }
        case 7: {
          double s = 0.0;
          for (int sy = -1; sy <= 1; sy += 2)
            for (int sx = -1; sx <= 1; sx += 2) {
              double qx = u - (0.5 + 0.28 * sx + (cx - 0.5));
              double qy = v - (0.5 + 0.28 * sy + (cy - 0.5));
              s += std::exp(-(qx * qx + qy * qy) / (width * width));
            }
          base = 2.0 * std::min(1.0, s) - 1.0;
          break;
        }
        case 8:
          base = std::sin(2.0 * kPi * low_freq *
                              (u * std::cos(theta) + v * std::sin(theta)) +
                          phase);
          break;
        case 9: {
          double ang = std::atan2(dv, du);
          double envelope = std::exp(-(r * r) / (0.35 * 0.35));
          base = std::sin(spokes * ang + phase) * envelope;
          break;
        }
        default: break;
      }
      for (int c = 0; c < opt.channels; ++c) {
        double noise = rng.gaussian() * opt.noise_sigma;
        img.at(y, x, c) = std::clamp(
            0.5 + 0.5 * amp * base * tint[static_cast<std::size_t>(c)] + noise,
            0.0, 1.0);
      }
    }
  }
  img.quantize_f32();
  return img;
}

void synth_dataset(const std::filesystem::path& root,
                   const SynthOptions& opt) {
  if (opt.classes < 2 || opt.classes > static_cast<int>(kClassNames.size()))
    fail(ErrorKind::Validation,
         "synth supports 2.." + std::to_string(kClassNames.size()) +
             " classes");
  if (opt.per_class < 2)
    fail(ErrorKind::Validation, "per_class must be >= 2");
  if (opt.channels != 1 && opt.channels != 3)
    fail(ErrorKind::Validation, "channels must be 1 or 3");
  for (int c = 0; c < opt.classes; ++c) {
    for (int i = 0; i < opt.per_class; ++i) {
      std::uint64_t s = SplitMix64::derive(
          opt.seed, static_cast<std::uint64_t>(c) * 1000003u +
                        static_cast<std::uint64_t>(i));
      Tensor img = synth_image(c, opt, s);
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04d.%s", i,
                    opt.channels == 3 ? "ppm" : "pgm");
      write_image_ppm(root / kClassNames[static_cast<std::size_t>(c)] / name,
                      img);
    }
  }
}

}  // namespace afg
