#include "afglab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "afglab/dataset.hpp"
#include "afglab/error.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace {

// Minimal RGB raster with line drawing; enough for the two Fig.-style plots.
class Canvas {
 public:
  Canvas(int h, int w, double bg = 1.0) : img_({h, w, 3}) { img_.fill(bg); }

  int height() const { return img_.dim(0); }
  int width() const { return img_.dim(1); }

  void set(int y, int x, double r, double g, double b) {
    if (y < 0 || y >= img_.dim(0) || x < 0 || x >= img_.dim(1)) return;
    img_.at(y, x, 0) = r;
    img_.at(y, x, 1) = g;
    img_.at(y, x, 2) = b;
  }

  void line(int y0, int x0, int y1, int x1, double r, double g, double b) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(y0, x0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void save(const std::filesystem::path& path) const {
    write_image_ppm(path, img_);
  }

 private:
  Tensor img_;
};

void draw_series(Canvas& canvas, const std::vector<double>& ys, int top,
                 int bottom, int left, int right, double r, double g,
                 double b) {
  double lo = *std::min_element(ys.begin(), ys.end());
  double hi = *std::max_element(ys.begin(), ys.end());
  if (hi - lo < 1e-12) { lo -= 1.0; hi += 1.0; }
  auto px = [&](std::size_t i) {
    return left + static_cast<int>(
                      std::lround(static_cast<double>(i) /
                                  std::max<std::size_t>(ys.size() - 1, 1) *
                                  (right - left)));
  };
  auto py = [&](double v) {
    return bottom -
           static_cast<int>(std::lround((v - lo) / (hi - lo) * (bottom - top)));
  };
  canvas.line(bottom, left, bottom, right, 0, 0, 0);
  canvas.line(top, left, bottom, left, 0, 0, 0);
  for (std::size_t i = 0; i + 1 < ys.size(); ++i)
    canvas.line(py(ys[i]), px(i), py(ys[i + 1]), px(i + 1), r, g, b);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    int cy = py(ys[i]), cx = px(i);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) canvas.set(cy + dy, cx + dx, r, g, b);
  }
}

}  // namespace

void plot_afs(const LayerDistanceCurve& curve,
              const std::filesystem::path& image_out,
              const std::filesystem::path& dump_csv) {
  if (curve.layer_names.empty())
    fail(ErrorKind::Validation, "empty AFS curve");
  const int panel_w = 360, panel_h = 260, margin = 30;
  Canvas canvas(panel_h, 2 * panel_w);
  draw_series(canvas, curve.mean_distance, margin, panel_h - margin, margin,
              panel_w - margin, 0.85, 0.25, 0.2);
  draw_series(canvas, curve.mean_kl, margin, panel_h - margin,
              panel_w + margin, 2 * panel_w - margin, 0.2, 0.35, 0.8);
  canvas.save(image_out);

  if (!dump_csv.empty()) {
    std::ostringstream os;
    os << "panel,layer_index,layer,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < curve.layer_names.size(); ++i)
      os << "distance," << i << "," << curve.layer_names[i] << ","
         << curve.mean_distance[i] << "\n";
    for (std::size_t i = 0; i < curve.layer_names.size(); ++i)
      os << "kl," << i << "," << curve.layer_names[i] << ","
         << curve.mean_kl[i] << "\n";
    write_text_file(dump_csv, os.str());
  }
}

void plot_afs_from_csv(const std::filesystem::path& curve_csv,
                       const std::filesystem::path& image_out,
                       const std::filesystem::path& dump_csv) {
  plot_afs(read_afs_csv(curve_csv), image_out, dump_csv);
}

void montage(const std::vector<std::vector<GroupFeature>>& per_layer,
             const std::filesystem::path& image_out,
             const std::filesystem::path& dump_csv) {
  if (per_layer.empty() || per_layer.front().empty())
    fail(ErrorKind::Validation, "montage needs at least one group feature");
  const std::size_t r = per_layer.front().size();
  const Tensor& first = per_layer.front().front().pixels;
  const int s = first.dim(0);
  const int channels = first.dim(2);
  for (const auto& row : per_layer) {
    if (row.size() != r)
      fail(ErrorKind::Validation, "montage rows have mixed group counts");
    for (const GroupFeature& g : row)
      if (g.pixels.dims() != first.dims())
        fail(ErrorKind::Validation, "montage tiles have mixed sizes");
  }

  const int gap = 2;
  const int rows = static_cast<int>(per_layer.size());
  const int cols = static_cast<int>(r);
  Tensor img({rows * s + (rows + 1) * gap, cols * s + (cols + 1) * gap, 3});
  img.fill(0.25);
  for (int row = 0; row < rows; ++row)
    for (int col = 0; col < cols; ++col) {
      const Tensor& tile =
          per_layer[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]
              .pixels;
      int oy = gap + row * (s + gap), ox = gap + col * (s + gap);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c)
            img.at(oy + y, ox + x, c) =
                tile.at(y, x, channels == 3 ? c : 0);
    }
  write_image_ppm(image_out, img);

  if (!dump_csv.empty()) {
    std::ostringstream os;
    os << "row,col,layer_index,group_index,final_objective\n";
    os.precision(17);
    for (int row = 0; row < rows; ++row)
      for (int col = 0; col < cols; ++col) {
        const GroupFeature& g =
            per_layer[static_cast<std::size_t>(row)]
                     [static_cast<std::size_t>(col)];
        os << row << "," << col << "," << g.layer_index << ","
           << g.group_index << "," << g.final_objective << "\n";
      }
    write_text_file(dump_csv, os.str());
  }
}

std::string render_reports_table(const std::vector<EvalReport>& reports) {
  std::size_t name_w = 6, detail_w = 6;
  for (const EvalReport& r : reports) {
    name_w = std::max(name_w, r.metric_name.size());
    detail_w = std::max(detail_w, r.detail.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "metric"
     << std::right << std::setw(9) << "value" << std::setw(7) << "n"
     << "  " << std::left << std::setw(static_cast<int>(detail_w) + 2)
     << "detail" << "fingerprint\n";
  for (const EvalReport& r : reports) {
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.metric_name
       << std::right << std::setw(9) << std::fixed << std::setprecision(4)
       << r.value << std::setw(7) << r.n << "  " << std::left
       << std::setw(static_cast<int>(detail_w) + 2) << r.detail
       << r.config_fingerprint << "\n";
  }
  return os.str();
}

}  // namespace afg
