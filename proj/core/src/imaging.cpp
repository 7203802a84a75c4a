#include "pvio/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pvio {

GrayImage GrayImage::Constant(int width, int height, double value) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.data.assign(static_cast<size_t>(width) * height, value);
  return img;
}

PixelMask PixelMask::Constant(int width, int height, double value) {
  PixelMask m;
  m.width = width;
  m.height = height;
  m.data.assign(static_cast<size_t>(width) * height, value);
  return m;
}

std::pair<GrayImage, PixelMask> warp_image(const GrayImage& src, const Homography& h) {
  GrayImage out = GrayImage::Constant(src.width, src.height, 0.0);
  PixelMask mask = PixelMask::Constant(src.width, src.height, 0.0);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      TransferResult t = transfer_point(h, Eigen::Vector2d(x, y));
      const double u = t.point.x();
      const double v = t.point.y();
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      if (x0 < 0 || y0 < 0 || x0 + 1 >= src.width || y0 + 1 >= src.height) {
        // a pixel exactly on the right/bottom edge still has all four
        // neighbors inside only when it is an integer coordinate
        if (x0 >= 0 && y0 >= 0 && x0 < src.width && y0 < src.height && u == x0 && v == y0) {
          out.at(x, y) = src.at(x0, y0);
          mask.at(x, y) = 1.0;
        }
        continue;
      }
      const double ax = u - x0;
      const double ay = v - y0;
      out.at(x, y) = (1 - ax) * (1 - ay) * src.at(x0, y0) + ax * (1 - ay) * src.at(x0 + 1, y0) +
                     (1 - ax) * ay * src.at(x0, y0 + 1) + ax * ay * src.at(x0 + 1, y0 + 1);
      mask.at(x, y) = 1.0;
    }
  }
  return {out, mask};
}

namespace {

// 3x3 box filter with border replication.
std::vector<double> box3(const std::vector<double>& in, int w, int h) {
  std::vector<double> out(in.size());
  auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = clampi(x + dx, 0, w - 1);
          const int yy = clampi(y + dy, 0, h - 1);
          s += in[static_cast<size_t>(yy) * w + xx];
        }
      }
      out[static_cast<size_t>(y) * w + x] = s / 9.0;
    }
  }
  return out;
}

}  // namespace

std::vector<double> ssim_map(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error("ssim_map: image dimensions differ");
  }
  const int w = a.width, h = a.height;
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;

  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    aa[i] = a.data[i] * a.data[i];
    bb[i] = b.data[i] * b.data[i];
    ab[i] = a.data[i] * b.data[i];
  }
  std::vector<double> mu_a = box3(a.data, w, h);
  std::vector<double> mu_b = box3(b.data, w, h);
  std::vector<double> m_aa = box3(aa, w, h);
  std::vector<double> m_bb = box3(bb, w, h);
  std::vector<double> m_ab = box3(ab, w, h);

  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double s = ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                     ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    out[i] = std::clamp(s, -1.0, 1.0);
  }
  return out;
}

PhotometricLoss photometric_loss(const GrayImage& ip, const GrayImage& ic_warped,
                                 const PixelMask& valid, double alpha) {
  std::vector<double> ssim = ssim_map(ip, ic_warped);
  PhotometricLoss out;
  out.map.resize(ip.size());
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < ip.size(); ++i) {
    const double l = 0.5 * alpha * (1.0 - ssim[i]) +
                     (1.0 - alpha) * std::abs(ip.data[i] - ic_warped.data[i]);
    out.map[i] = l;
    if (valid.data[i] != 0.0) {
      sum += l;
      ++count;
    }
  }
  if (count == 0) throw EmptyMask("photometric_loss: no valid pixels");
  out.mean = sum / static_cast<double>(count);
  return out;
}

double explainability_loss(const std::vector<double>& loss_map, const PixelMask& e,
                           const PixelMask& valid, double lambda_reg) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < loss_map.size(); ++i) {
    if (valid.data[i] == 0.0) continue;
    const double ek = std::clamp(e.data[i], 1e-6, 1.0 - 1e-6);
    sum += e.data[i] * loss_map[i] + lambda_reg * (-std::log(ek));
    ++count;
  }
  if (count == 0) throw EmptyMask("explainability_loss: no valid pixels");
  return sum / static_cast<double>(count);
}

double laplacian_nll_loss(const std::vector<double>& loss_map, const PixelMask& b,
                          const PixelMask& valid) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < loss_map.size(); ++i) {
    if (valid.data[i] == 0.0) continue;
    if (!(b.data[i] > 0.0)) throw NonPositiveScale("laplacian_nll_loss: b <= 0 on valid pixel");
    sum += loss_map[i] / b.data[i] + std::log(b.data[i]);
    ++count;
  }
  if (count == 0) throw EmptyMask("laplacian_nll_loss: no valid pixels");
  return sum / static_cast<double>(count);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PGM file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError("not a P5 PGM file: " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      return tok;
    }
    throw ParseError("truncated PGM header: " + path);
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255) throw ParseError("only 8-bit PGM supported: " + path);
  in.get();  // single whitespace after header
  GrayImage img = GrayImage::Constant(w, h, 0.0);
  std::vector<unsigned char> raw(img.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ParseError("truncated PGM data: " + path);
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PGM file: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void write_csv_grid(const std::vector<double>& map, int width, int height,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write CSV grid: " + path);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out << map[static_cast<size_t>(y) * width + x];
      out << (x + 1 == width ? '\n' : ',');
    }
  }
}

}  // namespace pvio
