#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "badm/dataset.hpp"
#include "badm/errors.hpp"
#include "badm/rng.hpp"

namespace badm {
namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();  // CRLF -> LF
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
    if (used != cell.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw DataError("CSV parse error: non-numeric cell at row " + std::to_string(row) +
                    ", column " + std::to_string(col) + " ('" + cell + "')");
  }
}

}  // namespace detail

// UTF-8, comma-separated, first row is the header. Classification labels must
// be nonnegative integers; pass regression = true to read the label column as
// real targets instead.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        bool regression = false) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_csv: empty file " + path);
  std::vector<std::string> header = detail::split_csv_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_idx = i;
  if (label_idx == header.size())
    throw DataError("load_csv: missing label column '" + label_column + "' in " + path);

  Dataset ds;
  ds.d = header.size() - 1;
  std::size_t row = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("load_csv: ragged row " + std::to_string(row) + " in " + path + " (" +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()) + ")");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = detail::parse_cell(cells[c], row, c + 1);
      if (c == label_idx) {
        if (regression) {
          ds.targets.push_back(v);
        } else {
          long lab = std::lround(v);
          if (static_cast<double>(lab) != v || lab < 0)
            throw DataError("load_csv: label at row " + std::to_string(row) +
                            " is not a nonnegative integer");
          ds.labels.push_back(static_cast<int>(lab));
          max_label = std::max(max_label, static_cast<int>(lab));
        }
      } else {
        ds.features.push_back(v);
      }
    }
    ++ds.n;
  }
  if (ds.n == 0) throw DataError("load_csv: no samples in " + path);
  ds.n_classes = regression ? 0 : max_label + 1;
  ds.validate();
  return ds;
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("load_idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// Big-endian IDX pair (images magic 0x00000803, labels magic 0x00000801).
// Pixels are scaled to [0,1] by /255 and flattened row-major; the first
// subset_n samples are kept (0 = all).
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t subset_n = 0) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("load_idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("load_idx: cannot open " + labels_path);

  std::uint32_t img_magic = detail::read_be_u32(img, images_path);
  if (img_magic != 0x00000803) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", img_magic);
    throw DataError("load_idx: bad image magic " + std::string(buf) + " in " + images_path +
                    " (expected 0x00000803)");
  }
  std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", lab_magic);
    throw DataError("load_idx: bad label magic " + std::string(buf) + " in " + labels_path +
                    " (expected 0x00000801)");
  }

  std::uint32_t n_img = detail::read_be_u32(img, images_path);
  std::uint32_t rows = detail::read_be_u32(img, images_path);
  std::uint32_t cols = detail::read_be_u32(img, images_path);
  std::uint32_t n_lab = detail::read_be_u32(lab, labels_path);
  if (n_img != n_lab)
    throw DataError("load_idx: image/label count mismatch (" + std::to_string(n_img) + " vs " +
                    std::to_string(n_lab) + ")");

  std::size_t n = subset_n == 0 ? n_img : subset_n;
  if (n > n_img)
    throw DataError("load_idx: requested " + std::to_string(n) + " samples but files hold " +
                    std::to_string(n_img));

  Dataset ds;
  ds.n = n;
  ds.d = static_cast<std::size_t>(rows) * cols;
  ds.features.resize(ds.n * ds.d);
  std::vector<unsigned char> pixel_row(ds.d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel_row.data()), static_cast<std::streamsize>(ds.d)))
      throw DataError("load_idx: truncated image payload in " + images_path);
    for (std::size_t p = 0; p < ds.d; ++p)
      ds.features[i * ds.d + p] = static_cast<double>(pixel_row[p]) / 255.0;
  }
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char y;
    if (!lab.read(reinterpret_cast<char*>(&y), 1))
      throw DataError("load_idx: truncated label payload in " + labels_path);
    ds.labels[i] = static_cast<int>(y);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = max_label + 1;
  ds.validate();
  return ds;
}

// Two Gaussian classes in d dimensions: the first ceil(n/2) samples carry label
// 0 and features N(-sep/2 e1, I); the rest carry label 1 and N(+sep/2 e1, I).
inline Dataset make_gaussian_2class(std::size_t n, std::size_t d, double separation, Rng& rng) {
  detail::require(n >= 2 && d >= 1, "make_gaussian_2class: need n >= 2, d >= 1");
  Rng stream = rng.derive("gaussian-2class");
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.n_classes = 2;
  ds.features.resize(n * d);
  ds.labels.resize(n);
  std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    int label = i < half ? 0 : 1;
    double shift = (label == 0 ? -0.5 : 0.5) * separation;
    for (std::size_t c = 0; c < d; ++c)
      ds.features[i * d + c] = stream.normal() + (c == 0 ? shift : 0.0);
    ds.labels[i] = label;
  }
  ds.validate();
  return ds;
}

// Deterministic quadratic regression set: x_i = sqrt(d) e_{i mod d}, y_i = 0.
// With the half-squared-error loss and a bias-free linear model this makes the
// full objective exactly F(w) = 1/2 ||w||^2 whenever d divides n.
inline Dataset make_quadratic(std::size_t n, std::size_t d) {
  detail::require(n >= 1 && d >= 1, "make_quadratic: need n >= 1, d >= 1");
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.n_classes = 0;
  ds.features.assign(n * d, 0.0);
  ds.targets.assign(n, 0.0);
  double scale = std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) ds.features[i * d + (i % d)] = scale;
  ds.validate();
  return ds;
}

}  // namespace badm
